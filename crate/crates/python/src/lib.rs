//! Python bindings. Structured inputs and outputs cross the boundary as plain
//! dicts using the same field names as the CLI's JSON files.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use specvol::calibration::{self, Quote};
use specvol::config::OptionSpecFile;
use specvol::groupparams::{self, ModelSpec, SVModelPrimitives};
use specvol::montecarlo::{self, SimConfig};
use specvol::pricing::{self, bs, PricingConfig};
use specvol::{Endpoint, Interval, SpecVolError};

create_exception!(specvol_py, SpecVolException, PyValueError);

fn err(e: SpecVolError) -> PyErr {
    SpecVolException::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| SpecVolException::new_err(e.to_string()))
}

fn opt_from_py<T: DeserializeOwned + Default>(obj: Option<&Bound<'_, PyAny>>) -> PyResult<T> {
    match obj {
        Some(o) if !o.is_none() => from_py(o),
        _ => Ok(T::default()),
    }
}

fn primitives(model: &Bound<'_, PyAny>, cfg: &PricingConfig) -> PyResult<SVModelPrimitives> {
    let spec: ModelSpec = from_py(model)?;
    SVModelPrimitives::from_spec(&spec, &cfg.quadrature).map_err(err)
}

/// Pricing parameters: drift, averaged variance and the two group parameters.
#[pyclass(frozen, skip_from_py_object, module = "specvol_py")]
#[derive(Clone)]
struct MarketParams(specvol::MarketParams);

#[pymethods]
impl MarketParams {
    #[new]
    #[pyo3(signature = (mu, sigma_sq, v2_eps = 0.0, v3_eps = 0.0))]
    fn new(mu: f64, sigma_sq: f64, v2_eps: f64, v3_eps: f64) -> PyResult<Self> {
        specvol::MarketParams::new(mu, sigma_sq, v2_eps, v3_eps).map(MarketParams).map_err(err)
    }

    #[getter]
    fn mu(&self) -> f64 {
        self.0.mu
    }
    #[getter]
    fn sigma_sq(&self) -> f64 {
        self.0.sigma_sq
    }
    #[getter]
    fn v2_eps(&self) -> f64 {
        self.0.v2_eps
    }
    #[getter]
    fn v3_eps(&self) -> f64 {
        self.0.v3_eps
    }

    fn with_group(&self, v2_eps: f64, v3_eps: f64) -> Self {
        MarketParams(self.0.with_group(v2_eps, v3_eps))
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketParams(mu={}, sigma_sq={}, v2_eps={}, v3_eps={})",
            self.0.mu, self.0.sigma_sq, self.0.v2_eps, self.0.v3_eps
        )
    }
}

/// Option contract in log coordinates: strike k, barriers l and r, maturity t.
#[pyclass(frozen, skip_from_py_object, module = "specvol_py")]
#[derive(Clone)]
struct OptionSpec(specvol::OptionSpec);

#[pymethods]
impl OptionSpec {
    #[staticmethod]
    fn european_call(k: f64, t: f64) -> PyResult<Self> {
        specvol::OptionSpec::european_call(k, t).map(OptionSpec).map_err(err)
    }

    #[staticmethod]
    fn mollified_call(k: f64, t: f64, delta_sq: f64) -> PyResult<Self> {
        specvol::OptionSpec::mollified_call(k, t, delta_sq).map(OptionSpec).map_err(err)
    }

    #[staticmethod]
    fn up_and_out_call(k: f64, r: f64, t: f64) -> PyResult<Self> {
        specvol::OptionSpec::up_and_out_call(k, r, t).map(OptionSpec).map_err(err)
    }

    #[staticmethod]
    fn double_barrier_call(k: f64, l: f64, r: f64, t: f64) -> PyResult<Self> {
        specvol::OptionSpec::double_barrier_call(k, l, r, t).map(OptionSpec).map_err(err)
    }

    /// Pays the call if the path leaves (l, r); a missing side is unbounded.
    #[staticmethod]
    #[pyo3(signature = (k, t, l = None, r = None))]
    fn knock_in_call(k: f64, t: f64, l: Option<f64>, r: Option<f64>) -> PyResult<Self> {
        let iv = Interval::new(Endpoint::from(l), Endpoint::from(r)).map_err(err)?;
        specvol::OptionSpec::knock_in_call(k, iv, t).map(OptionSpec).map_err(err)
    }

    #[staticmethod]
    fn rebate_call(k: f64, l: f64, r: f64, t: f64, rebate_l: f64, rebate_r: f64) -> PyResult<Self> {
        specvol::OptionSpec::rebate_call(k, l, r, t, rebate_l, rebate_r).map(OptionSpec).map_err(err)
    }

    /// Build from a dict in the option-file format.
    #[staticmethod]
    fn from_dict(d: &Bound<'_, PyAny>) -> PyResult<Self> {
        let file: OptionSpecFile = from_py(d)?;
        file.to_spec().map(OptionSpec).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &OptionSpecFile::from_spec(&self.0))
    }

    #[getter]
    fn t(&self) -> f64 {
        self.0.t
    }
    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }
    #[getter]
    fn l(&self) -> Option<f64> {
        self.0.interval.l.finite()
    }
    #[getter]
    fn r(&self) -> Option<f64> {
        self.0.interval.r.finite()
    }

    fn __repr__(&self) -> String {
        format!("OptionSpec({:?}, k={}, l={:?}, r={:?}, t={})", self.0.kind, self.0.k, self.l(), self.r(), self.0.t)
    }
}

/// Spectral pricer for one contract; coefficients are computed once.
#[pyclass(frozen, module = "specvol_py")]
struct Pricer(pricing::Pricer);

#[pymethods]
impl Pricer {
    #[new]
    #[pyo3(signature = (spec, params, config = None))]
    fn new(spec: &OptionSpec, params: &MarketParams, config: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let cfg: specvol::config::GlobalConfig = opt_from_py(config)?;
        cfg.validate().map_err(err)?;
        pricing::Pricer::new(&spec.0, &params.0, &cfg.pricing()).map(Pricer).map_err(err)
    }

    /// Price breakdown at log-spot x as a dict (u0, u1, price, ...).
    #[pyo3(signature = (x, discounted = false))]
    fn price<'py>(&self, py: Python<'py>, x: f64, discounted: bool) -> PyResult<Bound<'py, PyAny>> {
        let out = py.detach(|| self.0.price(x, discounted)).map_err(err)?;
        to_py(py, &out)
    }

    /// Total prices on many log-spots.
    #[pyo3(signature = (xs, discounted = false))]
    fn prices(&self, py: Python<'_>, xs: Vec<f64>, discounted: bool) -> PyResult<Vec<f64>> {
        py.detach(|| xs.iter().map(|&x| self.0.price(x, discounted).map(|p| p.price)).collect::<Result<Vec<_>, _>>())
            .map_err(err)
    }
}

/// One-shot price at log-spot x.
#[pyfunction]
#[pyo3(signature = (spec, params, x, discounted = false))]
fn price<'py>(py: Python<'py>, spec: &OptionSpec, params: &MarketParams, x: f64, discounted: bool) -> PyResult<Bound<'py, PyAny>> {
    let cfg = PricingConfig::default();
    let out = py.detach(|| pricing::price(&spec.0, &params.0, x, discounted, &cfg)).map_err(err)?;
    to_py(py, &out)
}

/// Un-discounted Black-Scholes call in log coordinates.
#[pyfunction]
fn bs_reference(t: f64, x: f64, k: f64, mu: f64, sigma: f64) -> f64 {
    bs::bs_reference(t, x, k, mu, sigma)
}

/// Closed-form first-order European correction; `var` is sigma^2 t.
#[pyfunction]
fn fps_correction(t: f64, x: f64, k: f64, mu: f64, var: f64, v2_eps: f64, v3_eps: f64) -> f64 {
    bs::fps_correction(t, x, k, mu, var, v2_eps, v3_eps)
}

/// Black-Scholes vol of an un-discounted call price (strike and spot in price units).
#[pyfunction]
fn implied_vol(price: f64, t: f64, k: f64, s: f64, mu: f64) -> PyResult<f64> {
    calibration::implied_vol(price, t, k, s, mu).map_err(err)
}

/// Fit the LMMR line to quotes (dicts with maturity, strike, spot,
/// price_or_iv, type) and recover the group parameters.
#[pyfunction]
fn calibrate<'py>(py: Python<'py>, quotes: &Bound<'py, PyAny>, sigma_sq_hist: f64, mu: f64) -> PyResult<Bound<'py, PyAny>> {
    let quotes: Vec<Quote> = from_py(quotes)?;
    let res = py.detach(|| calibration::calibrate(&quotes, sigma_sq_hist, mu)).map_err(err)?;
    to_py(py, &res)
}

/// Group parameters of a model dict (the CLI model-file format).
#[pyfunction]
#[pyo3(signature = (model = None))]
fn group_parameters<'py>(py: Python<'py>, model: Option<&Bound<'py, PyAny>>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = PricingConfig::default();
    let spec: ModelSpec = opt_from_py(model)?;
    let prim = SVModelPrimitives::from_spec(&spec, &cfg.quadrature).map_err(err)?;
    let gp = groupparams::group_parameters(&prim, &cfg.quadrature).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("y_bar", prim.y_bar)?;
    d.set_item("upsilon", prim.upsilon)?;
    d.set_item("rho", prim.rho)?;
    d.set_item("eps", prim.eps)?;
    d.set_item("group", to_py(py, &gp)?)?;
    Ok(d.into_any())
}

/// Monte Carlo price of the contract under the full model.
#[pyfunction]
#[pyo3(signature = (spec, model, mu, x0, sim = None))]
fn simulate_price<'py>(
    py: Python<'py>,
    spec: &OptionSpec,
    model: &Bound<'py, PyAny>,
    mu: f64,
    x0: f64,
    sim: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let prim = primitives(model, &PricingConfig::default())?;
    let sim: SimConfig = opt_from_py(sim)?;
    let est = py.detach(|| montecarlo::simulate_price(&spec.0, &prim, mu, x0, &sim)).map_err(err)?;
    to_py(py, &est)
}

/// Monte Carlo error against u0 + sqrt(eps) u1 over a decreasing eps list.
#[pyfunction]
#[pyo3(signature = (spec, model, mu, x0, eps_list, sim = None))]
fn epsilon_convergence_study<'py>(
    py: Python<'py>,
    spec: &OptionSpec,
    model: &Bound<'py, PyAny>,
    mu: f64,
    x0: f64,
    eps_list: Vec<f64>,
    sim: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = PricingConfig::default();
    let prim = primitives(model, &cfg)?;
    let sim: SimConfig = opt_from_py(sim)?;
    let rep = py
        .detach(|| montecarlo::epsilon_convergence_study(&spec.0, &prim, mu, x0, &eps_list, &sim, &cfg))
        .map_err(err)?;
    to_py(py, &rep)
}

#[pymodule]
fn specvol_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SpecVolException", m.py().get_type::<SpecVolException>())?;
    m.add_class::<MarketParams>()?;
    m.add_class::<OptionSpec>()?;
    m.add_class::<Pricer>()?;
    m.add_function(wrap_pyfunction!(price, m)?)?;
    m.add_function(wrap_pyfunction!(bs_reference, m)?)?;
    m.add_function(wrap_pyfunction!(fps_correction, m)?)?;
    m.add_function(wrap_pyfunction!(implied_vol, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate, m)?)?;
    m.add_function(wrap_pyfunction!(group_parameters, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_price, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon_convergence_study, m)?)?;
    Ok(())
}
