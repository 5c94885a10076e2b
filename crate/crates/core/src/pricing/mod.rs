//! Zeroth- and first-order prices for every supported option kind.

pub mod barrier;
pub mod bs;
pub mod european;
pub mod kernels;
pub mod rebate;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{classify_spectrum, MarketParams, OptionKind, OptionSpec, SpectrumCase};
use crate::error::{Result, SpecVolError};
use crate::perturbation::CouplingVariant;
use crate::quadrature::QuadratureConfig;
use crate::spectral::SpectralIndex;

pub use barrier::{DiscreteSeries, HalfLine};
pub use bs::{bs_call_total_variance, bs_reference, bs_vega, fps_correction};
pub use european::European;
pub use rebate::RebateDecomposition;

/// How the first-order half-line correction is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstOrderRoute {
    /// Single nu-integral with the closed-form Psi1 and A1.
    #[default]
    ClosedForm,
    /// g1 integral plus the rotated antisymmetric double integral.
    DoubleIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingConfig {
    pub quadrature: QuadratureConfig,
    pub n_max: usize,
    pub tail_tol: f64,
    pub t_min: f64,
    pub barrier_warning_distance: f64,
    /// Error estimates above this raise a truncation warning.
    pub error_warning: f64,
    pub coupling_variant: CouplingVariant,
    pub first_order_route: FirstOrderRoute,
}

impl Default for PricingConfig {
    fn default() -> Self {
        PricingConfig {
            quadrature: QuadratureConfig::default(),
            n_max: 2000,
            tail_tol: 1e-12,
            t_min: 1e-3,
            barrier_warning_distance: 0.01,
            error_warning: 1e-6,
            coupling_variant: CouplingVariant::Chi,
            first_order_route: FirstOrderRoute::ClosedForm,
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        self.quadrature.validate()?;
        if self.n_max == 0 {
            return Err(SpecVolError::InvalidConfig("n_max must be at least 1".into()));
        }
        if !(self.tail_tol > 0.0) {
            return Err(SpecVolError::InvalidConfig("tail_tol must be positive".into()));
        }
        Ok(())
    }

    /// Tight tolerances for finite-difference and identity checks.
    pub fn precise() -> Self {
        PricingConfig {
            quadrature: QuadratureConfig::default().with_tol(1e-14, 1e-13),
            tail_tol: 1e-15,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    ShortMaturity,
    BarrierProximity,
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceWarning {
    pub kind: WarningKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceBreakdown {
    pub x: f64,
    pub u0: f64,
    /// First-order correction; before the sqrt(eps) factor on the model route.
    pub u1: f64,
    pub price: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sqrt_eps: Option<f64>,
    pub discounted: bool,
    pub trunc_error: f64,
    pub terms: usize,
    pub warnings: Vec<PriceWarning>,
}

/// u0 and u1 computed with the scaled group parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RawPrice {
    pub u0: f64,
    pub u1: f64,
    pub error: f64,
    pub terms: usize,
}

impl RawPrice {
    fn minus(self, o: RawPrice) -> RawPrice {
        RawPrice {
            u0: self.u0 - o.u0,
            u1: self.u1 - o.u1,
            error: self.error + o.error,
            terms: self.terms + o.terms,
        }
    }
}

/// g0 = exp(lambda0 t), g1 = lambda1 t exp(lambda0 t).
pub fn time_factors(lambda0: Complex64, lambda1: Complex64, t: f64) -> (Complex64, Complex64) {
    let g0 = (lambda0 * t).exp();
    (g0, lambda1 * t * g0)
}

enum Engine {
    European(European),
    Discrete(DiscreteSeries),
    HalfLine(Box<HalfLine>),
    KnockIn { euro: European, ko: Box<Engine> },
    Rebate(Box<RebateDecomposition>),
}

impl Engine {
    fn build(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<Engine> {
        let case = classify_spectrum(&spec.interval)?;
        Ok(match spec.kind {
            OptionKind::EuropeanCall => Engine::European(European::new(spec, params, cfg)?),
            OptionKind::UpAndOutCall | OptionKind::DoubleBarrierKnockOutCall | OptionKind::GenericKnockOut => {
                Self::knock_out(spec, params, cfg, case)?
            }
            OptionKind::KnockIn => {
                let mut euro_spec = spec.clone();
                euro_spec.kind = OptionKind::EuropeanCall;
                euro_spec.interval = crate::domain::Interval::full_line();
                let euro = European::new(&euro_spec, params, cfg)?;
                if case == SpectrumCase::ContinuousFullLine {
                    // nothing can knock in; knock-out equals European
                    Engine::KnockIn {
                        euro: euro.clone(),
                        ko: Box::new(Engine::European(euro)),
                    }
                } else {
                    let mut ko_spec = spec.clone();
                    ko_spec.kind = match case {
                        SpectrumCase::Discrete => OptionKind::DoubleBarrierKnockOutCall,
                        _ => OptionKind::UpAndOutCall,
                    };
                    let ko = Self::knock_out(&ko_spec, params, cfg, case)?;
                    Engine::KnockIn { euro, ko: Box::new(ko) }
                }
            }
            OptionKind::Rebate => Engine::Rebate(Box::new(RebateDecomposition::new(spec, params, cfg)?)),
        })
    }

    fn knock_out(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig, case: SpectrumCase) -> Result<Engine> {
        Ok(match case {
            SpectrumCase::Discrete => Engine::Discrete(DiscreteSeries::for_spec(spec, params, cfg)?),
            SpectrumCase::ContinuousHalfLineUpper | SpectrumCase::ContinuousHalfLineLower => {
                Engine::HalfLine(Box::new(HalfLine::for_spec(spec, params, cfg)?))
            }
            SpectrumCase::ContinuousFullLine => {
                if spec.kind == OptionKind::GenericKnockOut {
                    return Err(SpecVolError::UnsupportedCase(
                        "generic payoffs on the full line have no spectral route; use EuropeanCall".into(),
                    ));
                }
                let mut e = spec.clone();
                e.kind = OptionKind::EuropeanCall;
                Engine::European(European::new(&e, params, cfg)?)
            }
        })
    }

    fn raw(&self, spec: &OptionSpec, x: f64) -> Result<RawPrice> {
        match self {
            Engine::European(e) => e.eval(x),
            Engine::Discrete(s) => {
                if !spec.interval.contains(x) {
                    return Ok(RawPrice::default());
                }
                Ok(s.eval(x))
            }
            Engine::HalfLine(h) => {
                if !spec.interval.contains(x) {
                    return Ok(RawPrice::default());
                }
                h.eval(x)
            }
            Engine::KnockIn { euro, ko } => {
                let e = euro.eval(x)?;
                let k = ko.raw(spec, x)?;
                Ok(e.minus(k))
            }
            Engine::Rebate(r) => r.eval(x),
        }
    }
}

/// Pricer with coefficients precomputed for one (spec, params) pair.
pub struct Pricer {
    spec: OptionSpec,
    params: MarketParams,
    cfg: PricingConfig,
    engine: Engine,
}

impl Pricer {
    pub fn new(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<Self> {
        spec.validate()?;
        params.validate()?;
        cfg.validate()?;
        let engine = Engine::build(spec, params, cfg)?;
        Ok(Pricer {
            spec: spec.clone(),
            params: *params,
            cfg: *cfg,
            engine,
        })
    }

    pub fn raw(&self, x: f64) -> Result<RawPrice> {
        if !x.is_finite() {
            return Err(SpecVolError::InvalidParams("log-spot must be finite".into()));
        }
        self.engine.raw(&self.spec, x)
    }

    pub fn price(&self, x: f64, discounted: bool) -> Result<PriceBreakdown> {
        let raw = self.raw(x)?;
        Ok(self.assemble(x, raw, discounted))
    }

    fn assemble(&self, x: f64, raw: RawPrice, discounted: bool) -> PriceBreakdown {
        let df = if discounted { (-self.params.mu * self.spec.t).exp() } else { 1.0 };
        let sqrt_eps = self.params.eps.map(f64::sqrt);
        let u1_reported = match sqrt_eps {
            Some(s) => raw.u1 / s,
            None => raw.u1,
        };
        let mut warnings = Vec::new();
        if self.spec.t < self.cfg.t_min {
            warnings.push(PriceWarning {
                kind: WarningKind::ShortMaturity,
                message: format!(
                    "maturity {} is below the reliable minimum {}; expansions converge slowly",
                    self.spec.t, self.cfg.t_min
                ),
            });
        }
        let dist = self.spec.interval.barrier_distance(x);
        if dist < self.cfg.barrier_warning_distance {
            warnings.push(PriceWarning {
                kind: WarningKind::BarrierProximity,
                message: format!("log-spot is {dist:.3e} from a barrier; first-order accuracy degrades there"),
            });
        }
        if raw.error > self.cfg.error_warning {
            warnings.push(PriceWarning {
                kind: WarningKind::Truncation,
                message: format!("truncation/quadrature error estimate {:.3e}", raw.error),
            });
        }
        PriceBreakdown {
            x,
            u0: df * raw.u0,
            u1: df * u1_reported,
            price: df * (raw.u0 + raw.u1),
            sqrt_eps,
            discounted,
            trunc_error: df * raw.error,
            terms: raw.terms,
            warnings,
        }
    }

    pub fn spec(&self) -> &OptionSpec {
        &self.spec
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }
}

pub fn price(
    spec: &OptionSpec,
    params: &MarketParams,
    x: f64,
    discounted: bool,
    cfg: &PricingConfig,
) -> Result<PriceBreakdown> {
    Pricer::new(spec, params, cfg)?.price(x, discounted)
}

pub fn price_zeroth(spec: &OptionSpec, params: &MarketParams, x: f64, cfg: &PricingConfig) -> Result<f64> {
    Ok(Pricer::new(spec, &params.zeroth_order(), cfg)?.raw(x)?.u0)
}

/// u1 as reported in the breakdown.
pub fn price_first(spec: &OptionSpec, params: &MarketParams, x: f64, cfg: &PricingConfig) -> Result<f64> {
    Ok(price(spec, params, x, false, cfg)?.u1)
}

pub fn price_knock_in(spec: &OptionSpec, params: &MarketParams, x: f64, cfg: &PricingConfig) -> Result<PriceBreakdown> {
    if spec.kind != OptionKind::KnockIn {
        return Err(SpecVolError::InvalidSpec("price_knock_in needs a KnockIn spec".into()));
    }
    price(spec, params, x, false, cfg)
}

pub fn price_rebate(spec: &OptionSpec, params: &MarketParams, x: f64, cfg: &PricingConfig) -> Result<PriceBreakdown> {
    if spec.kind != OptionKind::Rebate {
        return Err(SpecVolError::InvalidSpec("price_rebate needs a Rebate spec".into()));
    }
    price(spec, params, x, false, cfg)
}

/// A0 for one spectral index.
pub fn coeff_a0(spec: &OptionSpec, params: &MarketParams, index: SpectralIndex, cfg: &PricingConfig) -> Result<Complex64> {
    match classify_spectrum(&spec.interval)? {
        SpectrumCase::ContinuousFullLine => {
            let nu = match index {
                SpectralIndex::Real(v) => Complex64::new(v, 0.0),
                SpectralIndex::Complex(v) => v,
                SpectralIndex::Discrete(_) => {
                    return Err(SpecVolError::InvalidIndex("full line needs a continuous index".into()))
                }
            };
            european::a0_closed(spec, params, nu)
        }
        _ => {
            let (a0, _) = barrier::mode_coefficients_for(spec, params, index, cfg)?;
            Ok(Complex64::new(a0, 0.0))
        }
    }
}

/// A1 for one spectral index; identically zero on the full line.
pub fn coeff_a1(spec: &OptionSpec, params: &MarketParams, index: SpectralIndex, cfg: &PricingConfig) -> Result<Complex64> {
    match classify_spectrum(&spec.interval)? {
        SpectrumCase::ContinuousFullLine => Ok(Complex64::new(0.0, 0.0)),
        _ => {
            let (_, a1) = barrier::mode_coefficients_for(spec, params, index, cfg)?;
            Ok(Complex64::new(a1, 0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_factor_examples() {
        let (g0, g1) = time_factors(Complex64::new(-2.1865, 0.0), Complex64::new(0.1, 0.0), 0.0);
        assert_eq!((g0.re, g1.re), (1.0, 0.0));
        let (_, g1) = time_factors(Complex64::new(-2.1865, 0.0), Complex64::new(0.0, 0.0), 3.0);
        assert_eq!(g1.norm(), 0.0);
        let (g0, g1) = time_factors(Complex64::new(-2.1865, 0.0), Complex64::new(0.1, 0.0), 1.0);
        assert!((g0.re - (-2.1865f64).exp()).abs() < 1e-16);
        assert!((g1.re - 0.1 * (-2.1865f64).exp()).abs() < 1e-16);
    }
}
