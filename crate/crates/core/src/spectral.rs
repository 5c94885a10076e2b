//! Zeroth-order Sturm-Liouville basis for the four interval cases.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::domain::{classify_spectrum, Endpoint, Interval, MarketParams, SpectrumCase};
use crate::error::{Result, SpecVolError};
use crate::quadrature::{integrate_1d, Domain, Estimate, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDensity {
    pub sigma_sq: f64,
    pub c: f64,
}

impl WeightDensity {
    pub fn new(params: &MarketParams) -> Self {
        WeightDensity {
            sigma_sq: params.sigma_sq,
            c: params.c(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (2.0 / self.sigma_sq) * (2.0 * self.c * x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralIndex {
    Discrete(usize),
    Real(f64),
    /// Full-line case only.
    Complex(Complex64),
}

/// Eigenfunction N e^{-cx} sin(alpha (x - x_b)) for the barrier cases, or
/// N e^{(i nu - c) x} on the full line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub case: SpectrumCase,
    pub index: SpectralIndex,
    /// alpha_n = n pi / (r - l) or nu.
    pub alpha: Complex64,
    pub lambda0: Complex64,
    pub norm: f64,
    /// Anchor of the sine (l for cases a and d, r for case c).
    pub anchor: f64,
    pub c: f64,
}

impl EigenPair {
    pub fn alpha_re(&self) -> f64 {
        self.alpha.re
    }

    pub fn lambda0_re(&self) -> f64 {
        self.lambda0.re
    }

    /// Psi^(0)(x).
    pub fn psi(&self, x: f64) -> Complex64 {
        self.derivs(x)[0]
    }

    /// Real-valued eigenfunction for the barrier cases.
    pub fn psi_real(&self, x: f64) -> f64 {
        match self.case {
            SpectrumCase::ContinuousFullLine => self.psi(x).re,
            _ => self.norm * (-self.c * x).exp() * (self.alpha.re * (x - self.anchor)).sin(),
        }
    }

    /// Psi and its first three derivatives, in closed form.
    pub fn derivs(&self, x: f64) -> [Complex64; 4] {
        let i = Complex64::i();
        match self.case {
            SpectrumCase::ContinuousFullLine => {
                let z = i * self.alpha - self.c;
                let p = (z * x).exp() * self.norm;
                [p, z * p, z * z * p, z * z * z * p]
            }
            _ => {
                // Im(z^k e^{z x - i alpha x_b}) with z = -c + i alpha
                let a = self.alpha.re;
                let z = Complex64::new(-self.c, a);
                let base = Complex64::new(0.0, a * (x - self.anchor)).exp() * ((-self.c * x).exp() * self.norm);
                let mut out = [Complex64::new(0.0, 0.0); 4];
                let mut zk = Complex64::new(1.0, 0.0);
                for o in out.iter_mut() {
                    *o = Complex64::new((zk * base).im, 0.0);
                    zk *= z;
                }
                out
            }
        }
    }
}

fn invalid_index(msg: impl Into<String>) -> SpecVolError {
    SpecVolError::InvalidIndex(msg.into())
}

pub fn eigenpair(case: SpectrumCase, interval: &Interval, params: &MarketParams, q: SpectralIndex) -> Result<EigenPair> {
    params.validate()?;
    if classify_spectrum(interval)? != case {
        return Err(SpecVolError::InvalidInterval(format!("interval {interval} does not match case {case:?}")));
    }
    let c = params.c();
    let s2 = params.sigma_sq;
    let lam = |a: Complex64| -(s2 / 2.0) * (c * c + a * a);
    match case {
        SpectrumCase::Discrete => {
            let n = match q {
                SpectralIndex::Discrete(n) if n >= 1 => n,
                _ => return Err(invalid_index("discrete case needs n >= 1")),
            };
            let (l, r) = (interval.l.finite().unwrap(), interval.r.finite().unwrap());
            let len = r - l;
            let a = Complex64::new(n as f64 * PI / len, 0.0);
            Ok(EigenPair {
                case,
                index: q,
                alpha: a,
                lambda0: lam(a),
                norm: (s2 / len).sqrt(),
                anchor: l,
                c,
            })
        }
        SpectrumCase::ContinuousFullLine => {
            let nu = match q {
                SpectralIndex::Real(v) if v.is_finite() => Complex64::new(v, 0.0),
                SpectralIndex::Complex(v) if v.re.is_finite() && v.im.is_finite() => v,
                _ => return Err(invalid_index("full line needs a real or complex nu")),
            };
            Ok(EigenPair {
                case,
                index: q,
                alpha: nu,
                lambda0: lam(nu),
                norm: (s2 / (4.0 * PI)).sqrt(),
                anchor: 0.0,
                c,
            })
        }
        SpectrumCase::ContinuousHalfLineUpper | SpectrumCase::ContinuousHalfLineLower => {
            let nu = match q {
                SpectralIndex::Real(v) if v >= 0.0 && v.is_finite() => v,
                _ => return Err(invalid_index("half line needs real nu >= 0")),
            };
            let anchor = match (case, interval.l, interval.r) {
                (SpectrumCase::ContinuousHalfLineUpper, _, Endpoint::Finite(r)) => r,
                (SpectrumCase::ContinuousHalfLineLower, Endpoint::Finite(l), _) => l,
                _ => unreachable!("checked by classify_spectrum"),
            };
            let a = Complex64::new(nu, 0.0);
            Ok(EigenPair {
                case,
                index: q,
                alpha: a,
                lambda0: lam(a),
                norm: (s2 / PI).sqrt(),
                anchor,
                c,
            })
        }
    }
}

pub fn interval_domain(interval: &Interval) -> Domain {
    match (interval.l, interval.r) {
        (Endpoint::Finite(a), Endpoint::Finite(b)) => Domain::Finite(a, b),
        (Endpoint::Finite(a), Endpoint::Unbounded) => Domain::Above(a),
        (Endpoint::Unbounded, Endpoint::Finite(b)) => Domain::Below(b),
        (Endpoint::Unbounded, Endpoint::Unbounded) => Domain::Real,
    }
}

/// (f, g)_s = int conj(f) g s dx.
pub fn inner_product<F, G>(
    f: F,
    g: G,
    interval: &Interval,
    weight: &WeightDensity,
    cfg: &QuadratureConfig,
) -> Result<Estimate<Complex64>>
where
    F: Fn(f64) -> Complex64,
    G: Fn(f64) -> Complex64,
{
    let integrand = |x: f64| f(x).conj() * g(x) * weight.eval(x);
    integrate_1d(&integrand, interval_domain(interval), cfg)
}

/// max over the grid of |L0 f - lambda f| by centered differences with step h.
pub fn operator_residual<F: Fn(f64) -> Complex64>(
    f: F,
    lambda: Complex64,
    params: &MarketParams,
    x_grid: &[f64],
    h: f64,
) -> Result<f64> {
    if x_grid.len() < 3 {
        return Err(SpecVolError::InvalidGrid(format!("need at least 3 points, got {}", x_grid.len())));
    }
    if !(h > 0.0) {
        return Err(SpecVolError::InvalidGrid("finite-difference step must be positive".into()));
    }
    let drift = params.mu - 0.5 * params.sigma_sq;
    let half_var = 0.5 * params.sigma_sq;
    let mut worst = 0.0f64;
    for &x in x_grid {
        let (fm, f0, fp) = (f(x - h), f(x), f(x + h));
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp - f0 * 2.0 + fm) / (h * h);
        let res = (d1 * drift + d2 * half_var - f0 * lambda).norm();
        worst = worst.max(res);
    }
    Ok(worst)
}

pub fn eigen_residual(pair: &EigenPair, params: &MarketParams, x_grid: &[f64], h: f64) -> Result<f64> {
    operator_residual(|x| pair.psi(x), pair.lambda0, params, x_grid, h)
}

/// Rows (n, alpha_n, lambda_n) of the discrete basis.
pub fn discrete_table(interval: &Interval, params: &MarketParams, n_max: usize) -> Result<Vec<EigenPair>> {
    (1..=n_max)
        .map(|n| eigenpair(SpectrumCase::Discrete, interval, params, SpectralIndex::Discrete(n)))
        .collect()
}
