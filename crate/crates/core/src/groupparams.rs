//! Effective volatility and group parameters from OU-driven volatility
//! primitives.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::MarketParams;
use crate::error::{Result, SpecVolError};
use crate::quadrature::{compensated_sum, gauss_kronrod21, integrate_1d, Domain, QuadratureConfig};

pub type VolFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Volatility level as a function of the OU factor y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VolPreset {
    /// clamp(e^y, lo, hi)
    ClippedExp { lo: f64, hi: f64 },
    Constant { sigma: f64 },
}

impl Default for VolPreset {
    fn default() -> Self {
        VolPreset::ClippedExp { lo: 0.01, hi: 5.0 }
    }
}

impl VolPreset {
    pub fn build(&self) -> Result<VolFn> {
        match *self {
            VolPreset::ClippedExp { lo, hi } => {
                if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                    return Err(SpecVolError::InvalidParams("clipped exponential needs 0 < lo < hi".into()));
                }
                Ok(Arc::new(move |y: f64| y.exp().clamp(lo, hi)))
            }
            VolPreset::Constant { sigma } => {
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(SpecVolError::InvalidParams("constant volatility must be positive".into()));
                }
                Ok(Arc::new(move |_| sigma))
            }
        }
    }
}

/// Market price of volatility risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RiskPremiumPreset {
    #[default]
    Zero,
    Constant { value: f64 },
    /// a * tanh(y - y_bar): bounded and odd about the mean.
    Tanh { scale: f64 },
}

/// JSON-facing model description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    pub f: VolPreset,
    pub lambda: RiskPremiumPreset,
    /// OU mean; if absent it is solved from `target_sigma_sq`.
    pub y_bar: Option<f64>,
    pub target_sigma_sq: Option<f64>,
    pub upsilon: f64,
    pub rho: f64,
    pub eps: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            f: VolPreset::default(),
            lambda: RiskPremiumPreset::Zero,
            y_bar: None,
            target_sigma_sq: Some(0.34 * 0.34),
            upsilon: 0.5,
            rho: -0.5,
            eps: 0.1,
        }
    }
}

#[derive(Clone)]
pub struct SVModelPrimitives {
    pub y_bar: f64,
    pub upsilon: f64,
    pub rho: f64,
    pub eps: f64,
    pub f: VolFn,
    pub lambda_fn: VolFn,
}

impl std::fmt::Debug for SVModelPrimitives {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("SVModelPrimitives")
            .field("y_bar", &self.y_bar)
            .field("upsilon", &self.upsilon)
            .field("rho", &self.rho)
            .field("eps", &self.eps)
            .finish_non_exhaustive()
    }
}

impl SVModelPrimitives {
    pub fn new(y_bar: f64, upsilon: f64, rho: f64, eps: f64, f: VolFn, lambda_fn: VolFn) -> Result<Self> {
        let p = SVModelPrimitives {
            y_bar,
            upsilon,
            rho,
            eps,
            f,
            lambda_fn,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.y_bar.is_finite() {
            return Err(SpecVolError::InvalidParams("y_bar must be finite".into()));
        }
        if !(self.upsilon > 0.0 && self.upsilon.is_finite()) {
            return Err(SpecVolError::InvalidParams("upsilon must be positive".into()));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(SpecVolError::InvalidParams("correlation must lie in [-1, 1]".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(SpecVolError::InvalidParams("eps must be positive".into()));
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let p = SVModelPrimitives { eps, ..self.clone() };
        p.validate()?;
        Ok(p)
    }

    pub fn from_spec(spec: &ModelSpec, cfg: &QuadratureConfig) -> Result<Self> {
        let f = spec.f.build()?;
        let y_bar = match (spec.y_bar, spec.target_sigma_sq) {
            (Some(y), _) => y,
            (None, Some(s2)) => solve_y_bar(&f, s2, spec.upsilon, cfg)?,
            (None, None) => {
                return Err(SpecVolError::InvalidParams("model needs y_bar or target_sigma_sq".into()));
            }
        };
        let lambda_fn: VolFn = match spec.lambda {
            RiskPremiumPreset::Zero => Arc::new(|_| 0.0),
            RiskPremiumPreset::Constant { value } => Arc::new(move |_| value),
            RiskPremiumPreset::Tanh { scale } => Arc::new(move |y: f64| scale * (y - y_bar).tanh()),
        };
        SVModelPrimitives::new(y_bar, spec.upsilon, spec.rho, spec.eps, f, lambda_fn)
    }
}

fn normal_pdf(y: f64, mean: f64, sd: f64) -> f64 {
    let z = (y - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

/// <g> under Normal(y_bar, upsilon^2).
pub fn stationary_average<G: Fn(f64) -> f64>(g: G, y_bar: f64, upsilon: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(upsilon > 0.0) {
        return Err(SpecVolError::InvalidParams("upsilon must be positive".into()));
    }
    // standard normal variable
    let h = |z: f64| {
        let w = (-0.5 * z * z).exp();
        if w == 0.0 {
            0.0
        } else {
            g(y_bar + upsilon * z) * w / (2.0 * PI).sqrt()
        }
    };
    Ok(integrate_1d(&h, Domain::Real, cfg)?.value)
}

/// Smallest mean y_bar with <f^2> = target, by bisection (the average is
/// nondecreasing in y_bar for nondecreasing f).
pub fn solve_y_bar(f: &VolFn, target: f64, upsilon: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(target > 0.0) {
        return Err(SpecVolError::InvalidParams("target sigma^2 must be positive".into()));
    }
    let avg = |yb: f64| stationary_average(|y| f(y).powi(2), yb, upsilon, cfg);
    let (mut lo, mut hi) = (-20.0, 20.0);
    let (flo, fhi) = (avg(lo)? - target, avg(hi)? - target);
    if flo > 0.0 || fhi < 0.0 {
        return Err(SpecVolError::NoSolution(format!(
            "target sigma^2 = {target} outside the attainable range [{}, {}]",
            flo + target,
            fhi + target
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if avg(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// phi'(y) = F(y) / (upsilon^2 p(y)) with F(y) = int_{-inf}^y (f^2 - sigma^2) p.
///
/// F is tabulated on a uniform grid of 2001 points over +-8 upsilon (from the
/// left below the mean, from the right above it, using <f^2 - sigma^2> = 0);
/// values between nodes add one Gauss-Kronrod panel.
pub struct PhiPrime {
    f_sq: VolFn,
    sigma_sq: f64,
    y_bar: f64,
    upsilon: f64,
    lo: f64,
    step: f64,
    left: Vec<f64>,
    right: Vec<f64>,
    tail_cfg: QuadratureConfig,
}

const GRID: usize = 2001;
const HALF_WIDTH: f64 = 8.0;

impl PhiPrime {
    pub fn from_f(f: &VolFn, sigma_sq: f64, y_bar: f64, upsilon: f64, cfg: &QuadratureConfig) -> Result<Self> {
        let f = f.clone();
        Self::from_f_sq(Arc::new(move |y| f(y).powi(2)), sigma_sq, y_bar, upsilon, cfg)
    }

    pub fn from_f_sq(f_sq: VolFn, sigma_sq: f64, y_bar: f64, upsilon: f64, cfg: &QuadratureConfig) -> Result<Self> {
        if !(upsilon > 0.0) {
            return Err(SpecVolError::InvalidParams("upsilon must be positive".into()));
        }
        let centering = stationary_average(|y| f_sq(y) - sigma_sq, y_bar, upsilon, cfg)?;
        if centering.abs() > 1e3 * cfg.abs_tol.max(cfg.rel_tol * sigma_sq) {
            return Err(SpecVolError::CenteringViolation(centering));
        }
        let lo = y_bar - HALF_WIDTH * upsilon;
        let step = 2.0 * HALF_WIDTH * upsilon / (GRID - 1) as f64;
        let integrand = {
            let f_sq = f_sq.clone();
            move |y: f64| (f_sq(y) - sigma_sq) * normal_pdf(y, y_bar, upsilon)
        };
        let panels: Vec<f64> = (0..GRID - 1)
            .map(|j| {
                let a = lo + j as f64 * step;
                panel(&integrand, a, a + step)
            })
            .collect();
        let hi = lo + (GRID - 1) as f64 * step;
        // tails are tiny; only a relative tolerance is meaningful there
        let tail_cfg = cfg.with_tol(1e-300, cfg.rel_tol);
        let left_tail = integrate_1d(&integrand, Domain::Below(lo), &tail_cfg)?.value;
        let right_tail = integrate_1d(&integrand, Domain::Above(hi), &tail_cfg)?.value;
        let mut left = Vec::with_capacity(GRID);
        let mut acc = vec![left_tail];
        left.push(left_tail);
        for p in &panels {
            acc.push(*p);
            left.push(compensated_sum(acc.iter().copied()));
        }
        let mut right = vec![0.0; GRID];
        let mut acc = vec![right_tail];
        right[GRID - 1] = right_tail;
        for j in (0..GRID - 1).rev() {
            acc.push(panels[j]);
            right[j] = compensated_sum(acc.iter().copied());
        }
        Ok(PhiPrime {
            f_sq,
            sigma_sq,
            y_bar,
            upsilon,
            lo,
            step,
            left,
            right,
            tail_cfg,
        })
    }

    fn integrand(&self, y: f64) -> f64 {
        (self.f_sq(y) - self.sigma_sq) * normal_pdf(y, self.y_bar, self.upsilon)
    }

    fn f_sq(&self, y: f64) -> f64 {
        (self.f_sq)(y)
    }

    /// F(y) = int_{-inf}^y (f^2 - sigma^2) p.
    pub fn cumulative(&self, y: f64) -> f64 {
        let g = |z: f64| self.integrand(z);
        let pos = (y - self.lo) / self.step;
        if pos < 0.0 {
            return integrate_1d(&g, Domain::Below(y), &self.tail_cfg).map_or(f64::NAN, |e| e.value);
        }
        if pos > (GRID - 1) as f64 {
            return -integrate_1d(&g, Domain::Above(y), &self.tail_cfg).map_or(f64::NAN, |e| e.value);
        }
        let j = (pos.floor() as usize).min(GRID - 2);
        let a = self.lo + j as f64 * self.step;
        if y <= self.y_bar {
            self.left[j] + panel(&g, a, y)
        } else {
            -(self.right[j + 1] + panel(&g, y, a + self.step))
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let p = normal_pdf(y, self.y_bar, self.upsilon);
        if p == 0.0 {
            return 0.0;
        }
        self.cumulative(y) / (self.upsilon * self.upsilon * p)
    }

    /// <g phi'> = (1/upsilon^2) int g(y) F(y) dy (the density cancels).
    pub fn average_against<G: Fn(f64) -> f64>(&self, g: G, cfg: &QuadratureConfig) -> Result<f64> {
        let u = self.upsilon;
        let h = |z: f64| {
            let y = self.y_bar + u * z;
            let gy = g(y);
            if gy == 0.0 {
                0.0
            } else {
                gy * self.cumulative(y) * u
            }
        };
        Ok(integrate_1d(&h, Domain::Real, cfg)?.value / (u * u))
    }
}

fn panel<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    gauss_kronrod21(g, a, b).0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupParameters {
    pub sigma_sq: f64,
    pub v2: f64,
    pub v3: f64,
    pub v2_eps: f64,
    pub v3_eps: f64,
    pub eps: f64,
}

impl GroupParameters {
    /// Pricing parameters on the calibrated route.
    pub fn market_params(&self, mu: f64) -> Result<MarketParams> {
        MarketParams::new(mu, self.sigma_sq, self.v2_eps, self.v3_eps)
    }
}

pub fn group_parameters(prim: &SVModelPrimitives, cfg: &QuadratureConfig) -> Result<GroupParameters> {
    prim.validate()?;
    let f = prim.f.clone();
    let sigma_sq = stationary_average(|y| f(y).powi(2), prim.y_bar, prim.upsilon, cfg)?;
    if !(sigma_sq > 0.0) {
        return Err(SpecVolError::InvalidParams("<f^2> must be positive".into()));
    }
    let phi = PhiPrime::from_f(&prim.f, sigma_sq, prim.y_bar, prim.upsilon, cfg)?;
    let lam = prim.lambda_fn.clone();
    let avg_lambda = phi.average_against(|y| lam(y), cfg)?;
    let avg_f = phi.average_against(|y| f(y), cfg)?;
    let v2 = prim.upsilon / SQRT_2 * avg_lambda;
    let v3 = if prim.rho == 0.0 { 0.0 } else { -prim.rho * prim.upsilon / SQRT_2 * avg_f };
    let s = prim.eps.sqrt();
    Ok(GroupParameters {
        sigma_sq,
        v2,
        v3,
        v2_eps: s * v2,
        v3_eps: s * v3,
        eps: prim.eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default().with_tol(1e-13, 1e-12)
    }

    #[test]
    fn averages_of_moments() {
        let c = cfg();
        assert_abs_diff_eq!(stationary_average(|_| 1.0, 0.3, 0.7, &c).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(stationary_average(|y| y, 0.3, 0.7, &c).unwrap(), 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(stationary_average(|y| (y - 0.3).powi(2), 0.3, 0.7, &c).unwrap(), 0.49, epsilon = 1e-12);
    }

    #[test]
    fn constant_vol_has_no_corrections() {
        let prim = SVModelPrimitives::new(0.0, 0.5, -0.4, 0.1, Arc::new(|_| 0.3), Arc::new(|_| 0.2)).unwrap();
        let g = group_parameters(&prim, &cfg()).unwrap();
        assert_abs_diff_eq!(g.sigma_sq, 0.09, epsilon = 1e-14);
        assert!(g.v2.abs() < 1e-14 && g.v3.abs() < 1e-14);
        let phi = PhiPrime::from_f(&prim.f, 0.09, 0.0, 0.5, &cfg()).unwrap();
        assert!(phi.eval(0.7).abs() < 1e-14);
    }

    #[test]
    fn linear_square_gives_constant_derivative() {
        let (yb, u, s2) = (0.2, 0.6, 0.5);
        let phi = PhiPrime::from_f_sq(Arc::new(move |y| s2 + (y - yb)), s2, yb, u, &cfg()).unwrap();
        for y in [-4.0, -1.0, 0.0, 0.2, 0.9, 2.5, 5.0, 6.5] {
            assert_abs_diff_eq!(phi.eval(y), -1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn centering_is_enforced() {
        let f: VolFn = Arc::new(|y: f64| y.exp().clamp(0.01, 5.0));
        assert!(matches!(
            PhiPrime::from_f(&f, 0.5, 0.0, 0.5, &cfg()),
            Err(SpecVolError::CenteringViolation(_))
        ));
    }

    fn default_model() -> SVModelPrimitives {
        SVModelPrimitives::from_spec(&ModelSpec::default(), &cfg()).unwrap()
    }

    #[test]
    fn default_model_matches_target() {
        let prim = default_model();
        let g = group_parameters(&prim, &cfg()).unwrap();
        assert_abs_diff_eq!(g.sigma_sq, 0.34 * 0.34, epsilon = 1e-11);
        // unclipped: <e^{2y}> = e^{2 y_bar + 2 upsilon^2}; the clip at 5 sits
        // 4.9 sd out under the tilted law and moves y_bar by ~1e-7
        assert_abs_diff_eq!(prim.y_bar, 0.5 * (0.1156f64).ln() - 0.25, epsilon = 1e-6);
    }

    #[test]
    fn ode_residual_on_grid() {
        let prim = default_model();
        let s2 = group_parameters(&prim, &cfg()).unwrap().sigma_sq;
        let phi = PhiPrime::from_f(&prim.f, s2, prim.y_bar, prim.upsilon, &cfg()).unwrap();
        let (yb, u) = (prim.y_bar, prim.upsilon);
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..=80 {
            let y = yb - 4.0 * u + i as f64 * 0.1 * u;
            let d = (phi.eval(y + h) - phi.eval(y - h)) / (2.0 * h);
            let res = (yb - y) * phi.eval(y) + u * u * d - ((prim.f)(y).powi(2) - s2);
            worst = worst.max(res.abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn increasing_vol_gives_negative_leverage_average() {
        // F(y) < 0 everywhere for increasing f, so <f phi'> < 0 and V3 has the sign of rho
        let prim = default_model();
        let s2 = group_parameters(&prim, &cfg()).unwrap().sigma_sq;
        let phi = PhiPrime::from_f(&prim.f, s2, prim.y_bar, prim.upsilon, &cfg()).unwrap();
        let avg = phi.average_against(|y| (prim.f)(y), &cfg()).unwrap();
        assert!(avg < 0.0);
        // direct density-weighted average agrees
        let direct = stationary_average(|y| (prim.f)(y) * phi.eval(y), prim.y_bar, prim.upsilon, &cfg()).unwrap();
        assert_abs_diff_eq!(avg, direct, epsilon = 1e-10);
        let g = group_parameters(&prim, &cfg()).unwrap();
        assert!(g.v3 < 0.0 && prim.rho < 0.0);
    }

    #[test]
    fn eps_scaling_and_zero_cases() {
        let prim = default_model();
        let c = cfg();
        let g1 = group_parameters(&prim.with_eps(1.0).unwrap(), &c).unwrap();
        let g = group_parameters(&prim.with_eps(0.05).unwrap(), &c).unwrap();
        assert_eq!(g.v3_eps, 0.05f64.sqrt() * g1.v3);
        assert_eq!(g.v2_eps, 0.05f64.sqrt() * g1.v2);
        assert_eq!(g.v2, 0.0);
        let mut uncorr = prim.clone();
        uncorr.rho = 0.0;
        assert_eq!(group_parameters(&uncorr, &c).unwrap().v3, 0.0);
        let mut lam = prim.clone();
        lam.lambda_fn = Arc::new(|_| 0.3);
        let gl = group_parameters(&lam, &c).unwrap();
        assert!(gl.v2 < 0.0);
    }
}
