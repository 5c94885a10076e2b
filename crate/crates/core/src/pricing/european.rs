//! European call on the full line via a shifted Fourier contour.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::barrier::gaussian_cutoff;
use super::{time_factors, PricingConfig, RawPrice};
use crate::domain::{MarketParams, OptionSpec};
use crate::error::{Result, SpecVolError};
use crate::perturbation::beta_zeta;
use crate::quadrature::{integrate_adaptive, Pair, QuadratureConfig};

/// Closed-form A0 at complex nu (analytic continuation of the transform):
/// e^{k(c+1-i nu)} / (sqrt(sigma^2 pi) (c - i nu)(c + 1 - i nu)).
pub(crate) fn a0_closed(spec: &OptionSpec, params: &MarketParams, nu: Complex64) -> Result<Complex64> {
    let c = params.c();
    let inu = Complex64::i() * nu;
    let d0 = c - inu;
    let d1 = c + 1.0 - inu;
    if d0.norm() == 0.0 || d1.norm() == 0.0 {
        return Err(SpecVolError::InvalidIndex(format!("nu = {nu} is a pole of the call transform")));
    }
    let mut a = (d1 * spec.k).exp() / (d0 * d1 * (params.sigma_sq * PI).sqrt());
    if let Some(d2) = spec.smoothing {
        let (_, zeta) = beta_zeta(c, nu);
        a *= (zeta * (0.5 * d2)).exp();
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct European {
    spec: OptionSpec,
    params: MarketParams,
    offset: f64,
    nu_max: f64,
    quad: QuadratureConfig,
}

impl European {
    pub fn new(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<Self> {
        let c = params.c();
        let offset = cfg.quadrature.contour_offset.unwrap_or(c + 2.0);
        if !(offset > c + 1.0) || !offset.is_finite() {
            return Err(SpecVolError::ConvergenceViolation {
                offset,
                threshold: c + 1.0,
            });
        }
        let var = params.sigma_sq * spec.t + spec.smoothing.unwrap_or(0.0);
        Ok(European {
            spec: spec.clone(),
            params: *params,
            offset,
            nu_max: gaussian_cutoff(var, cfg.tail_tol),
            quad: cfg.quadrature,
        })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    fn integrand(&self, nu_r: f64, x: f64) -> Pair {
        let c = self.params.c();
        let nu = Complex64::new(nu_r, -self.offset);
        let Ok(a) = a0_closed(&self.spec, &self.params, nu) else {
            return Pair(f64::NAN, f64::NAN);
        };
        let lam0 = -(self.params.sigma_sq / 2.0) * (nu * nu + c * c);
        let (beta, zeta) = beta_zeta(c, nu);
        let lam1 = beta * self.params.v3_eps + zeta * self.params.v2_eps;
        let (g0, g1) = time_factors(lam0, lam1, self.spec.t);
        let norm = (self.params.sigma_sq / (4.0 * PI)).sqrt();
        let psi = ((Complex64::i() * nu - c) * x).exp() * norm;
        Pair(2.0 * (a * g0 * psi).re, 2.0 * (a * g1 * psi).re)
    }

    pub fn eval(&self, x: f64) -> Result<RawPrice> {
        let f = |nu_r: f64| self.integrand(nu_r, x);
        let est = integrate_adaptive(&f, 0.0, self.nu_max, &self.quad)?;
        if !(est.value.0.is_finite() && est.value.1.is_finite()) {
            return Err(SpecVolError::IntegrationFailure {
                estimate: est.value.0,
                error: est.error,
                evaluations: est.evaluations,
            });
        }
        Ok(RawPrice {
            u0: est.value.0,
            u1: est.value.1,
            error: est.error,
            terms: est.evaluations,
        })
    }
}
