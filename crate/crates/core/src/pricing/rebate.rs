//! Double-barrier call with rebates R_l, R_r paid on hitting.
//!
//! Write u = e^{mu t}(Phi0 + Phi1) + v, where Phi0 solves (L0 - mu) Phi0 = 0
//! with the rebate boundary values and Phi1 solves (L0 - mu) Phi1 = -A1 Phi0
//! with zero boundary values. v is a knock-out price with data h - Phi0 - Phi1.

use super::barrier::{sources_for, DiscreteSeries};
use super::kernels::ExpPolyPiece;
use super::{PricingConfig, RawPrice};
use crate::domain::{MarketParams, OptionSpec};
use crate::error::{Result, SpecVolError};
use crate::perturbation::A1Operator;

#[derive(Debug, Clone, PartialEq)]
pub struct RebatePhi {
    l: f64,
    r: f64,
    c: f64,
    kappa: f64,
    rl: f64,
    rr: f64,
    /// Phi0 = a e^{p1 x} + b e^{p2 x}, p1 = kappa - c, p2 = -kappa - c.
    a: f64,
    b: f64,
    /// Phi1 particular part c1 (x - l) e^{p1 x} + c2 (x - l) e^{p2 x}.
    c1: f64,
    c2: f64,
    /// Particular part at r, removed by a homogeneous term.
    d: f64,
}

impl RebatePhi {
    pub fn new(spec: &OptionSpec, params: &MarketParams) -> Result<Self> {
        let (Some(l), Some(r)) = (spec.interval.l.finite(), spec.interval.r.finite()) else {
            return Err(SpecVolError::InvalidSpec("rebates need two finite barriers".into()));
        };
        let c = params.c();
        let s2 = params.sigma_sq;
        let kappa = 0.5 + params.mu / s2;
        if kappa.abs() < 1e-12 {
            return Err(SpecVolError::Degeneracy("mu = -sigma^2/2 makes the rebate roots coincide".into()));
        }
        let big_s = (kappa * (r - l)).sinh();
        let (rl, rr) = (spec.rebate_l, spec.rebate_r);
        let a = (rr * (c * r - kappa * l).exp() - rl * (c * l - kappa * r).exp()) / (2.0 * big_s);
        let b = (-rr * (c * r + kappa * l).exp() + rl * (c * l + kappa * r).exp()) / (2.0 * big_s);
        let op = A1Operator::new(params.v2_eps, params.v3_eps);
        let (p1, p2) = (kappa - c, -kappa - c);
        let c1 = -a * op.symbol_real(p1) / (s2 * kappa);
        let c2 = b * op.symbol_real(p2) / (s2 * kappa);
        let d = (r - l) * (c1 * (p1 * r).exp() + c2 * (p2 * r).exp());
        Ok(RebatePhi {
            l,
            r,
            c,
            kappa,
            rl,
            rr,
            a,
            b,
            c1,
            c2,
            d,
        })
    }

    fn sinh_ratio(&self, x: f64) -> f64 {
        (self.kappa * (x - self.l)).sinh() / (self.kappa * (self.r - self.l)).sinh()
    }

    /// Stationary zeroth-order part, exact at both barriers.
    pub fn phi0(&self, x: f64) -> f64 {
        let len = self.r - self.l;
        let s = (self.kappa * len).sinh();
        (self.rr * (self.c * (self.r - x)).exp() * (self.kappa * (x - self.l)).sinh()
            + self.rl * (self.c * (self.l - x)).exp() * (self.kappa * (self.r - x)).sinh())
            / s
    }

    pub fn phi1(&self, x: f64) -> f64 {
        let (p1, p2) = (self.kappa - self.c, -self.kappa - self.c);
        let part = (x - self.l) * (self.c1 * (p1 * x).exp() + self.c2 * (p2 * x).exp());
        part - self.d * (self.c * (self.r - x)).exp() * self.sinh_ratio(x)
    }

    /// e^{cx} (-Phi0) on [l, r].
    pub(crate) fn minus_phi0_piece(&self) -> ExpPolyPiece {
        ExpPolyPiece {
            a: self.l,
            b: self.r,
            terms: vec![(self.kappa, [-self.a, 0.0, 0.0]), (-self.kappa, [-self.b, 0.0, 0.0])],
        }
    }

    /// e^{cx} (-Phi1) on [l, r].
    pub(crate) fn minus_phi1_piece(&self) -> ExpPolyPiece {
        let (k, l) = (self.kappa, self.l);
        let h = self.d * (self.c * self.r).exp() / (2.0 * (k * (self.r - l)).sinh());
        ExpPolyPiece {
            a: l,
            b: self.r,
            terms: vec![
                (k, [self.c1 * l + h * (-k * l).exp(), -self.c1, 0.0]),
                (-k, [self.c2 * l - h * (k * l).exp(), -self.c2, 0.0]),
            ],
        }
    }
}

pub struct RebateDecomposition {
    phi: RebatePhi,
    series: DiscreteSeries,
    growth: f64,
}

impl RebateDecomposition {
    pub fn new(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<Self> {
        let phi = RebatePhi::new(spec, params)?;
        let (src, extra) = sources_for(spec, params)?;
        let series = DiscreteSeries::new(&spec.interval, params, spec.t, &src, extra.as_ref(), cfg)?;
        Ok(RebateDecomposition {
            phi,
            series,
            growth: (params.mu * spec.t).exp(),
        })
    }

    pub fn phi(&self) -> &RebatePhi {
        &self.phi
    }

    pub fn eval(&self, x: f64) -> Result<RawPrice> {
        let p = &self.phi;
        if x <= p.l || x >= p.r {
            let rebate = if x <= p.l { p.rl } else { p.rr };
            return Ok(RawPrice {
                u0: self.growth * rebate,
                u1: 0.0,
                error: 0.0,
                terms: 0,
            });
        }
        let v = self.series.eval(x);
        Ok(RawPrice {
            u0: v.u0 + self.growth * p.phi0(x),
            u1: v.u1 + self.growth * p.phi1(x),
            ..v
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (OptionSpec, MarketParams) {
        let spec = OptionSpec::rebate_call(2f64.ln(), 1.5f64.ln(), 2.5f64.ln(), 0.25, 0.3, 0.1).unwrap();
        (spec, MarketParams::new(0.05, 0.1156, 0.01, -0.002).unwrap())
    }

    #[test]
    fn stationary_parts_hit_the_boundary_values() {
        let (spec, p) = setup();
        let phi = RebatePhi::new(&spec, &p).unwrap();
        let (l, r) = (1.5f64.ln(), 2.5f64.ln());
        assert!((phi.phi0(l) - 0.3).abs() < 1e-14);
        assert!((phi.phi0(r) - 0.1).abs() < 1e-14);
        assert!(phi.phi1(l).abs() < 1e-14);
        assert!(phi.phi1(r).abs() < 1e-14);
        // exponential form agrees with the sinh form
        let (p1, p2) = (phi.kappa - phi.c, -phi.kappa - phi.c);
        for x in [0.45, 0.6, 0.8] {
            assert!((phi.a * (p1 * x).exp() + phi.b * (p2 * x).exp() - phi.phi0(x)).abs() < 1e-13);
            let minus = -(phi.minus_phi0_piece().eval(x)) * (-phi.c * x).exp();
            assert!((minus - phi.phi0(x)).abs() < 1e-13);
            let m1 = -(phi.minus_phi1_piece().eval(x)) * (-phi.c * x).exp();
            assert!((m1 - phi.phi1(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn stationary_parts_solve_their_equations() {
        let (spec, p) = setup();
        let phi = RebatePhi::new(&spec, &p).unwrap();
        let op = A1Operator::new(p.v2_eps, p.v3_eps);
        let h = 1e-3;
        let gen = |f: &dyn Fn(f64) -> f64, x: f64| {
            let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
            let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            0.5 * p.sigma_sq * d2 + (p.mu - 0.5 * p.sigma_sq) * d1 - p.mu * f(x)
        };
        for x in [0.5, 0.7, 0.85] {
            let f0 = |y: f64| phi.phi0(y);
            assert!(gen(&f0, x).abs() < 1e-6);
            let f1 = |y: f64| phi.phi1(y);
            let d = |k: i32| -> f64 {
                let f = |y: f64| phi.phi0(y);
                match k {
                    1 => (f(x + h) - f(x - h)) / (2.0 * h),
                    2 => (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h),
                    _ => (f(x + 2.0 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2.0 * h)) / (2.0 * h * h * h),
                }
            };
            let a1phi0 = op.apply_real(&[phi.phi0(x), d(1), d(2), d(3)]);
            assert!((gen(&f1, x) + a1phi0).abs() < 1e-6, "{} vs {}", gen(&f1, x), -a1phi0);
        }
    }
}
