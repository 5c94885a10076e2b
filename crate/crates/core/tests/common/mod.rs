//! Shared helpers for the integration tests.
#![allow(dead_code)]

use specvol::pricing::{Pricer, PricingConfig};
use specvol::{MarketParams, OptionSpec};

/// Central-difference residuals of the u0 and u1 equations at (t, x) with
/// step h, plus |A1 u0| for scale.
pub fn residuals(spec: &OptionSpec, p: &MarketParams, cfg: &PricingConfig, t: f64, x: f64, h: f64) -> (f64, f64, f64) {
    let at = |tt: f64| Pricer::new(&spec.with_maturity(tt), p, cfg).unwrap();
    let now = at(t);
    let pts: Vec<(f64, f64)> = [-2.0, -1.0, 0.0, 1.0, 2.0]
        .iter()
        .map(|k| {
            let r = now.raw(x + k * h).unwrap();
            (r.u0, r.u1)
        })
        .collect();
    let up = at(t + h).raw(x).unwrap();
    let dn = at(t - h).raw(x).unwrap();
    let d = |f: &dyn Fn(usize) -> f64| {
        let d1 = (f(3) - f(1)) / (2.0 * h);
        let d2 = (f(3) - 2.0 * f(2) + f(1)) / (h * h);
        let d3 = (f(4) - 2.0 * f(3) + 2.0 * f(1) - f(0)) / (2.0 * h * h * h);
        (d1, d2, d3)
    };
    let (a1, a2, a3) = d(&|i| pts[i].0);
    let (b1, b2, _) = d(&|i| pts[i].1);
    let gen = |d1: f64, d2: f64| 0.5 * p.sigma_sq * d2 + (p.mu - 0.5 * p.sigma_sq) * d1;
    let dt0 = (up.u0 - dn.u0) / (2.0 * h);
    let dt1 = (up.u1 - dn.u1) / (2.0 * h);
    let a1u0 = p.v3_eps * (a3 - a2) + p.v2_eps * (a2 - a1);
    (-dt0 + gen(a1, a2), -dt1 + gen(b1, b2) + a1u0, a1u0.abs())
}
