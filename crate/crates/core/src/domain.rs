//! Shared domain types: market parameters, barrier intervals, option specs.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpecVolError};
use crate::special::norm_cdf;

/// Parameters needed by the zeroth- and first-order prices.
///
/// `v2_eps`/`v3_eps` always hold the scaled group parameters V2^eps, V3^eps.
/// When `eps` is set the parameters came from the model route and the first
/// order correction is reported before the sqrt(eps) factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub mu: f64,
    pub sigma_sq: f64,
    #[serde(default)]
    pub v2_eps: f64,
    #[serde(default)]
    pub v3_eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

impl MarketParams {
    pub fn new(mu: f64, sigma_sq: f64, v2_eps: f64, v3_eps: f64) -> Result<Self> {
        let p = MarketParams {
            mu,
            sigma_sq,
            v2_eps,
            v3_eps,
            eps: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Model route: unscaled V2, V3 and the time-scale eps.
    pub fn from_model(mu: f64, sigma_sq: f64, v2: f64, v3: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SpecVolError::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        let s = eps.sqrt();
        let p = MarketParams {
            mu,
            sigma_sq,
            v2_eps: s * v2,
            v3_eps: s * v3,
            eps: Some(eps),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_sq > 0.0 && self.sigma_sq.is_finite()) {
            return Err(SpecVolError::InvalidParams(format!(
                "sigma_sq must be positive and finite, got {}",
                self.sigma_sq
            )));
        }
        if !self.mu.is_finite() || !self.v2_eps.is_finite() || !self.v3_eps.is_finite() {
            return Err(SpecVolError::InvalidParams("non-finite parameter".into()));
        }
        if let Some(e) = self.eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(SpecVolError::InvalidParams(format!("eps must be positive, got {e}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    pub fn c(&self) -> f64 {
        (self.mu - 0.5 * self.sigma_sq) / self.sigma_sq
    }

    /// Same market, different group parameters (eps tag kept).
    pub fn with_group(&self, v2_eps: f64, v3_eps: f64) -> Self {
        MarketParams {
            v2_eps,
            v3_eps,
            ..*self
        }
    }

    pub fn zeroth_order(&self) -> Self {
        self.with_group(0.0, 0.0)
    }
}

pub fn derived_c(params: &MarketParams) -> Result<f64> {
    if !(params.sigma_sq > 0.0) {
        return Err(SpecVolError::InvalidParams(format!(
            "sigma_sq must be positive, got {}",
            params.sigma_sq
        )));
    }
    Ok(params.c())
}

/// One end of the state interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Finite(f64),
    Unbounded,
}

impl Endpoint {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Endpoint::Finite(v) => Some(v),
            Endpoint::Unbounded => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Endpoint::Finite(_))
    }
}

impl From<Option<f64>> for Endpoint {
    fn from(v: Option<f64>) -> Self {
        match v {
            Some(x) => Endpoint::Finite(x),
            None => Endpoint::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub l: Endpoint,
    pub r: Endpoint,
}

impl Interval {
    pub fn new(l: Endpoint, r: Endpoint) -> Result<Self> {
        for e in [l, r] {
            if let Endpoint::Finite(v) = e {
                if !v.is_finite() {
                    return Err(SpecVolError::InvalidInterval(
                        "use Endpoint::Unbounded for infinite barriers".into(),
                    ));
                }
            }
        }
        if let (Endpoint::Finite(a), Endpoint::Finite(b)) = (l, r) {
            if a >= b {
                return Err(SpecVolError::InvalidInterval(format!("l = {a} must be below r = {b}")));
            }
        }
        Ok(Interval { l, r })
    }

    pub fn finite(l: f64, r: f64) -> Result<Self> {
        Self::new(Endpoint::Finite(l), Endpoint::Finite(r))
    }

    pub fn full_line() -> Self {
        Interval {
            l: Endpoint::Unbounded,
            r: Endpoint::Unbounded,
        }
    }

    pub fn below(r: f64) -> Result<Self> {
        Self::new(Endpoint::Unbounded, Endpoint::Finite(r))
    }

    pub fn above(l: f64) -> Result<Self> {
        Self::new(Endpoint::Finite(l), Endpoint::Unbounded)
    }

    /// Open-interval membership.
    pub fn contains(&self, x: f64) -> bool {
        let above_l = match self.l {
            Endpoint::Finite(l) => x > l,
            Endpoint::Unbounded => true,
        };
        let below_r = match self.r {
            Endpoint::Finite(r) => x < r,
            Endpoint::Unbounded => true,
        };
        above_l && below_r
    }

    /// Distance to the nearest finite barrier, infinity if there is none.
    pub fn barrier_distance(&self, x: f64) -> f64 {
        let dl = self.l.finite().map_or(f64::INFINITY, |l| (x - l).abs());
        let dr = self.r.finite().map_or(f64::INFINITY, |r| (r - x).abs());
        dl.min(dr)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.l.finite().map_or("-inf".to_string(), |v| v.to_string());
        let r = self.r.finite().map_or("+inf".to_string(), |v| v.to_string());
        write!(f, "({l}, {r})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumCase {
    Discrete,
    ContinuousFullLine,
    /// l = -inf, finite r.
    ContinuousHalfLineUpper,
    /// finite l, r = +inf.
    ContinuousHalfLineLower,
}

pub fn classify_spectrum(interval: &Interval) -> Result<SpectrumCase> {
    match (interval.l, interval.r) {
        (Endpoint::Finite(l), Endpoint::Finite(r)) => {
            if l >= r {
                Err(SpecVolError::InvalidInterval(format!("l = {l} must be below r = {r}")))
            } else {
                Ok(SpectrumCase::Discrete)
            }
        }
        (Endpoint::Unbounded, Endpoint::Unbounded) => Ok(SpectrumCase::ContinuousFullLine),
        (Endpoint::Unbounded, Endpoint::Finite(_)) => Ok(SpectrumCase::ContinuousHalfLineUpper),
        (Endpoint::Finite(_), Endpoint::Unbounded) => Ok(SpectrumCase::ContinuousHalfLineLower),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionKind {
    #[serde(alias = "european_call", alias = "european")]
    EuropeanCall,
    #[serde(alias = "up_and_out_call", alias = "up_and_out")]
    UpAndOutCall,
    #[serde(alias = "double_barrier_knock_out_call", alias = "double_barrier")]
    DoubleBarrierKnockOutCall,
    #[serde(alias = "knock_in")]
    KnockIn,
    #[serde(alias = "rebate")]
    Rebate,
    #[serde(alias = "generic_knock_out")]
    GenericKnockOut,
}

impl OptionKind {
    pub fn is_knock_out(&self) -> bool {
        matches!(
            self,
            OptionKind::UpAndOutCall | OptionKind::DoubleBarrierKnockOutCall | OptionKind::GenericKnockOut
        )
    }
}

pub type PayoffFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub k: f64,
    pub interval: Interval,
    pub t: f64,
    pub rebate_l: f64,
    pub rebate_r: f64,
    pub payoff_fn: Option<PayoffFn>,
    /// Total variance of a Gaussian mollifier applied to the European call.
    pub smoothing: Option<f64>,
}

impl fmt::Debug for OptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OptionSpec")
            .field("kind", &self.kind)
            .field("k", &self.k)
            .field("interval", &self.interval)
            .field("t", &self.t)
            .field("rebate_l", &self.rebate_l)
            .field("rebate_r", &self.rebate_r)
            .field("payoff_fn", &self.payoff_fn.as_ref().map(|_| "<fn>"))
            .field("smoothing", &self.smoothing)
            .finish()
    }
}

impl OptionSpec {
    fn base(kind: OptionKind, k: f64, interval: Interval, t: f64) -> Self {
        OptionSpec {
            kind,
            k,
            interval,
            t,
            rebate_l: 0.0,
            rebate_r: 0.0,
            payoff_fn: None,
            smoothing: None,
        }
    }

    pub fn european_call(k: f64, t: f64) -> Result<Self> {
        let s = Self::base(OptionKind::EuropeanCall, k, Interval::full_line(), t);
        s.validate()?;
        Ok(s)
    }

    /// European call with payoff e^x N(d1) - e^k N(d2) at total variance `delta_sq`.
    pub fn mollified_call(k: f64, t: f64, delta_sq: f64) -> Result<Self> {
        let mut s = Self::base(OptionKind::EuropeanCall, k, Interval::full_line(), t);
        s.smoothing = Some(delta_sq);
        s.validate()?;
        Ok(s)
    }

    pub fn up_and_out_call(k: f64, r: f64, t: f64) -> Result<Self> {
        let s = Self::base(OptionKind::UpAndOutCall, k, Interval::below(r)?, t);
        s.validate()?;
        Ok(s)
    }

    pub fn double_barrier_call(k: f64, l: f64, r: f64, t: f64) -> Result<Self> {
        let s = Self::base(OptionKind::DoubleBarrierKnockOutCall, k, Interval::finite(l, r)?, t);
        s.validate()?;
        Ok(s)
    }

    /// Call that only pays if the barrier set by `interval` has been hit.
    pub fn knock_in_call(k: f64, interval: Interval, t: f64) -> Result<Self> {
        let s = Self::base(OptionKind::KnockIn, k, interval, t);
        s.validate()?;
        Ok(s)
    }

    pub fn rebate_call(k: f64, l: f64, r: f64, t: f64, rebate_l: f64, rebate_r: f64) -> Result<Self> {
        let mut s = Self::base(OptionKind::Rebate, k, Interval::finite(l, r)?, t);
        s.rebate_l = rebate_l;
        s.rebate_r = rebate_r;
        s.validate()?;
        Ok(s)
    }

    pub fn generic_knock_out(payoff: PayoffFn, interval: Interval, t: f64) -> Result<Self> {
        let mut s = Self::base(OptionKind::GenericKnockOut, 0.0, interval, t);
        s.payoff_fn = Some(payoff);
        s.validate()?;
        Ok(s)
    }

    /// Same contract at another maturity.
    pub fn with_maturity(&self, t: f64) -> Self {
        OptionSpec { t, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(SpecVolError::InvalidSpec(format!("maturity must be positive, got {}", self.t)));
        }
        if !self.k.is_finite() {
            return Err(SpecVolError::InvalidSpec("log-strike must be finite".into()));
        }
        let case = classify_spectrum(&self.interval)?;
        match self.kind {
            OptionKind::EuropeanCall => {
                if case != SpectrumCase::ContinuousFullLine {
                    return Err(SpecVolError::InvalidSpec("European call lives on the full line".into()));
                }
                if let Some(d) = self.smoothing {
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(SpecVolError::InvalidSpec("smoothing variance must be positive".into()));
                    }
                }
            }
            OptionKind::UpAndOutCall => {
                let r = self.interval.r.finite();
                if case != SpectrumCase::ContinuousHalfLineUpper || r.map_or(true, |r| self.k >= r) {
                    return Err(SpecVolError::InvalidSpec(
                        "up-and-out call needs l = -inf and k < r".into(),
                    ));
                }
            }
            OptionKind::DoubleBarrierKnockOutCall | OptionKind::Rebate => {
                let ok = match (self.interval.l, self.interval.r) {
                    (Endpoint::Finite(l), Endpoint::Finite(r)) => l < self.k && self.k < r,
                    _ => false,
                };
                if !ok {
                    return Err(SpecVolError::InvalidSpec("needs finite l < k < r".into()));
                }
                if self.kind == OptionKind::Rebate
                    && !(self.rebate_l >= 0.0 && self.rebate_r >= 0.0 && self.rebate_l.is_finite() && self.rebate_r.is_finite())
                {
                    return Err(SpecVolError::InvalidSpec("rebates must be nonnegative".into()));
                }
            }
            OptionKind::KnockIn => {}
            OptionKind::GenericKnockOut => {
                if self.payoff_fn.is_none() {
                    return Err(SpecVolError::InvalidSpec("generic knock-out needs a payoff function".into()));
                }
            }
        }
        Ok(())
    }

    pub fn spectrum_case(&self) -> Result<SpectrumCase> {
        classify_spectrum(&self.interval)
    }

    /// Terminal call payoff ignoring barriers.
    pub fn call_payoff(&self, x: f64) -> f64 {
        match self.smoothing {
            Some(d2) => smoothed_call(x, self.k, d2),
            None => (x.exp() - self.k.exp()).max(0.0),
        }
    }
}

pub fn smoothed_call(x: f64, k: f64, delta_sq: f64) -> f64 {
    let d = delta_sq.sqrt();
    let d1 = (x - k) / d + 0.5 * d;
    let d2 = d1 - d;
    x.exp() * norm_cdf(d1) - k.exp() * norm_cdf(d2)
}

pub fn eval_payoff(spec: &OptionSpec, x: f64) -> f64 {
    match spec.kind {
        OptionKind::EuropeanCall | OptionKind::KnockIn => spec.call_payoff(x),
        OptionKind::UpAndOutCall | OptionKind::DoubleBarrierKnockOutCall => {
            if spec.interval.contains(x) {
                spec.call_payoff(x)
            } else {
                0.0
            }
        }
        OptionKind::GenericKnockOut => {
            if spec.interval.contains(x) {
                spec.payoff_fn.as_ref().map_or(0.0, |f| f(x))
            } else {
                0.0
            }
        }
        OptionKind::Rebate => {
            let l = spec.interval.l.finite().unwrap_or(f64::NEG_INFINITY);
            let r = spec.interval.r.finite().unwrap_or(f64::INFINITY);
            if x <= l {
                spec.rebate_l
            } else if x >= r {
                spec.rebate_r
            } else {
                spec.call_payoff(x)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn classify_examples() {
        let db = Interval::finite(1.5f64.ln(), 2.5f64.ln()).unwrap();
        assert_eq!(classify_spectrum(&db).unwrap(), SpectrumCase::Discrete);
        assert_eq!(classify_spectrum(&Interval::full_line()).unwrap(), SpectrumCase::ContinuousFullLine);
        let uo = Interval::below(2.5f64.ln()).unwrap();
        assert_eq!(classify_spectrum(&uo).unwrap(), SpectrumCase::ContinuousHalfLineUpper);
        let d = Interval::above(0.0).unwrap();
        assert_eq!(classify_spectrum(&d).unwrap(), SpectrumCase::ContinuousHalfLineLower);
    }

    #[test]
    fn reversed_interval_rejected() {
        assert!(matches!(Interval::finite(1.0, 0.5), Err(SpecVolError::InvalidInterval(_))));
        assert!(matches!(Interval::finite(1.0, 1.0), Err(SpecVolError::InvalidInterval(_))));
        let raw = Interval {
            l: Endpoint::Finite(2.0),
            r: Endpoint::Finite(1.0),
        };
        assert!(classify_spectrum(&raw).is_err());
        assert!(Interval::finite(f64::NEG_INFINITY, 0.0).is_err());
    }

    #[test]
    fn payoff_examples() {
        let k = 2f64.ln();
        let eu = OptionSpec::european_call(k, 0.5).unwrap();
        assert_eq!(eval_payoff(&eu, k), 0.0);
        assert_abs_diff_eq!(eval_payoff(&eu, 2.5f64.ln()), 0.5, epsilon = 1e-14);
        let db = OptionSpec::double_barrier_call(k, 1.5f64.ln(), 2.5f64.ln(), 0.5).unwrap();
        assert_eq!(eval_payoff(&db, 2.5f64.ln()), 0.0);
        assert_eq!(eval_payoff(&db, 1.5f64.ln()), 0.0);
        let rb = OptionSpec::rebate_call(k, 1.5f64.ln(), 2.5f64.ln(), 0.5, 0.2, 0.3).unwrap();
        assert_eq!(eval_payoff(&rb, 1.5f64.ln()), 0.2);
        assert_eq!(eval_payoff(&rb, 2.5f64.ln()), 0.3);
    }

    #[test]
    fn derived_c_examples() {
        let p = MarketParams::new(0.05, 0.34 * 0.34, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(derived_c(&p).unwrap(), -0.067474, epsilon = 1e-5);
        let p = MarketParams::new(0.08, 0.16, 0.0, 0.0).unwrap();
        assert_eq!(derived_c(&p).unwrap(), 0.0);
        let p = MarketParams::new(0.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(derived_c(&p).unwrap(), -0.5);
        let bad = MarketParams {
            mu: 0.0,
            sigma_sq: 0.0,
            v2_eps: 0.0,
            v3_eps: 0.0,
            eps: None,
        };
        assert!(derived_c(&bad).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(OptionSpec::european_call(0.0, 0.0).is_err());
        assert!(OptionSpec::up_and_out_call(1.0, 0.5, 1.0).is_err());
        assert!(OptionSpec::double_barrier_call(0.0, 0.1, 0.5, 1.0).is_err());
        assert!(OptionSpec::rebate_call(0.2, 0.1, 0.5, 1.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn model_route_scales_by_sqrt_eps() {
        let p = MarketParams::from_model(0.05, 0.1, 0.2, -0.4, 0.04).unwrap();
        assert_abs_diff_eq!(p.v2_eps, 0.04, epsilon = 1e-15);
        assert_abs_diff_eq!(p.v3_eps, -0.08, epsilon = 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn payoffs_nonnegative(x in -5.0f64..5.0, k in -2.0f64..2.0) {
                let eu = OptionSpec::european_call(k, 1.0).unwrap();
                prop_assert!(eval_payoff(&eu, x) >= 0.0);
                let sm = OptionSpec::mollified_call(k, 1.0, 0.04).unwrap();
                prop_assert!(eval_payoff(&sm, x) >= 0.0);
                let uo = OptionSpec::up_and_out_call(k, k + 1.0, 1.0).unwrap();
                prop_assert!(eval_payoff(&uo, x) >= 0.0);
            }

            #[test]
            fn knock_out_payoff_vanishes_at_barriers(k in -1.0f64..1.0, w in 0.05f64..2.0) {
                let db = OptionSpec::double_barrier_call(k, k - w, k + w, 1.0).unwrap();
                prop_assert_eq!(eval_payoff(&db, k - w), 0.0);
                prop_assert_eq!(eval_payoff(&db, k + w), 0.0);
                let uo = OptionSpec::up_and_out_call(k, k + w, 1.0).unwrap();
                prop_assert_eq!(eval_payoff(&uo, k + w), 0.0);
            }
        }
    }
}
