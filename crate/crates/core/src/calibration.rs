//! Implied volatilities, the affine LMMR fit and recovery of the group
//! parameters.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpecVolError};
use crate::pricing::bs::{bs_reference, bs_vega};

pub const VOL_MIN: f64 = 1e-4;
pub const VOL_MAX: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteKind {
    /// Present-value call price.
    Price,
    Iv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quote {
    pub maturity: f64,
    pub strike: f64,
    pub spot: f64,
    pub price_or_iv: f64,
    #[serde(rename = "type")]
    pub kind: QuoteKind,
}

impl Quote {
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0 && self.strike > 0.0 && self.spot > 0.0) {
            return Err(SpecVolError::InvalidParams(format!("quote needs T, K, S > 0: {self:?}")));
        }
        if !self.price_or_iv.is_finite() {
            return Err(SpecVolError::InvalidParams("quote value must be finite".into()));
        }
        Ok(())
    }

    pub fn lmmr(&self) -> f64 {
        (self.strike / self.spot).ln() / self.maturity
    }
}

/// Black-Scholes vol reproducing an un-discounted call price.
pub fn implied_vol(price: f64, t: f64, k: f64, s: f64, mu: f64) -> Result<f64> {
    if !(t > 0.0 && k > 0.0 && s > 0.0) {
        return Err(SpecVolError::InvalidParams("implied vol needs t, K, S > 0".into()));
    }
    let (x, lk) = (s.ln(), k.ln());
    let fwd = s * (mu * t).exp();
    let intrinsic = (fwd - k).max(0.0);
    if !(price > intrinsic) {
        return Err(SpecVolError::NoSolution(format!("price {price} at or below intrinsic {intrinsic}")));
    }
    if !(price < fwd) {
        return Err(SpecVolError::NoSolution(format!("price {price} at or above the forward {fwd}")));
    }
    let f = |v: f64| bs_reference(t, x, lk, mu, v) - price;
    let (mut lo, mut hi) = (VOL_MIN, VOL_MAX);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(SpecVolError::NoSolution(format!(
            "price {price} outside the vol bracket [{VOL_MIN}, {VOL_MAX}]"
        )));
    }
    let mut v = 0.5 * (lo + hi).min(1.0);
    for _ in 0..200 {
        let fv = f(v);
        if fv == 0.0 {
            return Ok(v);
        }
        if fv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let vega = bs_vega(t, x, lk, mu, v);
        let newton = v - fv / vega;
        let next = if vega > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - v).abs() < 1e-14 * v.max(1e-3) || hi - lo < 1e-15 {
            return Ok(next);
        }
        v = next;
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmrFit {
    pub a: f64,
    pub b: f64,
    pub residuals: Vec<f64>,
}

/// OLS of I = b + a LMMR.
pub fn fit_lmmr(points: &[(f64, f64)]) -> Result<LmmrFit> {
    let n = points.len();
    if n < 2 {
        return Err(SpecVolError::DegenerateFit("need at least two quotes".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let scale = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max).max(1.0);
    if sxx <= 1e-24 * scale * scale * n as f64 {
        return Err(SpecVolError::DegenerateFit("all LMMR values coincide".into()));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let residuals = points.iter().map(|p| p.1 - (b + a * p.0)).collect();
    Ok(LmmrFit { a, b, residuals })
}

/// (a, b) implied by the model parameters.
pub fn forward_lmmr(sigma_sq: f64, v2_eps: f64, v3_eps: f64, mu: f64) -> Result<(f64, f64)> {
    let s2 = sigma_sq + 2.0 * v2_eps;
    if !(s2 > 0.0) {
        return Err(SpecVolError::InvalidParams("sigma^2 + 2 V2 must be positive".into()));
    }
    let ss = s2.sqrt();
    let a = v3_eps / ss.powi(3);
    let b = ss + v3_eps / (2.0 * ss) * (1.0 - 2.0 * mu / s2);
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveredParams {
    pub v2_eps: f64,
    pub v3_eps: f64,
    pub sigma_star: f64,
}

/// Invert the (a, b) relations. With V3 = a s^3 the b equation becomes the
/// quadratic (a/2) s^2 + s - (b + a mu) = 0. The root continuous at a = 0 is
/// preferred; the map is two-to-one once 1 + a s < 0, and there the other root
/// is used only if it is the sole one inside the bracket.
pub fn recover_params(a: f64, b: f64, sigma_sq_hist: f64, mu: f64) -> Result<RecoveredParams> {
    if !(sigma_sq_hist > 0.0) {
        return Err(SpecVolError::InvalidParams("historical sigma^2 must be positive".into()));
    }
    let q = b + a * mu;
    let disc = 1.0 + 2.0 * a * q;
    if !(disc >= 0.0) || !q.is_finite() {
        return Err(SpecVolError::CalibrationFailure(format!(
            "no real sigma* for a = {a}, b = {b}, mu = {mu} (discriminant {disc})"
        )));
    }
    let root = 1.0 + disc.sqrt();
    let mut roots = vec![2.0 * q / root];
    if a != 0.0 {
        roots.push(-root / a);
    }
    let s = roots
        .into_iter()
        .find(|s| (VOL_MIN..=VOL_MAX).contains(s))
        .ok_or_else(|| {
            SpecVolError::CalibrationFailure(format!(
                "no sigma* in [{VOL_MIN}, {VOL_MAX}] for a = {a}, b = {b}, mu = {mu}"
            ))
        })?;
    Ok(RecoveredParams {
        v2_eps: 0.5 * (s * s - sigma_sq_hist),
        v3_eps: a * s.powi(3),
        sigma_star: s,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub a: f64,
    pub b: f64,
    pub sigma_star: f64,
    pub v2_eps: f64,
    pub v3_eps: f64,
    pub residuals: Vec<f64>,
}

/// Implied vol of one quote; prices are present values.
pub fn quote_vol(q: &Quote, mu: f64) -> Result<f64> {
    q.validate()?;
    match q.kind {
        QuoteKind::Iv => {
            if !(q.price_or_iv >= VOL_MIN && q.price_or_iv <= VOL_MAX) {
                return Err(SpecVolError::InvalidParams(format!("implied vol {} out of range", q.price_or_iv)));
            }
            Ok(q.price_or_iv)
        }
        QuoteKind::Price => implied_vol(q.price_or_iv * (mu * q.maturity).exp(), q.maturity, q.strike, q.spot, mu),
    }
}

pub fn calibrate(quotes: &[Quote], sigma_sq_hist: f64, mu: f64) -> Result<CalibrationResult> {
    let vols: Vec<f64> = quotes.par_iter().map(|q| quote_vol(q, mu)).collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = quotes.iter().zip(&vols).map(|(q, &v)| (q.lmmr(), v)).collect();
    let fit = fit_lmmr(&pts)?;
    let rec = recover_params(fit.a, fit.b, sigma_sq_hist, mu)?;
    Ok(CalibrationResult {
        a: fit.a,
        b: fit.b,
        sigma_star: rec.sigma_star,
        v2_eps: rec.v2_eps,
        v3_eps: rec.v3_eps,
        residuals: fit.residuals,
    })
}

pub fn read_quotes<R: std::io::Read>(reader: R) -> Result<Vec<Quote>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        let q: Quote = rec?;
        q.validate()?;
        out.push(q);
    }
    Ok(out)
}

pub fn read_quotes_file(path: &Path) -> Result<Vec<Quote>> {
    read_quotes(std::fs::File::open(path)?)
}

pub fn write_quotes<W: std::io::Write>(writer: W, quotes: &[Quote]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for q in quotes {
        w.serialize(q)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn implied_vol_round_trip() {
        let (t, k, s, mu): (f64, f64, f64, f64) = (0.5, 2.0, 2.0, 0.05);
        let p = bs_reference(t, s.ln(), k.ln(), mu, 0.34);
        assert_abs_diff_eq!(implied_vol(p, t, k, s, mu).unwrap(), 0.34, epsilon = 1e-10);
    }

    #[test]
    fn implied_vol_bounds() {
        let (t, k, s, mu): (f64, f64, f64, f64) = (0.5, 1.5, 2.0, 0.05);
        let intrinsic = s * (mu * t).exp() - k;
        assert!(matches!(implied_vol(intrinsic, t, k, s, mu), Err(SpecVolError::NoSolution(_))));
        assert!(matches!(implied_vol(s * (mu * t).exp(), t, k, s, mu), Err(SpecVolError::NoSolution(_))));
    }

    #[test]
    fn exact_line_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..7).map(|i| (i as f64 * 0.1 - 0.3, 0.3 - 0.05 * (i as f64 * 0.1 - 0.3))).collect();
        let fit = fit_lmmr(&pts).unwrap();
        assert_abs_diff_eq!(fit.a, -0.05, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.b, 0.3, epsilon = 1e-14);
        assert!(matches!(fit_lmmr(&[(0.1, 0.2), (0.1, 0.3)]), Err(SpecVolError::DegenerateFit(_))));
    }

    #[test]
    fn recovery_special_cases() {
        let r = recover_params(0.0, 0.3, 0.09, 0.05).unwrap();
        assert_eq!(r.sigma_star, 0.3);
        assert_eq!(r.v3_eps, 0.0);
        assert_abs_diff_eq!(r.v2_eps, 0.0, epsilon = 1e-17);
        let r = recover_params(0.0, 0.4, 0.09, 0.05).unwrap();
        assert_abs_diff_eq!(r.v2_eps, (0.16 - 0.09) / 2.0, epsilon = 1e-16);
        assert!(matches!(recover_params(-10.0, 3.0, 0.09, 0.05), Err(SpecVolError::CalibrationFailure(_))));
    }

    #[test]
    fn recovered_parameters_satisfy_the_relations() {
        let (a, b, mu) = (-0.07, 0.35, 0.05);
        let r = recover_params(a, b, 0.1156, mu).unwrap();
        let s = r.sigma_star;
        assert_abs_diff_eq!(r.v3_eps / s.powi(3), a, epsilon = 1e-15);
        assert_abs_diff_eq!(s + r.v3_eps / (2.0 * s) * (1.0 - 2.0 * mu / (s * s)), b, epsilon = 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let qs = vec![
            Quote { maturity: 0.5, strike: 2.0, spot: 2.0, price_or_iv: 0.2, kind: QuoteKind::Price },
            Quote { maturity: 1.0, strike: 2.2, spot: 2.0, price_or_iv: 0.31, kind: QuoteKind::Iv },
        ];
        let mut buf = Vec::new();
        write_quotes(&mut buf, &qs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("maturity,strike,spot,price_or_iv,type"));
        assert_eq!(read_quotes(buf.as_slice()).unwrap(), qs);
    }

    proptest! {
        #[test]
        fn algebraic_round_trip(sig in 0.1f64..0.6, v2 in -0.05f64..0.05, v3 in -0.05f64..0.05, mu in -0.02f64..0.1) {
            prop_assume!(sig * sig + 2.0 * v2 > 0.0);
            let (a, b) = forward_lmmr(sig * sig, v2, v3, mu).unwrap();
            // invertible branch only
            prop_assume!(1.0 + a * (sig * sig + 2.0 * v2).sqrt() > 0.0);
            let r = recover_params(a, b, sig * sig, mu).unwrap();
            prop_assert!((r.v2_eps - v2).abs() < 1e-10);
            prop_assert!((r.v3_eps - v3).abs() < 1e-10);
            prop_assert!((r.sigma_star - (sig * sig + 2.0 * v2).sqrt()).abs() < 1e-10);
        }

        #[test]
        fn implied_vol_inverts_bs(v in 0.05f64..1.5, m in -0.4f64..0.4, t in 0.1f64..2.0) {
            let (s, mu): (f64, f64) = (2.0, 0.03);
            let k = s * m.exp();
            let p = bs_reference(t, s.ln(), k.ln(), mu, v);
            prop_assume!(p - (s * (mu * t).exp() - k).max(0.0) > 1e-10);
            let iv = implied_vol(p, t, k, s, mu).unwrap();
            prop_assert!((iv - v).abs() < 1e-8, "{} vs {}", iv, v);
        }
    }
}
