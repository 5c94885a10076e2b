//! Black-Scholes call in log variables, un-discounted.

use crate::special::{norm_cdf, norm_pdf};

/// e^{x + mu t} N(d1) - e^k N(d2) with total variance `var`.
pub fn bs_call_total_variance(x: f64, k: f64, mu: f64, t: f64, var: f64) -> f64 {
    let fwd = x + mu * t;
    if var <= 0.0 {
        return (fwd.exp() - k.exp()).max(0.0);
    }
    let s = var.sqrt();
    let d1 = (fwd - k) / s + 0.5 * s;
    let d2 = d1 - s;
    fwd.exp() * norm_cdf(d1) - k.exp() * norm_cdf(d2)
}

/// Un-discounted Black-Scholes call value.
pub fn bs_reference(t: f64, x: f64, k: f64, mu: f64, sigma: f64) -> f64 {
    bs_call_total_variance(x, k, mu, t, sigma * sigma * t.max(0.0))
}

/// d/d(sigma) of the un-discounted call.
pub fn bs_vega(t: f64, x: f64, k: f64, mu: f64, sigma: f64) -> f64 {
    let s = sigma * t.sqrt();
    if s <= 0.0 {
        return 0.0;
    }
    let fwd = x + mu * t;
    let d1 = (fwd - k) / s + 0.5 * s;
    fwd.exp() * norm_pdf(d1) * t.sqrt()
}

/// t * A1 applied to the call with total variance `var`:
/// t F phi(d1)/s [V2 + V3 (1 - d1/s)], F = e^{x + mu t}, s = sqrt(var).
pub fn fps_correction(t: f64, x: f64, k: f64, mu: f64, var: f64, v2: f64, v3: f64) -> f64 {
    let s = var.sqrt();
    let fwd = x + mu * t;
    let d1 = (fwd - k) / s + 0.5 * s;
    t * fwd.exp() * norm_pdf(d1) / s * (v2 + v3 * (1.0 - d1 / s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn limits() {
        let (x, mu, t, s) = (0.3, 0.05, 0.5, 0.34);
        let deep = bs_reference(t, x, -30.0, mu, s);
        assert!((deep - ((x + mu * t).exp() - (-30.0f64).exp())).abs() < 1e-12);
        let short = bs_reference(1e-12, x, 0.1, mu, s);
        assert!((short - (x.exp() - 0.1f64.exp())).abs() < 1e-9);
        assert!(bs_reference(1e-12, -0.5, 0.1, mu, s) < 1e-12);
    }

    #[test]
    fn figure_reference_value() {
        // S = K = 2, t = 1/2, mu = 0.05, sigma = 0.34: independent evaluation
        let v = bs_reference(0.5, 2f64.ln(), 2f64.ln(), 0.05, 0.34);
        let s = 0.34 * 0.5f64.sqrt();
        let d1 = 0.025 / s + 0.5 * s;
        let manual = 2.0 * 0.025f64.exp() * norm_cdf(d1) - 2.0 * norm_cdf(d1 - s);
        assert!((v - manual).abs() < 1e-15);
        assert!((v - 0.2201).abs() < 5e-4, "{v}");
    }

    #[test]
    fn vega_matches_difference() {
        let (t, x, k, mu, s) = (0.7, 0.1, 0.2, 0.03, 0.25);
        let h = 1e-6;
        let fd = (bs_reference(t, x, k, mu, s + h) - bs_reference(t, x, k, mu, s - h)) / (2.0 * h);
        assert!((fd - bs_vega(t, x, k, mu, s)).abs() < 1e-7);
    }

    #[test]
    fn fps_correction_matches_difference_operator() {
        let (t, x, k, mu, sig) = (0.5, 0.65, 0.69, 0.05, 0.34);
        let var = sig * sig * t;
        let u = |y: f64| bs_call_total_variance(y, k, mu, t, var);
        let h = 1e-3;
        let d1 = (u(x + h) - u(x - h)) / (2.0 * h);
        let d2 = (u(x + h) - 2.0 * u(x) + u(x - h)) / (h * h);
        let d3 = (u(x + 2.0 * h) - 2.0 * u(x + h) + 2.0 * u(x - h) - u(x - 2.0 * h)) / (2.0 * h * h * h);
        let (v2, v3) = (0.02, -0.01);
        let fd = t * (v3 * (d3 - d2) + v2 * (d2 - d1));
        assert!((fd - fps_correction(t, x, k, mu, var, v2, v3)).abs() < 1e-6);
    }
}
