//! Adaptive Gauss-Kronrod quadrature on finite and unbounded domains, shifted
//! contours, and the rotated antisymmetric double integral.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpecVolError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub truncation_radius: f64,
    /// Distance of the European contour below the real axis; `None` means c + 2.
    pub contour_offset: Option<f64>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-9,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            truncation_radius: 8.0,
            contour_offset: None,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(SpecVolError::InvalidConfig("tolerances must be positive".into()));
        }
        if self.max_subdivisions == 0 {
            return Err(SpecVolError::InvalidConfig("max_subdivisions must be at least 1".into()));
        }
        if !(self.truncation_radius > 0.0) {
            return Err(SpecVolError::InvalidConfig("truncation_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn with_tol(&self, abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureConfig {
            abs_tol,
            rel_tol,
            ..*self
        }
    }

    fn tolerance(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value)
    }
}

/// Scalar types the integrators accept.
pub trait QuadValue:
    Copy + Send + Sync + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(&self) -> f64;
    fn parts(&self) -> (f64, f64);
    fn from_parts(re: f64, im: f64) -> Self;
    fn is_finite_value(&self) -> bool;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn parts(&self) -> (f64, f64) {
        (*self, 0.0)
    }
    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn parts(&self) -> (f64, f64) {
        (self.re, self.im)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Two real integrands sharing nodes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pair(pub f64, pub f64);

impl Add for Pair {
    type Output = Pair;
    fn add(self, o: Pair) -> Pair {
        Pair(self.0 + o.0, self.1 + o.1)
    }
}

impl Sub for Pair {
    type Output = Pair;
    fn sub(self, o: Pair) -> Pair {
        Pair(self.0 - o.0, self.1 - o.1)
    }
}

impl Mul<f64> for Pair {
    type Output = Pair;
    fn mul(self, w: f64) -> Pair {
        Pair(self.0 * w, self.1 * w)
    }
}

impl QuadValue for Pair {
    fn magnitude(&self) -> f64 {
        self.0.abs().max(self.1.abs())
    }
    fn parts(&self) -> (f64, f64) {
        (self.0, self.1)
    }
    fn from_parts(re: f64, im: f64) -> Self {
        Pair(re, im)
    }
    fn is_finite_value(&self) -> bool {
        self.0.is_finite() && self.1.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    /// [a, +inf)
    Above(f64),
    /// (-inf, b]
    Below(f64),
    Real,
}

/// Neumaier-compensated sum, component-wise for complex values.
pub fn compensated_sum<T: QuadValue>(items: impl IntoIterator<Item = T>) -> T {
    let mut s = [0.0f64; 2];
    let mut comp = [0.0f64; 2];
    for it in items {
        let (re, im) = it.parts();
        for (i, x) in [re, im].into_iter().enumerate() {
            let t = s[i] + x;
            if s[i].abs() >= x.abs() {
                comp[i] += (s[i] - t) + x;
            } else {
                comp[i] += (x - t) + s[i];
            }
            s[i] = t;
        }
    }
    T::from_parts(s[0] + comp[0], s[1] + comp[1])
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_977_095,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One 21-point Kronrod panel: (integral, error estimate).
pub fn gauss_kronrod21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[10];
    let mut resg = T::default();
    let mut fv = [T::default(); 21];
    fv[20] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        resk = resk + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[10] * (fc - mean).magnitude();
    for j in 0..10 {
        resasc += WGK[j] * ((fv[2 * j] - mean).magnitude() + (fv[2 * j + 1] - mean).magnitude());
    }
    let resasc = resasc * half.abs();
    let value = resk * half;
    let mut err = ((resk - resg) * half).magnitude();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let resabs = {
        let mut s = WGK[10] * fc.magnitude();
        for j in 0..10 {
            s += WGK[j] * (fv[2 * j].magnitude() + fv[2 * j + 1].magnitude());
        }
        s * half.abs()
    };
    // floor at roundoff level
    let floor = 50.0 * f64::EPSILON * resabs;
    (value, err.max(floor))
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    seq: usize,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Global adaptive bisection on [a, b], splitting the worst panel first.
pub fn integrate_adaptive<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    if a == b {
        return Ok(Estimate {
            value: T::default(),
            error: 0.0,
            evaluations: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(SpecVolError::InvalidConfig("finite limits required".into()));
    }
    let (v0, e0) = gauss_kronrod21(f, a, b);
    let mut evals = 21;
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Panel {
        a,
        b,
        value: v0,
        error: e0,
        seq,
    });
    let mut finished: Vec<Panel<T>> = Vec::new();
    let mut total_err = e0;
    let mut total_val = v0;
    let mut subdivisions = 1usize;
    loop {
        if !total_val.is_finite_value() {
            return Err(SpecVolError::IntegrationFailure {
                estimate: f64::NAN,
                error: f64::INFINITY,
                evaluations: evals,
            });
        }
        if total_err <= cfg.tolerance(total_val.magnitude()) {
            break;
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(SpecVolError::IntegrationFailure {
                estimate: total_val.parts().0,
                error: total_err,
                evaluations: evals,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b))
            || (worst.b - worst.a).abs() < 1e3 * f64::EPSILON * mid.abs().max(1e-300)
        {
            // cannot be refined further
            finished.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = gauss_kronrod21(f, worst.a, mid);
        let (v2, e2) = gauss_kronrod21(f, mid, worst.b);
        evals += 42;
        subdivisions += 1;
        total_err += e1 + e2 - worst.error;
        total_val = total_val + v1 + v2 - worst.value;
        seq += 1;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            seq,
        });
        seq += 1;
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            seq,
        });
        // re-sum occasionally to limit drift of the running totals
        if subdivisions % 64 == 0 {
            total_err = heap.iter().chain(finished.iter()).map(|p| p.error).sum();
        }
    }
    let mut panels: Vec<Panel<T>> = heap.into_vec();
    panels.extend(finished);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = compensated_sum(panels.iter().map(|p| p.value));
    let error = panels.iter().map(|p| p.error).sum();
    Ok(Estimate {
        value,
        error,
        evaluations: evals,
    })
}

/// Integrate over a chunked half-line starting at `start` going in direction
/// `dir` (+1 or -1), doubling the chunk length until two consecutive chunks
/// fall below `abs_tol`.
fn integrate_half_line<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    start: f64,
    dir: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    let mut lo = 0.0f64;
    let mut len = cfg.truncation_radius;
    let mut parts: Vec<T> = Vec::new();
    let mut error = 0.0;
    let mut evals = 0;
    let mut quiet = 0;
    let chunk_cfg = cfg.with_tol(0.25 * cfg.abs_tol, cfg.rel_tol);
    for _ in 0..64 {
        let hi = lo + len;
        let (a, b) = (start + dir * lo, start + dir * hi);
        let est = integrate_adaptive(f, a.min(b), a.max(b), &chunk_cfg)?;
        let v = est.value;
        evals += est.evaluations;
        error += est.error;
        let small = v.magnitude() < cfg.abs_tol;
        parts.push(v);
        if small {
            quiet += 1;
            if quiet >= 2 {
                return Ok(Estimate {
                    value: compensated_sum(parts),
                    error: error + v.magnitude(),
                    evaluations: evals,
                });
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        len *= 2.0;
    }
    Err(SpecVolError::IntegrationFailure {
        estimate: compensated_sum(parts).parts().0,
        error: f64::INFINITY,
        evaluations: evals,
    })
}

pub fn integrate_1d<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    domain: Domain,
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    match domain {
        Domain::Finite(a, b) => integrate_adaptive(f, a, b, cfg),
        Domain::Above(a) => integrate_half_line(f, a, 1.0, cfg),
        Domain::Below(b) => integrate_half_line(f, b, -1.0, cfg),
        Domain::Real => {
            let half = cfg.with_tol(0.5 * cfg.abs_tol, cfg.rel_tol);
            let up = integrate_half_line(f, 0.0, 1.0, &half)?;
            let down = integrate_half_line(f, 0.0, -1.0, &half)?;
            Ok(Estimate {
                value: up.value + down.value,
                error: up.error + down.error,
                evaluations: up.evaluations + down.evaluations,
            })
        }
    }
}

/// Integral of `f(nu_r + i*nu_i)` over real `nu_r`.
pub fn integrate_contour<F: Fn(Complex64) -> Complex64>(
    f: &F,
    nu_i: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate<Complex64>> {
    let g = |x: f64| f(Complex64::new(x, nu_i));
    integrate_1d(&g, Domain::Real, cfg)
}

/// Same integral restricted to |nu_r| <= half_width (integrand known to be
/// negligible outside).
pub fn integrate_contour_window<F: Fn(Complex64) -> Complex64>(
    f: &F,
    nu_i: f64,
    half_width: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate<Complex64>> {
    let g = |x: f64| f(Complex64::new(x, nu_i));
    integrate_adaptive(&g, -half_width, half_width, cfg)
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Fixed n-point Gauss-Legendre rule on [a, b].
pub fn gauss_legendre_fixed<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, n: usize) -> T {
    let (x, w) = gauss_legendre(n);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    compensated_sum(x.iter().zip(&w).map(|(&xi, &wi)| f(c + h * xi) * (wi * h)))
}

/// Double integral over the half-plane wedge written in rotated coordinates
/// nu = (u - v)/sqrt2, omega = (u + v)/sqrt2.
pub struct DoubleIntegralSpec<'a> {
    /// H(u, v), antisymmetric in v.
    pub h: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// G(u, v).
    pub g: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    /// If G(u,v) = g(nu) with g negligible past this value, the inner range is
    /// clipped to v >= u - sqrt2 * support.
    pub g_support: Option<f64>,
    /// Relative tolerance of the antisymmetry spot check.
    pub antisym_tol: f64,
}

impl<'a> DoubleIntegralSpec<'a> {
    /// Build from a kernel h(nu, omega) and a decay factor g(nu).
    pub fn from_kernel<H, G>(kernel: H, decay: G, g_support: Option<f64>) -> Self
    where
        H: Fn(f64, f64) -> f64 + Sync + 'a,
        G: Fn(f64) -> f64 + Sync + 'a,
    {
        DoubleIntegralSpec {
            h: Box::new(move |u, v| kernel((u - v) * FRAC_1_SQRT_2, (u + v) * FRAC_1_SQRT_2)),
            g: Box::new(move |u, v| decay((u - v) * FRAC_1_SQRT_2)),
            g_support,
            antisym_tol: 1e-9,
        }
    }

    /// Regularized inner integrand H(u,v)(G(u,v) - G(u,-v)).
    pub fn regularized(&self, u: f64, v: f64) -> f64 {
        let d = (self.g)(u, v) - (self.g)(u, -v);
        if d == 0.0 {
            return 0.0;
        }
        (self.h)(u, v) * d
    }

    fn check_antisymmetry(&self, scale: f64) -> Result<()> {
        for &uf in &[0.3, 1.0, 2.5, 6.0] {
            for &sf in &[0.15, 0.5, 0.85] {
                let u = uf * scale;
                let v = sf * u;
                let a = (self.h)(u, v);
                let b = (self.h)(u, -v);
                if !(a.is_finite() && b.is_finite()) {
                    continue;
                }
                let size = a.abs().max(b.abs()).max(1e-300);
                let defect = (a + b).abs();
                if defect > self.antisym_tol * size && defect > 1e-300 {
                    return Err(SpecVolError::ContractViolation(format!(
                        "H(u,v) + H(u,-v) = {defect:e} at u={u}, v={v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// J = int_0^inf int_0^u H(u,v) (G(u,v) - G(u,-v)) dv du.
///
/// The outer integral is taken in doubling chunks; when the chunk sequence
/// decays geometrically the remaining tail is summed in closed form.
pub fn integrate_double_antisym(spec: &DoubleIntegralSpec<'_>, cfg: &QuadratureConfig) -> Result<Estimate<f64>> {
    spec.check_antisymmetry(cfg.truncation_radius / 4.0)?;
    let inner_cfg = cfg.with_tol(cfg.abs_tol * 1e-2, cfg.rel_tol * 1e-2);
    let inner_evals = std::sync::atomic::AtomicUsize::new(0);
    let inner = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let lo = match spec.g_support {
            Some(s) => (u - std::f64::consts::SQRT_2 * s).max(0.0),
            None => 0.0,
        };
        let f = |v: f64| spec.regularized(u, v);
        match integrate_adaptive(&f, lo, u, &inner_cfg) {
            Ok(e) => {
                inner_evals.fetch_add(e.evaluations, std::sync::atomic::Ordering::Relaxed);
                e.value
            }
            Err(SpecVolError::IntegrationFailure { estimate, .. }) => estimate,
            Err(_) => f64::NAN,
        }
    };
    let mut lo = 0.0;
    let mut len = cfg.truncation_radius;
    let mut chunks: Vec<f64> = Vec::new();
    let mut error = 0.0;
    let mut outer_evals = 0;
    let mut prev_total: Option<f64> = None;
    let chunk_cfg = cfg.with_tol(0.25 * cfg.abs_tol, cfg.rel_tol);
    for _ in 0..40 {
        let hi = lo + len;
        let est = integrate_adaptive(&inner, lo, hi, &chunk_cfg)?;
        outer_evals += est.evaluations;
        error += est.error;
        chunks.push(est.value);
        let partial = compensated_sum(chunks.iter().copied());
        let n = chunks.len();
        let last = chunks[n - 1];
        let mut tail = 0.0;
        if n >= 3 {
            let q1 = chunks[n - 1] / chunks[n - 2];
            let q0 = chunks[n - 2] / chunks[n - 3];
            if q1.is_finite() && q0.is_finite() && q1.abs() < 0.9 && (q1 - q0).abs() < 0.25 {
                tail = last * q1 / (1.0 - q1);
            } else if last.abs() >= cfg.abs_tol {
                tail = f64::NAN;
            }
        }
        let total = partial + if tail.is_nan() { 0.0 } else { tail };
        let tol = cfg.tolerance(total.abs());
        if last.abs() < 0.5 * cfg.abs_tol && n >= 2 && chunks[n - 2].abs() < cfg.abs_tol {
            return Ok(Estimate {
                value: partial,
                error: error + last.abs(),
                evaluations: outer_evals + inner_evals.load(std::sync::atomic::Ordering::Relaxed),
            });
        }
        if let Some(pt) = prev_total {
            if !tail.is_nan() && n >= 4 && (total - pt).abs() < tol {
                return Ok(Estimate {
                    value: total,
                    error: error + (total - pt).abs(),
                    evaluations: outer_evals + inner_evals.load(std::sync::atomic::Ordering::Relaxed),
                });
            }
        }
        prev_total = if tail.is_nan() { None } else { Some(total) };
        lo = hi;
        len *= 2.0;
    }
    Err(SpecVolError::IntegrationFailure {
        estimate: compensated_sum(chunks.iter().copied()),
        error: f64::INFINITY,
        evaluations: outer_evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn analytic_benchmarks() {
        let e = integrate_1d(&|x: f64| (-x).exp(), Domain::Above(0.0), &cfg()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9, "{}", e.value);
        let e = integrate_1d(&|x: f64| x.sin(), Domain::Finite(0.0, PI), &cfg()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-12);
        let e = integrate_1d(&|x: f64| (-x * x).exp(), Domain::Real, &cfg()).unwrap();
        assert!((e.value - PI.sqrt()).abs() < 1e-9);
        let e = integrate_1d(&|x: f64| x.exp(), Domain::Below(0.0), &cfg()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn kinked_and_singular_integrands() {
        let e = integrate_1d(&|x: f64| (x - 0.3).abs(), Domain::Finite(-1.0, 1.0), &cfg()).unwrap();
        assert!((e.value - (1.3 * 1.3 + 0.7 * 0.7) / 2.0).abs() < 1e-10);
        let e = integrate_1d(&|x: f64| 1.0 / x.sqrt(), Domain::Finite(0.0, 1.0), &cfg()).unwrap();
        assert!((e.value - 2.0).abs() < 1e-7);
    }

    #[test]
    fn reports_failure_with_estimate() {
        let tight = QuadratureConfig {
            max_subdivisions: 3,
            ..cfg()
        };
        let r = integrate_1d(&|x: f64| (50.0 * x).sin(), Domain::Finite(0.0, 30.0), &tight);
        match r {
            Err(SpecVolError::IntegrationFailure { error, .. }) => assert!(error > 0.0),
            other => panic!("expected failure, got {other:?}"),
        }
        let r = integrate_1d(&|_x: f64| 1.0, Domain::Above(0.0), &cfg());
        assert!(matches!(r, Err(SpecVolError::IntegrationFailure { .. })));
    }

    #[test]
    fn deterministic() {
        let f = |x: f64| (3.0 * x).cos() * (-0.1 * x * x).exp();
        let a = integrate_1d(&f, Domain::Real, &cfg()).unwrap();
        let b = integrate_1d(&f, Domain::Real, &cfg()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn contour_gaussian_and_zero() {
        let f = |z: Complex64| (-z * z).exp();
        for nu_i in [-2.0, 0.0, 1.5] {
            let e = integrate_contour(&f, nu_i, &cfg()).unwrap();
            assert!((e.value - Complex64::new(PI.sqrt(), 0.0)).norm() < 1e-8, "{nu_i}: {}", e.value);
        }
        let e = integrate_contour(&|_z: Complex64| Complex64::new(0.0, 0.0), 1.0, &cfg()).unwrap();
        assert_eq!(e.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let m14: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((m14 - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn double_antisym_trivial_kernel() {
        let spec = DoubleIntegralSpec {
            h: Box::new(|u: f64, v: f64| v * (-u * u - v * v).exp()),
            g: Box::new(|_u, _v| 1.0),
            g_support: None,
            antisym_tol: 1e-12,
        };
        let e = integrate_double_antisym(&spec, &cfg()).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn double_antisym_matches_naive_grid() {
        let spec = DoubleIntegralSpec {
            h: Box::new(|u: f64, v: f64| v * (-u * u - v * v).exp()),
            g: Box::new(|_u, v: f64| v.exp()),
            g_support: None,
            antisym_tol: 1e-12,
        };
        let j = integrate_double_antisym(&spec, &cfg()).unwrap().value;
        // naive: integrate H*G over the wedge |v| < u directly, skipping v near 0
        let c = cfg().with_tol(1e-12, 1e-11);
        let outer = |u: f64| {
            let f = |v: f64| v * (-u * u - v * v).exp() * v.exp();
            let pos = integrate_adaptive(&f, 0.0, u, &c).unwrap().value;
            let neg = integrate_adaptive(&f, -u, 0.0, &c).unwrap().value;
            pos + neg
        };
        let naive = integrate_adaptive(&outer, 0.0, 12.0, &c).unwrap().value;
        assert!((j - naive).abs() < 1e-9 * naive.abs().max(1.0), "{j} vs {naive}");
    }

    #[test]
    fn double_antisym_rejects_symmetric_kernel() {
        let spec = DoubleIntegralSpec {
            h: Box::new(|u: f64, v: f64| (-u * u - v * v).exp()),
            g: Box::new(|_u, v: f64| v.exp()),
            g_support: None,
            antisym_tol: 1e-9,
        };
        assert!(matches!(
            integrate_double_antisym(&spec, &cfg()),
            Err(SpecVolError::ContractViolation(_))
        ));
    }

    #[test]
    fn geometric_tail_extrapolation() {
        // H = sign(v)/(1+u)^3 and G = 1 + v/(1+u): J = int_0^inf u^2/(1+u)^4 du = 1/3,
        // with an algebraic outer tail.
        let spec = DoubleIntegralSpec {
            h: Box::new(|u: f64, v: f64| v.signum() / (1.0 + u).powi(3)),
            g: Box::new(|u: f64, v: f64| 1.0 + v / (1.0 + u)),
            g_support: None,
            antisym_tol: 1e-12,
        };
        let e = integrate_double_antisym(&spec, &cfg()).unwrap();
        assert!((e.value - 1.0 / 3.0).abs() < 1e-6, "{}", e.value);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]
            #[test]
            fn polynomial_exact(a in -3.0f64..0.0, w in 0.1f64..4.0, c3 in -2.0f64..2.0, c1 in -2.0f64..2.0) {
                let b = a + w;
                let f = |x: f64| c3 * x * x * x + c1 * x;
                let exact = c3 * (b.powi(4) - a.powi(4)) / 4.0 + c1 * (b * b - a * a) / 2.0;
                let e = integrate_adaptive(&f, a, b, &QuadratureConfig::default()).unwrap();
                prop_assert!((e.value - exact).abs() < 1e-12 * (1.0 + exact.abs()));
            }

            #[test]
            fn contour_shift_invariance(m in -1.0f64..1.0, s in 0.5f64..2.0, y1 in -2.0f64..0.0, y2 in 0.0f64..2.0) {
                let f = |z: Complex64| (-(z - m) * (z - m) / (s * s)).exp();
                let a = integrate_contour(&f, y1, &QuadratureConfig::default()).unwrap().value;
                let b = integrate_contour(&f, y2, &QuadratureConfig::default()).unwrap().value;
                prop_assert!((a - b).norm() < 1e-7);
            }
        }
    }
}
