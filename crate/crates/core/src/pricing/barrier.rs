//! Knock-out prices: eigenfunction series on a finite interval, nu-integral on
//! a half line.

use std::sync::Arc;

use num_complex::Complex64;

use super::kernels::{ExpPoly, ExpPolyPiece};
use super::rebate::RebatePhi;
use super::{time_factors, FirstOrderRoute, PricingConfig, RawPrice};
use crate::domain::{classify_spectrum, smoothed_call, Endpoint, Interval, MarketParams, OptionKind, OptionSpec, SpectrumCase};
use crate::error::{Result, SpecVolError};
use crate::perturbation::{eigen_correction, matrix_elements_with, FirstOrderEigen, MatrixElements};
use crate::quadrature::{integrate_1d, integrate_adaptive, integrate_double_antisym, DoubleIntegralSpec, Domain, Pair, QuadratureConfig};
use crate::spectral::{eigenpair, EigenPair, SpectralIndex};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial data multiplied by e^{cx}, in the form the wave integrals need.
#[derive(Clone)]
pub(crate) enum Source {
    Closed(ExpPoly),
    Numeric { f: RealFn, segments: Vec<Domain> },
}

impl Source {
    /// (int f e^{i alpha (x - x_b)}, int (x - x0) f e^{i alpha (x - x_b)}).
    pub(crate) fn wave(&self, alpha: f64, x_b: f64, x0: f64, cfg: &QuadratureConfig) -> Result<(Complex64, Complex64)> {
        match self {
            Source::Closed(p) => Ok(p.wave(alpha, x_b, x0)),
            Source::Numeric { f, segments } => {
                let mut w0 = Complex64::new(0.0, 0.0);
                let mut w1 = Complex64::new(0.0, 0.0);
                for seg in segments {
                    let g = |x: f64| {
                        let v = f(x);
                        if v == 0.0 {
                            return Pair(0.0, 0.0);
                        }
                        let ph = alpha * (x - x_b);
                        Pair(v * ph.cos(), v * ph.sin())
                    };
                    let e0 = integrate_1d(&g, *seg, cfg)?.value;
                    let g1 = |x: f64| g(x) * (x - x0);
                    let e1 = integrate_1d(&g1, *seg, cfg)?.value;
                    w0 += Complex64::new(e0.0, e0.1);
                    w1 += Complex64::new(e1.0, e1.1);
                }
                Ok((w0, w1))
            }
        }
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        match self {
            Source::Closed(p) => p.eval(x),
            Source::Numeric { f, .. } => f(x),
        }
    }
}

fn bounds(interval: &Interval) -> (f64, f64) {
    (
        interval.l.finite().unwrap_or(f64::NEG_INFINITY),
        interval.r.finite().unwrap_or(f64::INFINITY),
    )
}

/// Domains covering the interval, split at the given interior points.
fn segments(interval: &Interval, cuts: &[f64]) -> Vec<Domain> {
    let (lo, hi) = bounds(interval);
    let mut pts: Vec<f64> = cuts.iter().copied().filter(|&p| p > lo && p < hi).collect();
    pts.sort_by(f64::total_cmp);
    let mut edges = vec![lo];
    edges.extend(pts);
    edges.push(hi);
    edges
        .windows(2)
        .map(|w| match (w[0].is_finite(), w[1].is_finite()) {
            (true, true) => Domain::Finite(w[0], w[1]),
            (true, false) => Domain::Above(w[0]),
            (false, true) => Domain::Below(w[1]),
            (false, false) => Domain::Real,
        })
        .collect()
}

/// e^{cx} (e^x - e^k)^+ on [max(l, k), r].
fn call_pieces(interval: &Interval, k: f64, c: f64) -> Result<Vec<ExpPolyPiece>> {
    let (lo, hi) = bounds(interval);
    if !hi.is_finite() {
        return Err(SpecVolError::UnsupportedCase(
            "call payoff on a lower-barrier half line is not in the weighted L2 space".into(),
        ));
    }
    let a = lo.max(k);
    if a >= hi {
        return Ok(Vec::new());
    }
    Ok(vec![ExpPolyPiece {
        a,
        b: hi,
        terms: vec![(c + 1.0, [1.0, 0.0, 0.0]), (c, [-k.exp(), 0.0, 0.0])],
    }])
}

/// Sources for the knock-out part of a spec: the payoff data and, for
/// rebates, the extra zeroth-order data feeding the first-order term.
pub(crate) fn sources_for(spec: &OptionSpec, params: &MarketParams) -> Result<(Source, Option<Source>)> {
    let case = classify_spectrum(&spec.interval)?;
    let c = params.c();
    if case == SpectrumCase::ContinuousFullLine {
        return Err(SpecVolError::UnsupportedCase("full line has no knock-out series".into()));
    }
    if spec.kind == OptionKind::GenericKnockOut {
        let h = spec
            .payoff_fn
            .clone()
            .ok_or_else(|| SpecVolError::InvalidSpec("generic knock-out needs a payoff function".into()))?;
        let f: RealFn = Arc::new(move |x: f64| {
            let v = h(x);
            if v == 0.0 {
                0.0
            } else {
                (c * x).exp() * v
            }
        });
        return Ok((
            Source::Numeric {
                f,
                segments: segments(&spec.interval, &[]),
            },
            None,
        ));
    }
    if case == SpectrumCase::ContinuousHalfLineLower {
        return Err(SpecVolError::UnsupportedCase(
            "call payoff with only a lower barrier is not supported".into(),
        ));
    }
    let (k, interval) = (spec.k, spec.interval);
    let rebate = if spec.kind == OptionKind::Rebate {
        Some(RebatePhi::new(spec, params)?)
    } else {
        None
    };
    let main = match spec.smoothing {
        Some(d2) => {
            let phi = rebate.clone();
            let (lo, hi) = bounds(&interval);
            let f: RealFn = Arc::new(move |x: f64| {
                if x <= lo || x >= hi {
                    return 0.0;
                }
                let mut v = smoothed_call(x, k, d2);
                if let Some(p) = &phi {
                    v -= p.phi0(x);
                }
                (c * x).exp() * v
            });
            Source::Numeric {
                f,
                segments: segments(&interval, &[k]),
            }
        }
        None => {
            let mut pieces = call_pieces(&interval, k, c)?;
            if let Some(p) = &rebate {
                pieces.push(p.minus_phi0_piece());
            }
            Source::Closed(ExpPoly { pieces })
        }
    };
    let extra = rebate.map(|p| Source::Closed(ExpPoly {
        pieces: vec![p.minus_phi1_piece()],
    }));
    Ok((main, extra))
}

/// (A0, A1) for one eigenfunction.
pub(crate) fn mode_coeffs(
    src: &Source,
    extra: Option<&Source>,
    me: &MatrixElements,
    pair: &EigenPair,
    cfg: &QuadratureConfig,
) -> Result<(f64, f64)> {
    let x0 = me.correction_anchor();
    let alpha = pair.alpha_re();
    let (w0, w1) = src.wave(alpha, pair.anchor, x0, cfg)?;
    let s2 = me.sigma_sq;
    let n = pair.norm;
    let a0 = 2.0 * n / s2 * w0.im;
    let kq = me.coupling(pair.index)?;
    let mut a1 = -(2.0 * n / (s2 * s2)) * (kq * w1.im - 2.0 * me.v3 * alpha * w0.re);
    if let Some(e) = extra {
        let (e0, _) = e.wave(alpha, pair.anchor, x0, cfg)?;
        a1 += 2.0 * n / s2 * e0.im;
    }
    Ok((a0, a1))
}

fn matrix(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<MatrixElements> {
    let case = classify_spectrum(&spec.interval)?;
    matrix_elements_with(case, &spec.interval, params, params.v2_eps, params.v3_eps, cfg.coupling_variant)
}

pub(crate) fn mode_coefficients_for(
    spec: &OptionSpec,
    params: &MarketParams,
    index: SpectralIndex,
    cfg: &PricingConfig,
) -> Result<(f64, f64)> {
    spec.validate()?;
    let (src, extra) = sources_for(spec, params)?;
    let me = matrix(spec, params, cfg)?;
    let pair = eigenpair(me.case, &spec.interval, params, index)?;
    mode_coeffs(&src, extra.as_ref(), &me, &pair, &cfg.quadrature)
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    pair: EigenPair,
    kappa: f64,
    /// A0 g0
    c0: f64,
    /// A1 g0 + A0 g1
    c1: f64,
}

/// Truncated eigenfunction series on a finite interval.
#[derive(Debug, Clone)]
pub struct DiscreteSeries {
    modes: Vec<Mode>,
    x0: f64,
    tail: f64,
}

impl DiscreteSeries {
    pub fn for_spec(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<Self> {
        let (src, extra) = sources_for(spec, params)?;
        Self::new(&spec.interval, params, spec.t, &src, extra.as_ref(), cfg)
    }

    pub(crate) fn new(
        interval: &Interval,
        params: &MarketParams,
        t: f64,
        src: &Source,
        extra: Option<&Source>,
        cfg: &PricingConfig,
    ) -> Result<Self> {
        let (Endpoint::Finite(l), Endpoint::Finite(r)) = (interval.l, interval.r) else {
            return Err(SpecVolError::InvalidInterval("series needs a finite interval".into()));
        };
        let me = matrix_elements_with(SpectrumCase::Discrete, interval, params, params.v2_eps, params.v3_eps, cfg.coupling_variant)?;
        let c = params.c();
        let env = (-c * l).exp().max((-c * r).exp());
        let len = r - l;
        let mut modes = Vec::new();
        let mut prev = f64::INFINITY;
        for n in 1..=cfg.n_max {
            let pair = eigenpair(SpectrumCase::Discrete, interval, params, SpectralIndex::Discrete(n))?;
            let (a0, a1) = mode_coeffs(src, extra, &me, &pair, &cfg.quadrature)?;
            let fe = FirstOrderEigen::new(&me, pair)?;
            let (g0, g1) = time_factors(pair.lambda0, fe.lambda1, t);
            let mode = Mode {
                pair,
                kappa: fe.kappa,
                c0: a0 * g0.re,
                c1: a1 * g0.re + a0 * g1.re,
            };
            let bound = pair.norm * env * (mode.c0.abs() * (1.0 + 0.5 * mode.kappa.abs() * len) + mode.c1.abs());
            modes.push(mode);
            if bound < cfg.tail_tol && prev < cfg.tail_tol {
                return Ok(DiscreteSeries {
                    modes,
                    x0: me.correction_anchor(),
                    tail: bound + prev,
                });
            }
            prev = bound;
        }
        Err(SpecVolError::TruncationFailure {
            estimate: prev,
            terms: cfg.n_max,
        })
    }

    pub fn terms(&self) -> usize {
        self.modes.len()
    }

    pub fn eval(&self, x: f64) -> RawPrice {
        let mut u0 = 0.0;
        let mut u1 = 0.0;
        for m in &self.modes {
            let psi = m.pair.psi_real(x);
            u0 += m.c0 * psi;
            u1 += (m.c1 + m.c0 * m.kappa * (x - self.x0)) * psi;
        }
        RawPrice {
            u0,
            u1,
            error: self.tail,
            terms: self.modes.len(),
        }
    }
}

/// nu-integral representation on a half line.
#[derive(Clone)]
pub struct HalfLine {
    interval: Interval,
    params: MarketParams,
    me: MatrixElements,
    src: Source,
    t: f64,
    nu_max: f64,
    cfg: PricingConfig,
}

/// Cut-off beyond which the Gaussian factor exp(lambda0 t) is below tol.
pub(crate) fn gaussian_cutoff(sigma_sq_t: f64, tol: f64) -> f64 {
    (2.0 * ((1.0 / tol).ln() + 12.0) / sigma_sq_t).sqrt()
}

impl HalfLine {
    pub fn for_spec(spec: &OptionSpec, params: &MarketParams, cfg: &PricingConfig) -> Result<Self> {
        let (src, extra) = sources_for(spec, params)?;
        if extra.is_some() {
            return Err(SpecVolError::UnsupportedCase("rebates need two barriers".into()));
        }
        let me = matrix(spec, params, cfg)?;
        Ok(HalfLine {
            interval: spec.interval,
            params: *params,
            me,
            src,
            t: spec.t,
            nu_max: gaussian_cutoff(params.sigma_sq * spec.t, cfg.tail_tol),
            cfg: *cfg,
        })
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    fn pair(&self, nu: f64) -> Result<EigenPair> {
        eigenpair(self.me.case, &self.interval, &self.params, SpectralIndex::Real(nu))
    }

    /// A0(nu).
    pub fn a0(&self, nu: f64) -> Result<f64> {
        let p = self.pair(nu)?;
        Ok(mode_coeffs(&self.src, None, &self.me, &p, &self.cfg.quadrature)?.0)
    }

    /// Integrands of u0 and u1 at one nu. With `g1_only` the u1 slot holds
    /// only the A0 g1 Psi0 term.
    fn integrand(&self, nu: f64, x: f64, g1_only: bool) -> Result<Pair> {
        let pair = self.pair(nu)?;
        let (a0, a1) = mode_coeffs(&self.src, None, &self.me, &pair, &self.cfg.quadrature)?;
        let fe = FirstOrderEigen::new(&self.me, pair)?;
        let (g0, g1) = time_factors(pair.lambda0, fe.lambda1, self.t);
        let psi = pair.psi_real(x);
        let u0 = a0 * g0.re * psi;
        let u1 = if g1_only {
            a0 * g1.re * psi
        } else {
            (a1 * g0.re + a0 * g1.re) * psi + a0 * g0.re * fe.psi1(x).re
        };
        Ok(Pair(u0, u1))
    }

    fn single(&self, x: f64, g1_only: bool) -> Result<(Pair, f64, usize)> {
        let failed = std::cell::Cell::new(None);
        let f = |nu: f64| match self.integrand(nu, x, g1_only) {
            Ok(p) => p,
            Err(e) => {
                failed.set(Some(e));
                Pair(0.0, 0.0)
            }
        };
        let est = integrate_adaptive(&f, 0.0, self.nu_max, &self.cfg.quadrature)?;
        if let Some(e) = failed.take() {
            return Err(e);
        }
        Ok((est.value, est.error, est.evaluations))
    }

    /// Antisymmetric kernel h(nu, omega) = A_nu a_{nu,omega} Psi_omega - A_omega a_{omega,nu} Psi_nu.
    pub fn kernel(&self, nu: f64, omega: f64, x: f64) -> f64 {
        let one = |p: f64, q: f64| -> f64 {
            let Ok(corr) = eigen_correction(&self.me, SpectralIndex::Real(p), SpectralIndex::Real(q)) else {
                return 0.0;
            };
            let (Ok(a), Ok(pq)) = (self.a0(p), self.pair(q)) else {
                return f64::NAN;
            };
            a * corr.a1.re * pq.psi_real(x)
        };
        one(nu, omega) - one(omega, nu)
    }

    /// Rotated double-integral integrand H, G at log-spot x.
    pub fn integrand_spec(&self, x: f64) -> DoubleIntegralSpec<'_> {
        let s2t = self.params.sigma_sq * self.t;
        let c = self.params.c();
        let decay = move |nu: f64| (-(0.5 * s2t) * (c * c + nu * nu)).exp();
        DoubleIntegralSpec::from_kernel(move |n, w| self.kernel(n, w, x), decay, Some(self.nu_max))
    }

    /// First-order Psi1 contribution written as the rotated double integral.
    pub fn double_integral(&self, x: f64) -> Result<(f64, f64, usize)> {
        let spec = self.integrand_spec(x);
        let est = integrate_double_antisym(&spec, &self.cfg.quadrature)?;
        Ok((est.value, est.error, est.evaluations))
    }

    pub fn eval(&self, x: f64) -> Result<RawPrice> {
        match self.cfg.first_order_route {
            FirstOrderRoute::ClosedForm => {
                let (v, err, evals) = self.single(x, false)?;
                Ok(RawPrice {
                    u0: v.0,
                    u1: v.1,
                    error: err,
                    terms: evals,
                })
            }
            FirstOrderRoute::DoubleIntegral => {
                let (v, err, evals) = self.single(x, true)?;
                let (j, jerr, jevals) = self.double_integral(x)?;
                Ok(RawPrice {
                    u0: v.0,
                    u1: v.1 + j,
                    error: err + jerr,
                    terms: evals + jevals,
                })
            }
        }
    }

    /// e^{cx} times the initial data, for diagnostics.
    pub fn weighted_data(&self, x: f64) -> f64 {
        self.src.eval(x)
    }
}
