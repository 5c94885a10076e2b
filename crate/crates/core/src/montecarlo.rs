//! Monte Carlo for the fast mean-reverting model, used as an independent check
//! of the asymptotic prices.
//!
//! Y follows its exact OU transition over each step, sampled jointly with the
//! Brownian increment driving it; X takes an Euler step with f frozen at the
//! left point. Knock-outs use Brownian-bridge survival weights by default.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{eval_payoff, MarketParams, OptionKind, OptionSpec};
use crate::error::{Result, SpecVolError};
use crate::groupparams::{group_parameters, SVModelPrimitives};
use crate::pricing::{price, PricingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMonitoring {
    Discrete,
    #[default]
    BrownianBridge,
}

/// Initial value of the volatility factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FactorStart {
    #[default]
    Mean,
    /// Drawn from the invariant law N(y_bar, upsilon^2), one draw per path.
    Stationary,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Steps per year; `None` picks ceil(50 / eps).
    pub steps_per_year: Option<usize>,
    pub seed: u64,
    pub antithetic: bool,
    pub barrier_monitoring: BarrierMonitoring,
    pub y0: FactorStart,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 100_000,
            steps_per_year: None,
            seed: 7,
            antithetic: true,
            barrier_monitoring: BarrierMonitoring::BrownianBridge,
            y0: FactorStart::Mean,
        }
    }
}

impl SimConfig {
    pub fn steps(&self, t: f64, eps: f64) -> Result<usize> {
        if self.n_paths == 0 {
            return Err(SpecVolError::InvalidConfig("n_paths must be at least 1".into()));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(SpecVolError::InvalidConfig("antithetic sampling needs an even n_paths".into()));
        }
        let spy = match self.steps_per_year {
            Some(0) => return Err(SpecVolError::InvalidConfig("steps_per_year must be positive".into())),
            Some(n) => n as f64,
            None => (50.0 / eps).ceil(),
        };
        let n = (t * spy).ceil().max(1.0) as usize;
        let dt = t / n as f64;
        if dt > eps / 20.0 * (1.0 + 1e-12) {
            return Err(SpecVolError::InvalidConfig(format!(
                "time step {dt:.3e} does not resolve eps = {eps} (needs dt <= eps/20)"
            )));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: [f64; 2],
    pub n_paths: usize,
    pub n_steps: usize,
}

impl McEstimate {
    fn from_moments(sum: f64, sum_sq: f64, n: usize, n_paths: usize, n_steps: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        let se = (var / nf).sqrt();
        McEstimate {
            mean,
            std_error: se,
            ci95: [mean - 1.96 * se, mean + 1.96 * se],
            n_paths,
            n_steps,
        }
    }
}

struct Stepper {
    dt: f64,
    sqrt_dt: f64,
    decay: f64,
    /// J = beta_w W + j_sd Z2
    beta_w: f64,
    j_sd: f64,
    rho: f64,
    rho_bar: f64,
    mu: f64,
    drift_shift: f64,
}

impl Stepper {
    fn new(prim: &SVModelPrimitives, mu: f64, dt: f64) -> Self {
        let eps = prim.eps;
        let decay = (-dt / eps).exp();
        let var_j = prim.upsilon.powi(2) * (1.0 - decay * decay);
        let cov = prim.upsilon * (2.0 * eps).sqrt() * (1.0 - decay);
        let beta_w = cov / dt;
        Stepper {
            dt,
            sqrt_dt: dt.sqrt(),
            decay,
            beta_w,
            j_sd: (var_j - cov * cov / dt).max(0.0).sqrt(),
            rho: prim.rho,
            rho_bar: (1.0 - prim.rho * prim.rho).max(0.0).sqrt(),
            mu,
            drift_shift: prim.upsilon * (2.0 * eps).sqrt(),
        }
    }
}

fn crossing_prob(barrier_gap0: f64, barrier_gap1: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    (-2.0 * barrier_gap0 * barrier_gap1 / var).exp()
}

struct PathOutcome {
    value: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_path(
    spec: &OptionSpec,
    prim: &SVModelPrimitives,
    st: &Stepper,
    n_steps: usize,
    x0: f64,
    y0: f64,
    monitor: BarrierMonitoring,
    normals: &[[f64; 3]],
    sign: f64,
) -> PathOutcome {
    let l = spec.interval.l.finite();
    let r = spec.interval.r.finite();
    let has_barrier = l.is_some() || r.is_some();
    let knock = has_barrier && spec.kind != OptionKind::EuropeanCall;
    let t = spec.t;
    let growth = |time: f64| (st.mu * (t - time)).exp();
    let (mut x, mut y) = (x0, y0);
    let mut alive = 1.0;
    let mut rebate_acc = 0.0;
    if knock && !spec.interval.contains(x0) {
        match spec.kind {
            OptionKind::Rebate => {
                let cash = if l.is_some_and(|l| x0 <= l) { spec.rebate_l } else { spec.rebate_r };
                return PathOutcome { value: growth(0.0) * cash };
            }
            OptionKind::KnockIn => alive = 0.0,
            _ => return PathOutcome { value: 0.0 },
        }
    }
    for (i, z) in normals.iter().enumerate().take(n_steps) {
        let fy = (prim.f)(y);
        let w = sign * st.sqrt_dt * z[0];
        let j = st.beta_w * w + st.j_sd * sign * z[1];
        let wx = st.rho * w + st.rho_bar * st.sqrt_dt * sign * z[2];
        let m = prim.y_bar - st.drift_shift * (prim.lambda_fn)(y);
        let y_next = m + (y - m) * st.decay + j;
        let x_next = x + (st.mu - 0.5 * fy * fy) * st.dt + fy * wx;
        if knock && alive > 0.0 {
            let (mut pl, mut pr) = (0.0, 0.0);
            let outside_l = l.is_some_and(|l| x_next <= l);
            let outside_r = r.is_some_and(|r| x_next >= r);
            match monitor {
                BarrierMonitoring::Discrete => {
                    if outside_l {
                        pl = 1.0;
                    } else if outside_r {
                        pr = 1.0;
                    }
                }
                BarrierMonitoring::BrownianBridge => {
                    if outside_l {
                        pl = 1.0;
                    } else if outside_r {
                        pr = 1.0;
                    } else {
                        let var = fy * fy * st.dt;
                        if let Some(l) = l {
                            pl = crossing_prob(x - l, x_next - l, var);
                        }
                        if let Some(r) = r {
                            pr = crossing_prob(r - x, r - x_next, var);
                        }
                    }
                }
            }
            let survive = (1.0 - pl) * (1.0 - pr);
            if spec.kind == OptionKind::Rebate && pl + pr > 0.0 {
                let hit = alive * (1.0 - survive);
                let cash = (pl * spec.rebate_l + pr * spec.rebate_r) / (pl + pr);
                rebate_acc += hit * cash * growth((i + 1) as f64 * st.dt);
            }
            alive *= survive;
        }
        x = x_next;
        y = y_next;
        if knock && alive == 0.0 && spec.kind != OptionKind::KnockIn && spec.kind != OptionKind::Rebate {
            break;
        }
    }
    let value = match spec.kind {
        OptionKind::EuropeanCall => spec.call_payoff(x),
        OptionKind::KnockIn => spec.call_payoff(x) * (1.0 - if knock { alive } else { 1.0 }),
        OptionKind::Rebate => {
            let inside = if alive > 0.0 { alive * spec.call_payoff(x) } else { 0.0 };
            inside + rebate_acc
        }
        OptionKind::GenericKnockOut if !has_barrier => spec.payoff_fn.as_ref().map_or(0.0, |f| f(x)),
        _ => {
            if alive > 0.0 && spec.interval.contains(x) {
                alive * eval_payoff(spec, x)
            } else {
                0.0
            }
        }
    };
    PathOutcome { value }
}

const CHUNK: usize = 512;

/// Un-discounted Monte Carlo value E[payoff], rebates grown to maturity.
pub fn simulate_price(spec: &OptionSpec, prim: &SVModelPrimitives, mu: f64, x0: f64, cfg: &SimConfig) -> Result<McEstimate> {
    spec.validate()?;
    prim.validate()?;
    if !(mu.is_finite() && x0.is_finite()) {
        return Err(SpecVolError::InvalidParams("mu and x0 must be finite".into()));
    }
    let n_steps = cfg.steps(spec.t, prim.eps)?;
    let st = Stepper::new(prim, mu, spec.t / n_steps as f64);
    let samples = if cfg.antithetic { cfg.n_paths / 2 } else { cfg.n_paths };
    let n_chunks = samples.div_ceil(CHUNK);
    let moments: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut normals = vec![[0.0f64; 3]; n_steps];
            let (mut s, mut s2) = (0.0, 0.0);
            for k in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(k as u64);
                let zy: f64 = StandardNormal.sample(&mut rng);
                for z in normals.iter_mut() {
                    for v in z.iter_mut() {
                        *v = StandardNormal.sample(&mut rng);
                    }
                }
                let y0 = |sign: f64| match cfg.y0 {
                    FactorStart::Mean => prim.y_bar,
                    FactorStart::Stationary => prim.y_bar + sign * prim.upsilon * zy,
                    FactorStart::Fixed(y) => y,
                };
                let mut v = run_path(spec, prim, &st, n_steps, x0, y0(1.0), cfg.barrier_monitoring, &normals, 1.0).value;
                if cfg.antithetic {
                    let w = run_path(spec, prim, &st, n_steps, x0, y0(-1.0), cfg.barrier_monitoring, &normals, -1.0).value;
                    v = 0.5 * (v + w);
                }
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum_sq) = moments.iter().fold((0.0, 0.0), |a, m| (a.0 + m.0, a.1 + m.1));
    Ok(McEstimate::from_moments(sum, sum_sq, samples, cfg.n_paths, n_steps))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub mc: McEstimate,
    pub u0: f64,
    pub u1: f64,
    pub asymptotic: f64,
    pub error: f64,
    pub v2_eps: f64,
    pub v3_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Log-log slope of |MC - asymptotic| against eps.
    pub slope: Option<f64>,
    pub monotone: bool,
    /// Some error is not resolved by the Monte Carlo noise.
    pub inconclusive: bool,
}

pub fn epsilon_convergence_study(
    spec: &OptionSpec,
    prim_template: &SVModelPrimitives,
    mu: f64,
    x0: f64,
    eps_list: &[f64],
    cfg: &SimConfig,
    pricing_cfg: &PricingConfig,
) -> Result<ConvergenceReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(SpecVolError::InvalidConfig("eps_list must be non-empty and strictly decreasing".into()));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let prim = prim_template.with_eps(eps)?;
        let g = group_parameters(&prim, &pricing_cfg.quadrature)?;
        let params = MarketParams::new(mu, g.sigma_sq, g.v2_eps, g.v3_eps)?;
        let pb = price(spec, &params, x0, false, pricing_cfg)?;
        let mc = simulate_price(spec, &prim, mu, x0, cfg)?;
        rows.push(ConvergenceRow {
            eps,
            mc,
            u0: pb.u0,
            u1: pb.u1,
            asymptotic: pb.price,
            error: (mc.mean - pb.price).abs(),
            v2_eps: g.v2_eps,
            v3_eps: g.v3_eps,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
    let inconclusive = rows.iter().any(|r| r.error < 1.96 * r.mc.std_error);
    let slope = log_log_slope(&rows.iter().map(|r| (r.eps, r.error)).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        rows,
        slope,
        monotone,
        inconclusive,
    })
}

/// OLS slope of ln(err) against ln(eps).
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
