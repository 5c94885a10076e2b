use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use specvol::calibration::{calibrate, implied_vol, read_quotes_file};
use specvol::config::{
    fmt_sig, read_json, read_market_params, read_option_spec, round_json, GlobalConfig,
    OutputFormat,
};
use specvol::groupparams::{group_parameters, ModelSpec, SVModelPrimitives};
use specvol::montecarlo::{epsilon_convergence_study, FactorStart, SimConfig};
use specvol::perturbation::{matrix_elements_with, FirstOrderEigen};
use specvol::pricing::barrier::HalfLine;
use specvol::pricing::bs::bs_vega;
use specvol::pricing::{PriceBreakdown, PriceWarning, Pricer};
use specvol::spectral::{eigenpair, SpectralIndex};
use specvol::{Endpoint, Interval, MarketParams, SpecVolError, SpectrumCase};

#[derive(Parser)]
#[command(name = "specvol", version, about = "Option prices under fast mean-reverting stochastic volatility")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price one contract; prints the breakdown as JSON.
    Price(PriceArgs),
    /// Price over a grid of spots or strikes; prints CSV.
    Sweep(SweepArgs),
    /// Fit the implied-vol skew and recover the group parameters.
    Calibrate(CalibrateArgs),
    /// Group parameters of a volatility model.
    GroupParams(GroupArgs),
    /// Monte Carlo check of the asymptotic price over a list of eps.
    McValidate(McArgs),
    /// Eigenvalue tables and double-integral integrands as CSV.
    BasisDump(DumpArgs),
}

#[derive(Args)]
struct ContractArgs {
    /// Option spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Market parameter JSON.
    #[arg(long)]
    params: PathBuf,
    /// Override V2^eps from the parameter file.
    #[arg(long, allow_hyphen_values = true)]
    v2_eps: Option<f64>,
    /// Override V3^eps from the parameter file.
    #[arg(long, allow_hyphen_values = true)]
    v3_eps: Option<f64>,
}

impl ContractArgs {
    fn load(&self) -> Result<(specvol::OptionSpec, MarketParams), SpecVolError> {
        let spec = read_option_spec(&self.spec)?;
        let p = read_market_params(&self.params)?;
        let p = p.with_group(self.v2_eps.unwrap_or(p.v2_eps), self.v3_eps.unwrap_or(p.v3_eps));
        p.validate()?;
        Ok((spec, p))
    }
}

#[derive(Args)]
struct PriceArgs {
    #[command(flatten)]
    contract: ContractArgs,
    /// Multiply by e^{-mu t}.
    #[arg(long)]
    discounted: bool,
    /// Log-spot.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "spot")]
    x: Option<f64>,
    #[arg(long)]
    spot: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    contract: ContractArgs,
    #[arg(long)]
    discounted: bool,
    /// a:b:n, n evenly spaced spots from a to b.
    #[arg(long, conflicts_with = "strike_range")]
    spot_range: Option<String>,
    /// a:b:n strikes at a fixed --spot; the option file's k is replaced.
    #[arg(long)]
    strike_range: Option<String>,
    #[arg(long)]
    spot: Option<f64>,
    /// Append the Black-Scholes implied vol of u0 + u1 (strike sweeps).
    #[arg(long)]
    implied_vol: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    quotes: PathBuf,
    #[arg(long)]
    sigma_hist: f64,
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
}

#[derive(Args)]
struct GroupArgs {
    /// Model JSON naming the f preset and OU parameters.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Mean,
    Stationary,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    /// Steps per year; default ceil(50 / eps).
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    eps_list: Vec<f64>,
    #[arg(long, allow_hyphen_values = true, conflicts_with = "spot")]
    x: Option<f64>,
    #[arg(long)]
    spot: Option<f64>,
    /// Initial factor value.
    #[arg(long, value_enum, default_value = "stationary")]
    start: StartArg,
    #[arg(long)]
    no_antithetic: bool,
    /// Also write the convergence table as CSV here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DumpMode {
    /// n, alpha_n, lambda0_n on a finite interval.
    Eigen,
    /// n, lambda0_n, lambda1_n on a finite interval.
    Corrections,
    /// Singular and regularized double-integral integrands on a half line.
    Integrands,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, value_enum, default_value = "eigen")]
    mode: DumpMode,
    #[arg(long)]
    params: PathBuf,
    /// Log-barriers for the eigen tables.
    #[arg(long, allow_hyphen_values = true)]
    l: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r: Option<f64>,
    #[arg(long, default_value_t = 20)]
    n: usize,
    /// Option spec JSON (integrands mode).
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    x: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    u: Vec<f64>,
    /// Grid cells per unit of s.
    #[arg(long, default_value_t = 200)]
    points: usize,
}

struct Ctx {
    cfg: GlobalConfig,
}

impl Ctx {
    fn digits(&self) -> usize {
        self.cfg.output.precision
    }

    fn json<T: Serialize>(&self, v: &T) -> Result<(), SpecVolError> {
        let mut val = serde_json::to_value(v)?;
        round_json(&mut val, self.digits());
        let text = match (&val, self.cfg.output.format) {
            // csv keeps the scalar top-level fields as one header + one row
            (serde_json::Value::Object(o), OutputFormat::Csv) => {
                let cells: Vec<(&String, String)> = o
                    .iter()
                    .filter_map(|(k, v)| match v {
                        serde_json::Value::Number(n) => Some((k, n.to_string())),
                        serde_json::Value::Bool(b) => Some((k, b.to_string())),
                        serde_json::Value::String(t) => Some((k, t.clone())),
                        _ => None,
                    })
                    .collect();
                let head: Vec<&str> = cells.iter().map(|c| c.0.as_str()).collect();
                let row: Vec<&str> = cells.iter().map(|c| c.1.as_str()).collect();
                format!("{}\n{}", head.join(","), row.join(","))
            }
            _ => serde_json::to_string_pretty(&val)?,
        };
        let mut out = std::io::stdout().lock();
        writeln!(out, "{text}")?;
        Ok(())
    }

    fn row(&self, vals: &[f64]) -> String {
        vals.iter()
            .map(|&v| if v.is_nan() { String::new() } else { fmt_sig(v, self.digits()) })
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn warn(w: &PriceWarning, x: f64) {
    let line = serde_json::json!({"level": "warning", "kind": w.kind, "x": x, "message": w.message});
    eprintln!("{line}");
}

fn log_spot(x: Option<f64>, spot: Option<f64>) -> Result<f64, SpecVolError> {
    match (x, spot) {
        (Some(x), _) => Ok(x),
        (None, Some(s)) if s > 0.0 => Ok(s.ln()),
        (None, Some(_)) => Err(SpecVolError::InvalidParams("spot must be positive".into())),
        (None, None) => Err(SpecVolError::InvalidParams("give --x or --spot".into())),
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>, SpecVolError> {
    let bad = || SpecVolError::InvalidGrid(format!("range '{s}' is not a:b:n"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

fn price_cmd(ctx: &Ctx, a: &PriceArgs) -> Result<(), SpecVolError> {
    let (spec, p) = a.contract.load()?;
    let x = log_spot(a.x, a.spot)?;
    let pb = Pricer::new(&spec, &p, &ctx.cfg.pricing())?.price(x, a.discounted)?;
    pb.warnings.iter().for_each(|w| warn(w, x));
    ctx.json(&pb)
}

fn sweep_cmd(ctx: &Ctx, a: &SweepArgs) -> Result<(), SpecVolError> {
    let (spec, p) = a.contract.load()?;
    let pcfg = ctx.cfg.pricing();
    let mut out = String::new();
    if let Some(range) = &a.strike_range {
        let s = a
            .spot
            .ok_or_else(|| SpecVolError::InvalidParams("strike sweeps need --spot".into()))?;
        let x = log_spot(None, Some(s))?;
        let strikes = parse_range(range)?;
        let rows: Vec<(f64, PriceBreakdown, Option<[f64; 2]>)> = strikes
            .par_iter()
            .map(|&kk| {
                if !(kk > 0.0) {
                    return Err(SpecVolError::InvalidGrid("strikes must be positive".into()));
                }
                let mut sp = spec.clone();
                sp.k = kk.ln();
                let pb = Pricer::new(&sp, &p, &pcfg)?.price(x, a.discounted)?;
                let iv = if a.implied_vol {
                    let undiscounted = pb.price * if a.discounted { (p.mu * spec.t).exp() } else { 1.0 };
                    // the first-order price can leave the no-arbitrage band deep in the wings
                    let exact = implied_vol(undiscounted, spec.t, kk, s, p.mu).unwrap_or(f64::NAN);
                    let sigma = p.sigma();
                    let vega = bs_vega(spec.t, x, kk.ln(), p.mu, sigma);
                    let u1 = undiscounted - pb.u0 * if a.discounted { (p.mu * spec.t).exp() } else { 1.0 };
                    Some([exact, sigma + u1 / vega])
                } else {
                    None
                };
                Ok((kk, pb, iv))
            })
            .collect::<Result<_, SpecVolError>>()?;
        out.push_str(if a.implied_vol {
            "strike,u0,u1,price,implied_vol,implied_vol_linear\n"
        } else {
            "strike,u0,u1,price\n"
        });
        for (kk, pb, iv) in &rows {
            pb.warnings.iter().for_each(|w| warn(w, pb.x));
            let mut vals = vec![*kk, pb.u0, pb.u1, pb.price];
            vals.extend(iv.iter().flatten());
            out.push_str(&ctx.row(&vals));
            out.push('\n');
        }
    } else {
        let range = a
            .spot_range
            .as_ref()
            .ok_or_else(|| SpecVolError::InvalidParams("give --spot-range or --strike-range".into()))?;
        let spots = parse_range(range)?;
        if spots.iter().any(|&s| !(s > 0.0)) {
            return Err(SpecVolError::InvalidGrid("spots must be positive".into()));
        }
        let pricer = Pricer::new(&spec, &p, &pcfg)?;
        let rows: Vec<PriceBreakdown> = spots
            .par_iter()
            .map(|&s| pricer.price(s.ln(), a.discounted))
            .collect::<Result<_, SpecVolError>>()?;
        out.push_str("spot,u0,u1,price\n");
        for (s, pb) in spots.iter().zip(&rows) {
            pb.warnings.iter().for_each(|w| warn(w, pb.x));
            out.push_str(&ctx.row(&[*s, pb.u0, pb.u1, pb.price]));
            out.push('\n');
        }
    }
    std::io::stdout().lock().write_all(out.as_bytes())?;
    Ok(())
}

fn calibrate_cmd(ctx: &Ctx, a: &CalibrateArgs) -> Result<(), SpecVolError> {
    let quotes = read_quotes_file(&a.quotes)?;
    let res = calibrate(&quotes, a.sigma_hist, a.mu)?;
    ctx.json(&res)
}

fn group_cmd(ctx: &Ctx, a: &GroupArgs) -> Result<(), SpecVolError> {
    let model: ModelSpec = read_json(&a.model)?;
    let prim = SVModelPrimitives::from_spec(&model, &ctx.cfg.quadrature)?;
    let g = group_parameters(&prim, &ctx.cfg.quadrature)?;
    ctx.json(&serde_json::json!({
        "y_bar": prim.y_bar,
        "upsilon": prim.upsilon,
        "rho": prim.rho,
        "eps": prim.eps,
        "group": g,
    }))
}

fn mc_cmd(ctx: &Ctx, a: &McArgs) -> Result<(), SpecVolError> {
    let spec = read_option_spec(&a.spec)?;
    let model: ModelSpec = read_json(&a.model)?;
    let prim = SVModelPrimitives::from_spec(&model, &ctx.cfg.quadrature)?;
    let x = log_spot(a.x, a.spot)?;
    let sim = SimConfig {
        n_paths: a.paths,
        steps_per_year: a.steps,
        seed: a.seed,
        antithetic: !a.no_antithetic,
        y0: match a.start {
            StartArg::Mean => FactorStart::Mean,
            StartArg::Stationary => FactorStart::Stationary,
        },
        ..Default::default()
    };
    let report = epsilon_convergence_study(&spec, &prim, a.mu, x, &a.eps_list, &sim, &ctx.cfg.pricing())?;
    if report.inconclusive {
        eprintln!(
            "{}",
            serde_json::json!({"level": "warning", "kind": "mc_noise", "message": "an error is within the 95% Monte Carlo band"})
        );
    }
    if let Some(path) = &a.table {
        let mut text = String::from("eps,mc,std_error,u0,u1,asymptotic,error,v2_eps,v3_eps\n");
        for r in &report.rows {
            text.push_str(&ctx.row(&[r.eps, r.mc.mean, r.mc.std_error, r.u0, r.u1, r.asymptotic, r.error, r.v2_eps, r.v3_eps]));
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }
    ctx.json(&report)
}

fn dump_cmd(ctx: &Ctx, a: &DumpArgs) -> Result<(), SpecVolError> {
    let p = read_market_params(&a.params)?;
    let mut out = String::new();
    match a.mode {
        DumpMode::Eigen | DumpMode::Corrections => {
            let (Some(l), Some(r)) = (a.l, a.r) else {
                return Err(SpecVolError::InvalidParams("eigen tables need --l and --r".into()));
            };
            let iv = Interval::new(Endpoint::Finite(l), Endpoint::Finite(r))?;
            let me = matrix_elements_with(SpectrumCase::Discrete, &iv, &p, p.v2_eps, p.v3_eps, ctx.cfg.series.coupling_variant)?;
            out.push_str(if a.mode == DumpMode::Eigen { "n,alpha,lambda0\n" } else { "n,lambda0,lambda1\n" });
            for n in 1..=a.n {
                let pair = eigenpair(SpectrumCase::Discrete, &iv, &p, SpectralIndex::Discrete(n))?;
                let vals = if a.mode == DumpMode::Eigen {
                    [n as f64, pair.alpha.re, pair.lambda0.re]
                } else {
                    [n as f64, pair.lambda0.re, FirstOrderEigen::new(&me, pair)?.lambda1.re]
                };
                out.push_str(&ctx.row(&vals));
                out.push('\n');
            }
        }
        DumpMode::Integrands => {
            let path = a
                .spec
                .as_ref()
                .ok_or_else(|| SpecVolError::InvalidParams("integrands need --spec".into()))?;
            let spec = read_option_spec(path)?;
            let hl = HalfLine::for_spec(&spec, &p, &ctx.cfg.pricing())?;
            let ds = hl.integrand_spec(a.x);
            if a.points == 0 {
                return Err(SpecVolError::InvalidGrid("points must be positive".into()));
            }
            out.push_str("u,s,singular,regularized\n");
            for &u in &a.u {
                // cell midpoints on (-1, 1) keep s = 0 off the grid
                let rows: Vec<[f64; 4]> = (0..2 * a.points)
                    .into_par_iter()
                    .map(|i| {
                        let s = -1.0 + (i as f64 + 0.5) / a.points as f64;
                        let v = s * u;
                        let singular = (ds.g)(u, v) * (ds.h)(u, v);
                        let reg = if s > 0.0 { ds.regularized(u, v) } else { f64::NAN };
                        [u, s, singular, reg]
                    })
                    .collect();
                for r in rows {
                    let cells: Vec<String> = r
                        .iter()
                        .map(|&v| if v.is_nan() { String::new() } else { fmt_sig(v, ctx.digits()) })
                        .collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
            }
        }
    }
    std::io::stdout().lock().write_all(out.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), SpecVolError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(SpecVolError::InvalidConfig("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SpecVolError::InvalidConfig(e.to_string()))?;
    }
    let ctx = Ctx {
        cfg: GlobalConfig::from_env()?,
    };
    match &cli.cmd {
        Cmd::Price(a) => price_cmd(&ctx, a),
        Cmd::Sweep(a) => sweep_cmd(&ctx, a),
        Cmd::Calibrate(a) => calibrate_cmd(&ctx, a),
        Cmd::GroupParams(a) => group_cmd(&ctx, a),
        Cmd::McValidate(a) => mc_cmd(&ctx, a),
        Cmd::BasisDump(a) => dump_cmd(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({"level": "error", "message": e.to_string()}));
            ExitCode::from(1)
        }
    }
}
