//! File formats shared by the CLI and the bindings: option and parameter JSON,
//! the global config, and number formatting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Endpoint, Interval, MarketParams, OptionKind, OptionSpec};
use crate::error::{Result, SpecVolError};
use crate::perturbation::CouplingVariant;
use crate::pricing::{FirstOrderRoute, PricingConfig};
use crate::quadrature::QuadratureConfig;

pub const CONFIG_ENV: &str = "SPECVOL_CONFIG";

/// Option contract on disk. Levels are logarithmic; a missing or null
/// barrier is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionSpecFile {
    pub kind: OptionKind,
    pub k: f64,
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    pub t: f64,
    #[serde(default)]
    pub rebate_l: f64,
    #[serde(default)]
    pub rebate_r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
}

impl OptionSpecFile {
    pub fn to_spec(&self) -> Result<OptionSpec> {
        if self.kind == OptionKind::GenericKnockOut {
            return Err(SpecVolError::InvalidSpec(
                "generic knock-outs need a payoff function and cannot be read from JSON".into(),
            ));
        }
        let interval = Interval::new(Endpoint::from(self.l), Endpoint::from(self.r))?;
        let spec = OptionSpec {
            kind: self.kind,
            k: self.k,
            interval,
            t: self.t,
            rebate_l: self.rebate_l,
            rebate_r: self.rebate_r,
            payoff_fn: None,
            smoothing: self.smoothing,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &OptionSpec) -> Self {
        OptionSpecFile {
            kind: spec.kind,
            k: spec.k,
            l: spec.interval.l.finite(),
            r: spec.interval.r.finite(),
            t: spec.t,
            rebate_l: spec.rebate_l,
            rebate_r: spec.rebate_r,
            smoothing: spec.smoothing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    mu: f64,
    sigma_sq: f64,
    #[serde(default)]
    v2_eps: f64,
    #[serde(default)]
    v3_eps: f64,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecVolError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| SpecVolError::Parse(format!("{}: {e}", path.display())))
}

pub fn parse_option_spec(text: &str) -> Result<OptionSpec> {
    serde_json::from_str::<OptionSpecFile>(text)?.to_spec()
}

pub fn read_option_spec(path: &Path) -> Result<OptionSpec> {
    read_json::<OptionSpecFile>(path)?.to_spec()
}

pub fn parse_market_params(text: &str) -> Result<MarketParams> {
    let p: ParamsFile = serde_json::from_str(text)?;
    MarketParams::new(p.mu, p.sigma_sq, p.v2_eps, p.v3_eps)
}

pub fn read_market_params(path: &Path) -> Result<MarketParams> {
    let p: ParamsFile = read_json(path)?;
    MarketParams::new(p.mu, p.sigma_sq, p.v2_eps, p.v3_eps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    pub n_max: usize,
    pub tail_tol: f64,
    pub first_order_route: FirstOrderRoute,
    pub coupling_variant: CouplingVariant,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        let p = PricingConfig::default();
        SeriesConfig {
            n_max: p.n_max,
            tail_tol: p.tail_tol,
            first_order_route: p.first_order_route,
            coupling_variant: p.coupling_variant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: OutputFormat,
    /// Significant digits.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            format: OutputFormat::Json,
            precision: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GlobalConfig {
    pub quadrature: QuadratureConfig,
    pub series: SeriesConfig,
    pub output: OutputConfig,
}

impl GlobalConfig {
    pub fn validate(&self) -> Result<()> {
        self.pricing().validate()?;
        if !(1..=17).contains(&self.output.precision) {
            return Err(SpecVolError::InvalidConfig("output precision must be within 1..=17".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg: GlobalConfig = read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config named by `SPECVOL_CONFIG`, or defaults when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::default()),
        }
    }

    pub fn pricing(&self) -> PricingConfig {
        PricingConfig {
            quadrature: self.quadrature,
            n_max: self.series.n_max,
            tail_tol: self.series.tail_tol,
            first_order_route: self.series.first_order_route,
            coupling_variant: self.series.coupling_variant,
            ..PricingConfig::default()
        }
    }
}

/// Round to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Shortest decimal text of `x` rounded to `digits` significant digits.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    if r == 0.0 {
        "0".into()
    } else if !(1e-4..1e15).contains(&r.abs()) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Round every number in a JSON tree.
pub fn round_json(v: &mut serde_json::Value, digits: usize) {
    use serde_json::Value;
    match v {
        Value::Number(n) => {
            if let (Some(f), false) = (n.as_f64(), n.is_i64() || n.is_u64()) {
                if let Some(m) = serde_json::Number::from_f64(round_sig(f, digits)) {
                    *n = m;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(o) => o.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn option_files_round_trip() {
        let text = r#"{"kind": "DoubleBarrierKnockOutCall", "k": 0.6931471805599453, "l": 0.4054651081081644, "r": 0.9162907318741551, "t": 0.08333333333333333}"#;
        let spec = parse_option_spec(text).unwrap();
        assert_eq!(spec.kind, OptionKind::DoubleBarrierKnockOutCall);
        let back = OptionSpecFile::from_spec(&spec);
        assert_eq!(back.to_spec().unwrap().interval, spec.interval);
        let euro = parse_option_spec(r#"{"kind": "european", "k": 0.0, "l": null, "t": 1}"#).unwrap();
        assert_eq!(euro.interval, Interval::full_line());
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(parse_option_spec(r#"{"kind": "EuropeanCall", "k": 0.0, "t": 1, "strike": 2}"#).is_err());
        assert!(matches!(
            parse_option_spec(r#"{"kind": "UpAndOutCall", "k": 1.0, "r": 0.5, "t": 1}"#),
            Err(SpecVolError::InvalidSpec(_))
        ));
        assert!(parse_market_params(r#"{"mu": 0.05, "sigma_sq": -1}"#).is_err());
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg: GlobalConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, GlobalConfig::default());
        assert_eq!(cfg.output.precision, 10);
        let bad: GlobalConfig = serde_json::from_str(r#"{"series": {"n_max": 0}}"#).unwrap();
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<GlobalConfig>(r#"{"quadrature": {"abs_tol": "x"}}"#).is_err());
    }

    #[test]
    fn significant_digit_rounding() {
        assert_eq!(fmt_sig(0.123456789012345, 10), "0.123456789");
        assert_eq!(fmt_sig(-1234567.891234, 4), "-1235000");
        assert_eq!(fmt_sig(0.0, 10), "0");
        assert_eq!(fmt_sig(2.744809799123e-16, 4), "2.745e-16");
        let mut v = serde_json::json!({"a": [1.23456789012345, 3], "b": {"c": 2.0e-20}});
        round_json(&mut v, 3);
        assert_eq!(v["a"][0], 1.23);
        assert_eq!(v["a"][1], 3);
    }
}
