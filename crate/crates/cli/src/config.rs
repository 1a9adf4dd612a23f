//! Job configuration files (TOML) and their conversion into library inputs.

use std::sync::Arc;

use gidx_core::geometry::ActionSpec;
use gidx_core::realization::{GOperatorSpec, SmoothingPart};
use gidx_core::series::TrigSeries;
use gidx_core::suite::random_suite;
use gidx_core::symbol::CosphereFunction;
use gidx_core::uniformization::{Block, TransverseSpec};
use gidx_core::Complex64;
use serde::Deserialize;

use crate::expr::{parse, Expr};

/// A problem with the configuration, tagged with the offending field.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

type CResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub seed: Option<u64>,
    pub action: Option<ActionConfig>,
    pub operator: Option<OperatorConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    pub nctorus: Option<NcTorusConfig>,
    pub uniformize: Option<UniformizeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Rotation,
    Dilation,
    Cyclic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionConfig {
    pub kind: ActionKind,
    /// Rotation angle in turns.
    pub theta: Option<f64>,
    #[serde(default = "yes")]
    pub irrational: bool,
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub dim: usize,
    pub k: Option<u32>,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

/// A coefficient on one cosphere component: an expression in `x`, or the
/// Fourier coefficients `c_{-B..B}` as `[re, im]` pairs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Expr(String),
    Coeffs(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub g: i64,
    pub plus: Option<Coefficient>,
    pub minus: Option<Coefficient>,
    /// Shorthand for equal `plus` and `minus`.
    pub both: Option<Coefficient>,
    /// Bandwidth used when fitting expressions; chosen automatically if absent.
    pub bandwidth: Option<usize>,
    /// Finite-rank part as `[row mode, column mode, re, im]`.
    pub smoothing: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomCase {
    pub count: usize,
    pub case: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default)]
    pub order: f64,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
    pub random: Option<RandomCase>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub truncations: Option<Vec<usize>>,
    pub sv_threshold: Option<f64>,
    pub floor: Option<f64>,
    pub x_samples: Option<usize>,
    pub s_range: Option<[f64; 2]>,
    pub s_tol: Option<f64>,
    pub s_values: Option<Vec<f64>>,
    pub inverse_tol: Option<f64>,
    pub max_support: Option<usize>,
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcTorusConfig {
    pub theta: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransverseConfig {
    pub averaged: String,
    pub complement: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformizeConfig {
    pub alpha: Option<f64>,
    /// Mode multiplier, an expression in `n1` and `n2`.
    pub multiplier: Option<String>,
    /// Transverse symbol per block, expressions in `xi` (`+1` or `-1`).
    pub transverse: Option<TransverseConfig>,
}

/// Parses and validates the text of a configuration file.
pub fn parse_config(text: &str) -> CResult<JobConfig> {
    let cfg: JobConfig = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        // Field names appear in serde messages as `field` or after "missing field".
        let field = msg.split('`').nth(1).unwrap_or("config").to_string();
        let at = e.span().map(|s| {
            let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        });
        ConfigError::new(field, format!("{msg}{}", at.unwrap_or_default()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(field: &str, v: Option<f64>) -> CResult<()> {
    match v {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(ConfigError::new(field, format!("must be positive, got {t}"))),
        _ => Ok(()),
    }
}

impl JobConfig {
    fn validate(&self) -> CResult<()> {
        let a = &self.analysis;
        positive("analysis.sv_threshold", a.sv_threshold)?;
        positive("analysis.floor", a.floor)?;
        positive("analysis.s_tol", a.s_tol)?;
        positive("analysis.inverse_tol", a.inverse_tol)?;
        positive("analysis.residual_tol", a.residual_tol)?;
        if let Some(t) = &a.truncations {
            validate_truncations("analysis.truncations", t)?;
        }
        if let Some([lo, hi]) = a.s_range {
            if !(lo < hi) {
                return Err(ConfigError::new("analysis.s_range", "need lo < hi"));
            }
        }
        if a.x_samples == Some(0) {
            return Err(ConfigError::new("analysis.x_samples", "must be positive"));
        }
        if a.max_support == Some(0) {
            return Err(ConfigError::new("analysis.max_support", "must be positive"));
        }
        if let Some(op) = &self.operator {
            if op.terms.is_empty() && op.random.is_none() {
                return Err(ConfigError::new("operator.terms", "need at least one term or a random case"));
            }
            if let Some(r) = &op.random {
                if r.case >= r.count {
                    return Err(ConfigError::new("operator.random.case", format!("must be below count = {}", r.count)));
                }
            }
        }
        Ok(())
    }

    pub fn action_spec(&self) -> CResult<ActionSpec> {
        let a = self.action.as_ref().ok_or_else(|| ConfigError::new("action", "missing section"))?;
        let need = |name: &str, v: Option<f64>| v.ok_or_else(|| ConfigError::new(format!("action.{name}"), "required for this kind"));
        let spec = match a.kind {
            ActionKind::Rotation => ActionSpec::rotation(need("theta", a.theta)?, a.irrational).map_err(|e| ConfigError::new("action.theta", e.to_string())),
            ActionKind::Dilation => ActionSpec::dilation(need("alpha", a.alpha)?, a.dim).map_err(|e| ConfigError::new("action.alpha", e.to_string())),
            ActionKind::Cyclic => {
                let k = a.k.ok_or_else(|| ConfigError::new("action.k", "required for this kind"))?;
                ActionSpec::cyclic(k).map_err(|e| ConfigError::new("action.k", e.to_string()))
            }
        }?;
        if a.kind == ActionKind::Dilation && a.dim != 1 {
            return Err(ConfigError::new("action.dim", "operators are realized on the circle (dim = 1)"));
        }
        Ok(spec)
    }

    /// Operator with the configured terms, or the random case drawn with `seed`.
    pub fn operator_spec(&self, seed: u64) -> CResult<GOperatorSpec> {
        let action = self.action_spec()?;
        let op = self.operator.as_ref().ok_or_else(|| ConfigError::new("operator", "missing section"))?;
        if let Some(r) = &op.random {
            let cases = random_suite(action, r.count, seed).map_err(|e| ConfigError::new("operator.random", e.to_string()))?;
            let mut spec = cases[r.case].spec.clone();
            spec.order_m = op.order;
            spec.s = op.s;
            return Ok(spec);
        }
        let mut spec = GOperatorSpec::new(action, op.order, op.s).map_err(|e| ConfigError::new("action", e.to_string()))?;
        for (i, t) in op.terms.iter().enumerate() {
            let field = format!("operator.terms[{i}]");
            let (plus, minus) = match (&t.both, &t.plus, &t.minus) {
                (Some(b), None, None) => {
                    let f = coefficient(&format!("{field}.both"), b, t.bandwidth)?;
                    (f.clone(), f)
                }
                (None, Some(p), Some(m)) => (
                    coefficient(&format!("{field}.plus"), p, t.bandwidth)?,
                    coefficient(&format!("{field}.minus"), m, t.bandwidth)?,
                ),
                (None, None, None) if t.smoothing.is_some() => (TrigSeries::zero(), TrigSeries::zero()),
                _ => return Err(ConfigError::new(field, "give either `both`, or `plus` and `minus`")),
            };
            if !(plus.is_zero() && minus.is_zero()) {
                spec = spec.with_term(t.g, CosphereFunction::new(plus, minus));
            }
            if let Some(entries) = &t.smoothing {
                spec = spec.with_smoothing(t.g, smoothing(&format!("{field}.smoothing"), entries)?);
            }
        }
        Ok(spec)
    }

    pub fn transverse_spec(&self) -> CResult<TransverseSpec> {
        let u = self.uniformize.as_ref().ok_or_else(|| ConfigError::new("uniformize", "missing section"))?;
        match (u.alpha, &u.multiplier) {
            (Some(alpha), None) => {
                if u.transverse.is_some() {
                    return Err(ConfigError::new("uniformize.transverse", "only allowed with a custom multiplier"));
                }
                if !alpha.is_finite() {
                    return Err(ConfigError::new("uniformize.alpha", "must be finite"));
                }
                Ok(TransverseSpec::TorusExample { alpha })
            }
            (None, Some(src)) => {
                let m = parse(src, &["n1", "n2"]).map_err(|e| ConfigError::new("uniformize.multiplier", e.to_string()))?;
                let multiplier = Arc::new(move |a: i64, b: i64| m.eval(&[a as f64, b as f64]));
                let transverse = match &u.transverse {
                    None => None,
                    Some(t) => {
                        let av = parse(&t.averaged, &["xi"]).map_err(|e| ConfigError::new("uniformize.transverse.averaged", e.to_string()))?;
                        let co = parse(&t.complement, &["xi"]).map_err(|e| ConfigError::new("uniformize.transverse.complement", e.to_string()))?;
                        let f = move |xi: f64, b: Block| match b {
                            Block::Averaged => av.eval(&[xi]),
                            Block::Complement => co.eval(&[xi]),
                        };
                        Some(Arc::new(f) as gidx_core::uniformization::TransverseSymbol)
                    }
                };
                Ok(TransverseSpec::Custom { multiplier, transverse })
            }
            _ => Err(ConfigError::new("uniformize", "give exactly one of `alpha` and `multiplier`")),
        }
    }

    pub fn nctorus_theta(&self) -> CResult<f64> {
        let t = self.nctorus.as_ref().map(|n| n.theta).unwrap_or(1.0 / 3.0);
        if !(t > 0.0 && t <= 1.0) {
            return Err(ConfigError::new("nctorus.theta", format!("must lie in (0, 1], got {t}")));
        }
        Ok(t)
    }
}

pub fn validate_truncations(field: &str, t: &[usize]) -> CResult<()> {
    if t.is_empty() || t.contains(&0) {
        return Err(ConfigError::new(field, "need a nonempty list of positive truncations"));
    }
    if t.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new(field, "truncations must increase"));
    }
    Ok(())
}

fn smoothing(field: &str, entries: &[[f64; 4]]) -> CResult<SmoothingPart> {
    let mut out = Vec::with_capacity(entries.len());
    for (j, [k, n, re, im]) in entries.iter().enumerate() {
        if k.fract() != 0.0 || n.fract() != 0.0 {
            return Err(ConfigError::new(format!("{field}[{j}]"), "modes must be integers"));
        }
        out.push((*k as i64, *n as i64, Complex64::new(*re, *im)));
    }
    Ok(SmoothingPart { entries: out })
}

/// Largest bandwidth tried when fitting an expression.
pub const MAX_FIT_BANDWIDTH: usize = 256;
/// Relative sup error accepted for a fitted expression.
pub const FIT_TOL: f64 = 1e-12;

fn coefficient(field: &str, c: &Coefficient, bandwidth: Option<usize>) -> CResult<TrigSeries> {
    match c {
        Coefficient::Coeffs(list) => {
            if list.len() % 2 == 0 {
                return Err(ConfigError::new(field, "coefficient list needs odd length 2B + 1"));
            }
            Ok(TrigSeries::from_coeffs(list.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()))
        }
        Coefficient::Expr(src) => {
            let e = parse(src, &["x"]).map_err(|err| ConfigError::new(field, err.to_string()))?;
            fit(field, &e, bandwidth)
        }
    }
}

/// Fourier fit of a smooth periodic expression, checked against the
/// expression between the interpolation nodes.
fn fit(field: &str, e: &Expr, bandwidth: Option<usize>) -> CResult<TrigSeries> {
    let check = |b: usize| -> (TrigSeries, f64, f64) {
        let s = TrigSeries::from_fn(|x| e.eval(&[x]), b);
        let probe = 4 * b + 7;
        let (mut err, mut scale) = (0.0f64, 0.0f64);
        for j in 0..probe {
            let x = std::f64::consts::TAU * (j as f64 + 0.37) / probe as f64;
            let v = e.eval(&[x]);
            scale = scale.max(v.norm());
            err = err.max((s.eval(x) - v).norm());
        }
        (s, err, scale)
    };
    let bands: Vec<usize> = match bandwidth {
        Some(b) => vec![b],
        None => std::iter::successors(Some(0usize), |b| (*b < MAX_FIT_BANDWIDTH).then(|| (2 * b).max(2))).collect(),
    };
    let mut last = f64::NAN;
    for b in bands {
        let (s, err, scale) = check(b);
        if !err.is_finite() || !scale.is_finite() {
            return Err(ConfigError::new(field, "expression is not finite on the circle"));
        }
        if err <= FIT_TOL * scale.max(1.0) {
            return Ok(s.trimmed(1e-15 * scale.max(1.0)));
        }
        last = err;
    }
    Err(ConfigError::new(field, format!("expression is not resolved by the bandwidth (fit error {last:.3e})")))
}
