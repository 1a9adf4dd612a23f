//! The five pipelines behind the subcommands.

use gidx_core::ellipticity::{
    check_elliptic_at_s, check_elliptic_isometric, elliptic_s_interval, EllipticityReport, Evidence, Verdict, INTERIOR_FLOOR,
    INTERIOR_TRUNCATIONS,
};
use gidx_core::geometry::ActionSpec;
use gidx_core::nctorus::bridge_report;
use gidx_core::realization::{analytic_index, GOperatorSpec, IndexEntry};
use gidx_core::symbol::cp_inverse;
use gidx_core::topological::{index_finite_free, index_formula_z, TopologicalIndexResult};
use gidx_core::uniformization::{invariant_restriction_index, looks_fredholm, mode_index_table, transverse_elliptic_check, TransverseVerdict};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{validate_truncations, ConfigError, JobConfig};
use crate::report::format_float;

pub const DEFAULT_FLOOR: f64 = 1e-6;
pub const DEFAULT_X_SAMPLES: usize = 4;
pub const DEFAULT_ISOMETRIC_TRUNCATIONS: [usize; 4] = [32, 64, 128, 256];
pub const DEFAULT_INDEX_TRUNCATIONS: [usize; 4] = [32, 64, 96, 128];
pub const DEFAULT_SV_THRESHOLD: f64 = 1e-7;
pub const DEFAULT_S_TOL: f64 = 1e-6;
pub const DEFAULT_INVERSE_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_SUPPORT: usize = 512;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_MODE_TRUNCATIONS: [usize; 4] = [8, 16, 32, 64];
pub const DEFAULT_SWEEP_POINTS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotElliptic,
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::NotElliptic => 2,
            Status::Inconclusive => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::NotElliptic => "not-elliptic",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] gidx_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 4,
            CliError::Core(gidx_core::Error::NotTransverselyElliptic(_)) => 2,
            CliError::Core(gidx_core::Error::NoStabilization) => 3,
            _ => 1,
        }
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trunc: Option<Vec<usize>>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

pub struct Outcome {
    pub status: Status,
    /// Short human-readable verdict for stderr.
    pub message: String,
    pub result: Value,
    pub csv_header: Vec<&'static str>,
    pub csv_rows: Vec<Vec<String>>,
}

type CResult<T> = std::result::Result<T, CliError>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn truncations(cfg: &JobConfig, ov: &Overrides, default: &[usize]) -> CResult<Vec<usize>> {
    if let Some(t) = &ov.trunc {
        validate_truncations("--trunc", t)?;
        return Ok(t.clone());
    }
    Ok(cfg.analysis.truncations.clone().unwrap_or_else(|| default.to_vec()))
}

fn tol_or(ov: &Overrides, cfg_value: Option<f64>, default: f64) -> CResult<f64> {
    if let Some(t) = ov.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(ConfigError::new("--tol", format!("must be positive, got {t}")).into());
        }
        return Ok(t);
    }
    Ok(cfg_value.unwrap_or(default))
}

pub fn seed(cfg: &JobConfig, ov: &Overrides) -> u64 {
    ov.seed.or(cfg.seed).unwrap_or(0)
}

fn status_of(v: Verdict) -> Status {
    match v {
        Verdict::Elliptic => Status::Ok,
        Verdict::NotElliptic => Status::NotElliptic,
        Verdict::Inconclusive => Status::Inconclusive,
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Elliptic => "elliptic",
        Verdict::NotElliptic => "not elliptic",
        Verdict::Inconclusive => "inconclusive",
    }
}

/// Ellipticity at the configured exponent (or over `s_range` for dilations
/// when `use_range` is set).
fn ellipticity_report(cfg: &JobConfig, ov: &Overrides, spec: &GOperatorSpec, use_range: bool) -> CResult<EllipticityReport> {
    let sym = spec.symbol()?;
    let a = &cfg.analysis;
    if spec.action.is_isometric() {
        let n_list = truncations(cfg, ov, &DEFAULT_ISOMETRIC_TRUNCATIONS)?;
        let floor = tol_or(ov, a.floor, DEFAULT_FLOOR)?;
        return Ok(check_elliptic_isometric(&sym, a.x_samples.unwrap_or(DEFAULT_X_SAMPLES), &n_list, floor)?);
    }
    match a.s_range {
        Some([lo, hi]) if use_range => Ok(elliptic_s_interval(&sym, (lo, hi), tol_or(ov, a.s_tol, DEFAULT_S_TOL)?)?),
        _ => {
            let n_list = truncations(cfg, ov, &INTERIOR_TRUNCATIONS)?;
            let floor = tol_or(ov, a.floor, INTERIOR_FLOOR)?;
            Ok(check_elliptic_at_s(&sym, spec.s, &n_list, floor)?)
        }
    }
}

fn ellipticity_csv(r: &EllipticityReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    match &r.evidence {
        Evidence::Pointwise { min_modulus, grid } => (vec!["grid", "min_modulus"], vec![vec![grid.to_string(), format_float(*min_modulus)]]),
        Evidence::Determinant { min_singular_value, grid } => {
            (vec!["grid", "min_singular_value"], vec![vec![grid.to_string(), format_float(*min_singular_value)]])
        }
        Evidence::Trajectory { per_n, .. } | Evidence::AtExponent { per_n, .. } => (
            vec!["N", "lower_bound"],
            per_n.iter().map(|b| vec![b.n.to_string(), format_float(b.lower_bound)]).collect(),
        ),
        Evidence::SInterval { subintervals, .. } => (
            vec!["lo", "hi", "verdict"],
            subintervals.iter().map(|s| vec![format_float(s.lo), format_float(s.hi), verdict_name(s.verdict).into()]).collect(),
        ),
    }
}

pub fn cmd_ellipticity(cfg: &JobConfig, ov: &Overrides) -> CResult<Outcome> {
    let spec = cfg.operator_spec(seed(cfg, ov))?;
    let report = ellipticity_report(cfg, ov, &spec, true)?;
    let (csv_header, csv_rows) = ellipticity_csv(&report);
    Ok(Outcome {
        status: status_of(report.verdict),
        message: verdict_name(report.verdict).into(),
        result: to_value(&report),
        csv_header,
        csv_rows,
    })
}

fn index_row(e: &IndexEntry) -> Vec<String> {
    vec![e.n.to_string(), e.dim_ker.to_string(), e.dim_coker.to_string(), e.index.to_string(), format_float(e.sv_gap)]
}

pub const INDEX_COLUMNS: [&str; 5] = ["N", "dim_ker", "dim_coker", "index", "sv_gap"];

fn topological(cfg: &JobConfig, spec: &GOperatorSpec) -> CResult<Option<std::result::Result<TopologicalIndexResult, String>>> {
    let sym = spec.symbol()?;
    let a = &cfg.analysis;
    let res = match spec.action {
        ActionSpec::RotationZ { .. } => {
            let tol = a.inverse_tol.unwrap_or(DEFAULT_INVERSE_TOL);
            cp_inverse(&sym, tol, a.max_support.unwrap_or(DEFAULT_MAX_SUPPORT)).and_then(|inv| index_formula_z(&sym, &inv.symbol, None))
        }
        ActionSpec::CyclicRotation { .. } => index_finite_free(&sym),
        _ => return Ok(None),
    };
    Ok(Some(res.map_err(|e| e.to_string())))
}

pub fn cmd_index(cfg: &JobConfig, ov: &Overrides) -> CResult<Outcome> {
    let spec = cfg.operator_spec(seed(cfg, ov))?;
    // The ellipticity gate uses its own default truncations and floor.
    let gate_ov = Overrides { trunc: None, tol: None, seed: ov.seed };
    let ell = ellipticity_report(cfg, &gate_ov, &spec, false)?;
    if ell.verdict != Verdict::Elliptic {
        return Ok(Outcome {
            status: status_of(ell.verdict),
            message: format!("refused: operator is {}", verdict_name(ell.verdict)),
            result: json!({ "ellipticity": to_value(&ell), "analytic": null, "topological": null, "agree": null }),
            csv_header: INDEX_COLUMNS.to_vec(),
            csv_rows: Vec::new(),
        });
    }
    let n_list = truncations(cfg, ov, &DEFAULT_INDEX_TRUNCATIONS)?;
    let thr = tol_or(ov, cfg.analysis.sv_threshold, DEFAULT_SV_THRESHOLD)?;
    let analytic = analytic_index(&spec, &n_list, thr)?;
    let topo = topological(cfg, &spec)?;
    let (topo_value, agree) = match &topo {
        None => (Value::Null, None),
        Some(Ok(t)) => (to_value(t), Some(analytic.stabilized_index == Some(t.snapped))),
        Some(Err(e)) => (json!({ "error": e }), Some(false)),
    };
    let (status, message) = match (analytic.stabilized_index, agree) {
        (None, _) => (Status::Inconclusive, "analytic index did not stabilize".to_string()),
        (Some(i), Some(false)) => (Status::Inconclusive, format!("analytic index {i} disagrees with the topological route")),
        (Some(i), Some(true)) => (Status::Ok, format!("index {i} (both routes agree)")),
        (Some(i), None) => (Status::Ok, format!("index {i} (analytic route only)")),
    };
    let csv_rows = analytic.per_n.iter().map(index_row).collect();
    Ok(Outcome {
        status,
        message,
        result: json!({
            "ellipticity": to_value(&ell),
            "analytic": to_value(&analytic),
            "topological": topo_value,
            "agree": agree,
        }),
        csv_header: INDEX_COLUMNS.to_vec(),
        csv_rows,
    })
}

fn sweep_values(cfg: &JobConfig) -> CResult<Vec<f64>> {
    let a = &cfg.analysis;
    if let Some(v) = &a.s_values {
        if v.is_empty() || v.iter().any(|s| !s.is_finite()) {
            return Err(ConfigError::new("analysis.s_values", "need finite values").into());
        }
        return Ok(v.clone());
    }
    match a.s_range {
        Some([lo, hi]) => {
            let k = DEFAULT_SWEEP_POINTS - 1;
            Ok((0..=k).map(|j| lo + (hi - lo) * j as f64 / k as f64).collect())
        }
        None => Err(ConfigError::new("analysis.s_values", "sweep-s needs `s_values` or `s_range`").into()),
    }
}

pub fn cmd_sweep_s(cfg: &JobConfig, ov: &Overrides) -> CResult<Outcome> {
    let base = cfg.operator_spec(seed(cfg, ov))?;
    let n_list = truncations(cfg, ov, &DEFAULT_INDEX_TRUNCATIONS)?;
    let thr = tol_or(ov, cfg.analysis.sv_threshold, DEFAULT_SV_THRESHOLD)?;
    let gate_ov = Overrides { trunc: None, tol: None, seed: ov.seed };
    let mut points = Vec::new();
    let mut rows = Vec::new();
    let mut elliptic_count = 0;
    for s in sweep_values(cfg)? {
        let mut spec = base.clone();
        spec.s = s;
        let ell = ellipticity_report(cfg, &gate_ov, &spec, false)?;
        let analytic = if ell.verdict == Verdict::Elliptic {
            elliptic_count += 1;
            let r = analytic_index(&spec, &n_list, thr)?;
            for e in &r.per_n {
                let mut row = vec![format_float(s)];
                row.extend(index_row(e));
                rows.push(row);
            }
            Some(r)
        } else {
            None
        };
        points.push(json!({
            "s": s,
            "verdict": to_value(&ell.verdict),
            "analytic": analytic.as_ref().map(to_value),
            "index": analytic.as_ref().and_then(|r| r.stabilized_index),
        }));
    }
    let mut header = vec!["s"];
    header.extend(INDEX_COLUMNS);
    Ok(Outcome {
        status: Status::Ok,
        message: format!("{elliptic_count} of {} exponents elliptic", points.len()),
        result: json!({ "points": points, "sv_threshold": thr }),
        csv_header: header,
        csv_rows: rows,
    })
}

pub fn cmd_nctorus(cfg: &JobConfig, ov: &Overrides) -> CResult<Outcome> {
    let theta = cfg.nctorus_theta()?;
    let tol = tol_or(ov, cfg.analysis.residual_tol, DEFAULT_RESIDUAL_TOL)?;
    let report = bridge_report(theta)?;
    let worst = |v: &[(String, f64)]| v.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    let max_residual = report.max_residual().max(worst(&report.seam)).max(worst(&report.round_trip)).max(worst(&report.commutation));
    let pass = max_residual < tol;
    let rows = report
        .rows
        .iter()
        .map(|r| vec![r.function.clone(), r.operator.name().to_string(), format_float(r.residual)])
        .collect();
    Ok(Outcome {
        status: if pass { Status::Ok } else { Status::Inconclusive },
        message: format!("max residual {max_residual:.3e} (tolerance {tol:.1e})"),
        result: json!({ "bridge": to_value(&report), "max_residual": max_residual, "residual_tol": tol, "pass": pass }),
        csv_header: vec!["function", "operator", "residual"],
        csv_rows: rows,
    })
}

pub fn cmd_uniformize(cfg: &JobConfig, ov: &Overrides) -> CResult<Outcome> {
    let spec = cfg.transverse_spec()?;
    let n_list = truncations(cfg, ov, &DEFAULT_MODE_TRUNCATIONS)?;
    let thr = tol_or(ov, cfg.analysis.sv_threshold, DEFAULT_SV_THRESHOLD)?;
    let check = transverse_elliptic_check(&spec);
    let table = mode_index_table(&spec, &n_list, thr);
    let fredholm_like = looks_fredholm(&table);
    let csv_rows = table.iter().map(index_row).collect();
    let (status, message, index) = match check.verdict {
        TransverseVerdict::NotTransversallyElliptic => {
            (Status::NotElliptic, format!("not transversally elliptic: {}", check.offending.join("; ")), Value::Null)
        }
        TransverseVerdict::Undetermined => (Status::Inconclusive, "no transverse symbol given".to_string(), Value::Null),
        _ => match invariant_restriction_index(&spec, &n_list, thr) {
            Ok(r) => match r.stabilized_index {
                Some(i) => (Status::Ok, format!("index {i}"), to_value(&r)),
                None => (Status::Inconclusive, "index did not stabilize".to_string(), to_value(&r)),
            },
            Err(gidx_core::Error::NoStabilization) => (Status::Inconclusive, "index did not stabilize".to_string(), Value::Null),
            Err(e) => return Err(e.into()),
        },
    };
    Ok(Outcome {
        status,
        message,
        result: json!({
            "transverse": to_value(&check),
            "mode_table": to_value(&table),
            "looks_fredholm": fredholm_like,
            "index": index,
        }),
        csv_header: INDEX_COLUMNS.to_vec(),
        csv_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Ok.exit_code(), 0);
        assert_eq!(Status::NotElliptic.exit_code(), 2);
        assert_eq!(Status::Inconclusive.exit_code(), 3);
        assert_eq!(CliError::Config(ConfigError::new("a", "b")).exit_code(), 4);
        assert_eq!(CliError::Core(gidx_core::Error::NoStabilization).exit_code(), 3);
    }

    #[test]
    fn tol_override_must_be_positive() {
        let cfg = parse_config("[uniformize]\nalpha = 0.0\n").unwrap();
        let ov = Overrides { tol: Some(-1.0), ..Default::default() };
        match cmd_uniformize(&cfg, &ov) {
            Err(CliError::Config(e)) => assert_eq!(e.field, "--tol"),
            _ => panic!("expected a config error"),
        }
    }

    #[test]
    fn sweep_needs_values() {
        let cfg = parse_config("[action]\nkind = \"cyclic\"\nk = 2\n[operator]\n[[operator.terms]]\ng = 0\nboth = \"1\"\n").unwrap();
        match cmd_sweep_s(&cfg, &Overrides::default()) {
            Err(CliError::Config(e)) => assert_eq!(e.field, "analysis.s_values"),
            _ => panic!("expected a config error"),
        }
    }

    #[test]
    fn cyclic_identity_has_index_zero() {
        let cfg = parse_config("[action]\nkind = \"cyclic\"\nk = 3\n[operator]\n[[operator.terms]]\ng = 0\nboth = \"1\"\n").unwrap();
        let out = cmd_index(&cfg, &Overrides { trunc: Some(vec![8, 12, 16]), ..Default::default() }).unwrap();
        assert_eq!(out.status, Status::Ok);
        assert_eq!(out.result["agree"], Value::Bool(true));
        assert_eq!(out.result["analytic"]["stabilized_index"], json!(0));
        assert_eq!(out.csv_rows.len(), 3);
    }
}
