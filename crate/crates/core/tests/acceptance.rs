//! Acceptance checks. Prints one line per criterion and fails if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use gidx_core::constants::{ORBIT_LABEL_SIGN, ORIENTATION_SIGN};
use gidx_core::ellipticity::{check_elliptic_isometric, elliptic_s_interval, matrix_symbol, SRange, Verdict};
use gidx_core::geometry::{density_closed_form, density_mu, ActionSpec, Chart, CotangentPoint, DensityLocation, Point, WeightSpec};
use gidx_core::nctorus::bridge_report;
use gidx_core::realization::{analytic_index, toeplitz_coefficient, GOperatorSpec};
use gidx_core::series::TrigSeries;
use gidx_core::suite::{random_suite, SuiteCase};
use gidx_core::symbol::{
    circle_cotangent, cp_inverse, cp_mul, trajectory_block, trajectory_matrix, unitarized_matrix, window, CosphereFunction, CrossedSymbol, Xi,
};
use gidx_core::topological::{index_finite_free, index_formula_z};
use gidx_core::uniformization::{invariant_restriction_index, looks_fredholm, mode_index_table, transverse_elliptic_check, TransverseSpec, TransverseVerdict};
use gidx_core::linalg::max_abs;
use gidx_core::Complex64;

const SEED: u64 = 20240917;
const SV_THRESHOLD: f64 = 1e-7;
const INVERSE_TOL: f64 = 1e-11;

// Tolerances and budgets of the criteria.
const DENSITY_REL_TOL: f64 = 1e-8;
const S_INDEPENDENCE_TOL: f64 = 1e-12;
const ENDPOINT_TOL: f64 = 1e-6;
const ELLIPTIC_FLOOR: f64 = 1e-4;
const SNAP_ERROR_TOL: f64 = 1e-6;
const MATRIX_MULT_TOL: f64 = 1e-12;
const NC_RESIDUAL_TOL: f64 = 1e-6;
const SEAM_TOL: f64 = 1e-8;
const ASSOC_TOL: f64 = 1e-11;
const LEIBNIZ_TOL: f64 = 1e-9;
const INTERIOR_TOL: f64 = 1e-12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn golden() -> ActionSpec {
    ActionSpec::rotation((5f64.sqrt() - 1.0) / 2.0, true).unwrap()
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg) }
}

fn density_closed_forms() -> Outcome {
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.0 / 3.0] {
        for dim in [1usize, 2] {
            for s in [0.0, 0.5, 1.0] {
                let e1: Vec<f64> = (0..dim).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
                let locations = [
                    (DensityLocation::PoleZero, Point::sphere(Chart::Zero, vec![0.0; dim]).unwrap()),
                    (DensityLocation::PoleInfinity, Point::sphere(Chart::Infinity, vec![0.0; dim]).unwrap()),
                    (DensityLocation::Interior, Point::sphere(Chart::Zero, e1.clone()).unwrap()),
                ];
                let a = ActionSpec::dilation(alpha, dim).unwrap();
                for (loc, point) in locations {
                    let w = WeightSpec { point: CotangentPoint::new(point, e1.clone()).unwrap(), s, order_m: 0.0 };
                    let ratios: Vec<f64> = (-6..=6)
                        .map(|g| density_mu(&w, &a, g * ORBIT_LABEL_SIGN).unwrap() / density_closed_form(alpha, dim, s, loc, g))
                        .collect();
                    for r in &ratios {
                        worst = worst.max((r / ratios[6] - 1.0).abs());
                    }
                }
            }
        }
    }
    ensure(worst < DENSITY_REL_TOL, format!("max relative deviation {worst:.2e}"))?;
    Ok(format!("max relative deviation {worst:.2e}"))
}

fn isometric_s_independence() -> Outcome {
    let sym = CrossedSymbol::new(golden(), 0.0)
        .unwrap()
        .with_term(0, CosphereFunction::new(TrigSeries::from_fn(|x| c(2.0 + x.cos(), x.sin()), 1), TrigSeries::constant(c(1.0, 0.5))))
        .unwrap()
        .with_term(1, CosphereFunction::uniform(TrigSeries::from_fn(|x| c(0.3 * (2.0 * x).sin(), 0.1), 2)))
        .unwrap()
        .with_term(-2, CosphereFunction::constant(c(0.0, 0.2)))
        .unwrap();
    let mut worst: f64 = 0.0;
    for phi in [0.3, 2.0, 5.1] {
        for xi in Xi::BOTH {
            let p = circle_cotangent(&golden(), phi, xi).unwrap();
            let base = unitarized_matrix(&trajectory_matrix(&sym, &p, 0.0, 16).unwrap());
            for s in [0.5, 1.0] {
                let m = unitarized_matrix(&trajectory_matrix(&sym, &p, s, 16).unwrap());
                worst = worst.max(max_abs(&(m - &base)));
            }
        }
    }
    ensure(worst < S_INDEPENDENCE_TOL, format!("max entry difference {worst:.2e}"))?;
    Ok(format!("max entry difference {worst:.2e}"))
}

fn dilation_interval() -> Outcome {
    let a = ActionSpec::dilation(0.5, 1).unwrap();
    let sym = CrossedSymbol::identity(a, 0.0).unwrap().with_term(1, CosphereFunction::constant(c(0.5, 0.0))).unwrap();
    let r = elliptic_s_interval(&sym, (-2.0, 3.0), ENDPOINT_TOL / 4.0).map_err(|e| e.to_string())?;
    let SRange::Interval { lo, hi } = r.s else {
        return Err(format!("elliptic set is {:?}", r.s));
    };
    ensure(r.verdict == Verdict::Elliptic, format!("verdict {:?}", r.verdict))?;
    ensure((lo + 0.5).abs() < ENDPOINT_TOL && (hi - 1.5).abs() < ENDPOINT_TOL, format!("interval ({lo}, {hi})"))?;
    Ok(format!("single interval ({lo:.9}, {hi:.9})"))
}

fn two_routes(case: &SuiteCase, n_list: &[usize]) -> Result<(i64, f64), String> {
    let sym = case.spec.symbol().map_err(|e| e.to_string())?;
    let ell = check_elliptic_isometric(&sym, 4, &[32, 64, 128], ELLIPTIC_FLOOR).map_err(|e| e.to_string())?;
    ensure(ell.verdict == Verdict::Elliptic, format!("{}: ellipticity {:?}", case.label, ell.verdict))?;
    let inv = cp_inverse(&sym, INVERSE_TOL, 512).map_err(|e| format!("{}: {e}", case.label))?;
    let top = index_formula_z(&sym, &inv.symbol, None).map_err(|e| format!("{}: {e}", case.label))?;
    let rep = analytic_index(&case.spec, n_list, SV_THRESHOLD).map_err(|e| e.to_string())?;
    let ana = rep.stabilized_index.ok_or_else(|| format!("{}: no stabilization {:?}", case.label, rep.per_n))?;
    ensure(ana == top.snapped, format!("{}: analytic {ana} vs topological {}", case.label, top.snapped))?;
    Ok((ana, top.snap_error))
}

fn index_agreement() -> Outcome {
    let cases = random_suite(golden(), 20, SEED).map_err(|e| e.to_string())?;
    let mut agree = 0;
    let mut worst_snap: f64 = 0.0;
    let mut indices = Vec::new();
    let mut failures = Vec::new();
    for case in &cases {
        match two_routes(case, &[64, 128, 192, 256]) {
            Ok((i, snap)) => {
                agree += 1;
                worst_snap = worst_snap.max(snap);
                indices.push(i);
            }
            Err(e) => failures.push(e),
        }
    }
    let msg = format!("{agree}/{} agree, max snap error {worst_snap:.2e}, indices {indices:?}", cases.len());
    ensure(agree == cases.len() && worst_snap < SNAP_ERROR_TOL, format!("{msg}; {}", failures.join("; ")))?;
    Ok(msg)
}

fn toeplitz_family() -> Outcome {
    let mut pairs = Vec::new();
    for k in -3i64..=3 {
        let spec = GOperatorSpec::new(golden(), 0.0, 0.0).unwrap().with_term(0, toeplitz_coefficient(TrigSeries::monomial(k, c(1.0, 0.0))));
        let ana = analytic_index(&spec, &[32, 64, 96], SV_THRESHOLD).map_err(|e| e.to_string())?.stabilized_index;
        let sym = spec.symbol().unwrap();
        let inv = cp_inverse(&sym, INVERSE_TOL, 64).map_err(|e| e.to_string())?;
        let top = index_formula_z(&sym, &inv.symbol, None).map_err(|e| e.to_string())?.snapped;
        ensure(ana == Some(ORIENTATION_SIGN * k) && top == ORIENTATION_SIGN * k, format!("k = {k}: analytic {ana:?}, topological {top}"))?;
        pairs.push(top);
    }
    Ok(format!("slope {ORIENTATION_SIGN}, indices {pairs:?}"))
}

fn finite_group_unfolding() -> Outcome {
    let mut report = Vec::new();
    let mut worst_mult: f64 = 0.0;
    for k in [2u32, 4] {
        let a = ActionSpec::cyclic(k).unwrap();
        let cases = random_suite(a, 5, SEED + k as u64).map_err(|e| e.to_string())?;
        let mut idx = Vec::new();
        for case in &cases {
            let sym = case.spec.symbol().unwrap();
            let top = index_finite_free(&sym).map_err(|e| format!("Z/{k} {}: {e}", case.label))?.snapped;
            let ana = analytic_index(&case.spec, &[32, 64, 128, 256], SV_THRESHOLD).map_err(|e| e.to_string())?.stabilized_index;
            ensure(ana == Some(top), format!("Z/{k} {}: analytic {ana:?} vs determinant route {top}", case.label))?;
            idx.push(top);
        }
        for pair in cases.windows(2) {
            let (s1, s2) = (pair[0].spec.symbol().unwrap(), pair[1].spec.symbol().unwrap());
            let (m1, m2) = (matrix_symbol(&s1).unwrap(), matrix_symbol(&s2).unwrap());
            let m12 = matrix_symbol(&cp_mul(&s1, &s2).unwrap()).unwrap();
            for j in 0..64 {
                let x = std::f64::consts::TAU * j as f64 / 64.0;
                for xi in Xi::BOTH {
                    worst_mult = worst_mult.max(max_abs(&(m1.eval(x, xi) * m2.eval(x, xi) - m12.eval(x, xi))));
                }
            }
        }
        report.push(format!("Z/{k} {idx:?}"));
    }
    ensure(worst_mult < MATRIX_MULT_TOL, format!("matrix symbol multiplicativity {worst_mult:.2e}"))?;
    Ok(format!("{}, multiplicativity {worst_mult:.2e}", report.join(", ")))
}

fn nc_torus() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut seam: f64 = 0.0;
    for theta in [0.7, 1.0, (5f64.sqrt() - 1.0) / 2.0] {
        let r = bridge_report(theta).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_residual());
        seam = r.seam.iter().fold(seam, |m, (_, v)| m.max(*v));
    }
    ensure(worst < NC_RESIDUAL_TOL && seam < SEAM_TOL, format!("table residual {worst:.2e}, seam {seam:.2e}"))?;
    Ok(format!("table residual {worst:.2e}, seam {seam:.2e}"))
}

fn uniformization_example() -> Outcome {
    let n_list = [8, 16, 32];
    let mut verdicts = Vec::new();
    for alpha in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0] {
        let spec = TransverseSpec::TorusExample { alpha };
        let fredholm = looks_fredholm(&mode_index_table(&spec, &n_list, SV_THRESHOLD));
        let check = transverse_elliptic_check(&spec);
        let restricted = invariant_restriction_index(&spec, &n_list, SV_THRESHOLD);
        let expect = 1.0 + alpha != 0.0;
        ensure(fredholm == expect, format!("alpha = {alpha}: Fredholm {fredholm}"))?;
        if expect {
            let idx = restricted.map_err(|e| format!("alpha = {alpha}: {e}"))?.stabilized_index;
            ensure(idx == Some(0), format!("alpha = {alpha}: index {idx:?}"))?;
        } else {
            ensure(
                check.verdict == TransverseVerdict::NotTransversallyElliptic && restricted.is_err(),
                format!("alpha = {alpha}: verdict {:?}", check.verdict),
            )?;
        }
        verdicts.push(format!("{alpha}:{}", if expect { "0" } else { "rejected" }));
    }
    Ok(verdicts.join(" "))
}

fn term_distance(a: &CrossedSymbol, b: &CrossedSymbol) -> f64 {
    a.sub(b).unwrap().sup_norm()
}

fn algebra_properties() -> Outcome {
    let cases = random_suite(golden(), 9, SEED ^ 0x5eed).map_err(|e| e.to_string())?;
    let syms: Vec<CrossedSymbol> = cases.iter().map(|c| c.spec.symbol().unwrap()).collect();
    let (mut assoc, mut leib, mut diag): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for t in syms.chunks(3) {
        let (a, b, cc) = (&t[0], &t[1], &t[2]);
        let lhs = cp_mul(&cp_mul(a, b).unwrap(), cc).unwrap();
        let rhs = cp_mul(a, &cp_mul(b, cc).unwrap()).unwrap();
        assoc = assoc.max(term_distance(&lhs, &rhs));

        let ab = cp_mul(a, b).unwrap();
        let d_ab = ab.differential().unwrap();
        let sum = cp_mul(&a.differential().unwrap(), b).unwrap().add(&cp_mul(a, &b.differential().unwrap()).unwrap()).unwrap();
        leib = leib.max(term_distance(&d_ab, &sum));

        let n = 12usize;
        let rb = b.support_radius();
        for (phi, xi) in [(0.4, Xi::Plus), (3.3, Xi::Minus)] {
            let p = circle_cotangent(&golden(), phi, xi).unwrap();
            let tab = unitarized_matrix(&trajectory_matrix(&ab, &p, 0.5, n).unwrap());
            let mid = window(n + rb);
            let ta = unitarized_matrix(&trajectory_block(a, &p, 0.5, &window(n), &mid).unwrap());
            let tb = unitarized_matrix(&trajectory_block(b, &p, 0.5, &mid, &window(n)).unwrap());
            diag = diag.max(max_abs(&(ta * tb - tab)));
        }
    }
    ensure(assoc < ASSOC_TOL, format!("associativity {assoc:.2e}"))?;
    ensure(leib < LEIBNIZ_TOL, format!("Leibniz {leib:.2e}"))?;
    ensure(diag < INTERIOR_TOL, format!("trajectory homomorphism {diag:.2e}"))?;

    // Homotopy: scale the minor terms down to zero along the path.
    let mut homotopy = Vec::new();
    for case in &cases[..4] {
        let sym = case.spec.symbol().unwrap();
        let dom = CrossedSymbol::new(golden(), 0.0).unwrap().with_term(case.dominant, sym.term(case.dominant)).unwrap();
        let rest = sym.sub(&dom).unwrap();
        let mut idx = Vec::new();
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            let st = dom.add(&rest.scale(c(1.0 - t, 0.0))).unwrap();
            let ell = check_elliptic_isometric(&st, 4, &[32, 64], ELLIPTIC_FLOOR).map_err(|e| e.to_string())?;
            ensure(ell.verdict == Verdict::Elliptic, format!("{} at t = {t}: {:?}", case.label, ell.verdict))?;
            if j == 0 || j == 10 {
                let inv = cp_inverse(&st, INVERSE_TOL, 512).map_err(|e| e.to_string())?;
                idx.push(index_formula_z(&st, &inv.symbol, None).map_err(|e| e.to_string())?.snapped);
            }
        }
        ensure(idx[0] == idx[1], format!("{}: homotopy ends {idx:?}", case.label))?;
        homotopy.push(idx[0]);
    }

    // Multiplicativity through both routes.
    for pair in cases[..6].chunks(2) {
        let (sa, sb) = (pair[0].spec.symbol().unwrap(), pair[1].spec.symbol().unwrap());
        let top = |s: &CrossedSymbol| -> Result<i64, String> {
            let inv = cp_inverse(s, INVERSE_TOL, 512).map_err(|e| e.to_string())?;
            Ok(index_formula_z(s, &inv.symbol, None).map_err(|e| e.to_string())?.snapped)
        };
        let prod = cp_mul(&sa, &sb).unwrap();
        let (ia, ib, iab) = (top(&sa)?, top(&sb)?, top(&prod)?);
        ensure(iab == ia + ib, format!("index of product {iab} vs {ia} + {ib}"))?;
    }
    Ok(format!("assoc {assoc:.1e}, Leibniz {leib:.1e}, trajectory {diag:.1e}, homotopy ends {homotopy:?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("density closed forms", Duration::from_secs(1), density_closed_forms),
        ("isometric s-independence", Duration::from_secs(1), isometric_s_independence),
        ("dilation ellipticity interval", Duration::from_secs(30), dilation_interval),
        ("index two-route agreement", Duration::from_secs(300), index_agreement),
        ("Toeplitz calibration family", Duration::from_secs(60), toeplitz_family),
        ("finite-group unfolding", Duration::from_secs(120), finite_group_unfolding),
        ("NC-torus correspondence", Duration::from_secs(10), nc_torus),
        ("uniformization example", Duration::from_secs(10), uniformization_example),
        ("algebra property suite", Duration::from_secs(300), algebra_properties),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let (status, detail) = match &out {
            Ok(d) if took <= *budget => ("PASS", d.clone()),
            Ok(d) => ("FAIL", format!("{d}; runtime over budget {budget:?}")),
            Err(e) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {} [{name}]: {status} ({detail}; {:.2}s)", i + 1, took.as_secs_f64());
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
