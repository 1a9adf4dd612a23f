//! Ellipticity of crossed-product symbols.
//!
//! * Rotations by `Z`: lower bounds of the trajectory operators from tall
//!   truncations (heuristic), with exact pointwise checks for symbols
//!   supported on a single group element.
//! * `Z/k`: invertibility of the `k x k` matrix symbol (exact, pointwise).
//! * Sphere dilations: the set of Sobolev exponents `s` for which the
//!   operator is elliptic. Pole conditions are exact (nonvanishing of a
//!   Laurent polynomial on a circle whose radius depends on `s`); interior
//!   points are checked by truncation, with the pole windings as evidence.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ActionSpec, POLE_INFINITY_ANGLE, POLE_ZERO_ANGLE};
use crate::linalg::{min_singular_value, CMatrix};
use crate::series::next_pow2;
use crate::symbol::{circle_cotangent, eval_matrix, matrix_entries, trajectory_lower_bound, CosphereFunction, CrossedSymbol, Xi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Elliptic,
    NotElliptic,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Pointwise check of a symbol supported on one group element.
    ExactPointwise,
    /// Pointwise invertibility of the matrix symbol of `Z/k`.
    ExactDeterminant,
    /// Lower bounds from truncated trajectory operators.
    TruncatedSvd,
    /// Exact pole conditions combined with truncated interior checks.
    PoleWindingAndSvd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub n: usize,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PoleWindings {
    pub s: f64,
    /// Windings at pole 0 for `xi = +1, -1` (`None` where the symbol vanishes).
    pub pole_zero: [Option<i64>; 2],
    pub pole_infinity: [Option<i64>; 2],
}

impl PoleWindings {
    fn matching(&self) -> Option<bool> {
        let mut ok = true;
        for i in 0..2 {
            ok &= self.pole_zero[i]? == self.pole_infinity[i]?;
        }
        Some(ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subinterval {
    pub lo: f64,
    pub hi: f64,
    pub verdict: Verdict,
    pub windings: PoleWindings,
    /// Interior lower bounds at the sampled exponents.
    pub interior: Vec<(f64, Vec<LowerBound>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Evidence {
    Pointwise { min_modulus: f64, grid: usize },
    Determinant { min_singular_value: f64, grid: usize },
    Trajectory { base_points: usize, per_n: Vec<LowerBound> },
    SInterval { endpoints: Vec<f64>, subintervals: Vec<Subinterval> },
    AtExponent { windings: PoleWindings, per_n: Vec<LowerBound> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum SRange {
    /// Isometric actions: the verdict holds for every `s`.
    Any,
    Single { s: f64 },
    /// Open interval of elliptic exponents.
    Interval { lo: f64, hi: f64 },
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub verdict: Verdict,
    pub method: Method,
    pub evidence: Evidence,
    pub s: SRange,
}

/// Relative change tolerated between the last two truncations before a
/// lower bound is considered converged.
pub const DRIFT_TOL: f64 = 0.1;

fn classify(per_n: &[LowerBound], floor: f64) -> Verdict {
    let Some(last) = per_n.last() else { return Verdict::Inconclusive };
    let stable = per_n.len() < 2 || last.lower_bound >= (1.0 - DRIFT_TOL) * per_n[per_n.len() - 2].lower_bound;
    if last.lower_bound >= floor && stable {
        Verdict::Elliptic
    } else {
        Verdict::Inconclusive
    }
}

fn min_over_grid(f: &CosphereFunction, grid: usize) -> f64 {
    f.plus.min_modulus(grid).min(f.minus.min_modulus(grid))
}

/// Ellipticity of a symbol of an isometric action (rotation by `Z` or
/// `Z/k`). The verdict does not depend on `s`.
pub fn check_elliptic_isometric(sym: &CrossedSymbol, x_samples: usize, n_list: &[usize], floor: f64) -> Result<EllipticityReport> {
    if !sym.action().is_isometric() {
        return Err(Error::Unsupported("use elliptic_s_interval for dilations".into()));
    }
    if sym.terms().is_empty() {
        return Ok(EllipticityReport {
            verdict: Verdict::NotElliptic,
            method: Method::ExactPointwise,
            evidence: Evidence::Pointwise { min_modulus: 0.0, grid: 0 },
            s: SRange::Any,
        });
    }
    if let Some(k) = sym.action().group_order() {
        let grid = next_pow2((8 * k as usize * sym.bandwidth()).max(x_samples).max(256));
        let entries = matrix_entries(sym, k);
        let mut min_sv = f64::INFINITY;
        for xi in Xi::BOTH {
            for j in 0..grid {
                let m = eval_matrix(&entries, k as usize, TAU * j as f64 / grid as f64, xi);
                min_sv = min_sv.min(min_singular_value(&m));
            }
        }
        let scale = sym.sup_norm();
        let verdict = if min_sv >= floor {
            Verdict::Elliptic
        } else if min_sv <= 1e-12 * scale {
            Verdict::NotElliptic
        } else {
            Verdict::Inconclusive
        };
        return Ok(EllipticityReport {
            verdict,
            method: Method::ExactDeterminant,
            evidence: Evidence::Determinant { min_singular_value: min_sv, grid },
            s: SRange::Any,
        });
    }
    if sym.terms().len() == 1 {
        // f delta_g is invertible exactly when f is, since delta_g is.
        let f = sym.terms().values().next().expect("one term");
        let grid = next_pow2((8 * f.bandwidth()).max(x_samples).max(512));
        let m = min_over_grid(f, grid);
        let verdict = if m >= floor {
            Verdict::Elliptic
        } else if m <= 1e-12 * f.sup_norm() {
            Verdict::NotElliptic
        } else {
            Verdict::Inconclusive
        };
        return Ok(EllipticityReport {
            verdict,
            method: Method::ExactPointwise,
            evidence: Evidence::Pointwise { min_modulus: m, grid },
            s: SRange::Any,
        });
    }
    let base = x_samples.max(1);
    let mut per_n = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut lb = f64::INFINITY;
        for b in 0..base {
            let phi = TAU * (b as f64 + 0.5) / base as f64;
            for xi in Xi::BOTH {
                let p = circle_cotangent(sym.action(), phi, xi)?;
                lb = lb.min(trajectory_lower_bound(sym, &p, 0.0, n.max(sym.support_radius()))?);
            }
        }
        per_n.push(LowerBound { n, lower_bound: lb });
    }
    Ok(EllipticityReport {
        verdict: classify(&per_n, floor),
        method: Method::TruncatedSvd,
        evidence: Evidence::Trajectory { base_points: base, per_n },
        s: SRange::Any,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pole {
    Zero,
    Infinity,
}

impl Pole {
    pub fn angle(self) -> f64 {
        match self {
            Pole::Zero => POLE_ZERO_ANGLE,
            Pole::Infinity => POLE_INFINITY_ANGLE,
        }
    }
}

/// Laurent polynomial `p(w) = sum_h sigma_h(pole, xi) w^h` and the circle
/// `|w| = radius` on which it must not vanish.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleSymbol {
    pub coeffs: BTreeMap<i64, Complex64>,
    pub radius: f64,
}

impl PoleSymbol {
    pub fn eval(&self, w: Complex64) -> Complex64 {
        self.coeffs.iter().map(|(h, c)| c * w.powi(*h as i32)).sum()
    }

    /// Winding of `t -> p(r e^{it})`, `None` when `p` (nearly) vanishes on
    /// the circle.
    pub fn winding(&self) -> Option<i64> {
        let span = self.coeffs.keys().map(|h| h.unsigned_abs() as usize).max().unwrap_or(0);
        let m = next_pow2((32 * span).max(256));
        let scale: f64 = self.coeffs.iter().map(|(h, c)| c.norm() * self.radius.powi(*h as i32)).sum();
        if scale == 0.0 {
            return None;
        }
        let vals: Vec<Complex64> = (0..m)
            .map(|j| self.eval(Complex64::from_polar(self.radius, TAU * j as f64 / m as f64)))
            .collect();
        let min = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if min <= 1e-10 * scale {
            return None;
        }
        let mut total = 0.0;
        for j in 0..m {
            total += (vals[(j + 1) % m] / vals[j]).arg();
        }
        Some((total / TAU).round() as i64)
    }
}

fn dilation_params(sym: &CrossedSymbol) -> Result<(f64, f64)> {
    match sym.action() {
        ActionSpec::DilationSphere { alpha, dim_m: 1 } => {
            if sym.order() != 0.0 {
                return Err(Error::Unsupported("pole conditions are implemented for order-zero symbols".into()));
            }
            Ok((*alpha, 1.0))
        }
        _ => Err(Error::Unsupported("pole symbols need a dilation of the circle".into())),
    }
}

/// Pole symbol at exponent `s`. The unitarized trajectory at a pole is the
/// Laurent operator of `p` on `|w| = r` with `r = alpha^{m/2 - s}` at pole 0
/// and `r = alpha^{s - m/2}` at pole infinity.
pub fn pole_symbol(sym: &CrossedSymbol, pole: Pole, xi: Xi, s: f64) -> Result<PoleSymbol> {
    let (alpha, m) = dilation_params(sym)?;
    let coeffs = sym
        .terms()
        .iter()
        .map(|(h, f)| (*h, f.eval(pole.angle(), xi)))
        .filter(|(_, c)| c.norm() != 0.0)
        .collect();
    let e = m / 2.0 - s;
    let radius = match pole {
        Pole::Zero => alpha.powf(e),
        Pole::Infinity => alpha.powf(-e),
    };
    Ok(PoleSymbol { coeffs, radius })
}

fn pole_windings(sym: &CrossedSymbol, s: f64) -> Result<PoleWindings> {
    let mut out = PoleWindings { s, pole_zero: [None; 2], pole_infinity: [None; 2] };
    for xi in Xi::BOTH {
        out.pole_zero[xi.index()] = pole_symbol(sym, Pole::Zero, xi, s)?.winding();
        out.pole_infinity[xi.index()] = pole_symbol(sym, Pole::Infinity, xi, s)?.winding();
    }
    Ok(out)
}

/// Truncations used for interior checks of dilations.
pub const INTERIOR_TRUNCATIONS: [usize; 3] = [24, 48, 96];
/// Lower-bound floor for interior checks of dilations.
pub const INTERIOR_FLOOR: f64 = 1e-6;

fn interior_bounds(sym: &CrossedSymbol, s: f64, n_list: &[usize]) -> Result<Vec<LowerBound>> {
    let mut out = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let mut lb = f64::INFINITY;
        // Base points on the unit circle of the pole-0 chart.
        for phi in [PI / 2.0, 3.0 * PI / 2.0] {
            for xi in Xi::BOTH {
                let p = circle_cotangent(sym.action(), phi, xi)?;
                lb = lb.min(trajectory_lower_bound(sym, &p, s, n.max(sym.support_radius()))?);
            }
        }
        out.push(LowerBound { n, lower_bound: lb });
    }
    Ok(out)
}

/// Verdict at a single exponent for a dilation symbol.
pub fn check_elliptic_at_s(sym: &CrossedSymbol, s: f64, n_list: &[usize], floor: f64) -> Result<EllipticityReport> {
    let windings = pole_windings(sym, s)?;
    let (verdict, per_n) = match windings.matching() {
        None | Some(false) => (Verdict::NotElliptic, Vec::new()),
        Some(true) => {
            let per_n = interior_bounds(sym, s, n_list)?;
            (classify(&per_n, floor), per_n)
        }
    };
    Ok(EllipticityReport {
        verdict,
        method: Method::PoleWindingAndSvd,
        evidence: Evidence::AtExponent { windings, per_n },
        s: SRange::Single { s },
    })
}

type Label = [Option<i64>; 4];

fn label(sym: &CrossedSymbol, s: f64) -> Result<Label> {
    let w = pole_windings(sym, s)?;
    Ok([w.pole_zero[0], w.pole_zero[1], w.pole_infinity[0], w.pole_infinity[1]])
}

/// Number of grid cells used to locate winding changes.
pub const S_SCAN_CELLS: usize = 400;

/// Open interval of exponents `s` inside `s_range` for which the dilation
/// symbol is elliptic, with endpoints located to `tol` by bisection.
pub fn elliptic_s_interval(sym: &CrossedSymbol, s_range: (f64, f64), tol: f64) -> Result<EllipticityReport> {
    dilation_params(sym)?;
    let (lo, hi) = s_range;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::InvalidInput("need lo < hi and a positive tolerance".into()));
    }
    let cells = S_SCAN_CELLS;
    let grid: Vec<f64> = (0..=cells).map(|j| lo + (hi - lo) * j as f64 / cells as f64).collect();
    let labels: Vec<Label> = grid.iter().map(|s| label(sym, *s)).collect::<Result<_>>()?;
    let mut endpoints: Vec<f64> = Vec::new();
    for j in 0..cells {
        if labels[j] == labels[j + 1] {
            continue;
        }
        let (mut a, mut b) = (grid[j], grid[j + 1]);
        let left = labels[j];
        while b - a > tol / 4.0 {
            let mid = 0.5 * (a + b);
            if label(sym, mid)? == left {
                a = mid;
            } else {
                b = mid;
            }
        }
        let e = 0.5 * (a + b);
        if endpoints.last().is_none_or(|last| e - last > 2.0 * tol) {
            endpoints.push(e);
        }
    }
    let mut cuts = vec![lo];
    cuts.extend(endpoints.iter().copied().filter(|e| *e > lo + tol && *e < hi - tol));
    cuts.push(hi);
    let mut subintervals = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let windings = pole_windings(sym, mid)?;
        let mut interior = Vec::new();
        let verdict = match windings.matching() {
            None | Some(false) => Verdict::NotElliptic,
            Some(true) => {
                let mut v = Verdict::Elliptic;
                for s in [a + 0.25 * (b - a), mid, a + 0.75 * (b - a)] {
                    let per_n = interior_bounds(sym, s, &INTERIOR_TRUNCATIONS)?;
                    if classify(&per_n, INTERIOR_FLOOR) != Verdict::Elliptic {
                        v = Verdict::Inconclusive;
                    }
                    interior.push((s, per_n));
                }
                v
            }
        };
        subintervals.push(Subinterval { lo: a, hi: b, verdict, windings, interior });
    }
    let elliptic: Vec<&Subinterval> = subintervals.iter().filter(|s| s.verdict == Verdict::Elliptic).collect();
    let any_inconclusive = subintervals.iter().any(|s| s.verdict == Verdict::Inconclusive);
    let (verdict, s) = match (elliptic.len(), any_inconclusive) {
        (0, false) => (Verdict::NotElliptic, SRange::Empty),
        (1, false) => (Verdict::Elliptic, SRange::Interval { lo: elliptic[0].lo, hi: elliptic[0].hi }),
        _ => (Verdict::Inconclusive, SRange::Empty),
    };
    Ok(EllipticityReport {
        verdict,
        method: Method::PoleWindingAndSvd,
        evidence: Evidence::SInterval { endpoints, subintervals },
        s,
    })
}

/// Matrix symbol `M[i][j] = sigma_{j - i mod k}(x - 2 pi i / k)` of a symbol
/// of `Z/k`. The map `sigma -> M` is multiplicative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSymbol {
    pub k: usize,
    /// Row-major entries.
    pub entries: Vec<CosphereFunction>,
}

impl MatrixSymbol {
    pub fn eval(&self, x: f64, xi: Xi) -> CMatrix {
        eval_matrix(&self.entries, self.k, x, xi)
    }
}

pub fn matrix_symbol(sym: &CrossedSymbol) -> Result<MatrixSymbol> {
    let k = sym
        .action()
        .group_order()
        .ok_or_else(|| Error::Unsupported("matrix symbols are defined for finite groups".into()))?;
    Ok(MatrixSymbol { k: k as usize, entries: matrix_entries(sym, k) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TrigSeries;
    use crate::symbol::{cp_mul, trajectory_matrix};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn golden() -> ActionSpec {
        ActionSpec::rotation((5f64.sqrt() - 1.0) / 2.0, true).unwrap()
    }

    fn one_plus_half_shift(a: ActionSpec) -> CrossedSymbol {
        CrossedSymbol::identity(a, 0.0).unwrap().with_term(1, CosphereFunction::constant(c(0.5, 0.0))).unwrap()
    }

    #[test]
    fn half_shift_is_elliptic_for_rotation() {
        let r = check_elliptic_isometric(&one_plus_half_shift(golden()), 4, &[16, 32, 64], 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Elliptic);
        let Evidence::Trajectory { per_n, .. } = r.evidence else { panic!() };
        assert!(per_n.iter().all(|b| b.lower_bound >= 0.5 - 1e-12));
    }

    #[test]
    fn vanishing_symbol_is_not_elliptic() {
        let s = CrossedSymbol::new(golden(), 0.0)
            .unwrap()
            .with_term(0, CosphereFunction::new(TrigSeries::from_fn(|x| c(x.sin(), 0.0), 1), TrigSeries::constant(c(1.0, 0.0))))
            .unwrap();
        assert_eq!(check_elliptic_isometric(&s, 4, &[16, 32], 1e-6).unwrap().verdict, Verdict::NotElliptic);
    }

    #[test]
    fn scaling_scales_lower_bounds() {
        let s = one_plus_half_shift(golden()).with_term(-1, CosphereFunction::uniform(TrigSeries::from_fn(|x| c(0.1 * x.cos(), 0.0), 1))).unwrap();
        let k = c(0.0, 3.0);
        let r1 = check_elliptic_isometric(&s, 3, &[16, 32], 1e-6).unwrap();
        let r2 = check_elliptic_isometric(&s.scale(k), 3, &[16, 32], 1e-6).unwrap();
        let (Evidence::Trajectory { per_n: a, .. }, Evidence::Trajectory { per_n: b, .. }) = (r1.evidence, r2.evidence) else { panic!() };
        for (x, y) in a.iter().zip(&b) {
            assert!((3.0 * x.lower_bound - y.lower_bound).abs() < 1e-10);
        }
    }

    #[test]
    fn pole_radii() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let s = one_plus_half_shift(a);
        let p0 = pole_symbol(&s, Pole::Zero, Xi::Plus, 1.0).unwrap();
        let pi = pole_symbol(&s, Pole::Infinity, Xi::Plus, 1.0).unwrap();
        assert!((p0.radius - 2f64.sqrt()).abs() < 1e-12);
        assert!((pi.radius - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((p0.eval(c(2.0, 0.0)) - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn half_shift_interval_for_dilation() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let r = elliptic_s_interval(&one_plus_half_shift(a), (-2.0, 3.0), 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Elliptic);
        let SRange::Interval { lo, hi } = r.s else { panic!("{:?}", r.s) };
        assert!((lo + 0.5).abs() < 1e-6 && (hi - 1.5).abs() < 1e-6, "{lo} {hi}");
    }

    #[test]
    fn constant_symbol_is_elliptic_everywhere() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let s = CrossedSymbol::identity(a, 0.0).unwrap().scale(c(2.0, -1.0));
        let r = elliptic_s_interval(&s, (-1.0, 2.0), 1e-6).unwrap();
        assert_eq!(r.s, SRange::Interval { lo: -1.0, hi: 2.0 });
    }

    #[test]
    fn pure_shift_is_invertible_for_every_s() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let s = CrossedSymbol::new(a, 0.0).unwrap().with_term(1, CosphereFunction::constant(c(1.0, 0.0))).unwrap();
        let r = elliptic_s_interval(&s, (-1.0, 2.0), 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Elliptic);
        assert_eq!(r.s, SRange::Interval { lo: -1.0, hi: 2.0 });
    }

    #[test]
    fn mismatched_windings_are_not_elliptic() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let r = check_elliptic_at_s(&one_plus_half_shift(a), 2.0, &INTERIOR_TRUNCATIONS, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::NotElliptic);
        let r = check_elliptic_at_s(&one_plus_half_shift(a), 0.5, &INTERIOR_TRUNCATIONS, 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::Elliptic);
    }

    #[test]
    fn matrix_symbol_is_multiplicative() {
        let a = ActionSpec::cyclic(3).unwrap();
        let f = |w: f64| CosphereFunction::uniform(TrigSeries::from_fn(move |x| c((w * x).cos(), 0.2 * x.sin()), 2));
        let s1 = CrossedSymbol::new(a, 0.0).unwrap().with_term(0, f(1.0)).unwrap().with_term(1, f(2.0)).unwrap();
        let s2 = CrossedSymbol::new(a, 0.0).unwrap().with_term(2, f(1.0)).unwrap().with_term(1, CosphereFunction::constant(c(0.0, 1.0))).unwrap();
        let (m1, m2, m12) = (matrix_symbol(&s1).unwrap(), matrix_symbol(&s2).unwrap(), matrix_symbol(&cp_mul(&s1, &s2).unwrap()).unwrap());
        for x in [0.0, 0.9, 4.4] {
            for xi in Xi::BOTH {
                assert!((m1.eval(x, xi) * m2.eval(x, xi) - m12.eval(x, xi)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matrix_symbol_equals_trajectory() {
        let a = ActionSpec::cyclic(4).unwrap();
        let s = one_plus_half_shift(a).with_term(3, CosphereFunction::uniform(TrigSeries::from_fn(|x| c(0.0, x.cos()), 1))).unwrap();
        let m = matrix_symbol(&s).unwrap();
        let p = circle_cotangent(&a, 0.8, Xi::Minus).unwrap();
        let t = trajectory_matrix(&s, &p, 0.0, 0).unwrap();
        assert!((m.eval(0.8, Xi::Minus) - t.entries).norm() < 1e-13);
    }
}
