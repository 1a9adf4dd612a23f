//! Topological side of the index: winding numbers, the integral of the
//! e-component of `sigma^{-1} d sigma` for rotations by `Z`, and the
//! determinant formula for free actions of `Z/k`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{ORIENTATION_SIGN, SNAP_TOL};
use crate::error::{Error, Result};
use crate::geometry::ActionSpec;
use crate::series::{next_pow2, TrigSeries};
use crate::symbol::{e_component_form, eval_matrix, matrix_entries, CrossedSymbol, Xi};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologicalIndexResult {
    /// Unsnapped value after applying the orientation sign.
    pub raw: Complex64,
    pub snapped: i64,
    pub snap_error: f64,
    pub orientation_sign: i64,
    pub quadrature_nodes: usize,
}

impl TopologicalIndexResult {
    fn from_raw(raw: Complex64, nodes: usize) -> Result<Self> {
        let signed = raw * ORIENTATION_SIGN as f64;
        let snapped = signed.re.round();
        let snap_error = (signed - Complex64::new(snapped, 0.0)).norm();
        if snap_error >= SNAP_TOL {
            return Err(Error::NonIntegerWinding { raw: signed.re, distance: snap_error });
        }
        Ok(Self { raw: signed, snapped: snapped as i64, snap_error, orientation_sign: ORIENTATION_SIGN, quadrature_nodes: nodes })
    }
}

/// `(n-1)! / ((2 pi i)^n (2n-1)!)`, the normalization of the degree-`(2n-1)`
/// Chern character term in the index formula.
pub fn index_coefficient(n: u32) -> Complex64 {
    assert!(n >= 1, "n must be positive");
    let fact = |k: u32| (1..=k).map(f64::from).product::<f64>();
    let two_pi_i = Complex64::new(0.0, TAU);
    Complex64::new(fact(n - 1) / fact(2 * n - 1), 0.0) / two_pi_i.powu(n)
}

/// Default number of quadrature nodes for a series of bandwidth `b`.
pub fn default_nodes(bandwidth: usize) -> usize {
    next_pow2((8 * bandwidth).max(512))
}

/// `(1 / 2 pi i) closed-integral f'/f dx`, unsnapped.
pub fn winding_integral(f: &TrigSeries, nodes: usize) -> Result<Complex64> {
    let nodes = nodes.max(2 * f.bandwidth() + 1);
    let v = f.samples(nodes);
    let scale = f.l1_norm().max(f64::MIN_POSITIVE);
    let min = v.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
    if min <= 1e-9 * scale {
        return Err(Error::VanishingSymbol { min_modulus: min });
    }
    let d = f.derivative().samples(nodes);
    let sum: Complex64 = v.iter().zip(&d).map(|(f, df)| df / f).sum();
    // Trapezoidal rule: (2 pi / K) sum, divided by 2 pi i.
    Ok(sum / Complex64::new(0.0, nodes as f64))
}

/// Winding number of a nonvanishing function on the circle.
pub fn winding_number(f: &TrigSeries) -> Result<i64> {
    let raw = winding_integral(f, default_nodes(f.bandwidth()))?;
    let r = raw.re.round();
    let dist = (raw - Complex64::new(r, 0.0)).norm();
    if dist >= SNAP_TOL {
        return Err(Error::NonIntegerWinding { raw: raw.re, distance: dist });
    }
    Ok(r as i64)
}

/// Index of an elliptic symbol for a rotation by `Z` from the e-component
/// of `sigma^{-1} d sigma`, integrated over both cosphere components with
/// the trapezoidal rule on `nodes` points.
pub fn index_formula_z(sym: &CrossedSymbol, sym_inv: &CrossedSymbol, nodes: Option<usize>) -> Result<TopologicalIndexResult> {
    if !matches!(sym.action(), ActionSpec::RotationZ { .. }) {
        return Err(Error::Unsupported("the Z formula applies to rotations by Z".into()));
    }
    let form = e_component_form(sym, sym_inv)?;
    let nodes = nodes.unwrap_or_else(|| default_nodes(form.bandwidth())).max(2 * form.bandwidth() + 1);
    let integral = |f: &TrigSeries| -> Complex64 {
        let s: Complex64 = f.samples(nodes).iter().sum();
        s * (TAU / nodes as f64)
    };
    let raw = index_coefficient(1) * (integral(&form.plus) - integral(&form.minus));
    TopologicalIndexResult::from_raw(raw, nodes)
}

/// Index for a free action of `Z/k`: winding of `det M(x)` over the quotient
/// circle on each component, `W+ - W-`, times the orientation sign.
pub fn index_finite_free(sym: &CrossedSymbol) -> Result<TopologicalIndexResult> {
    let Some(k) = sym.action().group_order() else {
        return Err(Error::Unsupported("the finite formula applies to Z/k".into()));
    };
    let entries = matrix_entries(sym, k);
    let band = k as usize * sym.bandwidth();
    let nodes = default_nodes(band).max(next_pow2(2 * band + 1));
    let mut raw = Complex64::new(0.0, 0.0);
    for xi in Xi::BOTH {
        let dets: Vec<Complex64> = (0..nodes)
            .map(|j| eval_matrix(&entries, k as usize, TAU * j as f64 / nodes as f64, xi).determinant())
            .collect();
        let det = TrigSeries::from_samples(&dets, band);
        let w = winding_integral(&det, nodes)?;
        // det M is (2 pi / k)-periodic; its winding over the quotient circle
        // is the full-circle winding divided by k.
        raw += w * xi.sign() / k as f64;
    }
    TopologicalIndexResult::from_raw(raw, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{cp_inverse, CosphereFunction};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn coefficients_match_direct_formula() {
        // n = 1: 1/(2 pi i); n = 2: 1/(6 (2 pi i)^2); n = 3: 2/(120 (2 pi i)^3).
        let tpi = c(0.0, TAU);
        assert!((index_coefficient(1) - 1.0 / tpi).norm() < 1e-16);
        assert!((index_coefficient(2) - 1.0 / (6.0 * tpi * tpi)).norm() < 1e-16);
        assert!((index_coefficient(3) - 2.0 / (120.0 * tpi * tpi * tpi)).norm() < 1e-18);
    }

    #[test]
    fn winding_of_monomials() {
        for k in -3..=3 {
            assert_eq!(winding_number(&TrigSeries::monomial(k, c(2.0, 1.0))).unwrap(), k);
        }
        let f = TrigSeries::from_fn(|x| c(2.0 + x.cos(), x.sin()), 1);
        assert_eq!(winding_number(&f).unwrap(), 0);
        let g = TrigSeries::from_fn(|x| c(0.5 + x.cos(), x.sin()), 1);
        assert_eq!(winding_number(&g).unwrap(), 1);
    }

    #[test]
    fn vanishing_function_is_rejected() {
        let f = TrigSeries::from_fn(|x| c(x.sin(), 0.0), 1);
        assert!(matches!(winding_number(&f), Err(Error::VanishingSymbol { .. })));
    }

    #[test]
    fn toeplitz_symbol_index() {
        let a = ActionSpec::rotation((5f64.sqrt() - 1.0) / 2.0, true).unwrap();
        for k in -2..=2 {
            let s = CrossedSymbol::new(a, 0.0)
                .unwrap()
                .with_term(0, CosphereFunction::new(TrigSeries::monomial(k, c(1.0, 0.0)), TrigSeries::constant(c(1.0, 0.0))))
                .unwrap();
            let inv = cp_inverse(&s, 1e-11, 64).unwrap();
            let r = index_formula_z(&s, &inv.symbol, None).unwrap();
            assert_eq!(r.snapped, ORIENTATION_SIGN * k);
            assert!(r.snap_error < 1e-9);
        }
    }

    #[test]
    fn finite_free_index() {
        let a = ActionSpec::cyclic(2).unwrap();
        let s = CrossedSymbol::new(a, 0.0)
            .unwrap()
            .with_term(0, CosphereFunction::new(TrigSeries::monomial(1, c(1.0, 0.0)), TrigSeries::constant(c(1.0, 0.0))))
            .unwrap();
        assert_eq!(index_finite_free(&s).unwrap().snapped, ORIENTATION_SIGN);
        let trivial = CrossedSymbol::identity(a, 0.0).unwrap().with_term(1, CosphereFunction::constant(c(0.5, 0.0))).unwrap();
        assert_eq!(index_finite_free(&trivial).unwrap().snapped, 0);
    }
}
