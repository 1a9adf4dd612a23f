//! Concrete realizations of G-operators `D = sum_g D_g T_g` on Fourier modes
//! of the circle, and the analytic index from singular values of
//! rectangular truncations.
//!
//! All matrices are written in orthonormal bases `(1 + n^2)^{-s/2} e^{inx}`
//! of `H^s` (domain) and `H^{s-m}` (codomain). A coefficient acts as
//! `M_{a+} P+ Lambda^m + M_{a-} P- Lambda^m` with `P+` the projection onto
//! modes `n >= 0`.
//!
//! Square truncations of a Fredholm operator always have index zero. The
//! index is read off from a tall block (columns `|n| <= N`, rows wide enough
//! to hold their images) and from the corresponding block of the adjoint.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{circle_angle_map, circle_angle_map_derivative, ActionSpec};
use crate::linalg::{singular_values, CMatrix};
use crate::series::{fft_forward, next_pow2};
use crate::symbol::{CosphereFunction, CrossedSymbol};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Finite-rank smoothing part given by matrix entries `(row mode, column
/// mode, value)` in the orthonormal bases.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SmoothingPart {
    pub entries: Vec<(i64, i64, Complex64)>,
}

impl SmoothingPart {
    fn reach(&self) -> usize {
        self.entries.iter().map(|(k, n, _)| k.unsigned_abs().max(n.unsigned_abs()) as usize).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorTerm {
    pub g: i64,
    pub coefficient: CosphereFunction,
    pub smoothing: Option<SmoothingPart>,
}

/// `D = sum_g (Op(c_g) + K_g) T_g` acting `H^s -> H^{s - m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GOperatorSpec {
    pub action: ActionSpec,
    pub order_m: f64,
    pub s: f64,
    pub terms: Vec<OperatorTerm>,
}

impl GOperatorSpec {
    pub fn new(action: ActionSpec, order_m: f64, s: f64) -> Result<Self> {
        if !action.acts_on_circle() {
            return Err(Error::Unsupported("operators are realized on the circle".into()));
        }
        Ok(Self { action, order_m, s, terms: Vec::new() })
    }

    pub fn with_term(mut self, g: i64, coefficient: CosphereFunction) -> Self {
        self.terms.push(OperatorTerm { g: self.action.normalize(g), coefficient, smoothing: None });
        self
    }

    pub fn with_smoothing(mut self, g: i64, smoothing: SmoothingPart) -> Self {
        self.terms.push(OperatorTerm { g: self.action.normalize(g), coefficient: CosphereFunction::zero(), smoothing: Some(smoothing) });
        self
    }

    /// Principal symbol in the crossed product.
    pub fn symbol(&self) -> Result<CrossedSymbol> {
        let mut sym = CrossedSymbol::new(self.action, self.order_m)?;
        for t in &self.terms {
            sym = sym.with_term(t.g, t.coefficient.clone())?;
        }
        Ok(sym)
    }

    pub fn bandwidth(&self) -> usize {
        self.terms.iter().map(|t| t.coefficient.bandwidth()).max().unwrap_or(0)
    }

    fn smoothing_reach(&self) -> usize {
        self.terms.iter().filter_map(|t| t.smoothing.as_ref()).map(|s| s.reach()).max().unwrap_or(0)
    }

    fn max_shift(&self) -> u64 {
        self.terms.iter().map(|t| t.g.unsigned_abs()).max().unwrap_or(0)
    }
}

/// Linear operator on Fourier modes that can produce exact finite blocks.
pub trait ModeOperator: Sync {
    /// Block with rows `|k| <= rows` and columns `|n| <= cols`.
    fn block(&self, rows: usize, cols: usize) -> Result<CMatrix>;
    /// Row half-width that captures the images of all modes `|n| <= n`, and
    /// the columns needed for the adjoint block.
    fn row_reach(&self, n: usize) -> usize;
}

fn sobolev_weight(k: i64, n: i64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        ((1.0 + (k * k) as f64) / (1.0 + (n * n) as f64)).powf(e / 2.0)
    }
}

/// Block of `M_{a+} P+ Lambda^m + M_{a-} P- Lambda^m` with rows `|k| <= rows`
/// and columns `|n| <= cols`.
pub fn coefficient_block(c: &CosphereFunction, order_m: f64, s: f64, rows: usize, cols: usize) -> CMatrix {
    let (r, q) = (rows as i64, cols as i64);
    let b = c.bandwidth() as i64;
    let mut m = CMatrix::zeros(2 * rows + 1, 2 * cols + 1);
    for n in -q..=q {
        let comp = if n >= 0 { &c.plus } else { &c.minus };
        for k in (n - b).max(-r)..=(n + b).min(r) {
            let a = comp.coeff(k - n);
            if a != ZERO {
                // Lambda^m and both basis normalizations combine into one ratio.
                m[((k + r) as usize, (n + q) as usize)] = a * sobolev_weight(k, n, s - order_m);
            }
        }
    }
    m
}

/// Square realization of a coefficient on `{-n..n}`.
pub fn realize_coefficient(c: &CosphereFunction, order_m: f64, s: f64, n: usize) -> Result<CMatrix> {
    if c.bandwidth() > n {
        return Err(Error::BandwidthExceedsTruncation { bandwidth: c.bandwidth(), n });
    }
    Ok(coefficient_block(c, order_m, s, n, n))
}

/// Number of quadrature nodes for dilation shift blocks.
fn shift_nodes(rows: usize, cols: usize, spread: f64) -> usize {
    next_pow2(4 * (rows.max((cols as f64 * spread).ceil() as usize) + 32))
}

/// Block of `u -> w(phi) u(g^{-1} phi)` in the plain Fourier basis.
fn composition_block(a: &ActionSpec, g: i64, rows: usize, cols: usize, half_density: bool) -> Result<CMatrix> {
    let spread = match a {
        ActionSpec::DilationSphere { alpha, .. } => alpha.powf(-(g.unsigned_abs() as f64)),
        _ => 1.0,
    };
    if !spread.is_finite() {
        return Err(Error::ChartOverflow(g));
    }
    let q = shift_nodes(rows, cols, spread);
    let angles: Vec<f64> = (0..q).map(|j| TAU * j as f64 / q as f64).collect();
    let inv: Vec<f64> = angles.iter().map(|p| circle_angle_map(a, -g, *p)).collect::<Result<_>>()?;
    let weight: Vec<f64> = if half_density {
        angles.iter().map(|p| circle_angle_map_derivative(a, -g, *p).map(|d| d.abs().sqrt())).collect::<Result<_>>()?
    } else {
        vec![1.0; q]
    };
    let (r, c) = (rows as i64, cols as i64);
    let columns: Vec<Vec<Complex64>> = (-c..=c)
        .into_par_iter()
        .map(|n| {
            let mut buf: Vec<Complex64> = inv.iter().zip(&weight).map(|(y, w)| Complex64::from_polar(*w, n as f64 * y)).collect();
            fft_forward(&mut buf);
            (-r..=r).map(|k| buf[k.rem_euclid(q as i64) as usize] / q as f64).collect()
        })
        .collect();
    let mut m = CMatrix::zeros(2 * rows + 1, 2 * cols + 1);
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    Ok(m)
}

fn rotation_phase(a: &ActionSpec, g: i64) -> Result<f64> {
    circle_angle_map(a, g, 0.0)
}

/// Matrix of the unitary shift on `{-n..n}`: the rotation `u o g^{-1}`, or
/// for dilations the half-density shift `|(g^{-1})'|^{1/2} u o g^{-1}`,
/// which is unitary on `L^2` and does not depend on `s`.
pub fn realize_shift(a: &ActionSpec, g: i64, _s: f64, n: usize) -> Result<CMatrix> {
    match a {
        ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. } => {
            let t = rotation_phase(a, g)?;
            let mut m = CMatrix::zeros(2 * n + 1, 2 * n + 1);
            for (i, k) in (-(n as i64)..=n as i64).enumerate() {
                m[(i, i)] = Complex64::from_polar(1.0, -(k as f64) * t);
            }
            Ok(m)
        }
        ActionSpec::DilationSphere { dim_m: 1, .. } => composition_block(a, g, n, n, true),
        _ => Err(Error::Unsupported("shift realizations are implemented on the circle".into())),
    }
}

/// Block of the plain shift `u -> u o g^{-1}` in the orthonormal `H^s` basis.
fn plain_shift_block(a: &ActionSpec, g: i64, s: f64, rows: usize, cols: usize) -> Result<CMatrix> {
    match a {
        ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. } => {
            let t = rotation_phase(a, g)?;
            let mut m = CMatrix::zeros(2 * rows + 1, 2 * cols + 1);
            for k in -(rows.min(cols) as i64)..=rows.min(cols) as i64 {
                m[((k + rows as i64) as usize, (k + cols as i64) as usize)] = Complex64::from_polar(1.0, -(k as f64) * t);
            }
            Ok(m)
        }
        _ => {
            let mut m = composition_block(a, g, rows, cols, false)?;
            if s != 0.0 {
                let (r, c) = (rows as i64, cols as i64);
                for k in -r..=r {
                    for n in -c..=c {
                        m[((k + r) as usize, (n + c) as usize)] *= sobolev_weight(k, n, s);
                    }
                }
            }
            Ok(m)
        }
    }
}

impl ModeOperator for GOperatorSpec {
    fn block(&self, rows: usize, cols: usize) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(2 * rows + 1, 2 * cols + 1);
        let b = self.bandwidth();
        for t in &self.terms {
            let mid = match self.action {
                ActionSpec::DilationSphere { .. } => rows + b + self.smoothing_reach(),
                _ => cols,
            };
            let mut left = coefficient_block(&t.coefficient, self.order_m, self.s, rows, mid);
            if let Some(sm) = &t.smoothing {
                for (k, n, v) in &sm.entries {
                    if k.unsigned_abs() as usize <= rows && n.unsigned_abs() as usize <= mid {
                        left[((k + rows as i64) as usize, (n + mid as i64) as usize)] += v;
                    }
                }
            }
            match self.action {
                ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. } => {
                    // Diagonal shift: scale the columns.
                    let phase = rotation_phase(&self.action, t.g)?;
                    for (j, n) in (-(cols as i64)..=cols as i64).enumerate() {
                        let z = Complex64::from_polar(1.0, -(n as f64) * phase);
                        let mut col = out.column_mut(j);
                        col.axpy(z, &left.column(j), ONE);
                    }
                }
                _ => out += left * plain_shift_block(&self.action, t.g, self.s, mid, cols)?,
            }
        }
        Ok(out)
    }

    fn row_reach(&self, n: usize) -> usize {
        let b = self.bandwidth();
        let base = match self.action {
            ActionSpec::DilationSphere { alpha, .. } => {
                ((n + b) as f64 * alpha.powf(-(self.max_shift() as f64))).ceil() as usize + 16 + b
            }
            _ => n + b,
        };
        base.max(self.smoothing_reach())
    }
}

/// Product `A B` of two mode operators; exact on finite blocks.
pub struct Composition<'a, A: ModeOperator, B: ModeOperator>(pub &'a A, pub &'a B);

impl<A: ModeOperator, B: ModeOperator> ModeOperator for Composition<'_, A, B> {
    fn block(&self, rows: usize, cols: usize) -> Result<CMatrix> {
        let mid = self.1.row_reach(cols).max(self.0.row_reach(rows));
        Ok(self.0.block(rows, mid)? * self.1.block(mid, cols)?)
    }

    fn row_reach(&self, n: usize) -> usize {
        self.0.row_reach(self.1.row_reach(n))
    }
}

/// Hilbert-space adjoint of a mode operator.
pub struct Adjoint<'a, A: ModeOperator>(pub &'a A);

impl<A: ModeOperator> ModeOperator for Adjoint<'_, A> {
    fn block(&self, rows: usize, cols: usize) -> Result<CMatrix> {
        Ok(self.0.block(cols, rows)?.adjoint())
    }

    fn row_reach(&self, n: usize) -> usize {
        self.0.row_reach(n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedRealization {
    pub trunc_n: usize,
    pub matrix: CMatrix,
    pub sobolev_s: f64,
    pub order_m: f64,
}

/// Square section of the operator on `{-n..n}`.
pub fn realize_operator(spec: &GOperatorSpec, n: usize) -> Result<TruncatedRealization> {
    if spec.bandwidth() > n {
        return Err(Error::BandwidthExceedsTruncation { bandwidth: spec.bandwidth(), n });
    }
    Ok(TruncatedRealization { trunc_n: n, matrix: spec.block(n, n)?, sobolev_s: spec.s, order_m: spec.order_m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub n: usize,
    pub dim_ker: usize,
    pub dim_coker: usize,
    pub index: i64,
    /// Smallest singular value above the threshold divided by the threshold.
    pub sv_gap: f64,
    /// Largest singular value below the threshold (zero if none).
    pub largest_below: f64,
    /// Whether the gap exceeds ten.
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub per_n: Vec<IndexEntry>,
    pub stabilized_index: Option<i64>,
    pub sv_threshold: f64,
}

fn count_below(sv: &[f64], thr: f64) -> (usize, f64, f64) {
    let below: Vec<f64> = sv.iter().copied().filter(|v| *v < thr).collect();
    let above = sv.iter().copied().filter(|v| *v >= thr).fold(f64::INFINITY, f64::min);
    (below.len(), below.iter().copied().fold(0.0, f64::max), above)
}

/// Index entry at one truncation: `dim ker` from the tall block, `dim coker`
/// from the tall block of the adjoint.
pub fn index_at(op: &dyn ModeOperatorDyn, n: usize, thr: f64) -> Result<IndexEntry> {
    let reach = op.reach(n);
    let tall = op.blk(reach, n)?;
    let wide = op.blk(n, reach)?;
    let (ker, below_k, above_k) = count_below(&singular_values(&tall), thr);
    let (coker, below_c, above_c) = count_below(&singular_values(&wide.adjoint()), thr);
    let above = above_k.min(above_c);
    let gap = above / thr;
    Ok(IndexEntry {
        n,
        dim_ker: ker,
        dim_coker: coker,
        index: ker as i64 - coker as i64,
        sv_gap: gap,
        largest_below: below_k.max(below_c),
        reliable: gap >= 10.0,
    })
}

/// Object-safe view of [`ModeOperator`].
pub trait ModeOperatorDyn: Sync {
    fn blk(&self, rows: usize, cols: usize) -> Result<CMatrix>;
    fn reach(&self, n: usize) -> usize;
}

impl<T: ModeOperator> ModeOperatorDyn for T {
    fn blk(&self, rows: usize, cols: usize) -> Result<CMatrix> {
        self.block(rows, cols)
    }
    fn reach(&self, n: usize) -> usize {
        self.row_reach(n)
    }
}

/// Analytic index over a list of truncations. The index is stabilized when
/// the last three truncations agree and are reliable.
pub fn analytic_index<T: ModeOperator>(op: &T, n_list: &[usize], sv_threshold: f64) -> Result<IndexReport> {
    if n_list.is_empty() || !(sv_threshold > 0.0) {
        return Err(Error::InvalidInput("need truncations and a positive threshold".into()));
    }
    let per_n: Vec<IndexEntry> = n_list
        .par_iter()
        .map(|n| index_at(op, *n, sv_threshold))
        .collect::<Result<_>>()?;
    let stabilized_index = stabilized(&per_n);
    Ok(IndexReport { per_n, stabilized_index, sv_threshold })
}

fn stabilized(per_n: &[IndexEntry]) -> Option<i64> {
    if per_n.len() < 3 {
        return None;
    }
    let tail = &per_n[per_n.len() - 3..];
    let idx = tail[0].index;
    tail.iter().all(|e| e.index == idx && e.reliable).then_some(idx)
}

/// Coefficient `c` on the `+` component and `1` on the `-` component.
pub fn toeplitz_coefficient(c: crate::series::TrigSeries) -> CosphereFunction {
    CosphereFunction::new(c, crate::series::TrigSeries::constant(Complex64::new(1.0, 0.0)))
}
