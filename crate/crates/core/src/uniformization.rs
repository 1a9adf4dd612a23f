//! Operators on the 2-torus with the circle acting along the second factor.
//!
//! Every operator here is diagonal in the Fourier modes `(n1, n2)`, so the
//! invariant sections are the block `n2 = 0` and the averaging projection
//! keeps exactly that block. The worked example is
//! `D = Delta + alpha Delta_1 P`, with `Delta` the nonnegative Laplacian,
//! `Delta_1 = -d^2/dx1^2` and `P` the average over the orbits. It is
//! normalized as `Delta^+ D`, with `Delta^+` the Moore-Penrose inverse.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::realization::{IndexEntry, IndexReport};
use crate::series::{fft_forward, fft_inverse};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Diagonal operator on the modes `|n1|, |n2| <= n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusModes {
    pub n: usize,
    /// Entry of `(n1, n2)` at `(n1 + n) (2n + 1) + (n2 + n)`.
    pub diag: Vec<Complex64>,
}

impl TorusModes {
    pub fn from_fn(n: usize, f: impl Fn(i64, i64) -> Complex64) -> Self {
        let w = n as i64;
        let mut diag = Vec::with_capacity((2 * n + 1) * (2 * n + 1));
        for n1 in -w..=w {
            for n2 in -w..=w {
                diag.push(f(n1, n2));
            }
        }
        Self { n, diag }
    }

    pub fn get(&self, n1: i64, n2: i64) -> Complex64 {
        let w = self.n as i64;
        self.diag[((n1 + w) * (2 * w + 1) + (n2 + w)) as usize]
    }

    pub fn compose(&self, o: &Self) -> Result<Self> {
        if self.n != o.n {
            return Err(Error::InvalidInput("mode windows differ".into()));
        }
        Ok(Self { n: self.n, diag: self.diag.iter().zip(&o.diag).map(|(a, b)| a * b).collect() })
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        if self.n != o.n {
            return Err(Error::InvalidInput("mode windows differ".into()));
        }
        Ok(Self { n: self.n, diag: self.diag.iter().zip(&o.diag).map(|(a, b)| a + b).collect() })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { n: self.n, diag: self.diag.iter().map(|a| a * c).collect() }
    }

    /// Moore-Penrose inverse: reciprocal on nonzero entries, zero elsewhere.
    pub fn pseudo_inverse(&self) -> Self {
        Self { n: self.n, diag: self.diag.iter().map(|a| if *a == ZERO { ZERO } else { a.inv() }).collect() }
    }

    /// Applies the operator to samples on a `k x k` grid (`k > 2n`), the
    /// first index being `x1`.
    pub fn apply_samples(&self, samples: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
        let mut coeffs = grid_to_modes(samples);
        let k = coeffs.len() as i64;
        let w = self.n as i64;
        for (i, row) in coeffs.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                let n1 = if i as i64 > k / 2 { i as i64 - k } else { i as i64 };
                let n2 = if j as i64 > k / 2 { j as i64 - k } else { j as i64 };
                *c *= if n1.abs() <= w && n2.abs() <= w { self.get(n1, n2) } else { ZERO };
            }
        }
        modes_to_grid(coeffs)
    }
}

fn transpose(m: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
    let (r, c) = (m.len(), m[0].len());
    (0..c).map(|j| (0..r).map(|i| m[i][j]).collect()).collect()
}

/// Normalized 2-D DFT (coefficients in FFT order).
fn grid_to_modes(samples: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let k = samples.len();
    let mut rows: Vec<Vec<Complex64>> = samples.to_vec();
    rows.iter_mut().for_each(|r| fft_forward(r));
    let mut cols = transpose(rows);
    cols.iter_mut().for_each(|c| fft_forward(c));
    let scale = 1.0 / (k * samples[0].len()) as f64;
    transpose(cols).into_iter().map(|r| r.into_iter().map(|c| c * scale).collect()).collect()
}

fn modes_to_grid(coeffs: Vec<Vec<Complex64>>) -> Vec<Vec<Complex64>> {
    let mut rows = coeffs;
    rows.iter_mut().for_each(|r| fft_inverse(r));
    let mut cols = transpose(rows);
    cols.iter_mut().for_each(|c| fft_inverse(c));
    transpose(cols)
}

/// Samples of `f(x1, x2)` on the uniform `k x k` grid of `[0, 2 pi)^2`.
pub fn sample_torus(k: usize, f: impl Fn(f64, f64) -> Complex64) -> Vec<Vec<Complex64>> {
    (0..k)
        .map(|i| (0..k).map(|j| f(TAU * i as f64 / k as f64, TAU * j as f64 / k as f64)).collect())
        .collect()
}

/// Average over the circle orbits: keeps modes with `n2 = 0`.
pub fn averaging_projection(n: usize) -> TorusModes {
    TorusModes::from_fn(n, |_, n2| if n2 == 0 { ONE } else { ZERO })
}

/// Nonnegative Laplacian `n1^2 + n2^2`.
pub fn torus_laplacian(n: usize) -> TorusModes {
    TorusModes::from_fn(n, |n1, n2| Complex64::new((n1 * n1 + n2 * n2) as f64, 0.0))
}

/// `-d^2/dx1^2`.
pub fn transverse_laplacian(n: usize) -> TorusModes {
    TorusModes::from_fn(n, |n1, _| Complex64::new((n1 * n1) as f64, 0.0))
}

/// Shift along the orbits by `t` turns, `u -> u(x1, x2 - 2 pi t)`.
pub fn orbit_shift(t: f64, n: usize) -> TorusModes {
    TorusModes::from_fn(n, |_, n2| Complex64::from_polar(1.0, -TAU * t * n2 as f64))
}

/// Mode multiplier of `Delta + alpha Delta_1 P`:
/// `n1^2 + n2^2 + alpha n1^2 [n2 = 0]`.
pub fn torus_example_modes(alpha: f64, n: usize) -> TorusModes {
    TorusModes::from_fn(n, |n1, n2| {
        let base = (n1 * n1 + n2 * n2) as f64;
        let avg = if n2 == 0 { alpha * (n1 * n1) as f64 } else { 0.0 };
        Complex64::new(base + avg, 0.0)
    })
}

/// `Delta^+ (Delta + alpha Delta_1 P)`.
pub fn normalized_example(alpha: f64, n: usize) -> TorusModes {
    torus_laplacian(n).pseudo_inverse().compose(&torus_example_modes(alpha, n)).expect("same window")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    /// Invariant sections (`n2 = 0`).
    Averaged,
    /// Complement (`n2 != 0`).
    Complement,
}

pub type ModeMultiplier = Arc<dyn Fn(i64, i64) -> Complex64 + Send + Sync>;
/// Principal symbol on transverse covectors `(xi1, 0)`, `xi1 = +1, -1`, per block.
pub type TransverseSymbol = Arc<dyn Fn(f64, Block) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum TransverseSpec {
    TorusExample { alpha: f64 },
    /// Normalized (order zero) operator given by its mode multiplier.
    Custom { multiplier: ModeMultiplier, transverse: Option<TransverseSymbol> },
}

impl fmt::Debug for TransverseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TorusExample { alpha } => write!(f, "TorusExample {{ alpha: {alpha} }}"),
            Self::Custom { transverse, .. } => write!(f, "Custom {{ transverse: {} }}", transverse.is_some()),
        }
    }
}

impl TransverseSpec {
    /// Normalized operator on modes `|n1|, |n2| <= n`.
    pub fn modes(&self, n: usize) -> TorusModes {
        match self {
            Self::TorusExample { alpha } => normalized_example(*alpha, n),
            Self::Custom { multiplier, .. } => TorusModes::from_fn(n, |a, b| multiplier(a, b)),
        }
    }

    fn transverse_symbol(&self, xi1: f64, block: Block) -> Option<Complex64> {
        match self {
            Self::TorusExample { alpha } => Some(match block {
                Block::Averaged => Complex64::new(1.0 + alpha, 0.0),
                Block::Complement => ONE,
            }),
            Self::Custom { transverse, .. } => transverse.as_ref().map(|t| t(xi1, block)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransverseVerdict {
    /// Elliptic in the ordinary sense (no averaged term).
    Elliptic,
    TransversallyElliptic,
    NotTransversallyElliptic,
    /// No transverse symbol was supplied.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransverseReport {
    pub verdict: TransverseVerdict,
    pub min_modulus: Option<f64>,
    /// Transverse covectors (and blocks) where the symbol vanishes.
    pub offending: Vec<String>,
}

/// Symbol modulus below which the transverse symbol counts as vanishing.
pub const TRANSVERSE_ZERO: f64 = 1e-12;

pub fn transverse_elliptic_check(spec: &TransverseSpec) -> TransverseReport {
    let mut min = f64::INFINITY;
    let mut offending = Vec::new();
    for block in [Block::Averaged, Block::Complement] {
        for xi1 in [1.0, -1.0] {
            let Some(v) = spec.transverse_symbol(xi1, block) else {
                return TransverseReport { verdict: TransverseVerdict::Undetermined, min_modulus: None, offending };
            };
            min = min.min(v.norm());
            if v.norm() <= TRANSVERSE_ZERO {
                let name = match block {
                    Block::Averaged => "averaged",
                    Block::Complement => "complement",
                };
                offending.push(format!("{name} block at xi = ({xi1:+}, 0)"));
            }
        }
    }
    let verdict = if !offending.is_empty() {
        TransverseVerdict::NotTransversallyElliptic
    } else if matches!(spec, TransverseSpec::TorusExample { alpha } if *alpha == 0.0) {
        TransverseVerdict::Elliptic
    } else {
        TransverseVerdict::TransversallyElliptic
    };
    TransverseReport { verdict, min_modulus: Some(min), offending }
}

fn entry(m: &TorusModes, thr: f64) -> IndexEntry {
    let ker = m.diag.iter().filter(|d| d.norm() < thr).count();
    // The adjoint has conjugate entries, hence the same small entries.
    let coker = m.diag.iter().filter(|d| d.conj().norm() < thr).count();
    let above = m.diag.iter().map(|d| d.norm()).filter(|v| *v >= thr).fold(f64::INFINITY, f64::min);
    let below = m.diag.iter().map(|d| d.norm()).filter(|v| *v < thr).fold(0.0, f64::max);
    IndexEntry {
        n: m.n,
        dim_ker: ker,
        dim_coker: coker,
        index: ker as i64 - coker as i64,
        sv_gap: above / thr,
        largest_below: below,
        reliable: above >= 10.0 * thr,
    }
}

/// Per-truncation kernel and cokernel counts of the normalized operator,
/// without checking transverse ellipticity first.
pub fn mode_index_table(spec: &TransverseSpec, n_list: &[usize], thr: f64) -> Vec<IndexEntry> {
    n_list.iter().map(|n| entry(&spec.modes(*n), thr)).collect()
}

/// Whether the truncation data look Fredholm: kernel and cokernel dimensions
/// constant over the last three truncations, all reliable.
pub fn looks_fredholm(table: &[IndexEntry]) -> bool {
    if table.len() < 3 {
        return false;
    }
    let t = &table[table.len() - 3..];
    t.iter().all(|e| e.reliable && e.dim_ker == t[0].dim_ker && e.dim_coker == t[0].dim_coker)
}

/// Index of the operator restricted to the invariant-section picture. Fails
/// for operators that are not transversally elliptic, and when the kernel
/// dimensions do not stabilize.
pub fn invariant_restriction_index(spec: &TransverseSpec, n_list: &[usize], thr: f64) -> Result<IndexReport> {
    let check = transverse_elliptic_check(spec);
    match check.verdict {
        TransverseVerdict::NotTransversallyElliptic => {
            return Err(Error::NotTransverselyElliptic(check.offending.join("; ")))
        }
        TransverseVerdict::Undetermined => {
            return Err(Error::InvalidInput("a transverse symbol is required".into()))
        }
        _ => {}
    }
    let per_n = mode_index_table(spec, n_list, thr);
    if !looks_fredholm(&per_n) {
        return Err(Error::NoStabilization);
    }
    let stabilized_index = Some(per_n[per_n.len() - 1].index);
    Ok(IndexReport { per_n, stabilized_index, sv_threshold: thr })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_diff(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
        a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn projection_is_idempotent_and_commutes_with_shifts() {
        let p = averaging_projection(6);
        assert_eq!(p.compose(&p).unwrap(), p);
        let t = orbit_shift(0.37, 6);
        assert_eq!(p.compose(&t).unwrap(), t.compose(&p).unwrap());
        let lap = torus_laplacian(6);
        assert_eq!(p.compose(&lap).unwrap(), lap.compose(&p).unwrap());
    }

    #[test]
    fn averaging_on_functions() {
        let p = averaging_projection(4);
        let k = 16;
        let u = sample_torus(k, |_, x2| Complex64::from_polar(1.0, x2));
        let zero = vec![vec![ZERO; k]; k];
        assert!(max_diff(&p.apply_samples(&u), &zero) < 1e-14);
        let v = sample_torus(k, |x1, _| Complex64::from_polar(1.0, x1));
        assert!(max_diff(&p.apply_samples(&v), &v) < 1e-14);
    }

    #[test]
    fn example_assembles_from_parts() {
        let n = 5;
        for alpha in [-1.0, 0.5, 2.0] {
            let assembled = torus_laplacian(n)
                .add(&transverse_laplacian(n).compose(&averaging_projection(n)).unwrap().scale(Complex64::new(alpha, 0.0)))
                .unwrap();
            assert_eq!(assembled, torus_example_modes(alpha, n));
        }
    }

    #[test]
    fn constants_span_kernel_and_cokernel() {
        let rep = invariant_restriction_index(&TransverseSpec::TorusExample { alpha: 1.0 }, &[8, 16, 32], 1e-9).unwrap();
        assert!(rep.per_n.iter().all(|e| e.dim_ker == 1 && e.dim_coker == 1));
        assert_eq!(rep.stabilized_index, Some(0));
    }

    #[test]
    fn degenerate_alpha_is_rejected() {
        let spec = TransverseSpec::TorusExample { alpha: -1.0 };
        let r = transverse_elliptic_check(&spec);
        assert_eq!(r.verdict, TransverseVerdict::NotTransversallyElliptic);
        assert_eq!(r.offending.len(), 2);
        assert!(matches!(invariant_restriction_index(&spec, &[8, 16, 32], 1e-9), Err(Error::NotTransverselyElliptic(_))));
        // The kernel grows with the truncation.
        let t = mode_index_table(&spec, &[8, 16, 32], 1e-9);
        assert_eq!(t.iter().map(|e| e.dim_ker).collect::<Vec<_>>(), vec![17, 33, 65]);
        assert!(!looks_fredholm(&t));
    }

    #[test]
    fn plain_laplacian_is_elliptic() {
        assert_eq!(transverse_elliptic_check(&TransverseSpec::TorusExample { alpha: 0.0 }).verdict, TransverseVerdict::Elliptic);
    }

    #[test]
    fn custom_without_transverse_symbol() {
        let spec = TransverseSpec::Custom { multiplier: Arc::new(|_, _| ONE), transverse: None };
        assert_eq!(transverse_elliptic_check(&spec).verdict, TransverseVerdict::Undetermined);
        let spec = TransverseSpec::Custom { multiplier: Arc::new(|_, _| ONE), transverse: Some(Arc::new(|_, _| ONE)) };
        assert_eq!(invariant_restriction_index(&spec, &[4, 8, 12], 1e-9).unwrap().stabilized_index, Some(0));
    }
}
