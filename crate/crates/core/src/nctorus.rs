//! Schwartz functions on the line as sections of a line bundle on the torus.
//!
//! `Phi f(phi, psi) = sum_n f(phi + theta n) e^{2 pi i n psi}` on
//! `[0, theta) x [0, 1)`, with `g(phi + theta, psi) = g(phi, psi) e^{-2 pi i psi}`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{fft_forward, fft_inverse, next_pow2};

/// Half-width of the line window.
pub const LINE_HALF_WIDTH: f64 = 12.0;
/// Largest admissible grid step.
pub const MAX_STEP: f64 = 0.05;
/// Decay certificate bound on the outer tenth of the grid.
pub const DECAY_TOL: f64 = 1e-10;
/// Terms below this modulus are dropped from the periodizing sum.
pub const SUM_CUTOFF: f64 = 1e-14;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Symmetric grid `x_i = i h`, `|i| <= m`, with `theta / h = p` an integer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub theta: f64,
    pub h: f64,
    pub p: usize,
    pub m: usize,
}

impl LineGrid {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidInput(format!("theta must lie in (0, 1], got {theta}")));
        }
        let p = (theta / MAX_STEP).ceil() as usize;
        let h = theta / p as f64;
        let m = (LINE_HALF_WIDTH / h).floor() as usize;
        Ok(Self { theta, h, p, m })
    }

    pub fn len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.m as f64) * self.h
    }
}

fn spectral_freqs(k: usize, period: f64) -> Vec<f64> {
    (0..k)
        .map(|j| {
            let j = j as i64;
            let s = if 2 * j > k as i64 { j - k as i64 } else { j };
            // Drop an even-length Nyquist mode.
            if 2 * j == k as i64 { f64::NAN } else { TAU * s as f64 / period }
        })
        .collect()
}

/// Applies the Fourier multiplier `m(omega)` to periodic samples.
fn spectral_apply(v: &mut [Complex64], period: f64, m: impl Fn(f64) -> Complex64) {
    let k = v.len();
    fft_forward(v);
    for (c, w) in v.iter_mut().zip(spectral_freqs(k, period)) {
        *c *= if w.is_nan() { ZERO } else { m(w) / k as f64 };
    }
    fft_inverse(v);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFunction {
    pub grid: LineGrid,
    pub values: Vec<Complex64>,
}

impl LineFunction {
    pub fn from_fn(grid: LineGrid, f: impl Fn(f64) -> Complex64) -> Self {
        Self { values: (0..grid.len()).map(|i| f(grid.x(i))).collect(), grid }
    }

    /// Max modulus on the outer tenth of the grid.
    pub fn decay_certificate(&self) -> f64 {
        let edge = (self.values.len() / 20).max(1);
        let n = self.values.len();
        self.values[..edge].iter().chain(&self.values[n - edge..]).map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn check_decay(&self) -> Result<()> {
        let edge = self.decay_certificate();
        if edge < DECAY_TOL { Ok(()) } else { Err(Error::InsufficientDecay { edge }) }
    }

    /// `f(x) -> f(x + 1)`.
    pub fn shift_one(&self) -> Self {
        let mut v = self.values.clone();
        spectral_apply(&mut v, self.grid.len() as f64 * self.grid.h, |w| Complex64::from_polar(1.0, w));
        Self { grid: self.grid, values: v }
    }

    /// Multiplication by `e^{-2 pi i x / theta}`.
    pub fn modulate(&self) -> Self {
        let t = self.grid.theta;
        let values = self.values.iter().enumerate().map(|(i, v)| v * Complex64::from_polar(1.0, -TAU * self.grid.x(i) / t)).collect();
        Self { grid: self.grid, values }
    }

    /// `-i d/dx`.
    pub fn momentum(&self) -> Self {
        let mut v = self.values.clone();
        spectral_apply(&mut v, self.grid.len() as f64 * self.grid.h, |w| Complex64::new(w, 0.0));
        Self { grid: self.grid, values: v }
    }

    /// Multiplication by `x`.
    pub fn position(&self) -> Self {
        let values = self.values.iter().enumerate().map(|(i, v)| v * self.grid.x(i)).collect();
        Self { grid: self.grid, values }
    }

    pub fn apply(&self, op: NcOperator) -> Self {
        match op {
            NcOperator::U => self.shift_one(),
            NcOperator::V => self.modulate(),
            NcOperator::Momentum => self.momentum(),
            NcOperator::Position => self.position(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NcOperator {
    U,
    V,
    Momentum,
    Position,
}

impl NcOperator {
    pub const ALL: [NcOperator; 4] = [NcOperator::U, NcOperator::V, NcOperator::Momentum, NcOperator::Position];

    pub fn name(self) -> &'static str {
        match self {
            Self::U => "U",
            Self::V => "V",
            Self::Momentum => "momentum",
            Self::Position => "position",
        }
    }
}

/// Values on `phi_p = p h` (`p < P`) times `psi_q = q / Q` (`q < Q`), row-major in `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusSection {
    pub grid: LineGrid,
    pub q: usize,
    pub values: Vec<Complex64>,
}

impl TorusSection {
    pub fn theta(&self) -> f64 {
        self.grid.theta
    }

    pub fn get(&self, p: usize, q: usize) -> Complex64 {
        self.values[p * self.q + q]
    }

    pub fn phi(&self, p: usize) -> f64 {
        p as f64 * self.grid.h
    }

    pub fn psi(&self, q: usize) -> f64 {
        q as f64 / self.q as f64
    }

    fn map_values(&self, f: impl Fn(usize, usize, Complex64) -> Complex64) -> Self {
        let values = (0..self.grid.p).flat_map(|p| (0..self.q).map(move |q| (p, q))).map(|(p, q)| f(p, q, self.get(p, q))).collect();
        Self { grid: self.grid, q: self.q, values }
    }

    fn rows(&self) -> Vec<Vec<Complex64>> {
        self.values.chunks(self.q).map(|c| c.to_vec()).collect()
    }

    fn with_rows(&self, rows: Vec<Vec<Complex64>>) -> Self {
        Self { grid: self.grid, q: self.q, values: rows.concat() }
    }

    fn columns(&self) -> Vec<Vec<Complex64>> {
        (0..self.q).map(|q| (0..self.grid.p).map(|p| self.get(p, q)).collect()).collect()
    }

    fn with_columns(&self, cols: Vec<Vec<Complex64>>) -> Self {
        self.map_values(|p, q, _| cols[q][p])
    }

    /// Applies a Fourier multiplier in `phi` to the periodized section
    /// `g e^{2 pi i psi phi / theta}`, then undoes the twist at `phi + shift`.
    fn phi_multiplier(&self, shift: f64, m: impl Fn(f64, f64) -> Complex64 + Sync) -> Self {
        let t = self.theta();
        let cols: Vec<Vec<Complex64>> = self
            .columns()
            .into_par_iter()
            .enumerate()
            .map(|(q, col)| {
                let psi = self.psi(q);
                let mut h: Vec<Complex64> =
                    col.iter().enumerate().map(|(p, v)| v * Complex64::from_polar(1.0, TAU * psi * self.phi(p) / t)).collect();
                spectral_apply(&mut h, t, |w| m(w, psi));
                h.iter().enumerate().map(|(p, v)| v * Complex64::from_polar(1.0, -TAU * psi * (self.phi(p) + shift) / t)).collect()
            })
            .collect();
        self.with_columns(cols)
    }

    /// `g(phi, psi) -> g(phi + 1, psi)`, continued across the seam.
    pub fn shift_one(&self) -> Self {
        self.phi_multiplier(1.0, |w, _| Complex64::from_polar(1.0, w))
    }

    /// Multiplication by `e^{-2 pi i phi / theta}`.
    pub fn modulate(&self) -> Self {
        let t = self.theta();
        self.map_values(|p, _, v| v * Complex64::from_polar(1.0, -TAU * self.phi(p) / t))
    }

    /// `-i d/dphi`.
    pub fn momentum(&self) -> Self {
        // d/dphi (h e^{-2 pi i psi phi / theta}) = (h' - 2 pi i psi / theta h) e^{...}.
        let t = self.theta();
        self.phi_multiplier(0.0, |w, psi| Complex64::new(w - TAU * psi / t, 0.0))
    }

    /// `-i d/dpsi`, spectral in `psi` with symmetric mode numbers.
    pub fn psi_derivative(&self) -> Self {
        let rows = self
            .rows()
            .into_par_iter()
            .map(|mut r| {
                spectral_apply(&mut r, 1.0, |w| Complex64::new(w, 0.0));
                r
            })
            .collect();
        self.with_rows(rows)
    }

    /// `-i (theta / 2 pi) d/dpsi + phi`.
    pub fn position(&self) -> Self {
        let d = self.psi_derivative();
        let c = self.theta() / TAU;
        self.map_values(|p, q, v| d.get(p, q) * c + v * self.phi(p))
    }

    /// The printed variant of the position row, `-i (theta / 2 pi) d/dpsi + psi`.
    pub fn position_with_psi(&self) -> Self {
        let d = self.psi_derivative();
        let c = self.theta() / TAU;
        self.map_values(|p, q, v| d.get(p, q) * c + v * self.psi(q))
    }

    pub fn apply(&self, op: NcOperator) -> Self {
        match op {
            NcOperator::U => self.shift_one(),
            NcOperator::V => self.modulate(),
            NcOperator::Momentum => self.momentum(),
            NcOperator::Position => self.position(),
        }
    }

    pub fn sup_distance(&self, o: &Self) -> f64 {
        self.values.iter().zip(&o.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

fn max_shift(grid: &LineGrid) -> usize {
    grid.m.div_ceil(grid.p) + 1
}

/// Number of `psi` samples: enough to resolve every term of the sum.
fn psi_points(grid: &LineGrid) -> usize {
    next_pow2(2 * max_shift(grid) + 2)
}

/// Sum of `f(x_{i + n P}) e^{2 pi i n psi}` over `n`, for line index `i`.
fn periodize_at(f: &LineFunction, i: i64, psi: f64) -> Complex64 {
    let g = &f.grid;
    let (p, len) = (g.p as i64, g.len() as i64);
    let n0 = (-i).div_euclid(p);
    let mut s = ZERO;
    let mut n = n0;
    while i + n * p < len {
        let j = i + n * p;
        if j >= 0 {
            let v = f.values[j as usize];
            if v.norm() >= SUM_CUTOFF {
                s += v * Complex64::from_polar(1.0, TAU * n as f64 * psi);
            }
        }
        n += 1;
    }
    s
}

/// Line index of the grid point `phi_p = p h`.
fn line_index(grid: &LineGrid, p: usize) -> i64 {
    grid.m as i64 + p as i64
}

pub fn schwartz_to_torus(f: &LineFunction) -> Result<TorusSection> {
    f.check_decay()?;
    Ok(periodize(f))
}

fn periodize(f: &LineFunction) -> TorusSection {
    let grid = f.grid;
    let q = psi_points(&grid);
    let values = (0..grid.p)
        .into_par_iter()
        .flat_map_iter(|p| (0..q).map(move |k| periodize_at(f, line_index(&grid, p), k as f64 / q as f64)))
        .collect();
    TorusSection { grid, q, values }
}

/// Inverse map: `f(phi_p + theta n)` is the `n`-th Fourier coefficient in `psi`.
pub fn torus_to_schwartz(g: &TorusSection) -> LineFunction {
    let grid = g.grid;
    let q = g.q as i64;
    let coeffs: Vec<Vec<Complex64>> = g
        .rows()
        .into_iter()
        .map(|mut r| {
            fft_forward(&mut r);
            r.iter().map(|c| c / q as f64).collect()
        })
        .collect();
    let values = (0..grid.len())
        .map(|i| {
            let off = i as i64 - grid.m as i64;
            let (p, n) = (off.rem_euclid(grid.p as i64) as usize, off.div_euclid(grid.p as i64));
            if 2 * n.abs() >= q { ZERO } else { coeffs[p][n.rem_euclid(q) as usize] }
        })
        .collect();
    LineFunction { grid, values }
}

/// `sup |Phi f(phi + theta, psi) - e^{-2 pi i psi} Phi f(phi, psi)|`, with
/// the left side evaluated directly from the sum.
pub fn seam_residual(f: &LineFunction) -> Result<f64> {
    let g = schwartz_to_torus(f)?;
    let grid = f.grid;
    let r = (0..grid.p)
        .into_par_iter()
        .map(|p| {
            (0..g.q)
                .map(|k| {
                    let psi = g.psi(k);
                    let ext = periodize_at(f, line_index(&grid, p) + grid.p as i64, psi);
                    (ext - g.get(p, k) * Complex64::from_polar(1.0, -TAU * psi)).norm()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(r)
}

/// `sup |Phi(op f) - op_torus(Phi f)|`.
pub fn verify_correspondence(op: NcOperator, f: &LineFunction) -> Result<f64> {
    let g = schwartz_to_torus(f)?;
    let lhs = periodize(&f.apply(op));
    Ok(lhs.sup_distance(&g.apply(op)))
}

/// `sup |U V g - e^{-2 pi i / theta} V U g|` for `g = Phi f`, computed with the
/// torus realizations.
pub fn commutation_residual(f: &LineFunction) -> Result<f64> {
    let g = schwartz_to_torus(f)?;
    let uv = g.modulate().shift_one();
    let vu = g.shift_one().modulate();
    let phase = Complex64::from_polar(1.0, -TAU / g.theta());
    Ok(uv.values.iter().zip(&vu.values).map(|(a, b)| (a - phase * b).norm()).fold(0.0, f64::max))
}

/// The test set: Gaussian, `x` times Gaussian, modulated Gaussian.
pub fn test_functions(grid: LineGrid) -> Vec<(&'static str, LineFunction)> {
    let gauss = |x: f64| (-x * x).exp();
    vec![
        ("gaussian", LineFunction::from_fn(grid, |x| Complex64::new(gauss(x), 0.0))),
        ("x-gaussian", LineFunction::from_fn(grid, |x| Complex64::new(x * gauss(x), 0.0))),
        ("modulated-gaussian", LineFunction::from_fn(grid, |x| Complex64::from_polar(gauss(x), 3.0 * x))),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRow {
    pub function: String,
    pub operator: NcOperator,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub theta: f64,
    pub step: f64,
    pub psi_points: usize,
    pub rows: Vec<CorrespondenceRow>,
    pub seam: Vec<(String, f64)>,
    pub round_trip: Vec<(String, f64)>,
    pub commutation: Vec<(String, f64)>,
}

impl BridgeReport {
    pub fn max_residual(&self) -> f64 {
        self.rows.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// All checks on the standard test set.
pub fn bridge_report(theta: f64) -> Result<BridgeReport> {
    let grid = LineGrid::new(theta)?;
    let funcs = test_functions(grid);
    let mut rows = Vec::new();
    let (mut seam, mut round_trip, mut commutation) = (Vec::new(), Vec::new(), Vec::new());
    for (name, f) in &funcs {
        for op in NcOperator::ALL {
            rows.push(CorrespondenceRow { function: name.to_string(), operator: op, residual: verify_correspondence(op, f)? });
        }
        seam.push((name.to_string(), seam_residual(f)?));
        let g = schwartz_to_torus(f)?;
        let back = schwartz_to_torus(&torus_to_schwartz(&g))?;
        round_trip.push((name.to_string(), back.sup_distance(&g)));
        commutation.push((name.to_string(), commutation_residual(f)?));
    }
    Ok(BridgeReport { theta, step: grid.h, psi_points: psi_points(&grid), rows, seam, round_trip, commutation })
}
