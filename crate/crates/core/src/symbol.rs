//! Symbols in the crossed product `C(S*M) x| G` for discrete circle actions,
//! their algebra, inversion and trajectory (regular representation) matrices.
//!
//! A symbol is a finite map `g -> sigma_g` where each `sigma_g` is a
//! [`CosphereFunction`]: one trigonometric series per cosphere component
//! (`xi = +1`, `xi = -1`). The product is
//! `(a b)(g) = sum_{k + l = g} a(k) * (b(l) o k^{-1})`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::E_COMPONENT_RESIDUAL_TOL;
use crate::error::{Error, Result};
use crate::geometry::{
    circle_angle_map, density_at, ActionSpec, Chart, CotangentPoint, Point,
};
use crate::linalg::{banded_lstsq, CMatrix, CVector};
use crate::series::{next_pow2, TrigSeries};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
/// Pointwise inverse values beyond this are treated as a vanishing symbol.
const INVERSE_BLOWUP: f64 = 1e12;

/// Cosphere component of the circle: `+1` and `-1` directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Xi {
    Plus,
    Minus,
}

impl Xi {
    pub const BOTH: [Xi; 2] = [Xi::Plus, Xi::Minus];

    pub fn index(self) -> usize {
        match self {
            Xi::Plus => 0,
            Xi::Minus => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Xi::Plus => 1.0,
            Xi::Minus => -1.0,
        }
    }
}

/// Function on the cosphere bundle of the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosphereFunction {
    pub plus: TrigSeries,
    pub minus: TrigSeries,
}

impl CosphereFunction {
    pub fn new(plus: TrigSeries, minus: TrigSeries) -> Self {
        Self { plus, minus }
    }

    pub fn zero() -> Self {
        Self::new(TrigSeries::zero(), TrigSeries::zero())
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(TrigSeries::constant(c), TrigSeries::constant(c))
    }

    /// Same function on both components.
    pub fn uniform(f: TrigSeries) -> Self {
        Self::new(f.clone(), f)
    }

    pub fn component(&self, xi: Xi) -> &TrigSeries {
        match xi {
            Xi::Plus => &self.plus,
            Xi::Minus => &self.minus,
        }
    }

    pub fn map(&self, f: impl Fn(&TrigSeries) -> TrigSeries) -> Self {
        Self::new(f(&self.plus), f(&self.minus))
    }

    pub fn zip(&self, other: &Self, f: impl Fn(&TrigSeries, &TrigSeries) -> TrigSeries) -> Self {
        Self::new(f(&self.plus, &other.plus), f(&self.minus, &other.minus))
    }

    pub fn eval(&self, x: f64, xi: Xi) -> Complex64 {
        self.component(xi).eval(x)
    }

    pub fn bandwidth(&self) -> usize {
        self.plus.bandwidth().max(self.minus.bandwidth())
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b))
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.mul(b))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|a| a.scale(c))
    }

    pub fn derivative(&self) -> Self {
        self.map(|a| a.derivative())
    }

    pub fn trimmed(&self, tol: f64) -> Self {
        self.map(|a| a.trimmed(tol))
    }

    pub fn sup_norm(&self) -> f64 {
        self.plus.sup_norm().max(self.minus.sup_norm())
    }

    pub fn is_zero(&self) -> bool {
        self.plus.is_zero() && self.minus.is_zero()
    }
}

/// Resamples `f o map` as a trigonometric series, doubling the grid until
/// the upper quarter of the spectrum is negligible.
fn compose_series(f: &TrigSeries, map: &(dyn Fn(f64) -> f64 + Sync)) -> TrigSeries {
    let scale = f.l1_norm().max(f64::MIN_POSITIVE);
    let mut k = next_pow2(4 * (2 * f.bandwidth() + 1)).max(64);
    loop {
        let samples: Vec<Complex64> = (0..k).map(|j| f.eval(map(TAU * j as f64 / k as f64))).collect();
        let s = TrigSeries::from_samples(&samples, k / 2 - 1);
        let tail = (k as i64 / 4..k as i64 / 2)
            .map(|m| s.coeff(m).norm().max(s.coeff(-m).norm()))
            .fold(0.0, f64::max);
        if tail <= 1e-15 * scale || k >= 1 << 16 {
            return s.trimmed(1e-16 * scale);
        }
        k *= 2;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossedSymbol {
    action: ActionSpec,
    order: f64,
    terms: BTreeMap<i64, CosphereFunction>,
}

impl CrossedSymbol {
    /// Zero symbol of the given order.
    pub fn new(action: ActionSpec, order: f64) -> Result<Self> {
        if !action.acts_on_circle() {
            return Err(Error::Unsupported("crossed symbols are implemented for discrete circle actions".into()));
        }
        Ok(Self { action, order, terms: BTreeMap::new() })
    }

    pub fn identity(action: ActionSpec, order: f64) -> Result<Self> {
        Self::new(action, order)?.with_term(0, CosphereFunction::constant(ONE))
    }

    /// Adds `f` to the coefficient of `g`.
    pub fn with_term(mut self, g: i64, f: CosphereFunction) -> Result<Self> {
        self.add_term(g, f);
        Ok(self)
    }

    fn add_term(&mut self, g: i64, f: CosphereFunction) {
        let g = self.action.normalize(g);
        let entry = self.terms.entry(g).or_insert_with(CosphereFunction::zero);
        *entry = entry.add(&f);
        if entry.is_zero() {
            self.terms.remove(&g);
        }
    }

    pub fn action(&self) -> &ActionSpec {
        &self.action
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn terms(&self) -> &BTreeMap<i64, CosphereFunction> {
        &self.terms
    }

    pub fn term(&self, g: i64) -> CosphereFunction {
        self.terms.get(&self.action.normalize(g)).cloned().unwrap_or_else(CosphereFunction::zero)
    }

    /// Largest `|g|` in the support (zero for the empty symbol).
    pub fn support_radius(&self) -> usize {
        self.terms.keys().map(|g| g.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn bandwidth(&self) -> usize {
        self.terms.values().map(|f| f.bandwidth()).max().unwrap_or(0)
    }

    fn check_same(&self, o: &Self) -> Result<()> {
        if self.action != o.action {
            Err(Error::ActionMismatch)
        } else {
            Ok(())
        }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        self.check_same(o)?;
        let mut out = self.clone();
        for (g, f) in &o.terms {
            out.add_term(*g, f.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.add(&o.scale(-ONE))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for f in out.terms.values_mut() {
            *f = f.scale(c);
        }
        out.terms.retain(|_, f| !f.is_zero());
        out
    }

    /// Angle of `g(phi)`.
    pub fn orbit_angle(&self, g: i64, phi: f64) -> Result<f64> {
        circle_angle_map(&self.action, g, phi)
    }

    /// `f o k^{-1}`.
    pub fn pullback(&self, k: i64, f: &CosphereFunction) -> Result<CosphereFunction> {
        match self.action {
            ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. } => {
                let shift = circle_angle_map(&self.action, k, 0.0)?;
                Ok(f.map(|s| s.shifted(shift)))
            }
            _ => {
                if k == 0 {
                    return Ok(f.clone());
                }
                // Fail early on overflow rather than inside the resampler.
                circle_angle_map(&self.action, -k, 1.0)?;
                let action = self.action;
                let map = move |phi: f64| circle_angle_map(&action, -k, phi).unwrap_or(phi);
                Ok(f.map(|s| compose_series(s, &map)))
            }
        }
    }

    /// Value of `sigma_h` at angle `phi`.
    pub fn coefficient(&self, h: i64, phi: f64, xi: Xi) -> Complex64 {
        self.terms.get(&self.action.normalize(h)).map_or(ZERO, |f| f.eval(phi, xi))
    }

    /// `max_g sup |sigma_g|` over oversampled cosphere grids.
    pub fn sup_norm(&self) -> f64 {
        self.terms.values().map(|f| f.sup_norm()).fold(0.0, f64::max)
    }

    /// `||self - 1||` in the norm of [`CrossedSymbol::sup_norm`].
    pub fn distance_to_identity(&self) -> f64 {
        let mut d = self.clone();
        d.add_term(0, CosphereFunction::constant(-ONE));
        d.sup_norm()
    }

    /// Termwise exterior derivative `(d sigma)(g) = d(sigma(g))`. Defined for
    /// isometric actions, where pullback commutes with `d`.
    pub fn differential(&self) -> Result<Self> {
        if !self.action.is_isometric() {
            return Err(Error::Unsupported("differential is implemented for isometric actions".into()));
        }
        let mut out = self.clone();
        for f in out.terms.values_mut() {
            *f = f.derivative();
        }
        out.terms.retain(|_, f| !f.is_zero());
        Ok(out)
    }

    /// Drops terms with sup norm at most `tol` and trims coefficient tails
    /// of modulus at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = self.clone();
        out.terms = self
            .terms
            .iter()
            .filter(|(_, f)| f.sup_norm() > tol)
            .map(|(g, f)| (*g, f.trimmed(tol)))
            .collect();
        out
    }
}

pub fn cp_mul(a: &CrossedSymbol, b: &CrossedSymbol) -> Result<CrossedSymbol> {
    a.check_same(b)?;
    let pairs: Vec<(i64, &CosphereFunction)> = a.terms.iter().map(|(g, f)| (*g, f)).collect();
    let parts: Vec<Result<Vec<(i64, CosphereFunction)>>> = pairs
        .par_iter()
        .map(|(k, ak)| {
            let mut out = Vec::with_capacity(b.terms.len());
            for (l, bl) in &b.terms {
                let moved = a.pullback(*k, bl)?;
                out.push((a.action.compose(*k, *l), ak.mul(&moved)));
            }
            Ok(out)
        })
        .collect();
    let mut out = CrossedSymbol::new(a.action, a.order + b.order)?;
    for part in parts {
        for (g, f) in part? {
            out.add_term(g, f);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseSymbol {
    pub symbol: CrossedSymbol,
    /// `||a b - 1||`.
    pub left_residual: f64,
    /// `||b a - 1||`.
    pub right_residual: f64,
    /// Half width of the group window used for the final solve.
    pub window: usize,
    /// Number of cosphere samples per component.
    pub grid: usize,
}

impl InverseSymbol {
    pub fn residual(&self) -> f64 {
        self.left_residual.max(self.right_residual)
    }
}

/// Inverse in the crossed product, certified by the two-sided residual.
///
/// For each sample point of the cosphere the coefficients `b_h(x)` are read
/// off the row through the identity of the inverse of the trajectory
/// operator, found by least squares on a truncated window. Windows and
/// sample grids grow until the residual is below `tol` or `max_support` is
/// reached.
pub fn cp_inverse(a: &CrossedSymbol, tol: f64, max_support: usize) -> Result<InverseSymbol> {
    if a.terms.is_empty() {
        return Err(Error::NotInvertible { best_residual: 1.0 });
    }
    let mut grid = next_pow2(4 * (2 * a.bandwidth() + 1)).max(64);
    let grid_cap = 1 << 14;
    if let Some(k) = a.action.group_order() {
        return inverse_finite(a, k, tol, grid, grid_cap);
    }
    let rho = a.support_radius();
    let mut window = (4 * rho + 16).min(max_support.max(rho));
    let mut best = f64::INFINITY;
    let mut last_tail = f64::INFINITY;
    loop {
        let samples = match inverse_samples_z(a, window, grid) {
            Some(s) => s,
            None => return Err(Error::NotInvertible { best_residual: best }),
        };
        let b = match assemble(a, &samples, window as i64, grid, tol) {
            Ok(b) => b,
            Err(tail) => {
                // Refining the grid must at least halve the unresolved tail.
                // Otherwise the tail comes from the truncated window, or the
                // inverse is not smooth and does not exist.
                if grid < grid_cap && tail < 0.5 * last_tail {
                    last_tail = tail;
                    grid *= 2;
                    continue;
                }
                if window < max_support {
                    last_tail = f64::INFINITY;
                    window = (2 * window).min(max_support);
                    continue;
                }
                return Err(Error::NotInvertible { best_residual: best });
            }
        };
        last_tail = f64::INFINITY;
        let left = cp_mul(a, &b)?.distance_to_identity();
        let right = cp_mul(&b, a)?.distance_to_identity();
        let res = left.max(right);
        if res.is_finite() {
            best = best.min(res);
        }
        if res <= tol {
            return Ok(InverseSymbol { symbol: b, left_residual: left, right_residual: right, window, grid });
        }
        if window >= max_support {
            let edge = b
                .terms
                .iter()
                .filter(|(h, _)| h.unsigned_abs() as usize * 4 >= window * 3)
                .map(|(_, f)| f.sup_norm())
                .fold(0.0, f64::max);
            return if edge > tol && res.is_finite() && res < 1.0 {
                Err(Error::SupportExceeded { max_support, edge_norm: edge })
            } else {
                Err(Error::NotInvertible { best_residual: best })
            };
        }
        window = (2 * window).min(max_support);
    }
}

/// Samples `[component][h + window][j]` of the inverse for `Z` actions.
type Samples = Vec<Vec<Vec<Complex64>>>;

fn inverse_samples_z(a: &CrossedSymbol, window: usize, grid: usize) -> Option<Samples> {
    let w = window as i64;
    let rho = a.support_radius() as i64;
    let rows: Vec<i64> = (-w..=w).collect();
    let cols: Vec<i64> = (-w - rho..=w + rho).collect();
    let jobs: Vec<(Xi, usize)> = Xi::BOTH.iter().flat_map(|xi| (0..grid).map(move |j| (*xi, j))).collect();
    let rows_out: Vec<Option<Vec<Complex64>>> = jobs
        .par_iter()
        .map(|(xi, j)| {
            let x = TAU * *j as f64 / grid as f64;
            // Transposed block of the trajectory operator, rows W x cols W'.
            let mut m = CMatrix::zeros(cols.len(), rows.len());
            for (ri, g) in rows.iter().enumerate() {
                let y = a.orbit_angle(-g, x).ok()?;
                for (h, f) in &a.terms {
                    let c = g + h;
                    if c.abs() <= w + rho {
                        m[((c + w + rho) as usize, ri)] = f.eval(y, *xi);
                    }
                }
            }
            let mut e0 = CVector::zeros(cols.len());
            e0[(w + rho) as usize] = ONE;
            let r = banded_lstsq(&m, &e0, 2 * rho as usize)?;
            Some(r.iter().copied().collect())
        })
        .collect();
    let mut out = vec![vec![vec![ZERO; grid]; rows.len()]; 2];
    for ((xi, j), r) in jobs.iter().zip(rows_out) {
        let r = r?;
        for (hi, v) in r.into_iter().enumerate() {
            out[xi.index()][hi][*j] = v;
        }
    }
    Some(out)
}

/// Builds the inverse symbol from samples. Fails with the relative size of
/// the unresolved spectral tail when the grid is too coarse.
fn assemble(a: &CrossedSymbol, samples: &Samples, w: i64, grid: usize, tol: f64) -> std::result::Result<CrossedSymbol, f64> {
    let mut b = CrossedSymbol::new(a.action, -a.order).map_err(|_| f64::INFINITY)?;
    let n = samples[0].len();
    let hs: Vec<i64> = if a.action.group_order().is_some() { (0..n as i64).collect() } else { (-w..=w).collect() };
    for (hi, h) in hs.iter().enumerate() {
        let mut comps = Vec::with_capacity(2);
        for xi in Xi::BOTH {
            let s = &samples[xi.index()][hi];
            if s.iter().any(|c| !c.re.is_finite() || !c.im.is_finite() || c.norm() > INVERSE_BLOWUP) {
                return Err(f64::INFINITY);
            }
            let series = TrigSeries::from_samples(s, grid / 2 - 1);
            let scale = series.l1_norm().max(1.0);
            let tail = (grid as i64 / 4..grid as i64 / 2)
                .map(|m| series.coeff(m).norm().max(series.coeff(-m).norm()))
                .fold(0.0, f64::max);
            if tail > 0.1 * tol * scale {
                return Err(tail / scale);
            }
            comps.push(series.trimmed(1e-4 * tol));
        }
        let f = CosphereFunction::new(comps[0].clone(), comps[1].clone());
        if f.sup_norm() > 1e-3 * tol {
            b.add_term(*h, f);
        }
    }
    Ok(b)
}

fn inverse_finite(a: &CrossedSymbol, k: u32, tol: f64, mut grid: usize, cap: usize) -> Result<InverseSymbol> {
    let ms = matrix_entries(a, k);
    loop {
        let mut samples: Samples = vec![vec![vec![ZERO; grid]; k as usize]; 2];
        for xi in Xi::BOTH {
            for j in 0..grid {
                let x = TAU * j as f64 / grid as f64;
                let m = eval_matrix(&ms, k as usize, x, xi);
                let inv = m.try_inverse().ok_or(Error::NotInvertible { best_residual: f64::INFINITY })?;
                for h in 0..k as usize {
                    samples[xi.index()][h][j] = inv[(0, h)];
                }
            }
        }
        match assemble(a, &samples, 0, grid, tol) {
            Ok(b) => {
                let left = cp_mul(a, &b)?.distance_to_identity();
                let right = cp_mul(&b, a)?.distance_to_identity();
                if left.max(right) <= tol {
                    return Ok(InverseSymbol { symbol: b, left_residual: left, right_residual: right, window: k as usize, grid });
                }
                if grid >= cap {
                    return Err(Error::NotInvertible { best_residual: left.max(right) });
                }
            }
            Err(tail) if grid >= cap || !tail.is_finite() => {
                return Err(Error::NotInvertible { best_residual: f64::INFINITY })
            }
            Err(_) => {}
        }
        grid *= 2;
    }
}

/// Entries `M[i][j] = sigma_{j-i mod k}(x - 2 pi i / k)` as functions.
pub(crate) fn matrix_entries(a: &CrossedSymbol, k: u32) -> Vec<CosphereFunction> {
    let k = k as usize;
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let h = (j as i64 - i as i64).rem_euclid(k as i64);
            let f = a.term(h);
            out.push(f.map(|s| s.shifted(TAU * i as f64 / k as f64)));
        }
    }
    out
}

pub(crate) fn eval_matrix(entries: &[CosphereFunction], k: usize, x: f64, xi: Xi) -> CMatrix {
    DMatrix::from_fn(k, k, |i, j| entries[i * k + j].eval(x, xi))
}

/// Trajectory operator of a symbol at a cotangent point, restricted to a
/// row window and a column window of group labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    pub rows: Vec<i64>,
    pub cols: Vec<i64>,
    pub entries: CMatrix,
    /// `mu_{s - m}` on the row labels.
    pub weight_out: Vec<f64>,
    /// `mu_s` on the column labels.
    pub weight_in: Vec<f64>,
}

/// Angle and component of a cotangent point of the circle. For sphere
/// points the covector is given in chart coordinates; the infinity chart
/// reverses orientation.
pub fn circle_cotangent_angle(a: &ActionSpec, p: &CotangentPoint) -> Result<(f64, Xi)> {
    let sign_of = |v: f64| if v > 0.0 { Xi::Plus } else { Xi::Minus };
    match (a, &p.point) {
        (ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. }, Point::Circle(t)) => {
            Ok((TAU * t, sign_of(p.xi[0])))
        }
        (ActionSpec::DilationSphere { dim_m: 1, .. }, Point::Sphere { chart, .. }) => {
            let phi = p.point.sphere1_angle().ok_or_else(|| Error::InvalidInput("expected a point of the circle".into()))?;
            let v = match chart {
                Chart::Zero => p.xi[0],
                Chart::Infinity => -p.xi[0],
            };
            Ok((phi, sign_of(v)))
        }
        _ => Err(Error::InvalidInput("cotangent point does not match the action".into())),
    }
}

/// Cotangent point at angle `phi` in direction `xi` (with respect to the
/// angle orientation).
pub fn circle_cotangent(a: &ActionSpec, phi: f64, xi: Xi) -> Result<CotangentPoint> {
    match a {
        ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. } => {
            CotangentPoint::new(Point::Circle(crate::geometry::wrap_angle(phi) / TAU), vec![xi.sign()])
        }
        ActionSpec::DilationSphere { dim_m: 1, .. } => {
            let p = Point::sphere1_from_angle(phi);
            let v = match &p {
                Point::Sphere { chart: Chart::Infinity, .. } => -xi.sign(),
                _ => xi.sign(),
            };
            CotangentPoint::new(p, vec![v])
        }
        _ => Err(Error::Unsupported("action does not act on the circle".into())),
    }
}

/// Entry `(g, g + h)` is `sigma_h(g^{-1} x0, dg^{-1} xi)`, on the window
/// `{-n..n}` (or all of `Z/k`).
pub fn trajectory_matrix(sym: &CrossedSymbol, p: &CotangentPoint, s: f64, n: usize) -> Result<TrajectoryMatrix> {
    if let Some(k) = sym.action.group_order() {
        let w: Vec<i64> = (0..k as i64).collect();
        return trajectory_block(sym, p, s, &w, &w);
    }
    let rho = sym.support_radius();
    if n < rho {
        return Err(Error::WindowTooSmall { n, support: rho });
    }
    let w: Vec<i64> = (-(n as i64)..=n as i64).collect();
    trajectory_block(sym, p, s, &w, &w)
}

/// Trajectory operator on arbitrary row and column label sets.
pub fn trajectory_block(sym: &CrossedSymbol, p: &CotangentPoint, s: f64, rows: &[i64], cols: &[i64]) -> Result<TrajectoryMatrix> {
    let (phi, xi) = circle_cotangent_angle(&sym.action, p)?;
    let mut entries = CMatrix::zeros(rows.len(), cols.len());
    let col_index: BTreeMap<i64, usize> = cols.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    for (ri, g) in rows.iter().enumerate() {
        let y = sym.orbit_angle(sym.action.inverse(*g), phi)?;
        for (h, f) in &sym.terms {
            let target = if sym.action.group_order().is_some() { sym.action.compose(*g, *h) } else { g + h };
            if let Some(ci) = col_index.get(&target) {
                entries[(ri, *ci)] += f.eval(y, xi);
            }
        }
    }
    let weights = |labels: &[i64], s: f64| -> Result<Vec<f64>> {
        labels
            .iter()
            .map(|g| match sym.action {
                ActionSpec::DilationSphere { .. } => density_at(p, s, &sym.action, *g),
                _ => Ok(1.0),
            })
            .collect()
    };
    Ok(TrajectoryMatrix {
        rows: rows.to_vec(),
        cols: cols.to_vec(),
        entries,
        weight_out: weights(rows, s - sym.order)?,
        weight_in: weights(cols, s)?,
    })
}

/// `diag(mu_out^{1/2}) A diag(mu_in^{-1/2})`.
pub fn unitarized_matrix(tm: &TrajectoryMatrix) -> CMatrix {
    let mut m = tm.entries.clone();
    for (i, wo) in tm.weight_out.iter().enumerate() {
        for (j, wi) in tm.weight_in.iter().enumerate() {
            if m[(i, j)] != ZERO {
                m[(i, j)] *= (wo / wi).sqrt();
            }
        }
    }
    m
}

/// Symmetric window `{-n..=n}`.
pub fn window(n: usize) -> Vec<i64> {
    (-(n as i64)..=n as i64).collect()
}

/// Lower-bound estimate for the trajectory operator at a point: the smaller
/// of the least singular values of the tall block (columns `{-n..n}`, rows
/// widened by the support) and of the adjoint block.
pub fn trajectory_lower_bound(sym: &CrossedSymbol, p: &CotangentPoint, s: f64, n: usize) -> Result<f64> {
    use crate::linalg::min_singular_value;
    if sym.action.group_order().is_some() {
        return Ok(min_singular_value(&unitarized_matrix(&trajectory_matrix(sym, p, s, n)?)));
    }
    let r = sym.support_radius();
    let inner = window(n);
    let outer = window(n + r);
    let tall = unitarized_matrix(&trajectory_block(sym, p, s, &outer, &inner)?);
    let wide = unitarized_matrix(&trajectory_block(sym, p, s, &inner, &outer)?);
    Ok(min_singular_value(&tall).min(min_singular_value(&wide)))
}

/// e-component of `sigma^{-1} d sigma`, after checking the inverse residual.
pub fn e_component_form(sym: &CrossedSymbol, inv: &CrossedSymbol) -> Result<CosphereFunction> {
    if !sym.action.is_isometric() {
        return Err(Error::Unsupported("e-component form needs an isometric action".into()));
    }
    let res = cp_mul(sym, inv)?.distance_to_identity().max(cp_mul(inv, sym)?.distance_to_identity());
    if res > E_COMPONENT_RESIDUAL_TOL {
        return Err(Error::InverseResidualTooLarge { residual: res });
    }
    Ok(cp_mul(inv, &sym.differential()?)?.term(0))
}
