//! Manifolds, group actions, the induced action on cotangent directions and
//! the Sobolev densities `mu_{x,xi,s}(g)` of non-isometric actions.
//!
//! Circle points are stored in turns (`[0, 1)`); symbols and trajectories
//! work with the angle `2 pi * turns`. Sphere points live in one of two
//! stereographic charts and are normalized so that the stored coordinates
//! have norm at most one (ties go to [`Chart::Zero`]).

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ManifoldKind {
    Circle,
    Sphere { dim_m: usize },
    Torus2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub grid_size: usize,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind, grid_size: usize) -> Result<Self> {
        if grid_size < 16 || !grid_size.is_multiple_of(2) {
            return Err(Error::InvalidInput(format!("grid_size must be even and >= 16, got {grid_size}")));
        }
        if let ManifoldKind::Sphere { dim_m } = kind {
            if dim_m == 0 {
                return Err(Error::InvalidInput("sphere dimension must be positive".into()));
            }
        }
        Ok(Self { kind, grid_size })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::Sphere { dim_m } => dim_m,
            ManifoldKind::Torus2 => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ActionSpec {
    /// `x -> x + g theta`, `theta` in turns.
    RotationZ { theta: f64, irrational: bool },
    /// `x -> alpha^g x` in the chart around pole 0.
    DilationSphere { alpha: f64, dim_m: usize },
    /// `x -> x + g/k` turns.
    CyclicRotation { k: u32 },
    /// `(x1, x2) -> (x1, x2 + t)` turns.
    CircleOnTorus,
}

impl ActionSpec {
    pub fn rotation(theta: f64, irrational: bool) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!("rotation angle must lie in (0, 1) turns, got {theta}")));
        }
        Ok(Self::RotationZ { theta, irrational })
    }

    pub fn dilation(alpha: f64, dim_m: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("dilation factor must lie in (0, 1), got {alpha}")));
        }
        if dim_m == 0 {
            return Err(Error::InvalidInput("sphere dimension must be positive".into()));
        }
        Ok(Self::DilationSphere { alpha, dim_m })
    }

    pub fn cyclic(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("cyclic order must be >= 2, got {k}")));
        }
        Ok(Self::CyclicRotation { k })
    }

    pub fn manifold(&self) -> ManifoldKind {
        match self {
            Self::RotationZ { .. } | Self::CyclicRotation { .. } => ManifoldKind::Circle,
            Self::DilationSphere { dim_m, .. } => ManifoldKind::Sphere { dim_m: *dim_m },
            Self::CircleOnTorus => ManifoldKind::Torus2,
        }
    }

    pub fn is_isometric(&self) -> bool {
        !matches!(self, Self::DilationSphere { .. })
    }

    /// Order of a finite group, `None` for `Z` and the circle.
    pub fn group_order(&self) -> Option<u32> {
        match self {
            Self::CyclicRotation { k } => Some(*k),
            _ => None,
        }
    }

    /// Canonical label of a discrete group element.
    pub fn normalize(&self, g: i64) -> i64 {
        match self {
            Self::CyclicRotation { k } => g.rem_euclid(*k as i64),
            _ => g,
        }
    }

    pub fn compose(&self, g: i64, h: i64) -> i64 {
        self.normalize(g + h)
    }

    pub fn inverse(&self, g: i64) -> i64 {
        self.normalize(-g)
    }

    /// Whether the action is by diffeomorphisms of the circle, so that
    /// [`circle_angle_map`] applies.
    pub fn acts_on_circle(&self) -> bool {
        match self {
            Self::RotationZ { .. } | Self::CyclicRotation { .. } => true,
            Self::DilationSphere { dim_m, .. } => *dim_m == 1,
            Self::CircleOnTorus => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// Stereographic chart centred at pole 0.
    Zero,
    /// Chart centred at pole infinity, `x' = x / |x|^2`.
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    /// Turns in `[0, 1)`.
    Circle(f64),
    Sphere { chart: Chart, coords: Vec<f64> },
    /// Turns in `[0, 1)^2`.
    Torus(f64, f64),
}

impl Point {
    /// Sphere point with coordinates in `chart`, renormalized into the
    /// chart where the coordinate norm is at most one.
    pub fn sphere(chart: Chart, coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite sphere coordinates".into()));
        }
        let n2: f64 = coords.iter().map(|c| c * c).sum();
        if n2 > 1.0 {
            let other = match chart {
                Chart::Zero => Chart::Infinity,
                Chart::Infinity => Chart::Zero,
            };
            Ok(Self::Sphere { chart: other, coords: coords.iter().map(|c| c / n2).collect() })
        } else if n2 == 1.0 {
            // On the unit sphere both charts agree; keep the pole-0 chart.
            Ok(Self::Sphere { chart: Chart::Zero, coords })
        } else {
            Ok(Self::Sphere { chart, coords })
        }
    }

    /// Point of the one-dimensional sphere at angle `phi`, where
    /// `x = tan(phi/2)` in the pole-0 chart (pole 0 at `phi = 0`,
    /// pole infinity at `phi = pi`).
    pub fn sphere1_from_angle(phi: f64) -> Self {
        let phi = wrap_angle(phi);
        let (s, c) = (phi / 2.0).sin_cos();
        if c.abs() >= s.abs() {
            Self::Sphere { chart: Chart::Zero, coords: vec![s / c] }
        } else {
            Self::Sphere { chart: Chart::Infinity, coords: vec![c / s] }
        }
    }

    /// Inverse of [`Point::sphere1_from_angle`], in `[0, 2 pi)`.
    pub fn sphere1_angle(&self) -> Option<f64> {
        match self {
            Self::Sphere { chart, coords } if coords.len() == 1 => {
                let x = coords[0];
                let phi = match chart {
                    Chart::Zero => 2.0 * x.atan(),
                    Chart::Infinity => 2.0 * (1.0f64).atan2(x),
                };
                Some(wrap_angle(phi))
            }
            _ => None,
        }
    }
}

/// Angle reduced to `[0, 2 pi)`.
pub fn wrap_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

fn wrap_turn(t: f64) -> f64 {
    let r = t.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Unit covector attached to a point; on the circle `xi = [+1]` or `[-1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub point: Point,
    pub xi: Vec<f64>,
}

impl CotangentPoint {
    pub fn new(point: Point, xi: Vec<f64>) -> Result<Self> {
        let n = xi.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("covector must be nonzero and finite".into()));
        }
        Ok(Self { point, xi: xi.iter().map(|c| c / n).collect() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub point: CotangentPoint,
    pub s: f64,
    pub order_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GroupElement {
    Integer(i64),
    /// Turns, for the circle action on the torus.
    Angle(f64),
}

/// Image of a point under a group element.
pub fn apply_action(a: &ActionSpec, g: GroupElement, x: &Point) -> Result<Point> {
    match (a, g, x) {
        (ActionSpec::RotationZ { theta, .. }, GroupElement::Integer(g), Point::Circle(t)) => {
            Ok(Point::Circle(wrap_turn(t + wrap_turn(g as f64 * theta))))
        }
        (ActionSpec::CyclicRotation { k }, GroupElement::Integer(g), Point::Circle(t)) => {
            let r = g.rem_euclid(*k as i64) as f64 / *k as f64;
            Ok(Point::Circle(wrap_turn(t + r)))
        }
        (ActionSpec::DilationSphere { alpha, dim_m }, GroupElement::Integer(g), Point::Sphere { coords, .. }) => {
            if coords.len() != *dim_m {
                return Err(Error::InvalidInput("point dimension differs from the sphere".into()));
            }
            Ok(dilation_map(*alpha, g, x)?.0)
        }
        (ActionSpec::CircleOnTorus, GroupElement::Angle(t), Point::Torus(x1, x2)) => {
            Ok(Point::Torus(*x1, wrap_turn(x2 + t)))
        }
        _ => Err(Error::InvalidInput("group element or point does not match the action".into())),
    }
}

/// Grid-exact action of `Z/k` on the point with index `j` of a uniform grid
/// of `n` points (`k` must divide `n`).
pub fn apply_cyclic_grid(k: u32, g: i64, j: usize, n: usize) -> Result<usize> {
    if !n.is_multiple_of(k as usize) {
        return Err(Error::InvalidInput("cyclic order must divide the grid size".into()));
    }
    let step = n / k as usize;
    Ok((j + g.rem_euclid(k as i64) as usize * step) % n)
}

/// Image and Jacobian (stored chart coordinates to stored chart
/// coordinates) of the dilation by `g`.
fn dilation_map(alpha: f64, g: i64, x: &Point) -> Result<(Point, DMatrix<f64>)> {
    let Point::Sphere { chart, coords } = x else {
        return Err(Error::InvalidInput("dilation acts on sphere points".into()));
    };
    let m = coords.len();
    // In the infinity chart the dilation by g is the dilation by -g.
    let e = match chart {
        Chart::Zero => g,
        Chart::Infinity => -g,
    };
    let scale = alpha.powf(e as f64);
    if !scale.is_finite() || scale == 0.0 {
        return Err(Error::ChartOverflow(g));
    }
    let z: Vec<f64> = coords.iter().map(|c| c * scale).collect();
    let n2: f64 = z.iter().map(|c| c * c).sum();
    if !n2.is_finite() {
        return Err(Error::ChartOverflow(g));
    }
    if n2 <= 1.0 {
        let jac = DMatrix::identity(m, m) * scale;
        return Ok((Point::sphere(*chart, z)?, jac));
    }
    // Chart change y = z / |z|^2 with Jacobian (I - 2 z z^T / |z|^2) / |z|^2.
    let zv = DVector::from_vec(z.clone());
    let jt = (DMatrix::identity(m, m) - &zv * zv.transpose() * (2.0 / n2)) / n2;
    let other = match chart {
        Chart::Zero => Chart::Infinity,
        Chart::Infinity => Chart::Zero,
    };
    let y: Vec<f64> = z.iter().map(|c| c / n2).collect();
    if y.iter().all(|c| *c == 0.0) && coords.iter().any(|c| *c != 0.0) {
        return Err(Error::ChartOverflow(g));
    }
    Ok((Point::Sphere { chart: other, coords: y }, jt * scale))
}

/// Pushforward of a cotangent direction: `(g x, (dg^{-1})^T xi)`,
/// renormalized to unit length.
pub fn codifferential(a: &ActionSpec, g: GroupElement, p: &CotangentPoint) -> Result<CotangentPoint> {
    let image = apply_action(a, g, &p.point)?;
    match a {
        ActionSpec::DilationSphere { alpha, .. } => {
            let GroupElement::Integer(g) = g else {
                return Err(Error::InvalidInput("dilation needs an integer group element".into()));
            };
            let (_, jac) = dilation_map(*alpha, g, &p.point)?;
            let xi = DVector::from_vec(p.xi.clone());
            let inv_t = jac
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::InvalidInput("singular Jacobian".into()))?;
            CotangentPoint::new(image, (inv_t * xi).iter().copied().collect())
        }
        _ => CotangentPoint::new(image, p.xi.clone()),
    }
}

/// Sobolev density `mu(g) = |det K| |K^{-T} xi|^{2s}` where `K` is the
/// Jacobian of `g^{-1}` at the base point, taken from the chart of the
/// base point to the chart of its image. Identically one for rotations.
pub fn density_mu(w: &WeightSpec, a: &ActionSpec, g: i64) -> Result<f64> {
    density_at(&w.point, w.s, a, g)
}

/// Density at an explicit Sobolev exponent (used for the codomain weight
/// `s - m`).
pub fn density_at(p: &CotangentPoint, s: f64, a: &ActionSpec, g: i64) -> Result<f64> {
    match a {
        ActionSpec::RotationZ { .. } => Ok(1.0),
        ActionSpec::DilationSphere { alpha, dim_m } => {
            if p.xi.len() != *dim_m {
                return Err(Error::InvalidInput("covector dimension differs from the sphere".into()));
            }
            let (_, k) = dilation_map(*alpha, -g, &p.point)?;
            let det = k.determinant().abs();
            let xi = DVector::from_vec(p.xi.clone());
            let kt_inv = k
                .transpose()
                .try_inverse()
                .ok_or_else(|| Error::InvalidInput("singular Jacobian".into()))?;
            let norm = (kt_inv * xi).norm();
            let v = det * norm.powf(2.0 * s);
            if v.is_finite() && v > 0.0 {
                Ok(v)
            } else {
                Err(Error::ChartOverflow(g))
            }
        }
        _ => Err(Error::Unsupported("density is defined for rotations by Z and sphere dilations".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DensityLocation {
    PoleZero,
    PoleInfinity,
    Interior,
}

/// Closed-form density at the poles (and its interior growth rate), with
/// the orbit labels of the closed form. Relate to [`density_mu`] through
/// [`crate::constants::ORBIT_LABEL_SIGN`].
pub fn density_closed_form(alpha: f64, dim_m: usize, s: f64, loc: DensityLocation, g: i64) -> f64 {
    let m = dim_m as f64;
    let gf = g as f64;
    match loc {
        DensityLocation::PoleZero => alpha.powf(gf * (m - 2.0 * s)),
        DensityLocation::PoleInfinity => alpha.powf(-gf * (m - 2.0 * s)),
        DensityLocation::Interior => alpha.powf(gf.abs() * (m - 2.0 * s)),
    }
}

/// Angle of `g(phi)` for actions on the circle (angles in radians). For the
/// dilation of the one-dimensional sphere the angle is the one of
/// [`Point::sphere1_from_angle`].
pub fn circle_angle_map(a: &ActionSpec, g: i64, phi: f64) -> Result<f64> {
    match a {
        ActionSpec::RotationZ { theta, .. } => Ok(wrap_angle(phi + TAU * wrap_turn(g as f64 * theta))),
        ActionSpec::CyclicRotation { k } => {
            Ok(wrap_angle(phi + TAU * g.rem_euclid(*k as i64) as f64 / *k as f64))
        }
        ActionSpec::DilationSphere { alpha, dim_m: 1 } => {
            let scale = alpha.powf(g as f64);
            if !scale.is_finite() || scale == 0.0 {
                return Err(Error::ChartOverflow(g));
            }
            let (s, c) = (phi / 2.0).sin_cos();
            Ok(wrap_angle(2.0 * (scale * s).atan2(c)))
        }
        _ => Err(Error::Unsupported("action does not act on the circle".into())),
    }
}

/// Derivative of [`circle_angle_map`] with respect to `phi`.
pub fn circle_angle_map_derivative(a: &ActionSpec, g: i64, phi: f64) -> Result<f64> {
    match a {
        ActionSpec::RotationZ { .. } | ActionSpec::CyclicRotation { .. } => Ok(1.0),
        ActionSpec::DilationSphere { alpha, dim_m: 1 } => {
            let scale = alpha.powf(g as f64);
            if !scale.is_finite() || scale == 0.0 {
                return Err(Error::ChartOverflow(g));
            }
            let (s, c) = (phi / 2.0).sin_cos();
            Ok(scale / (c * c + scale * scale * s * s))
        }
        _ => Err(Error::Unsupported("action does not act on the circle".into())),
    }
}

/// Angles of the two fixed points of the circle dilation.
pub const POLE_ZERO_ANGLE: f64 = 0.0;
pub const POLE_INFINITY_ANGLE: f64 = PI;

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(chart: Chart, c: &[f64]) -> Point {
        Point::sphere(chart, c.to_vec()).unwrap()
    }

    fn coords(p: &Point) -> (Chart, Vec<f64>) {
        match p {
            Point::Sphere { chart, coords } => (*chart, coords.clone()),
            _ => panic!("not a sphere point"),
        }
    }

    #[test]
    fn rotation_inverse_returns_to_start() {
        let a = ActionSpec::rotation((5f64.sqrt() - 1.0) / 2.0, true).unwrap();
        let x = Point::Circle(0.3);
        let y = apply_action(&a, GroupElement::Integer(17), &x).unwrap();
        let z = apply_action(&a, GroupElement::Integer(-17), &y).unwrap();
        let Point::Circle(t) = z else { panic!() };
        assert!((t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn cyclic_power_is_identity_on_grid() {
        for j in 0..64 {
            let mut p = j;
            for _ in 0..4 {
                p = apply_cyclic_grid(4, 1, p, 64).unwrap();
            }
            assert_eq!(p, j);
        }
        assert!(apply_cyclic_grid(3, 1, 0, 64).is_err());
    }

    #[test]
    fn dilation_pole_fixed_and_chart_switch() {
        let a = ActionSpec::dilation(0.5, 2).unwrap();
        let pole = sphere(Chart::Zero, &[0.0, 0.0]);
        assert_eq!(apply_action(&a, GroupElement::Integer(3), &pole).unwrap(), pole);
        // alpha^{-2} (0.5, 0) = (2, 0) in chart 0, i.e. (0.5, 0) in chart infinity.
        let p = sphere(Chart::Zero, &[0.5, 0.0]);
        let (c, x) = coords(&apply_action(&a, GroupElement::Integer(-2), &p).unwrap());
        assert_eq!(c, Chart::Infinity);
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1] == 0.0);
    }

    #[test]
    fn dilation_overflow_is_reported() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let p = sphere(Chart::Zero, &[0.5]);
        assert_eq!(apply_action(&a, GroupElement::Integer(5000), &p), Err(Error::ChartOverflow(5000)));
    }

    #[test]
    fn group_law_on_sphere_points() {
        let a = ActionSpec::dilation(0.7, 2).unwrap();
        let p = sphere(Chart::Zero, &[0.3, -0.6]);
        for (g, h) in [(1, 2), (-3, 1), (4, -7)] {
            let lhs = apply_action(&a, GroupElement::Integer(g), &apply_action(&a, GroupElement::Integer(h), &p).unwrap()).unwrap();
            let rhs = apply_action(&a, GroupElement::Integer(g + h), &p).unwrap();
            let ((c1, x1), (c2, x2)) = (coords(&lhs), coords(&rhs));
            assert_eq!(c1, c2);
            assert!(x1.iter().zip(&x2).all(|(u, v)| (u - v).abs() < 1e-12));
        }
    }

    fn fd_jacobian(a: &ActionSpec, g: i64, p: &[f64], chart: Chart) -> DMatrix<f64> {
        let m = p.len();
        let h = 1e-6;
        let img = |q: &[f64]| coords(&dilation_map(if let ActionSpec::DilationSphere { alpha, .. } = a { *alpha } else { 0.0 }, g, &Point::Sphere { chart, coords: q.to_vec() }).unwrap().0).1;
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let mut qp = p.to_vec();
            let mut qm = p.to_vec();
            qp[j] += h;
            qm[j] -= h;
            let (fp, fm) = (img(&qp), img(&qm));
            for i in 0..m {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        jac
    }

    #[test]
    fn codifferential_matches_finite_differences() {
        let a = ActionSpec::dilation(0.6, 2).unwrap();
        for (g, x, chart) in [(1, [0.4, 0.2], Chart::Zero), (-2, [0.5, -0.3], Chart::Zero), (2, [0.1, 0.7], Chart::Infinity)] {
            let cp = CotangentPoint::new(Point::Sphere { chart, coords: x.to_vec() }, vec![0.3, -0.8]).unwrap();
            let out = codifferential(&a, GroupElement::Integer(g), &cp).unwrap();
            let jac = fd_jacobian(&a, g, &x, chart);
            let v = jac.transpose().try_inverse().unwrap() * DVector::from_vec(cp.xi.clone());
            let v = &v / v.norm();
            for i in 0..2 {
                assert!((v[i] - out.xi[i]).abs() < 1e-7, "{v} vs {:?}", out.xi);
            }
        }
    }

    #[test]
    fn codifferential_is_functorial() {
        let a = ActionSpec::dilation(0.55, 3).unwrap();
        let cp = CotangentPoint::new(sphere(Chart::Zero, &[0.2, 0.5, -0.4]), vec![1.0, 2.0, -0.5]).unwrap();
        for (g, h) in [(1, 1), (2, -3), (-1, -1)] {
            let lhs = codifferential(&a, GroupElement::Integer(g), &codifferential(&a, GroupElement::Integer(h), &cp).unwrap()).unwrap();
            let rhs = codifferential(&a, GroupElement::Integer(g + h), &cp).unwrap();
            assert!(lhs.xi.iter().zip(&rhs.xi).all(|(u, v)| (u - v).abs() < 1e-10));
        }
    }

    #[test]
    fn rotation_density_is_one() {
        let a = ActionSpec::rotation(0.3, false).unwrap();
        let w = WeightSpec { point: CotangentPoint::new(Point::Circle(0.1), vec![1.0]).unwrap(), s: 2.5, order_m: 0.0 };
        for g in [-5, 0, 9] {
            assert_eq!(density_mu(&w, &a, g).unwrap(), 1.0);
        }
    }

    #[test]
    fn density_at_poles_is_exponential() {
        // Pole 0, s = 1, m = 1, alpha = 1/2: direct labels give alpha^{-g(m-2s)} = 2^{-g}.
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let w = WeightSpec { point: CotangentPoint::new(sphere(Chart::Zero, &[0.0]), vec![1.0]).unwrap(), s: 1.0, order_m: 0.0 };
        for (g, want) in [(0, 1.0), (1, 0.5), (2, 0.25), (-3, 8.0)] {
            assert!((density_mu(&w, &a, g).unwrap() - want).abs() < 1e-14);
        }
        let wi = WeightSpec { point: CotangentPoint::new(sphere(Chart::Infinity, &[0.0]), vec![1.0]).unwrap(), s: 1.0, order_m: 0.0 };
        assert!((density_mu(&wi, &a, 2).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn density_cocycle() {
        // mu_{x,xi}(g h) = mu_{x,xi}(h) mu_{h^{-1}(x, xi)}(g).
        let a = ActionSpec::dilation(0.6, 2).unwrap();
        let cp = CotangentPoint::new(sphere(Chart::Zero, &[0.3, 0.4]), vec![0.6, 0.8]).unwrap();
        for (g, h) in [(1, 2), (-2, 3), (3, -1), (-1, -4)] {
            let s = 0.7;
            let lhs = density_at(&cp, s, &a, g + h).unwrap();
            let moved = codifferential(&a, GroupElement::Integer(-h), &cp).unwrap();
            let rhs = density_at(&cp, s, &a, h).unwrap() * density_at(&moved, s, &a, g).unwrap();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn interior_density_on_equator_is_symmetric() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        let cp = CotangentPoint::new(sphere(Chart::Zero, &[1.0]), vec![1.0]).unwrap();
        for g in [-4i64, -1, 0, 2, 5] {
            let mu = density_at(&cp, 1.0, &a, g).unwrap();
            let want = density_closed_form(0.5, 1, 1.0, DensityLocation::Interior, g);
            assert!((mu - want).abs() < 1e-12 * want, "{g}: {mu} vs {want}");
        }
    }

    #[test]
    fn angle_map_matches_chart_action() {
        let a = ActionSpec::dilation(0.5, 1).unwrap();
        for phi in [0.3, 1.5, 2.9, 4.0, 6.0] {
            for g in [-3, -1, 1, 2] {
                let p = Point::sphere1_from_angle(phi);
                let q = apply_action(&a, GroupElement::Integer(g), &p).unwrap();
                let want = q.sphere1_angle().unwrap();
                let got = circle_angle_map(&a, g, phi).unwrap();
                let d = (want - got).abs();
                assert!(d.min(TAU - d) < 1e-12, "{phi} {g}: {want} {got}");
                let h = 1e-6;
                let fd = (circle_angle_map(&a, g, phi + h).unwrap() - circle_angle_map(&a, g, phi - h).unwrap()) / (2.0 * h);
                assert!((fd - circle_angle_map_derivative(&a, g, phi).unwrap()).abs() < 1e-6);
            }
        }
        assert_eq!(circle_angle_map(&a, 4, POLE_ZERO_ANGLE).unwrap(), 0.0);
        assert!((circle_angle_map(&a, 4, POLE_INFINITY_ANGLE).unwrap() - PI).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(ActionSpec::rotation(1.2, true).is_err());
        assert!(ActionSpec::dilation(1.0, 1).is_err());
        assert!(ActionSpec::cyclic(1).is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Circle, 15).is_err());
        assert!(ManifoldSpec::new(ManifoldKind::Circle, 64).is_ok());
    }
}
