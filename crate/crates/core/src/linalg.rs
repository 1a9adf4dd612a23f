//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values in decreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn min_singular_value(m: &CMatrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Least-squares solution of `m x = b` for a tall matrix of full column rank.
/// Returns `None` when the triangular factor is singular.
pub fn lstsq(m: &CMatrix, b: &CVector) -> Option<CVector> {
    let qr = m.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let rhs = q.adjoint() * b;
    let x = r.solve_upper_triangular(&rhs)?;
    x.iter().all(|c| c.re.is_finite() && c.im.is_finite()).then_some(x)
}

/// Least squares for a tall matrix whose column `j` vanishes outside rows
/// `j..=j + lower`, by Givens rotations restricted to the band.
pub fn banded_lstsq(m: &CMatrix, b: &CVector, lower: usize) -> Option<CVector> {
    let (rows, n) = m.shape();
    if rows < n || b.len() != rows {
        return None;
    }
    let mut a = m.clone();
    let mut rhs = b.clone();
    let scale = max_abs(m);
    for j in 0..n {
        let last = (j + lower).min(n - 1);
        for i in j + 1..=(j + lower).min(rows - 1) {
            let (p, q) = (a[(j, j)], a[(i, j)]);
            if q == Complex64::new(0.0, 0.0) {
                continue;
            }
            let r = p.norm().hypot(q.norm());
            let (c, s) = (p / r, q / r);
            for k in j..=last {
                let (x, y) = (a[(j, k)], a[(i, k)]);
                a[(j, k)] = c.conj() * x + s.conj() * y;
                a[(i, k)] = c * y - s * x;
            }
            let (x, y) = (rhs[j], rhs[i]);
            rhs[j] = c.conj() * x + s.conj() * y;
            rhs[i] = c * y - s * x;
        }
    }
    let mut x = CVector::zeros(n);
    for j in (0..n).rev() {
        let d = a[(j, j)];
        if !(d.norm() > 1e-14 * scale) {
            return None;
        }
        let mut acc = rhs[j];
        for k in j + 1..=(j + lower).min(n - 1) {
            acc -= a[(j, k)] * x[k];
        }
        x[j] = acc / d;
    }
    x.iter().all(|c| c.re.is_finite() && c.im.is_finite()).then_some(x)
}

/// Entrywise maximum modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_exact_solution() {
        let m = CMatrix::from_fn(6, 3, |i, j| Complex64::new(((i * i + 3 * j) as f64).cos(), 1.0 / (1.0 + (i + j * j) as f64)));
        let x = CVector::from_vec(vec![Complex64::new(1.0, -1.0), Complex64::new(0.5, 2.0), Complex64::new(-3.0, 0.0)]);
        let b = &m * &x;
        let y = lstsq(&m, &b).unwrap();
        assert!((y - x).norm() < 1e-10);
    }

    #[test]
    fn banded_matches_dense() {
        let (n, lower) = (9, 3);
        let m = CMatrix::from_fn(n + lower, n, |i, j| {
            if i >= j && i <= j + lower { Complex64::new(((i * 7 + j) as f64).sin() + 2.0 * (i == j) as u8 as f64, (i as f64 - j as f64).cos()) } else { Complex64::new(0.0, 0.0) }
        });
        let b = CVector::from_fn(n + lower, |i, _| Complex64::new(i as f64, 1.0 / (1.0 + i as f64)));
        let dense = lstsq(&m, &b).unwrap();
        assert!((banded_lstsq(&m, &b, lower).unwrap() - dense).norm() < 1e-12);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(0.0, 3.0), Complex64::new(-1.0, 0.0)]));
        let sv = singular_values(&m);
        assert!((sv[0] - 3.0).abs() < 1e-14 && (sv[1] - 1.0).abs() < 1e-14);
    }
}
