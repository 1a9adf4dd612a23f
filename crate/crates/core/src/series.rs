//! Band-limited trigonometric series on the circle `x in [0, 2pi)`.
//!
//! A series of bandwidth `B` stores `c_{-B}, ..., c_B` and represents
//! `f(x) = sum_k c_k e^{ikx}`. Sample grids are uniform, `x_j = 2 pi j / K`.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// In-place unnormalized forward DFT, `X_k = sum_j x_j e^{-2 pi i jk/K}`.
pub fn fft_forward(buf: &mut [Complex64]) {
    if !buf.is_empty() {
        plan(buf.len(), true).process(buf);
    }
}

/// In-place unnormalized inverse DFT, `x_j = sum_k X_k e^{2 pi i jk/K}`.
pub fn fft_inverse(buf: &mut [Complex64]) {
    if !buf.is_empty() {
        plan(buf.len(), false).process(buf);
    }
}

/// Smallest power of two that is at least `n` (and at least 1).
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrigSeries {
    coeffs: Vec<Complex64>,
}

impl TrigSeries {
    pub fn zero() -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn constant(c: Complex64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `c e^{ikx}`.
    pub fn monomial(k: i64, c: Complex64) -> Self {
        let b = k.unsigned_abs() as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * b + 1];
        coeffs[(k + b as i64) as usize] = c;
        Self { coeffs }
    }

    /// Coefficients `c_{-B..=B}`; the length must be odd.
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "coefficient vector must have odd length");
        Self { coeffs }
    }

    /// Coefficients of `f` up to `bandwidth`, exact when `f` is band-limited
    /// to that bandwidth.
    pub fn from_fn(f: impl Fn(f64) -> Complex64, bandwidth: usize) -> Self {
        let k = next_pow2(2 * bandwidth + 1).max(4);
        let samples: Vec<Complex64> = (0..k).map(|j| f(TAU * j as f64 / k as f64)).collect();
        Self::from_samples(&samples, bandwidth)
    }

    /// Coefficients up to `bandwidth` from `K >= 2 bandwidth + 1` uniform samples.
    pub fn from_samples(samples: &[Complex64], bandwidth: usize) -> Self {
        let k = samples.len();
        assert!(k > 2 * bandwidth, "need at least 2B+1 samples");
        let mut buf = samples.to_vec();
        fft_forward(&mut buf);
        let scale = 1.0 / k as f64;
        let b = bandwidth as i64;
        let coeffs = (-b..=b)
            .map(|m| buf[m.rem_euclid(k as i64) as usize] * scale)
            .collect();
        Self { coeffs }
    }

    pub fn bandwidth(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> Complex64 {
        let b = self.bandwidth() as i64;
        if k.abs() > b {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + b) as usize]
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let b = self.bandwidth() as i64;
        let w = Complex64::from_polar(1.0, x);
        let winv = w.conj();
        // Horner in e^{ix}, starting from the top coefficient.
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * w + c;
        }
        acc * winv.powi(b as i32)
    }

    /// Values on the uniform grid of `k` points. Modes above `k/2` alias.
    pub fn samples(&self, k: usize) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        let b = self.bandwidth() as i64;
        for (i, c) in self.coeffs.iter().enumerate() {
            let m = i as i64 - b;
            buf[m.rem_euclid(k as i64) as usize] += c;
        }
        fft_inverse(&mut buf);
        buf
    }

    /// Values of `x -> f(x - shift)` on the uniform grid of `k` points.
    pub fn samples_shifted(&self, k: usize, shift: f64) -> Vec<Complex64> {
        self.shifted(shift).samples(k)
    }

    /// `x -> f(x - shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        let b = self.bandwidth() as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::from_polar(1.0, -((i as i64 - b) as f64) * shift))
            .collect();
        Self { coeffs }
    }

    pub fn derivative(&self) -> Self {
        let b = self.bandwidth() as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex64::new(0.0, (i as i64 - b) as f64))
            .collect();
        Self { coeffs }
    }

    fn padded(&self, bandwidth: usize) -> Vec<Complex64> {
        let b = self.bandwidth();
        let mut out = vec![Complex64::new(0.0, 0.0); 2 * bandwidth + 1];
        for (i, c) in self.coeffs.iter().enumerate() {
            out[i + bandwidth - b] = *c;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let b = self.bandwidth().max(other.bandwidth());
        let mut out = self.padded(b);
        for (o, c) in out.iter_mut().zip(other.padded(b)) {
            *o += c;
        }
        Self { coeffs: out }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Exact product (convolution of coefficients).
    pub fn mul(&self, other: &Self) -> Self {
        let (ba, bb) = (self.bandwidth(), other.bandwidth());
        let b = ba + bb;
        if self.coeffs.len() * other.coeffs.len() <= 8192 {
            let mut out = vec![Complex64::new(0.0, 0.0); 2 * b + 1];
            for (i, x) in self.coeffs.iter().enumerate() {
                if x.re == 0.0 && x.im == 0.0 {
                    continue;
                }
                for (j, y) in other.coeffs.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            return Self { coeffs: out };
        }
        let k = next_pow2(2 * b + 1);
        let sa = self.samples(k);
        let sb = other.samples(k);
        let prod: Vec<Complex64> = sa.iter().zip(&sb).map(|(x, y)| x * y).collect();
        Self::from_samples(&prod, b)
    }

    pub fn conj(&self) -> Self {
        Self { coeffs: self.coeffs.iter().rev().map(|c| c.conj()).collect() }
    }

    /// Drops outer coefficients whose modulus is at most `tol`.
    pub fn trimmed(&self, tol: f64) -> Self {
        let b = self.bandwidth();
        let mut keep = 0;
        for m in (0..=b).rev() {
            if self.coeffs[b + m].norm() > tol || self.coeffs[b - m].norm() > tol {
                keep = m;
                break;
            }
        }
        Self { coeffs: self.coeffs[b - keep..=b + keep].to_vec() }
    }

    /// Number of uniform points used for sup-norm estimates.
    pub fn sup_grid(&self) -> usize {
        next_pow2(4 * (2 * self.bandwidth() + 1)).max(64)
    }

    /// Maximum modulus over an oversampled uniform grid.
    pub fn sup_norm(&self) -> f64 {
        self.samples(self.sup_grid()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Minimum modulus over an oversampled uniform grid of at least `k` points.
    pub fn min_modulus(&self, k: usize) -> f64 {
        self.samples(next_pow2(k.max(self.sup_grid())))
            .iter()
            .map(|c| c.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Sum of coefficient moduli; an upper bound for the sup norm.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    /// Mean value over the circle.
    pub fn mean(&self) -> Complex64 {
        self.coeff(0)
    }
}
