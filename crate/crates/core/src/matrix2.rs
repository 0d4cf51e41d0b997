//! Closed-form linear algebra and analytic matrix functions for 2x2 complex
//! matrices.
//!
//! Every function `f` of a 2x2 matrix `A` with eigenvalues `m ± s` can be
//! written as
//!
//! ```text
//! f(A) = ½(f(m+s) + f(m-s))·I + f[m+s, m-s]·(A - m·I)
//! ```
//!
//! where `f[x, y]` is the first divided difference. When the eigenvalues are
//! (nearly) coincident the divided difference is evaluated from the odd
//! Taylor coefficients of `f` around `m`, so the formula stays exact across
//! the defective set. The exponential integrators use this for `exp` and the
//! `φ_j` functions.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Vec2 = Vector2<C64>;

/// Half-gap below which the divided difference switches to its Taylor form.
const SERIES_HALF_GAP: f64 = 1e-3;

/// Eigenvalues of a 2x2 matrix in midpoint / half-gap form: `mid ± half_gap`.
#[derive(Clone, Copy, Debug)]
pub struct Spectrum2 {
    pub mid: C64,
    pub half_gap: C64,
}

impl Spectrum2 {
    pub fn of(m: &Mat2) -> Self {
        let mid = (m[(0, 0)] + m[(1, 1)]) * 0.5;
        let half_diff = (m[(0, 0)] - m[(1, 1)]) * 0.5;
        // ((a-d)/2)^2 + bc avoids the cancellation in mid^2 - det.
        let disc = half_diff * half_diff + m[(0, 1)] * m[(1, 0)];
        Self {
            mid,
            half_gap: disc.sqrt(),
        }
    }

    pub fn roots(&self) -> [C64; 2] {
        [self.mid + self.half_gap, self.mid - self.half_gap]
    }
}

/// A scalar analytic function with access to its derivatives.
pub trait AnalyticFn {
    fn value(&self, z: C64) -> C64;
    fn derivative(&self, z: C64, order: usize) -> C64;
}

/// `φ_j(z) = Σ_i z^i / (i+j)!`; `Phi(0)` is the exponential.
#[derive(Clone, Copy, Debug)]
pub struct Phi(pub usize);

impl AnalyticFn for Phi {
    fn value(&self, z: C64) -> C64 {
        phi(self.0, z)
    }

    fn derivative(&self, z: C64, order: usize) -> C64 {
        phi_derivative(self.0, order, z)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Scalar `φ_j(z)`, accurate near the origin and for large negative `z`.
pub fn phi(j: usize, z: C64) -> C64 {
    if z.norm() < 0.5 {
        let mut term = C64::new(1.0 / factorial(j), 0.0);
        let mut sum = term;
        for i in 0..24 {
            term = term * z / ((i + j + 1) as f64);
            sum += term;
        }
        sum
    } else {
        let mut value = z.exp();
        for i in 0..j {
            value = (value - 1.0 / factorial(i)) / z;
        }
        value
    }
}

/// `d^n/dz^n φ_j(z) = Σ_i C(n,i) (-1)^i (j)_i φ_{j+i}(z)` with the rising factorial `(j)_i`.
pub fn phi_derivative(j: usize, n: usize, z: C64) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    let mut binom = 1.0;
    let mut rising = 1.0;
    for i in 0..=n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += phi(j + i, z) * (sign * binom * rising);
        binom = binom * (n - i) as f64 / (i + 1) as f64;
        rising *= (j + i) as f64;
    }
    sum
}

/// First divided difference `f[mid+s, mid-s]`.
fn divided_difference(f: &impl AnalyticFn, mid: C64, s: C64) -> C64 {
    if s.norm() < SERIES_HALF_GAP {
        let s2 = s * s;
        let mut acc = C64::new(0.0, 0.0);
        let mut power = C64::new(1.0, 0.0);
        for i in 0..4 {
            let order = 2 * i + 1;
            acc += f.derivative(mid, order) * power / factorial(order);
            power *= s2;
        }
        acc
    } else {
        (f.value(mid + s) - f.value(mid - s)) / (s * 2.0)
    }
}

/// Applies an analytic function to a 2x2 matrix.
pub fn matrix_function(m: &Mat2, f: &impl AnalyticFn) -> Mat2 {
    let spec = Spectrum2::of(m);
    let [hi, lo] = spec.roots();
    let even = (f.value(hi) + f.value(lo)) * 0.5;
    let odd = divided_difference(f, spec.mid, spec.half_gap);
    let shifted = m - Mat2::identity() * spec.mid;
    Mat2::identity() * even + shifted * odd
}

pub fn expm(m: &Mat2) -> Mat2 {
    matrix_function(m, &Phi(0))
}

pub fn phi_matrix(j: usize, m: &Mat2) -> Mat2 {
    matrix_function(m, &Phi(j))
}

/// Spectral (operator 2-) norm in closed form.
pub fn operator_norm(m: &Mat2) -> f64 {
    let frob2 = m.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let det = m.determinant().norm();
    let disc = (frob2 * frob2 - 4.0 * det * det).max(0.0);
    ((frob2 + disc.sqrt()) * 0.5).sqrt()
}

/// 2-norm condition number; infinite for singular matrices.
pub fn condition_number(m: &Mat2) -> f64 {
    let smax = operator_norm(m);
    let det = m.determinant().norm();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let smin = det / smax;
    smax / smin
}

/// Solves `m x = rhs` by Cramer's rule.
pub fn solve(m: &Mat2, rhs: &Vec2) -> Option<Vec2> {
    let det = m.determinant();
    if det.norm() == 0.0 {
        return None;
    }
    Some(Vec2::new(
        (rhs[0] * m[(1, 1)] - m[(0, 1)] * rhs[1]) / det,
        (m[(0, 0)] * rhs[1] - rhs[0] * m[(1, 0)]) / det,
    ))
}

/// Bilinear (unconjugated) pairing `a · b`.
pub fn dot(a: &Vec2, b: &Vec2) -> C64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn conj(v: &Vec2) -> Vec2 {
    v.map(|c| c.conj())
}
