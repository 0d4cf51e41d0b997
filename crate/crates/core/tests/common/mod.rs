#![allow(dead_code)]

use std::sync::OnceLock;

use gsk_gl::bifurcation::{find_critical, CriticalPoint};
use gsk_gl::dynamics::{self, PropagatorTable, Scheme};
use gsk_gl::matrix2::{Mat2, Vec2};
use gsk_gl::model::{Gsk, ModelParams};
use gsk_gl::spectral::{Grid1D, SpectralField};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x6f5c_2b1d;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn fig1() -> &'static CriticalPoint {
    static CP: OnceLock<CriticalPoint> = OnceLock::new();
    CP.get_or_init(|| find_critical(0.2, 0.0, 0.018).unwrap())
}

pub fn gsk(a: f64) -> Gsk {
    Gsk::minus(ModelParams::new(a, 0.2, 0.0, 0.018).unwrap()).unwrap()
}

/// Real field with random modes `|j| <= band` in both components.
pub fn random_real_field(grid: Grid1D, rng: &mut ChaCha8Rng, band: i64, amp: f64) -> SpectralField {
    let mut comps = vec![vec![c(0.0, 0.0); grid.n()]; 2];
    for comp in comps.iter_mut() {
        comp[0] = c(rng.random_range(-amp..amp), 0.0);
        for j in 1..=band {
            let z = c(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
            comp[grid.slot(j)] = z;
            comp[grid.slot(-j)] = z.conj();
        }
    }
    SpectralField::from_coefficients(grid, comps).unwrap()
}

/// Complex field with random modes `|j| <= band`; no symmetry.
pub fn random_complex_field(grid: Grid1D, rng: &mut ChaCha8Rng, band: i64, amp: f64) -> SpectralField {
    let mut comp = vec![c(0.0, 0.0); grid.n()];
    for j in -band..=band {
        comp[grid.slot(j)] = c(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
    }
    SpectralField::from_coefficients(grid, vec![comp]).unwrap()
}

/// Eigenvalues by shifted inverse iteration; independent of the closed form.
pub fn eig_oracle(m: &Mat2) -> [C64; 2] {
    let mut x = Vec2::new(c(0.3, 0.7), c(1.0, -0.4));
    let mut mu = m[(0, 0)] + c(1e-3, 1e-3);
    for _ in 0..100 {
        let Some(inv) = (m - Mat2::identity() * mu).try_inverse() else {
            break;
        };
        x = inv * x;
        x /= c(x.norm(), 0.0);
        mu = x.conjugate().dot(&(m * x));
    }
    [mu, m[(0, 0)] + m[(1, 1)] - mu]
}

/// `exp(M)` by scaling and squaring of a long Taylor series.
pub fn expm_oracle(m: &Mat2) -> Mat2 {
    let norm = m.iter().map(|z| z.norm()).sum::<f64>();
    let s = norm.log2().ceil().max(0.0) as i32 + 4;
    let a = m / c(2f64.powi(s), 0.0);
    let mut term = Mat2::identity();
    let mut sum = Mat2::identity();
    for j in 1..30 {
        term = term * a / c(j as f64, 0.0);
        sum += term;
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Observed order of a scheme from differences against a fine reference.
pub fn self_convergence_order(scheme: Scheme, dts: [f64; 3], reference_dt: f64, rng: &mut ChaCha8Rng) -> f64 {
    let grid = Grid1D::new(64, 2.0 * std::f64::consts::PI * 4.0 / 2.047).unwrap();
    let m = gsk(0.23);
    let u0 = random_real_field(grid, rng, 3, 0.01);
    let t = 0.8;
    let run = |dt: f64| {
        let table = PropagatorTable::new(&m, grid, dt, scheme);
        let mut u = u0.clone();
        for _ in 0..(t / dt).round() as usize {
            u = dynamics::step_full(&u, &table, &m).unwrap();
        }
        u
    };
    let reference = run(reference_dt);
    let errs: Vec<f64> = dts.iter().map(|&dt| run(dt).sub(&reference).unwrap().max_abs()).collect();
    dynamics::least_squares_line(
        &dts.iter().map(|d| d.ln()).collect::<Vec<_>>(),
        &errs.iter().map(|e| e.ln()).collect::<Vec<_>>(),
    )
    .0
}
