//! Dispersion relation, location of the Turing point and the
//! Ginzburg-Landau coefficients.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix2::{self, Mat2, Spectrum2, Vec2};
use crate::model::{Gsk, Model, ModelParams};

type C64 = Complex64;

/// Eigenvalue gap below which a matrix with a single eigenvector is reported defective.
const DEFECTIVE_GAP: f64 = 1e-12;
const K_SCAN_SAMPLES: usize = 512;
const A_SCAN_SAMPLES: usize = 64;
/// Upper end of the rainfall bracket searched for the Turing point.
pub const A_UPPER: f64 = 5.0;
const GROWTH_TOL: f64 = 1e-10;
const RESONANCE_COND: f64 = 1e8;

#[derive(Clone, Copy, Debug)]
pub struct EigenData {
    pub k: f64,
    pub lambda1: C64,
    pub lambda2: C64,
    pub f1: Vec2,
    pub f2: Vec2,
    pub f1_adj: Vec2,
    pub f2_adj: Vec2,
}

fn ordered_roots(m: &Mat2) -> (C64, C64) {
    let [p, q] = Spectrum2::of(m).roots();
    if p.re > q.re || (p.re == q.re && p.im >= q.im) {
        (p, q)
    } else {
        (q, p)
    }
}

/// Leading eigenvalue (largest real part) without eigenvectors.
pub fn leading_eigenvalue(m: &Mat2) -> C64 {
    ordered_roots(m).0
}

/// Unit norm with the first non-negligible component real and positive.
fn normalize(v: Vec2) -> Vec2 {
    let v = v / C64::new(v.norm(), 0.0);
    let i = if v[0].norm() > 1e-14 { 0 } else { 1 };
    let lead = v[i];
    let mut out = v * (lead.conj() / lead.norm());
    out[i] = C64::new(lead.norm(), 0.0);
    out
}

fn eigenvector(m: &Mat2, lambda: C64) -> Option<Vec2> {
    // rows of (M - λI) annihilate the eigenvector
    let r0 = Vec2::new(m[(0, 1)], lambda - m[(0, 0)]);
    let r1 = Vec2::new(lambda - m[(1, 1)], m[(1, 0)]);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let best = if r0.norm() >= r1.norm() { r0 } else { r1 };
    if best.norm() <= 1e-14 * scale {
        None
    } else {
        Some(normalize(best))
    }
}

/// Closed-form eigen-decomposition of a 2x2 matrix, ordered by real part
/// (ties by imaginary part, descending).
pub fn eigen_decompose(m: &Mat2, k: f64) -> Result<EigenData> {
    let (l1, l2) = ordered_roots(m);
    let gap = (l1 - l2).norm();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let (f1, f2) = match (eigenvector(m, l1), eigenvector(m, l2)) {
        (None, None) => (
            Vec2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
            Vec2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        ),
        _ if gap < DEFECTIVE_GAP * scale.max(1.0) => {
            return Err(Error::Defective { k, gap });
        }
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Defective { k, gap }),
    };
    let s = Mat2::from_columns(&[f1, f2]);
    let inv = s.try_inverse().ok_or(Error::Defective { k, gap })?;
    Ok(EigenData {
        k,
        lambda1: l1,
        lambda2: l2,
        f1,
        f2,
        f1_adj: inv.row(0).transpose(),
        f2_adj: inv.row(1).transpose(),
    })
}

pub fn dispersion<Mo: Model<2>>(model: &Mo, k: f64) -> Result<EigenData> {
    eigen_decompose(&model.linear_symbol(k), k)
}

pub fn growth_rate<Mo: Model<2>>(model: &Mo, k: f64) -> f64 {
    leading_eigenvalue(&model.linear_symbol(k)).re
}

/// Scan bracket for wavenumbers, generous by the large-k asymptotics.
pub fn k_upper(gsk: &Gsk) -> f64 {
    let p = &gsk.params;
    let slow = p.d.min(2.0 * gsk.fp.w_star);
    4.0 * (p.b.max(p.a).max(1.0) / slow).sqrt()
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .into_iter()
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(mid)
}

/// Maximizes `Re λ1(k)` over `k ∈ [0, k_upper]`; returns `(k_max, Re λ1(k_max))`.
pub fn growth_max_over_k(params: &ModelParams) -> Result<(f64, f64)> {
    let gsk = Gsk::minus(*params)?;
    let hi = k_upper(&gsk);
    let step = hi / (K_SCAN_SAMPLES - 1) as f64;
    let g = |k: f64| growth_rate(&gsk, k);
    let best = (0..K_SCAN_SAMPLES)
        .map(|i| (i, g(i as f64 * step)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = best.saturating_sub(1) as f64 * step;
    let top = ((best + 1).min(K_SCAN_SAMPLES - 1)) as f64 * step;
    let k = golden_max(g, lo, top, 1e-10);
    Ok((k, g(k)))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalPoint {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub a_crit: f64,
    pub k_c: f64,
    pub lambda_max: f64,
    pub curvature: f64,
}

impl CriticalPoint {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            a: self.a_crit,
            b: self.b,
            c: self.c,
            d: self.d,
        }
    }
}

/// Locates the Turing point by root-finding `a ↦ max_k Re λ1(k; a)`.
pub fn find_critical(b: f64, c: f64, d: f64) -> Result<CriticalPoint> {
    let base = ModelParams::new(A_UPPER, b, c, d)?;
    let lo = base.saddle_node() * (1.0 + 1e-9);
    let g = |a: f64| growth_max_over_k(&base.with_a(a)).map(|r| r.1);
    let samples: Vec<(f64, f64)> = (0..A_SCAN_SAMPLES)
        .into_par_iter()
        .map(|i| {
            let a = lo + (A_UPPER - lo) * i as f64 / (A_SCAN_SAMPLES - 1) as f64;
            g(a).map(|v| (a, v))
        })
        .collect::<Result<_>>()?;
    // the Turing point is the largest a where growth turns from positive to negative
    let bracket = samples
        .windows(2)
        .rev()
        .find(|w| w[0].1 > 0.0 && w[1].1 <= 0.0)
        .map(|w| (w[0], w[1]))
        .ok_or(Error::NoTuringPoint { lo, hi: A_UPPER })?;
    let ((mut a_pos, mut g_pos), (mut a_neg, mut g_neg)) = bracket;

    let mut a = a_neg;
    let mut ga = g_neg;
    for _ in 0..200 {
        // secant step, safeguarded by the bracket
        let secant = a_pos - g_pos * (a_neg - a_pos) / (g_neg - g_pos);
        let mid = 0.5 * (a_pos + a_neg);
        let width = (a_neg - a_pos).abs();
        a = if secant.is_finite() && (secant - mid).abs() < 0.45 * width {
            secant
        } else {
            mid
        };
        ga = g(a)?;
        if ga.abs() <= GROWTH_TOL || width < 1e-15 {
            break;
        }
        if ga > 0.0 {
            a_pos = a;
            g_pos = ga;
        } else {
            a_neg = a;
            g_neg = ga;
        }
    }

    let params = base.with_a(a);
    let gsk = Gsk::minus(params)?;
    let (k_c, lambda_max) = growth_max_over_k(&params)?;
    debug_assert!((lambda_max - ga).abs() < 1e-9);
    let k_step = k_upper(&gsk) / (K_SCAN_SAMPLES - 1) as f64;
    if k_c < k_step {
        return Err(Error::HomogeneousInstability);
    }
    let lead = leading_eigenvalue(&gsk.linear_symbol(k_c));
    if lead.im.abs() > 1e-8 {
        return Err(Error::TuringHopf { imag: lead.im });
    }
    let curvature = growth_curvature(&gsk, k_c, 1e-4 * k_c);
    Ok(CriticalPoint {
        b,
        c,
        d,
        a_crit: a,
        k_c,
        lambda_max,
        curvature,
    })
}

fn growth_curvature(gsk: &Gsk, k: f64, h: f64) -> f64 {
    (growth_rate(gsk, k + h) - 2.0 * growth_rate(gsk, k) + growth_rate(gsk, k - h)) / (h * h)
}

fn lambda1_at(params: &ModelParams, k: f64) -> Result<C64> {
    Ok(leading_eigenvalue(&Gsk::minus(*params)?.linear_symbol(k)))
}

/// `-∂_a λ1(k_c)` and `-½ ∂_k² λ1(k_c)` at the critical point, with explicit steps.
pub fn linear_coefficients(cp: &CriticalPoint, h_a: f64, h_k: f64) -> Result<(C64, C64)> {
    let p = cp.params();
    let plus = lambda1_at(&p.with_a(cp.a_crit + h_a), cp.k_c)?;
    let minus = lambda1_at(&p.with_a(cp.a_crit - h_a), cp.k_c)?;
    let alpha0 = -(plus - minus) / (2.0 * h_a);
    let second = (lambda1_at(&p, cp.k_c + h_k)? - lambda1_at(&p, cp.k_c)? * 2.0
        + lambda1_at(&p, cp.k_c - h_k)?)
        / (h_k * h_k);
    Ok((alpha0, -second * 0.5))
}

/// The cubic coefficient and second-order corrections of a 2-component model
/// at carrier wavenumber `k_c`.
#[derive(Clone, Copy, Debug)]
pub struct NonlinearCoefficients {
    pub f1: Vec2,
    pub f1_adj: Vec2,
    pub nu0: Vec2,
    pub nu2: Vec2,
    pub alpha3: C64,
    pub nu0_residual: f64,
    pub nu2_residual: f64,
}

fn solve_correction<Mo: Model<2>>(model: &Mo, k: f64, rhs: &Vec2) -> Result<(Vec2, f64)> {
    let m = model.linear_symbol(k);
    let cond = matrix2::condition_number(&m);
    if !(cond <= RESONANCE_COND) {
        return Err(Error::ResonantCorrection { k, cond });
    }
    let x = matrix2::solve(&m, rhs).ok_or(Error::ResonantCorrection { k, cond })?;
    let residual = (m * x - rhs).norm();
    Ok((x, residual))
}

pub fn nonlinear_coefficients<Mo: Model<2>>(model: &Mo, k_c: f64) -> Result<NonlinearCoefficients> {
    let eig = dispersion(model, k_c)?;
    let f1 = eig.f1;
    let f1_adj = eig.f1_adj;
    let f1c = matrix2::conj(&f1);
    let rhs0 = -model.b2_symbol(0.0, &f1, &f1c) * C64::new(2.0, 0.0);
    let (nu0, nu0_residual) = solve_correction(model, 0.0, &rhs0)?;
    let rhs2 = -model.b2_symbol(2.0 * k_c, &f1, &f1);
    let (nu2, nu2_residual) = solve_correction(model, 2.0 * k_c, &rhs2)?;
    let two = C64::new(2.0, 0.0);
    let alpha3 = matrix2::dot(&f1_adj, &model.b2_symbol(k_c, &f1, &nu0)) * two
        + matrix2::dot(&f1_adj, &model.b2_symbol(k_c, &f1c, &nu2)) * two
        + matrix2::dot(&f1_adj, &model.b3_symbol(&f1c, &f1, &f1)) * C64::new(3.0, 0.0);
    Ok(NonlinearCoefficients {
        f1,
        f1_adj,
        nu0,
        nu2,
        alpha3,
        nu0_residual,
        nu2_residual,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct GLCoefficients {
    pub a_crit: f64,
    /// Rainfall parameter at which the nonlinear data below were evaluated.
    pub a: f64,
    pub k_c: f64,
    pub alpha0: C64,
    pub alpha2: C64,
    pub alpha3: C64,
    pub nu0: Vec2,
    pub nu2: Vec2,
    pub f1: Vec2,
    pub f1_adj: Vec2,
    pub nu0_residual: f64,
    pub nu2_residual: f64,
}

/// Amplitude-equation coefficients.
///
/// `α0` and `α2` come from the dispersion relation at the critical point;
/// the eigenvectors, corrections `ν0, ν2` and `α3` are evaluated at
/// `params.a` (the operating point of the run), minus branch.
pub fn gl_coefficients(cp: &CriticalPoint, params: &ModelParams) -> Result<GLCoefficients> {
    let (alpha0, alpha2) = linear_coefficients(cp, 1e-5 * cp.a_crit, 1e-4 * cp.k_c)?;
    let gsk = Gsk::minus(*params)?;
    let nl = nonlinear_coefficients(&gsk, cp.k_c)?;
    Ok(GLCoefficients {
        a_crit: cp.a_crit,
        a: params.a,
        k_c: cp.k_c,
        alpha0,
        alpha2,
        alpha3: nl.alpha3,
        nu0: nl.nu0,
        nu2: nl.nu2,
        f1: nl.f1,
        f1_adj: nl.f1_adj,
        nu0_residual: nl.nu0_residual,
        nu2_residual: nl.nu2_residual,
    })
}
