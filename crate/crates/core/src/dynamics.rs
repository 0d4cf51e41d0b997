//! Exponential time differencing for the full system and the amplitude
//! equation, and semigroup decay measurements.
//!
//! The linear part is propagated exactly, mode by mode, with closed-form 2x2
//! matrix functions. The nonlinearity, including the deviation-quadratic part
//! of the quasilinear diffusion, is treated explicitly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{self, GLCoefficients};
use crate::error::{Error, Result};
use crate::matrix2::{self, Mat2};
use crate::model::Model;
use crate::spectral::{self, Grid1D, SpectralField};

type C64 = Complex64;

/// Default blow-up threshold as a multiple of the initial sup-norm.
pub const CLIP_FACTOR: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    #[serde(rename = "etd-rk2")]
    EtdRk2,
    #[default]
    #[serde(rename = "etd-rk4")]
    EtdRk4,
}

impl Scheme {
    pub fn order(&self) -> u32 {
        match self {
            Scheme::EtdRk2 => 2,
            Scheme::EtdRk4 => 4,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    /// Record every this many steps (the final state is always recorded).
    pub record_every: usize,
    /// Abort when the sup-norm exceeds this; `None` uses `CLIP_FACTOR` times
    /// the initial sup-norm.
    pub clip_threshold: Option<f64>,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end >= 0.0) || self.record_every == 0 {
            return Err(Error::InvalidParameter(format!(
                "integrator needs dt > 0, t_end >= 0, record_every >= 1 (dt={}, t_end={}, record_every={})",
                self.dt, self.t_end, self.record_every
            )));
        }
        if let Some(c) = self.clip_threshold {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("clip threshold {c} must be positive")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

fn clip_for(initial_sup: f64, configured: Option<f64>) -> f64 {
    configured.unwrap_or(if initial_sup > 0.0 {
        CLIP_FACTOR * initial_sup
    } else {
        f64::INFINITY
    })
}

/// Largest admissible step for the explicit quasilinear part: `0.5 / (D k_max²)`
/// with `D` the model's explicit diffusivity and `k_max` the quadratic
/// dealiasing cutoff.
pub fn quasilinear_ceiling<Mo: Model<2>>(model: &Mo, state: &SpectralField) -> f64 {
    let grid = state.grid();
    let k_max = grid.quadratic_cutoff() as f64 * grid.dk();
    let diff = model.explicit_diffusivity(state);
    if diff > 0.0 {
        0.5 / (diff * k_max * k_max)
    } else {
        f64::INFINITY
    }
}

/// Per-mode matrix functions of `dt Λ̂(k)` for one scheme and step.
pub struct PropagatorTable {
    grid: Grid1D,
    dt: f64,
    scheme: Scheme,
    e: Vec<Mat2>,
    e_half: Vec<Mat2>,
    q: Vec<Mat2>,
    w1: Vec<Mat2>,
    w2: Vec<Mat2>,
    w3: Vec<Mat2>,
}

impl PropagatorTable {
    pub fn new<Mo: Model<2>>(model: &Mo, grid: Grid1D, dt: f64, scheme: Scheme) -> Self {
        let rows: Vec<[Mat2; 6]> = (0..grid.n())
            .into_par_iter()
            .map(|i| {
                let l = model.linear_symbol(grid.wavenumber(i)) * C64::new(dt, 0.0);
                let h = C64::new(dt, 0.0);
                let e = matrix2::expm(&l);
                let p1 = matrix2::phi_matrix(1, &l);
                let p2 = matrix2::phi_matrix(2, &l);
                match scheme {
                    Scheme::EtdRk2 => [e, e, e, p1 * h, p2 * h, Mat2::zeros()],
                    Scheme::EtdRk4 => {
                        let half = l * C64::new(0.5, 0.0);
                        let p3 = matrix2::phi_matrix(3, &l);
                        let r = |x: f64| C64::new(x, 0.0);
                        [
                            e,
                            matrix2::expm(&half),
                            matrix2::phi_matrix(1, &half) * (h * 0.5),
                            (p1 - p2 * r(3.0) + p3 * r(4.0)) * h,
                            (p2 - p3 * r(2.0)) * h,
                            (p3 * r(4.0) - p2) * h,
                        ]
                    }
                }
            })
            .collect();
        // negative modes mirror the positive ones exactly
        let n = grid.n();
        let mut rows = rows;
        for i in n / 2 + 1..n {
            let mirrored = rows[n - i].map(|m| m.map(|z| z.conj()));
            rows[i] = mirrored;
        }
        let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
        Self {
            grid,
            dt,
            scheme,
            e: col(0),
            e_half: col(1),
            q: col(2),
            w1: col(3),
            w2: col(4),
            w3: col(5),
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `exp(dt Λ̂(k))` at storage slot `i`.
    pub fn exponential(&self, i: usize) -> &Mat2 {
        &self.e[i]
    }
}

#[cfg(test)]
fn vec_at(f: &SpectralField, i: usize) -> matrix2::Vec2 {
    matrix2::Vec2::new(f.component(0)[i], f.component(1)[i])
}

/// `Σ_j tables[j] · fields[j]`, mode by mode.
fn combine(grid: Grid1D, terms: &[(&[Mat2], &SpectralField, f64)]) -> SpectralField {
    let n = grid.n();
    let mut c0 = vec![C64::new(0.0, 0.0); n];
    let mut c1 = vec![C64::new(0.0, 0.0); n];
    for (table, field, scale) in terms {
        let (f0, f1) = (field.component(0), field.component(1));
        for i in 0..n {
            let m = &table[i];
            let (x, y) = (f0[i] * *scale, f1[i] * *scale);
            c0[i] += m[(0, 0)] * x + m[(0, 1)] * y;
            c1[i] += m[(1, 0)] * x + m[(1, 1)] * y;
        }
    }
    SpectralField::from_coefficients(grid, vec![c0, c1]).expect("two components")
}

/// One exponential-integrator step of `∂t V = Λ V + N(V)`.
pub fn step_full<Mo: Model<2>>(
    state: &SpectralField,
    table: &PropagatorTable,
    model: &Mo,
) -> Result<SpectralField> {
    if state.m() != 2 || state.grid().n() != table.grid.n() {
        return Err(Error::GridMismatch("state does not match propagator table".into()));
    }
    let g = table.grid;
    let nu = model.nonlinear(state)?;
    match table.scheme {
        Scheme::EtdRk2 => {
            let a = combine(g, &[(&table.e, state, 1.0), (&table.w1, &nu, 1.0)]);
            let na = model.nonlinear(&a)?;
            let diff = na.sub(&nu)?;
            Ok(a.add(&combine(g, &[(&table.w2, &diff, 1.0)]))?)
        }
        Scheme::EtdRk4 => {
            let a = combine(g, &[(&table.e_half, state, 1.0), (&table.q, &nu, 1.0)]);
            let na = model.nonlinear(&a)?;
            let b = combine(g, &[(&table.e_half, state, 1.0), (&table.q, &na, 1.0)]);
            let nb = model.nonlinear(&b)?;
            let cin = nb.scaled(2.0).sub(&nu)?;
            let c = combine(g, &[(&table.e_half, &a, 1.0), (&table.q, &cin, 1.0)]);
            let nc = model.nonlinear(&c)?;
            let nab = na.add(&nb)?;
            Ok(combine(
                g,
                &[
                    (&table.e, state, 1.0),
                    (&table.w1, &nu, 1.0),
                    (&table.w2, &nab, 2.0),
                    (&table.w3, &nc, 1.0),
                ],
            ))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
}

fn exceeds(state: &SpectralField, clip: f64) -> Option<f64> {
    // the coefficient l1-norm bounds the sup-norm from above
    if state.l1_norm() <= clip {
        return None;
    }
    let sup = state.sup_norm();
    if sup > clip || !sup.is_finite() {
        Some(sup)
    } else {
        None
    }
}

/// Repeated `step_full` with recording and blow-up/step-size checks.
pub fn integrate_full<Mo: Model<2>>(
    initial: &SpectralField,
    config: &IntegratorConfig,
    model: &Mo,
) -> Result<Trajectory> {
    config.validate()?;
    let table = PropagatorTable::new(model, *initial.grid(), config.dt, config.scheme);
    integrate_full_with(initial, config, model, &table)
}

pub fn integrate_full_with<Mo: Model<2>>(
    initial: &SpectralField,
    config: &IntegratorConfig,
    model: &Mo,
    table: &PropagatorTable,
) -> Result<Trajectory> {
    config.validate()?;
    let clip = clip_for(initial.sup_norm(), config.clip_threshold);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![initial.clone()],
    };
    let steps = config.steps();
    let mut state = initial.clone();
    for s in 1..=steps {
        let t = s as f64 * config.dt;
        state = step_full(&state, table, model)?;
        if let Some(norm) = exceeds(&state, clip) {
            return Err(Error::BlowUp {
                t,
                norm,
                threshold: clip,
            });
        }
        if s % config.record_every == 0 || s == steps {
            let ceiling = quasilinear_ceiling(model, &state);
            if config.dt > ceiling {
                return Err(Error::StepTooLarge {
                    dt: config.dt,
                    ceiling,
                });
            }
            traj.times.push(t);
            traj.states.push(state.clone());
        }
    }
    Ok(traj)
}

/// Scalar ETD weights for the amplitude equation on a slow grid.
pub struct GlTable {
    grid: Grid1D,
    dt: f64,
    scheme: Scheme,
    alpha3: C64,
    e: Vec<C64>,
    e_half: Vec<C64>,
    q: Vec<C64>,
    w1: Vec<C64>,
    w2: Vec<C64>,
    w3: Vec<C64>,
}

impl GlTable {
    /// `dt` is a slow-time step.
    pub fn new(coeffs: &GLCoefficients, grid: Grid1D, dt: f64, scheme: Scheme) -> Self {
        let h = C64::new(dt, 0.0);
        let mut t = Self {
            grid,
            dt,
            scheme,
            alpha3: coeffs.alpha3,
            e: Vec::new(),
            e_half: Vec::new(),
            q: Vec::new(),
            w1: Vec::new(),
            w2: Vec::new(),
            w3: Vec::new(),
        };
        for i in 0..grid.n() {
            let kk = grid.wavenumber(i);
            let z = (coeffs.alpha0 - coeffs.alpha2 * (kk * kk)) * h;
            let (p1, p2) = (matrix2::phi(1, z), matrix2::phi(2, z));
            t.e.push(z.exp());
            match scheme {
                Scheme::EtdRk2 => {
                    t.e_half.push(C64::new(0.0, 0.0));
                    t.q.push(C64::new(0.0, 0.0));
                    t.w1.push(p1 * h);
                    t.w2.push(p2 * h);
                    t.w3.push(C64::new(0.0, 0.0));
                }
                Scheme::EtdRk4 => {
                    let p3 = matrix2::phi(3, z);
                    t.e_half.push((z * 0.5).exp());
                    t.q.push(matrix2::phi(1, z * 0.5) * h * 0.5);
                    t.w1.push((p1 - p2 * 3.0 + p3 * 4.0) * h);
                    t.w2.push((p2 - p3 * 2.0) * h);
                    t.w3.push((p3 * 4.0 - p2) * h);
                }
            }
        }
        t
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    fn cubic(&self, a: &[C64]) -> Vec<C64> {
        gl_cubic(self.alpha3, a)
    }
}

/// Dealiased pseudospectral `α3 |A|² A`.
fn gl_cubic(alpha3: C64, a: &[C64]) -> Vec<C64> {
    let mut z = a.to_vec();
    spectral::dealias_cubic(&mut z);
    spectral::inverse_in_place(&mut z);
    for x in z.iter_mut() {
        *x = alpha3 * x.norm_sqr() * *x;
    }
    spectral::forward_in_place(&mut z);
    spectral::dealias_cubic(&mut z);
    z
}

/// Right-hand side `α0 A + α2 A_XX + α3 |A|² A` in coefficient space.
pub fn gl_rhs(a: &SpectralField, coeffs: &GLCoefficients) -> SpectralField {
    let grid = *a.grid();
    let cubic = gl_cubic(coeffs.alpha3, a.component(0));
    let out = a
        .component(0)
        .iter()
        .zip(&cubic)
        .enumerate()
        .map(|(i, (x, n))| {
            let k = grid.wavenumber(i);
            (coeffs.alpha0 - coeffs.alpha2 * (k * k)) * x + n
        })
        .collect();
    SpectralField::from_coefficients(grid, vec![out]).expect("one component")
}

pub fn step_gl(a: &SpectralField, table: &GlTable) -> Result<SpectralField> {
    if a.m() != 1 || a.grid().n() != table.grid.n() {
        return Err(Error::GridMismatch("amplitude does not match GL table".into()));
    }
    let u = a.component(0);
    let n = u.len();
    let nu = table.cubic(u);
    let out: Vec<C64> = match table.scheme {
        Scheme::EtdRk2 => {
            let st: Vec<C64> = (0..n).map(|i| table.e[i] * u[i] + table.w1[i] * nu[i]).collect();
            let na = table.cubic(&st);
            (0..n).map(|i| st[i] + table.w2[i] * (na[i] - nu[i])).collect()
        }
        Scheme::EtdRk4 => {
            let sa: Vec<C64> = (0..n).map(|i| table.e_half[i] * u[i] + table.q[i] * nu[i]).collect();
            let na = table.cubic(&sa);
            let sb: Vec<C64> = (0..n).map(|i| table.e_half[i] * u[i] + table.q[i] * na[i]).collect();
            let nb = table.cubic(&sb);
            let sc: Vec<C64> = (0..n)
                .map(|i| table.e_half[i] * sa[i] + table.q[i] * (nb[i] * 2.0 - nu[i]))
                .collect();
            let nc = table.cubic(&sc);
            (0..n)
                .map(|i| {
                    table.e[i] * u[i]
                        + table.w1[i] * nu[i]
                        + table.w2[i] * (na[i] + nb[i]) * 2.0
                        + table.w3[i] * nc[i]
                })
                .collect()
        }
    };
    SpectralField::from_coefficients(table.grid, vec![out])
}

/// Integrates the amplitude equation; `config.dt` and `config.t_end` are slow times.
pub fn integrate_gl(a0: &SpectralField, coeffs: &GLCoefficients, config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    let table = GlTable::new(coeffs, *a0.grid(), config.dt, config.scheme);
    let clip = clip_for(a0.sup_norm(), config.clip_threshold);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![a0.clone()],
    };
    let steps = config.steps();
    let mut a = a0.clone();
    for s in 1..=steps {
        let t = s as f64 * config.dt;
        a = step_gl(&a, &table)?;
        if let Some(norm) = exceeds(&a, clip) {
            return Err(Error::BlowUp {
                t,
                norm,
                threshold: clip,
            });
        }
        if s % config.record_every == 0 || s == steps {
            traj.times.push(t);
            traj.states.push(a.clone());
        }
    }
    Ok(traj)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Critical,
    Stable,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProbeResult {
    pub band: Band,
    /// Transient constant `C` in `‖e^{Λ̂ t}‖ ≤ C e^{-σ t}`.
    pub c: f64,
    pub sigma: f64,
    /// Largest `Re λ1` over the sampled band.
    pub lambda_max: f64,
}

const PROBE_K_SAMPLES: usize = 4001;
const PROBE_T_SAMPLES: usize = 64;

fn band_wavenumbers(k_c: f64, band: Band, k_max: f64) -> Vec<f64> {
    let width = k_c / 10.0;
    let mut ks: Vec<f64> = (0..PROBE_K_SAMPLES)
        .map(|i| k_max * i as f64 / (PROBE_K_SAMPLES - 1) as f64)
        .collect();
    ks.extend([k_c, k_c - width, k_c + width]);
    ks.into_iter()
        .filter(|&k| {
            let inside = (k - k_c).abs() <= width;
            match band {
                Band::Critical => inside,
                Band::Stable => !inside || (k - k_c).abs() == width,
            }
        })
        .collect()
}

/// Measures decay of the linear semigroup restricted to a band of wavenumbers.
///
/// Only `k >= 0` is sampled: `Λ̂(-k)` is the entrywise conjugate of `Λ̂(k)`,
/// so propagator norms are even in `k`.
pub fn semigroup_decay_probe<Mo: Model<2>>(
    model: &Mo,
    k_c: f64,
    k_max: f64,
    band: Band,
    t_max: f64,
) -> Result<ProbeResult> {
    if !(t_max >= 0.0) || !(k_c > 0.0) || !(k_max > k_c) {
        return Err(Error::InvalidParameter(format!(
            "probe needs t_max >= 0 and k_max > k_c > 0 (t_max={t_max}, k_c={k_c}, k_max={k_max})"
        )));
    }
    let ks = band_wavenumbers(k_c, band, k_max);
    let symbols: Vec<Mat2> = ks.iter().map(|&k| model.linear_symbol(k)).collect();
    let lambda_max = symbols
        .iter()
        .map(|m| bifurcation::leading_eigenvalue(m).re)
        .fold(f64::NEG_INFINITY, f64::max);
    if t_max == 0.0 {
        return Ok(ProbeResult {
            band,
            c: 1.0,
            sigma: -lambda_max,
            lambda_max,
        });
    }
    let times: Vec<f64> = (0..PROBE_T_SAMPLES)
        .map(|i| t_max * i as f64 / (PROBE_T_SAMPLES - 1) as f64)
        .collect();
    let sup: Vec<f64> = times
        .par_iter()
        .map(|&t| {
            symbols
                .iter()
                .map(|m| matrix2::operator_norm(&matrix2::expm(&(m * C64::new(t, 0.0)))))
                .fold(0.0, f64::max)
        })
        .collect();
    let sigma = match band {
        Band::Stable => {
            let tail = PROBE_T_SAMPLES / 2;
            let (slope, _) = least_squares_line(&times[tail..], &sup[tail..].iter().map(|s| s.ln()).collect::<Vec<_>>());
            let sigma = -slope;
            if !(sigma > 0.0) {
                return Err(Error::ProbeInconsistent { sigma });
            }
            sigma
        }
        Band::Critical => -lambda_max,
    };
    let c = times
        .iter()
        .zip(&sup)
        .map(|(t, s)| s * (sigma * t).exp())
        .fold(0.0, f64::max);
    Ok(ProbeResult {
        band,
        c,
        sigma,
        lambda_max,
    })
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn least_squares_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
