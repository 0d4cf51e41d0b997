//! Periodic Fourier grids, transforms, dealiasing, weighted sup-norms and
//! sharp mode filters.
//!
//! Coefficients are stored in amplitude normalization,
//! `u(x) = Σ_j û_j e^{i k_j x}` with `û_j = (1/n) Σ_x u(x) e^{-i k_j x}`.
//! The continuum transform used by the `X^r` norms is `û_j / Δk`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid1D {
    n: usize,
    length: f64,
}

impl Grid1D {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid length must be positive, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Signed mode index of storage slot `i`, in `-n/2+1 ..= n/2`.
    pub fn mode_index(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Storage slot of signed mode index `j` (periodic).
    pub fn slot(&self, j: i64) -> usize {
        j.rem_euclid(self.n as i64) as usize
    }

    pub fn wavenumber(&self, i: usize) -> f64 {
        self.dk() * self.mode_index(i) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.wavenumber(i)).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| i as f64 * self.dx()).collect()
    }

    /// Largest index kept by the 2/3 rule for quadratic products.
    pub fn quadratic_cutoff(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }

    /// Largest index kept by the 1/2 rule for cubic products.
    pub fn cubic_cutoff(&self) -> i64 {
        self.n as i64 / 4 - 1
    }

    fn same_as(&self, other: &Grid1D) -> bool {
        self.n == other.n && (self.length - other.length).abs() <= 1e-12 * self.length
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap_or_else(|e| e.into_inner());
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// In-place forward transform to amplitude-normalized coefficients.
pub fn forward_in_place(buf: &mut [C64]) {
    let n = buf.len();
    plan(n, false).process(buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
}

/// In-place inverse transform from amplitude-normalized coefficients.
pub fn inverse_in_place(buf: &mut [C64]) {
    plan(buf.len(), true).process(buf);
}

/// Transform of a real signal, made exactly Hermitian so rounding cannot seed
/// an imaginary part in physical space.
pub fn forward_real(values: &[f64]) -> Vec<C64> {
    let mut buf: Vec<C64> = values.iter().map(|&v| C64::new(v, 0.0)).collect();
    forward_in_place(&mut buf);
    let n = buf.len();
    for i in 0..=n / 2 {
        let j = (n - i) % n;
        let z = (buf[i] + buf[j].conj()) * 0.5;
        buf[i] = z;
        buf[j] = z.conj();
    }
    buf
}

pub fn forward(values: &[C64]) -> Vec<C64> {
    let mut buf = values.to_vec();
    forward_in_place(&mut buf);
    buf
}

pub fn inverse(coeffs: &[C64]) -> Vec<C64> {
    let mut buf = coeffs.to_vec();
    inverse_in_place(&mut buf);
    buf
}

/// Transforms two real signals with one complex FFT.
pub fn forward_real_pair(a: &[f64], b: &[f64]) -> (Vec<C64>, Vec<C64>) {
    let n = a.len();
    let mut z: Vec<C64> = a.iter().zip(b).map(|(&x, &y)| C64::new(x, y)).collect();
    forward_in_place(&mut z);
    let mut fa = vec![C64::new(0.0, 0.0); n];
    let mut fb = vec![C64::new(0.0, 0.0); n];
    for i in 0..n {
        let zi = z[i];
        let zm = z[(n - i) % n].conj();
        fa[i] = (zi + zm) * 0.5;
        fb[i] = (zi - zm) * C64::new(0.0, -0.5);
    }
    (fa, fb)
}

/// Zeroes every slot whose signed index exceeds `cutoff` in magnitude.
pub fn truncate(coeffs: &mut [C64], cutoff: i64) {
    let n = coeffs.len() as i64;
    for (i, c) in coeffs.iter_mut().enumerate() {
        let j = if i as i64 <= n / 2 { i as i64 } else { i as i64 - n };
        if j.abs() > cutoff {
            *c = C64::new(0.0, 0.0);
        }
    }
}

pub fn dealias_quadratic(coeffs: &mut [C64]) {
    truncate(coeffs, (coeffs.len() as i64 - 1) / 3);
}

pub fn dealias_cubic(coeffs: &mut [C64]) {
    truncate(coeffs, coeffs.len() as i64 / 4 - 1);
}

/// An m-component field of Fourier coefficients on a periodic grid.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Grid1D,
    comps: Vec<Vec<C64>>,
}

impl SpectralField {
    pub fn zeros(grid: Grid1D, m: usize) -> Self {
        Self {
            grid,
            comps: vec![vec![C64::new(0.0, 0.0); grid.n()]; m],
        }
    }

    pub fn from_coefficients(grid: Grid1D, comps: Vec<Vec<C64>>) -> Result<Self> {
        if comps.is_empty() || comps.iter().any(|c| c.len() != grid.n()) {
            return Err(Error::GridMismatch(format!(
                "expected components of length {}",
                grid.n()
            )));
        }
        Ok(Self { grid, comps })
    }

    pub fn from_physical(grid: Grid1D, values: &[Vec<f64>]) -> Result<Self> {
        if values.iter().any(|v| v.len() != grid.n()) {
            return Err(Error::GridMismatch(format!(
                "expected physical arrays of length {}",
                grid.n()
            )));
        }
        let comps = values.iter().map(|v| forward_real(v)).collect();
        Self::from_coefficients(grid, comps)
    }

    pub fn from_physical_complex(grid: Grid1D, values: &[Vec<C64>]) -> Result<Self> {
        if values.iter().any(|v| v.len() != grid.n()) {
            return Err(Error::GridMismatch(format!(
                "expected physical arrays of length {}",
                grid.n()
            )));
        }
        let comps = values.iter().map(|v| forward(v)).collect();
        Self::from_coefficients(grid, comps)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn m(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, c: usize) -> &[C64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [C64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<Vec<C64>> {
        self.comps
    }

    /// Coefficient of component `c` at signed mode index `j`.
    pub fn mode(&self, c: usize, j: i64) -> C64 {
        self.comps[c][self.grid.slot(j)]
    }

    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        self.comps
            .iter()
            .map(|c| inverse(c).into_iter().map(|z| z.re).collect())
            .collect()
    }

    pub fn to_physical_complex(&self) -> Vec<Vec<C64>> {
        self.comps.iter().map(|c| inverse(c)).collect()
    }

    pub fn check_same_grid(&self, other: &SpectralField) -> Result<()> {
        if !self.grid.same_as(&other.grid) || self.m() != other.m() {
            return Err(Error::GridMismatch(format!(
                "(n={}, l={}, m={}) vs (n={}, l={}, m={})",
                self.grid.n,
                self.grid.length,
                self.m(),
                other.grid.n,
                other.grid.length,
                other.m()
            )));
        }
        Ok(())
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: C64, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_grid(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + s * y).collect())
            .collect();
        Ok(Self {
            grid: self.grid,
            comps,
        })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.axpy(C64::new(1.0, 0.0), other)
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|z| z * s).collect())
            .collect();
        Self {
            grid: self.grid,
            comps,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest sum of coefficient magnitudes over components; bounds the sup-norm.
    pub fn l1_norm(&self) -> f64 {
        self.comps
            .iter()
            .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Physical-space maximum over grid points and components.
    pub fn sup_norm(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| inverse(c))
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|û(k) - conj(û(-k))|`, relative to the largest coefficient.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let n = self.grid.n;
        let mut worst: f64 = 0.0;
        for c in &self.comps {
            for i in 0..n {
                worst = worst.max((c[i] - c[(n - i) % n].conj()).norm());
            }
        }
        worst / scale
    }
}

/// Weighted sup-norm `max_k |û(k)/Δk| (1+k²)^{r/2}` over grid modes and components.
pub fn xr_norm(field: &SpectralField, r: f64) -> f64 {
    let grid = field.grid();
    let dk = grid.dk();
    let weights: Vec<f64> = grid
        .wavenumbers()
        .iter()
        .map(|k| (1.0 + k * k).powf(r / 2.0) / dk)
        .collect();
    field
        .components()
        .iter()
        .flat_map(|c| c.iter().zip(&weights).map(|(z, w)| z.norm() * w))
        .fold(0.0, f64::max)
}

/// Exact circular convolution of coefficient arrays by direct summation.
pub fn convolve_direct(u: &[C64], v: &[C64]) -> Result<Vec<C64>> {
    if u.len() != v.len() {
        return Err(Error::GridMismatch(format!(
            "lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let n = u.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (i, ui) in u.iter().enumerate() {
        if *ui == C64::new(0.0, 0.0) {
            continue;
        }
        for (l, vl) in v.iter().enumerate() {
            out[(i + l) % n] += ui * vl;
        }
    }
    Ok(out)
}

/// Non-periodic convolution over signed indices; the result is indexed by
/// `j + (n - 2)` for `j` in `-(n-2) ..= n`.
fn convolve_linear(grid: &Grid1D, u: &[C64], v: &[C64]) -> Vec<(i64, C64)> {
    let n = grid.n();
    let lo = -(n as i64 / 2 - 1);
    let mut out = vec![C64::new(0.0, 0.0); 2 * n - 1];
    for i in 0..n {
        let ji = grid.mode_index(i);
        if u[i] == C64::new(0.0, 0.0) {
            continue;
        }
        for l in 0..n {
            let jl = grid.mode_index(l);
            out[(ji + jl - 2 * lo) as usize] += u[i] * v[l];
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(idx, z)| (idx as i64 + 2 * lo, z))
        .collect()
}

/// Returns `(‖uv‖_{X^r}, C_r ‖u‖_{X^r} ‖v‖_{X^r})` for the discrete algebra bound.
///
/// The product is formed by exact (non-periodic) convolution so that no
/// aliasing enters the left-hand side.
pub fn algebra_constant_check(u: &SpectralField, v: &SpectralField, r: f64) -> Result<(f64, f64)> {
    if r <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "algebra bound needs r > 1, got {r}"
        )));
    }
    u.check_same_grid(v)?;
    let grid = *u.grid();
    let dk = grid.dk();
    let mut lhs: f64 = 0.0;
    for (cu, cv) in u.components().iter().zip(v.components()) {
        for (j, z) in convolve_linear(&grid, cu, cv) {
            let k = j as f64 * dk;
            lhs = lhs.max(z.norm() / dk * (1.0 + k * k).powf(r / 2.0));
        }
    }
    let sum: f64 = grid
        .wavenumbers()
        .iter()
        .map(|k| (1.0 + k * k).powf(-r / 2.0) * dk)
        .sum();
    let c_r = 2f64.powf(r / 2.0 + 1.0) * sum;
    Ok((lhs, c_r * xr_norm(u, r) * xr_norm(v, r)))
}

/// Sharp band-pass filter around `center_index · k_c`.
#[derive(Clone, Copy, Debug)]
pub struct ModeFilterSpec {
    pub center_index: i32,
    pub k_c: f64,
    pub width: f64,
}

impl ModeFilterSpec {
    pub fn new(center_index: i32, k_c: f64, width: f64) -> Result<Self> {
        if center_index.abs() > 3 {
            return Err(Error::InvalidParameter(format!(
                "filter center index {center_index} outside -3..=3"
            )));
        }
        if !(k_c > 0.0 && width > 0.0 && width < k_c / 2.0) {
            return Err(Error::InvalidParameter(format!(
                "filter width {width} must lie in (0, k_c/2) with k_c = {k_c}"
            )));
        }
        Ok(Self {
            center_index,
            k_c,
            width,
        })
    }

    pub fn with_default_width(center_index: i32, k_c: f64) -> Result<Self> {
        Self::new(center_index, k_c, k_c / 10.0)
    }

    pub fn passes(&self, k: f64) -> bool {
        (k - self.center_index as f64 * self.k_c).abs() <= self.width
    }
}

fn filter_by(field: &SpectralField, keep: impl Fn(f64) -> bool) -> SpectralField {
    let grid = *field.grid();
    let ks = grid.wavenumbers();
    let comps = field
        .components()
        .iter()
        .map(|c| {
            c.iter()
                .zip(&ks)
                .map(|(z, &k)| if keep(k) { *z } else { C64::new(0.0, 0.0) })
                .collect()
        })
        .collect();
    SpectralField { grid, comps }
}

pub fn mode_filter(field: &SpectralField, spec: &ModeFilterSpec) -> SpectralField {
    filter_by(field, |k| spec.passes(k))
}

/// Splits a field into its critical part (bands around `±k_c`) and the rest.
pub fn ec_es_split(field: &SpectralField, k_c: f64, width: f64) -> Result<(SpectralField, SpectralField)> {
    let plus = ModeFilterSpec::new(1, k_c, width)?;
    let minus = ModeFilterSpec::new(-1, k_c, width)?;
    let critical = |k: f64| plus.passes(k) || minus.passes(k);
    Ok((filter_by(field, critical), filter_by(field, |k| !critical(k))))
}
