//! The Ginzburg-Landau ansatz on the fast grid, its residual and the
//! decomposition of the approximation error.
//!
//! ```text
//! εψ = ε [A(εx) e^{i k_c x} f1 + c.c.] + ε² [ν0 |A|² + (ν2 A² e^{2i k_c x} + c.c.)]
//! ```
//!
//! `f1 = f1(k_c)` is attached to every sideband mode. The fast domain holds
//! an integer number of carrier wavelengths and the slow domain is the fast
//! one scaled by ε, so slow mode `j` sits at fast mode `M + j` after the
//! carrier shift.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::bifurcation::GLCoefficients;
use crate::error::{Error, Result};
use crate::matrix2::Vec2;
use crate::model::Model;
use crate::spectral::{self, xr_norm, Grid1D, SpectralField};

type C64 = Complex64;

/// Fast grid of `carriers` wavelengths of `2π/k_c`.
pub fn fast_grid(k_c: f64, carriers: usize, n: usize) -> Result<Grid1D> {
    Grid1D::new(n, 2.0 * PI * carriers as f64 / k_c)
}

/// Slow grid of length `ε ℓ`.
pub fn slow_grid(eps: f64, fast: &Grid1D, n_slow: usize) -> Result<Grid1D> {
    Grid1D::new(n_slow, eps * fast.length())
}

#[derive(Clone, Debug)]
pub struct AnsatzBundle {
    pub eps: f64,
    /// Complex amplitude on the slow grid (one component).
    pub amplitude: SpectralField,
    pub coeffs: GLCoefficients,
    pub fast_grid: Grid1D,
    carrier_index: usize,
}

impl AnsatzBundle {
    pub fn new(eps: f64, amplitude: SpectralField, coeffs: GLCoefficients, fast_grid: Grid1D) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {eps} outside (0, 1)")));
        }
        if amplitude.m() != 1 {
            return Err(Error::GridMismatch("amplitude must have one component".into()));
        }
        let slow_len = amplitude.grid().length();
        let want = eps * fast_grid.length();
        if (slow_len - want).abs() > 1e-12 * want {
            return Err(Error::GridMismatch(format!(
                "slow length {slow_len} is not eps times fast length {want}"
            )));
        }
        let m = (coeffs.k_c / fast_grid.dk()).round();
        if m < 1.0 || (m * fast_grid.dk() - coeffs.k_c).abs() > 1e-9 * coeffs.k_c {
            return Err(Error::GridMismatch(format!(
                "k_c = {} is not a fast-grid wavenumber",
                coeffs.k_c
            )));
        }
        let carrier_index = m as usize;
        let n_slow = amplitude.grid().n();
        if n_slow + 2 * carrier_index >= fast_grid.n() / 2 {
            return Err(Error::Unresolvable(format!(
                "slow bandwidth {} plus second harmonic {} exceeds fast Nyquist {}",
                n_slow,
                2 * carrier_index,
                fast_grid.n() / 2
            )));
        }
        Ok(Self {
            eps,
            amplitude,
            coeffs,
            fast_grid,
            carrier_index,
        })
    }

    pub fn with_amplitude(&self, amplitude: SpectralField) -> Result<Self> {
        Self::new(self.eps, amplitude, self.coeffs, self.fast_grid)
    }

    pub fn carrier_index(&self) -> usize {
        self.carrier_index
    }

    pub fn k_c(&self) -> f64 {
        self.carrier_index as f64 * self.fast_grid.dk()
    }

    fn upsample(&self, slow: &[C64]) -> Vec<C64> {
        let slow_grid = self.amplitude.grid();
        let mut fast = vec![C64::new(0.0, 0.0); self.fast_grid.n()];
        for (i, z) in slow.iter().enumerate() {
            fast[self.fast_grid.slot(slow_grid.mode_index(i))] = *z;
        }
        spectral::inverse_in_place(&mut fast);
        fast
    }

    fn carrier(&self, harmonic: usize) -> Vec<C64> {
        let n = self.fast_grid.n();
        (0..n)
            .map(|i| {
                let phase = (harmonic * self.carrier_index * i) % n;
                C64::from_polar(1.0, 2.0 * PI * phase as f64 / n as f64)
            })
            .collect()
    }

    /// `s1 [p1 e^{ik_c x} f1 + c.c.] + s2 [ν0 p0 + (ν2 p2 e^{2ik_c x} + c.c.)]`.
    fn assemble(&self, p1: &[C64], p0: &[f64], p2: &[C64], s1: f64, s2: f64) -> SpectralField {
        let e1 = self.carrier(1);
        let e2 = self.carrier(2);
        let (f1, nu0, nu2) = (self.coeffs.f1, self.coeffs.nu0, self.coeffs.nu2);
        let comps: Vec<Vec<f64>> = (0..2)
            .map(|c| {
                (0..p1.len())
                    .map(|i| {
                        let first = 2.0 * (p1[i] * e1[i] * f1[c]).re;
                        let second = nu0[c].re * p0[i] + 2.0 * (p2[i] * e2[i] * nu2[c]).re;
                        s1 * first + s2 * second
                    })
                    .collect()
            })
            .collect();
        SpectralField::from_physical(self.fast_grid, &comps).expect("fast grid arrays")
    }

    /// Amplitude and its GL time derivative, both on the fast grid.
    fn amplitude_and_rate(&self) -> (Vec<C64>, Vec<C64>) {
        let slow = self.amplitude.grid();
        let a = self.upsample(self.amplitude.component(0));
        let (a0, a2, a3) = (self.coeffs.alpha0, self.coeffs.alpha2, self.coeffs.alpha3);
        let lin: Vec<C64> = self
            .amplitude
            .component(0)
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k = slow.wavenumber(i);
                (a0 - a2 * (k * k)) * z
            })
            .collect();
        let mut rate = self.upsample(&lin);
        for (r, z) in rate.iter_mut().zip(&a) {
            *r += a3 * z.norm_sqr() * z;
        }
        (a, rate)
    }
}

/// `εψ` on the fast grid for the bundle's current amplitude.
pub fn build_ansatz(bundle: &AnsatzBundle) -> SpectralField {
    let a = bundle.upsample(bundle.amplitude.component(0));
    let p0: Vec<f64> = a.iter().map(|z| z.norm_sqr()).collect();
    let p2: Vec<C64> = a.iter().map(|z| z * z).collect();
    let eps = bundle.eps;
    bundle.assemble(&a, &p0, &p2, eps, eps * eps)
}

/// `∂t (εψ)` in fast time, through `∂t = ε² ∂T` and the GL right-hand side.
pub fn ansatz_time_derivative(bundle: &AnsatzBundle) -> SpectralField {
    let (a, rate) = bundle.amplitude_and_rate();
    let p0: Vec<f64> = a.iter().zip(&rate).map(|(z, r)| 2.0 * (z.conj() * r).re).collect();
    let p2: Vec<C64> = a.iter().zip(&rate).map(|(z, r)| z * r * 2.0).collect();
    let eps = bundle.eps;
    bundle.assemble(&rate, &p0, &p2, eps.powi(3), eps.powi(4))
}

/// `Res(εψ) = -∂t(εψ) + Λ(εψ) + B2 + B3` on the fast grid.
pub fn residual_field<Mo: Model<2>>(bundle: &AnsatzBundle, model: &Mo) -> Result<SpectralField> {
    let v = build_ansatz(bundle);
    let dt = ansatz_time_derivative(bundle);
    let mut out = model.nonlinear(&v)?.sub(&dt)?;
    let grid = bundle.fast_grid;
    for i in 0..grid.n() {
        let lin = model.linear_symbol(grid.wavenumber(i)) * Vec2::new(v.component(0)[i], v.component(1)[i]);
        out.component_mut(0)[i] += lin[0];
        out.component_mut(1)[i] += lin[1];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub t: f64,
    pub res_c_norm: f64,
    pub res_s_norm: f64,
    pub r: f64,
}

/// `X^r` norms of the critical and stable parts of the residual; `t` is
/// recorded as given (slow time of the bundle's amplitude).
pub fn residual<Mo: Model<2>>(bundle: &AnsatzBundle, model: &Mo, t: f64, r: f64) -> Result<ResidualReport> {
    let res = residual_field(bundle, model)?;
    let k_c = bundle.k_c();
    let (c, s) = spectral::ec_es_split(&res, k_c, k_c / 10.0)?;
    Ok(ResidualReport {
        eps: bundle.eps,
        t,
        res_c_norm: xr_norm(&c, r),
        res_s_norm: xr_norm(&s, r),
        r,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ErrorReport {
    pub rc_norm: f64,
    pub rs_norm: f64,
    /// Grid maximum of `|V - εψ|`.
    pub sup_error: f64,
    /// Coefficient `ℓ¹` bound on the same quantity.
    pub sup_error_l1: f64,
}

/// Splits `R = (V - εψ)/ε²` into `R_c = E_c R` and `R_s = E_s R / ε`.
pub fn error_decomposition(v: &SpectralField, bundle: &AnsatzBundle, r: f64) -> Result<ErrorReport> {
    let psi = build_ansatz(bundle);
    let diff = v.sub(&psi)?;
    let eps = bundle.eps;
    let big_r = diff.scaled(1.0 / (eps * eps));
    let k_c = bundle.k_c();
    let (c, s) = spectral::ec_es_split(&big_r, k_c, k_c / 10.0)?;
    Ok(ErrorReport {
        rc_norm: xr_norm(&c, r),
        rs_norm: xr_norm(&s, r) / eps,
        sup_error: diff.sup_norm(),
        sup_error_l1: diff.l1_norm(),
    })
}

/// Amplitude read off the carrier mode: `f1_adj · V̂(k_c) / ε`.
pub fn project_amplitude(v: &SpectralField, carrier_index: usize, f1_adj: &Vec2, eps: f64) -> Result<C64> {
    let j = carrier_index as i64;
    let mode = Vec2::new(v.mode(0, j), v.mode(1, j));
    if mode.norm() < 1e-10 {
        return Err(Error::DegenerateProjection(mode.norm()));
    }
    Ok((f1_adj[0] * mode[0] + f1_adj[1] * mode[1]) / eps)
}
