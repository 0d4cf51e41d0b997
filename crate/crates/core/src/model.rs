//! The Gray-Scott-Klausmeier system and the generic model contract.
//!
//! In deviation variables `V = U - U*` a model is written as
//! `∂t V = Λ V + B2(V, V) + B3(V, V, V) + O(|V|⁴)`. Models supply the Fourier
//! symbol of `Λ`, the symmetric multilinear forms in symbol form (used to
//! derive amplitude-equation coefficients) and in field form (used by the
//! time steppers).
//!
//! For GSK,
//!
//! ```text
//! ∂t v = d v_xx - b v + w v²
//! ∂t w = (w²)_xx + c w_x + a(1 - w) - w v²
//! ```

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix2::{Mat2, Vec2};
use crate::spectral::{self, SpectralField};

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let p = Self { a, b, c, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c, self.d].iter().all(|x| x.is_finite());
        if !finite || self.d <= 0.0 || self.a < 0.0 || self.b < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need d > 0, a >= 0, b >= 0 (got a={}, b={}, c={}, d={})",
                self.a, self.b, self.c, self.d
            )));
        }
        Ok(())
    }

    pub fn with_a(&self, a: f64) -> Self {
        Self { a, ..*self }
    }

    /// Saddle-node threshold `4b²` below which only the desert state exists.
    pub fn saddle_node(&self) -> f64 {
        4.0 * self.b * self.b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Desert,
    Minus,
    Plus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub v_star: f64,
    pub w_star: f64,
    pub branch: Branch,
}

/// All homogeneous equilibria: the desert state, plus both vegetated
/// branches when `a >= 4b²`.
pub fn gsk_fixed_points(params: &ModelParams) -> Vec<FixedPoint> {
    let mut out = vec![FixedPoint {
        v_star: 0.0,
        w_star: 1.0,
        branch: Branch::Desert,
    }];
    if params.a > 0.0 && params.a >= params.saddle_node() * (1.0 - 1e-12) {
        let root = (0.25 - params.b * params.b / params.a).max(0.0).sqrt();
        for (branch, w) in [(Branch::Minus, 0.5 - root), (Branch::Plus, 0.5 + root)] {
            out.push(FixedPoint {
                v_star: params.b / w,
                w_star: w,
                branch,
            });
        }
    }
    out
}

pub fn gsk_fixed_point(params: &ModelParams, branch: Branch) -> Result<FixedPoint> {
    gsk_fixed_points(params)
        .into_iter()
        .find(|fp| fp.branch == branch)
        .ok_or(Error::NoBranch {
            a: params.a,
            threshold: params.saddle_node(),
        })
}

pub fn gsk_linear_symbol(k: f64, params: &ModelParams, fp: &FixedPoint) -> Mat2 {
    let (v, w) = (fp.v_star, fp.w_star);
    let k2 = k * k;
    Mat2::new(
        C64::new(-params.d * k2 - params.b + 2.0 * w * v, 0.0),
        C64::new(v * v, 0.0),
        C64::new(-2.0 * w * v, 0.0),
        C64::new(-2.0 * w * k2 - params.a - v * v, params.c * k),
    )
}

pub fn gsk_b2_symbol(k_out: f64, z: &Vec2, e: &Vec2, fp: &FixedPoint) -> Vec2 {
    let s = z[0] * e[0] * fp.w_star + (z[0] * e[1] + z[1] * e[0]) * fp.v_star;
    Vec2::new(s, -z[1] * e[1] * (k_out * k_out) - s)
}

pub fn gsk_b3_symbol(z: &Vec2, e: &Vec2, x: &Vec2) -> Vec2 {
    let s = (z[1] * e[0] * x[0] + e[1] * z[0] * x[0] + x[1] * z[0] * e[0]) / 3.0;
    Vec2::new(s, -s)
}

/// An m-component model in deviation form around a reference state.
pub trait Model<const M: usize>: Sync {
    fn fixed_point(&self) -> SVector<f64, M>;

    fn linear_symbol(&self, k: f64) -> SMatrix<C64, M, M>;

    fn b2_symbol(
        &self,
        k_out: f64,
        z: &SVector<C64, M>,
        e: &SVector<C64, M>,
    ) -> SVector<C64, M>;

    fn b3_symbol(
        &self,
        z: &SVector<C64, M>,
        e: &SVector<C64, M>,
        x: &SVector<C64, M>,
    ) -> SVector<C64, M>;

    fn b2_field(&self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField>;

    fn b3_field(&self, u: &SpectralField, v: &SpectralField, w: &SpectralField)
        -> Result<SpectralField>;

    /// Quartic and higher Taylor remainder in field form.
    fn remainder_field(&self, _u: &SpectralField) -> Option<SpectralField> {
        None
    }

    /// `B2(u,u) + B3(u,u,u) + remainder`, the nonlinearity seen by the steppers.
    fn nonlinear(&self, u: &SpectralField) -> Result<SpectralField> {
        let mut out = self.b2_field(u, u)?.add(&self.b3_field(u, u, u)?)?;
        if let Some(rem) = self.remainder_field(u) {
            out = out.add(&rem)?;
        }
        Ok(out)
    }

    /// Effective diffusivity carried by the explicitly integrated part of the
    /// nonlinearity, used for the step-size ceiling. Zero for semilinear models.
    fn explicit_diffusivity(&self, _u: &SpectralField) -> f64 {
        0.0
    }
}

/// GSK in deviation variables `(v, w) - (v*, w*)`.
#[derive(Clone, Copy, Debug)]
pub struct Gsk {
    pub params: ModelParams,
    pub fp: FixedPoint,
}

impl Gsk {
    pub fn new(params: ModelParams, branch: Branch) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            fp: gsk_fixed_point(&params, branch)?,
        })
    }

    pub fn minus(params: ModelParams) -> Result<Self> {
        Self::new(params, Branch::Minus)
    }

    /// Full right-hand side evaluated pointwise on absolute physical fields.
    pub fn full_rhs(&self, v: &[f64], w: &[f64], grid: &spectral::Grid1D) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let ks = grid.wavenumbers();
        let spec = |xs: &[f64], f: &dyn Fn(C64, f64) -> C64| -> Vec<f64> {
            let mut c = spectral::forward_real(xs);
            for (z, &k) in c.iter_mut().zip(&ks) {
                *z = f(*z, k);
            }
            spectral::inverse(&c).into_iter().map(|z| z.re).collect()
        };
        let vxx = spec(v, &|z, k| -z * k * k);
        let w2: Vec<f64> = w.iter().map(|x| x * x).collect();
        let w2xx = spec(&w2, &|z, k| -z * k * k);
        let wx = spec(w, &|z, k| z * C64::new(0.0, k));
        let dv = (0..v.len())
            .map(|i| p.d * vxx[i] - p.b * v[i] + w[i] * v[i] * v[i])
            .collect();
        let dw = (0..v.len())
            .map(|i| w2xx[i] + p.c * wx[i] + p.a * (1.0 - w[i]) - w[i] * v[i] * v[i])
            .collect();
        (dv, dw)
    }

    fn physical_pair(&self, u: &SpectralField, mask: fn(&mut [C64])) -> (Vec<f64>, Vec<f64>) {
        // v + i w transforms back to the two real fields in one pass
        let (cv, cw) = (u.component(0), u.component(1));
        let mut z: Vec<C64> = cv
            .iter()
            .zip(cw)
            .map(|(a, b)| a + C64::new(0.0, 1.0) * b)
            .collect();
        mask(&mut z);
        spectral::inverse_in_place(&mut z);
        (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
    }

    fn masked_physical(c: &[C64], mask: fn(&mut [C64])) -> Vec<f64> {
        let mut z = c.to_vec();
        mask(&mut z);
        spectral::inverse_in_place(&mut z);
        z.into_iter().map(|c| c.re).collect()
    }

    fn check_two_components(u: &SpectralField) -> Result<()> {
        if u.m() != 2 {
            return Err(Error::GridMismatch(format!(
                "GSK fields have 2 components, got {}",
                u.m()
            )));
        }
        Ok(())
    }

    fn assemble_quadratic(&self, u: &SpectralField, q: &[f64], ww: &[f64]) -> SpectralField {
        let grid = *u.grid();
        let (mut fq, mut fw) = spectral::forward_real_pair(q, ww);
        spectral::dealias_quadratic(&mut fq);
        spectral::dealias_quadratic(&mut fw);
        let second = fw
            .iter()
            .zip(&fq)
            .enumerate()
            .map(|(i, (w2, s))| {
                let k = grid.wavenumber(i);
                -w2 * (k * k) - s
            })
            .collect();
        SpectralField::from_coefficients(grid, vec![fq, second]).expect("grid sizes agree")
    }
}

impl Model<2> for Gsk {
    fn fixed_point(&self) -> SVector<f64, 2> {
        SVector::<f64, 2>::new(self.fp.v_star, self.fp.w_star)
    }

    fn linear_symbol(&self, k: f64) -> Mat2 {
        gsk_linear_symbol(k, &self.params, &self.fp)
    }

    fn b2_symbol(&self, k_out: f64, z: &Vec2, e: &Vec2) -> Vec2 {
        gsk_b2_symbol(k_out, z, e, &self.fp)
    }

    fn b3_symbol(&self, z: &Vec2, e: &Vec2, x: &Vec2) -> Vec2 {
        gsk_b3_symbol(z, e, x)
    }

    fn b2_field(&self, u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
        u.check_same_grid(v)?;
        Self::check_two_components(u)?;
        let (uv, uw) = self.physical_pair(u, spectral::dealias_quadratic);
        let (vv, vw) = self.physical_pair(v, spectral::dealias_quadratic);
        let (ws, vs) = (self.fp.w_star, self.fp.v_star);
        let n = uv.len();
        let q: Vec<f64> = (0..n)
            .map(|i| ws * uv[i] * vv[i] + vs * (uv[i] * vw[i] + uw[i] * vv[i]))
            .collect();
        let ww: Vec<f64> = (0..n).map(|i| uw[i] * vw[i]).collect();
        Ok(self.assemble_quadratic(u, &q, &ww))
    }

    fn b3_field(
        &self,
        u: &SpectralField,
        v: &SpectralField,
        w: &SpectralField,
    ) -> Result<SpectralField> {
        u.check_same_grid(v)?;
        u.check_same_grid(w)?;
        Self::check_two_components(u)?;
        let (uv, uw) = self.physical_pair(u, spectral::dealias_cubic);
        let (vv, vw) = self.physical_pair(v, spectral::dealias_cubic);
        let (wv, ww) = self.physical_pair(w, spectral::dealias_cubic);
        let s: Vec<f64> = (0..uv.len())
            .map(|i| (uw[i] * vv[i] * wv[i] + vw[i] * uv[i] * wv[i] + ww[i] * uv[i] * vv[i]) / 3.0)
            .collect();
        let mut fs = spectral::forward_real(&s);
        spectral::dealias_cubic(&mut fs);
        let neg = fs.iter().map(|z| -z).collect();
        SpectralField::from_coefficients(*u.grid(), vec![fs, neg])
    }

    fn nonlinear(&self, u: &SpectralField) -> Result<SpectralField> {
        Self::check_two_components(u)?;
        let (v, w) = self.physical_pair(u, spectral::dealias_quadratic);
        let (ws, vs) = (self.fp.w_star, self.fp.v_star);
        let q: Vec<f64> = v
            .iter()
            .zip(&w)
            .map(|(v, w)| ws * v * v + 2.0 * vs * v * w)
            .collect();
        let ww: Vec<f64> = w.iter().map(|w| w * w).collect();
        let mut out = self.assemble_quadratic(u, &q, &ww);

        let (v, w) = self.physical_pair(u, spectral::dealias_cubic);
        let s: Vec<f64> = v.iter().zip(&w).map(|(v, w)| w * v * v).collect();
        let mut fs = spectral::forward_real(&s);
        spectral::dealias_cubic(&mut fs);
        for (i, z) in fs.iter().enumerate() {
            out.component_mut(0)[i] += z;
            out.component_mut(1)[i] -= z;
        }
        Ok(out)
    }

    fn explicit_diffusivity(&self, u: &SpectralField) -> f64 {
        // (w² )_xx = 2 w* w̃_xx + (w̃²)_xx; the second part is explicit
        let w = Self::masked_physical(u.component(1), spectral::dealias_quadratic);
        2.0 * w.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

/// Wraps a model and switches its nonlinearity off.
pub struct LinearOnly<'a, T>(pub &'a T);

impl<const M: usize, T: Model<M>> Model<M> for LinearOnly<'_, T> {
    fn fixed_point(&self) -> SVector<f64, M> {
        self.0.fixed_point()
    }

    fn linear_symbol(&self, k: f64) -> SMatrix<C64, M, M> {
        self.0.linear_symbol(k)
    }

    fn b2_symbol(&self, _k: f64, _z: &SVector<C64, M>, _e: &SVector<C64, M>) -> SVector<C64, M> {
        SVector::zeros()
    }

    fn b3_symbol(
        &self,
        _z: &SVector<C64, M>,
        _e: &SVector<C64, M>,
        _x: &SVector<C64, M>,
    ) -> SVector<C64, M> {
        SVector::zeros()
    }

    fn b2_field(&self, u: &SpectralField, _v: &SpectralField) -> Result<SpectralField> {
        Ok(SpectralField::zeros(*u.grid(), u.m()))
    }

    fn b3_field(
        &self,
        u: &SpectralField,
        _v: &SpectralField,
        _w: &SpectralField,
    ) -> Result<SpectralField> {
        Ok(SpectralField::zeros(*u.grid(), u.m()))
    }

    fn nonlinear(&self, u: &SpectralField) -> Result<SpectralField> {
        Ok(SpectralField::zeros(*u.grid(), u.m()))
    }
}
