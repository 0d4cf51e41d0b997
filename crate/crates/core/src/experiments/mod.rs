//! Experiment orchestration behind the CLI.
//!
//! Every command returns a [`CommandOutput`] holding a CSV table, a few
//! human-readable summary lines and the outcome of any checks the command
//! makes. Sweeps run their ε values in parallel and emit rows sorted by ε.

pub mod config;
pub mod report;

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::approximation::{self, AnsatzBundle};
use crate::bifurcation::{self, find_critical, gl_coefficients, CriticalPoint, GLCoefficients};
use crate::dynamics::{self, Band, GlTable, IntegratorConfig, PropagatorTable, Scheme};
use crate::error::{Error, Result};
use crate::model::{gsk_fixed_points, Gsk, ModelParams};
use crate::spectral::{Grid1D, SpectralField};

pub use config::ExperimentConfig;
use config::{InitialData, Side, StepSpec};
pub use report::{fit_loglog, Metadata, SlopeFit, Table};

type C64 = Complex64;

/// Pinned acceptance bands.
pub const ERROR_SLOPE_BAND: (f64, f64) = (1.7, 2.3);
pub const RES_C_SLOPE_MIN: f64 = 2.7;
pub const RES_S_SLOPE_MIN: f64 = 1.7;
pub const SATURATION_REL_TOL: f64 = 0.15;
pub const STABLE_SIDE_REL_TOL: f64 = 0.10;
pub const CORRECTION_RESIDUAL_MAX: f64 = 1e-10;

/// Squared offset of the outer dispersion curves.
pub const DISPERSION_EPS2: f64 = 0.02;
const DISPERSION_SAMPLES: usize = 400;
const DISPERSION_K_MAX: f64 = 4.0;
/// Slow steps per unit horizon in the GL pre-run.
const PRERUN_STEPS: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    FixedPoints,
    Dispersion,
    Critical,
    GlCoeffs,
    Simulate,
    ValidateResidualScaling,
    ValidateErrorScaling,
    AmplitudeSaturation,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::FixedPoints => "fixed-points",
            Command::Dispersion => "dispersion",
            Command::Critical => "critical",
            Command::GlCoeffs => "gl-coeffs",
            Command::Simulate => "simulate",
            Command::ValidateResidualScaling => "validate-residual-scaling",
            Command::ValidateErrorScaling => "validate-error-scaling",
            Command::AmplitudeSaturation => "amplitude-saturation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub command: Command,
    pub table: Table,
    pub summary: Vec<String>,
    pub checks: Vec<Check>,
    /// Per-ε numerical aborts that did not stop the command.
    pub aborts: Vec<String>,
    pub wall_time: f64,
}

impl CommandOutput {
    /// 0 success, 3 numerical abort, 4 failed check.
    pub fn exit_code(&self) -> i32 {
        if !self.aborts.is_empty() {
            3
        } else if self.checks.iter().any(|c| !c.passed) {
            4
        } else {
            0
        }
    }

    pub fn metadata(&self, cfg: &ExperimentConfig) -> Metadata {
        Metadata {
            command: self.command.name().into(),
            config_hash: report::sha256_hex(&cfg.canonical()),
            wall_time: cfg.output.timings.then_some(self.wall_time),
        }
    }
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<CommandOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let (table, summary, checks, aborts) = match cmd {
        Command::FixedPoints => fixed_points(cfg)?,
        Command::Dispersion => dispersion(cfg)?,
        Command::Critical => critical(cfg)?,
        Command::GlCoeffs => gl_coeffs(cfg)?,
        Command::Simulate => simulate(cfg)?,
        Command::ValidateResidualScaling => residual_scaling(cfg)?,
        Command::ValidateErrorScaling => error_scaling(cfg)?,
        Command::AmplitudeSaturation => saturation(cfg)?,
    };
    Ok(CommandOutput {
        command: cmd,
        table,
        summary,
        checks,
        aborts,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

type Parts = (Table, Vec<String>, Vec<Check>, Vec<String>);

fn critical_point(cfg: &ExperimentConfig) -> Result<CriticalPoint> {
    find_critical(cfg.model.b, cfg.model.c, cfg.model.d)
}

/// Rainfall for single-run commands (relative forms use `simulate.eps`).
fn operating_params(cfg: &ExperimentConfig) -> Result<(ModelParams, Option<CriticalPoint>)> {
    let m = &cfg.model;
    let cp = if m.a.needs_critical() {
        Some(critical_point(cfg)?)
    } else {
        None
    };
    let a = m.a.resolve(cp.map_or(f64::NAN, |c| c.a_crit), cfg.simulate.eps);
    Ok((ModelParams::new(a, m.b, m.c, m.d)?, cp))
}

#[derive(Serialize)]
struct FixedPointRow {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    branch: crate::model::Branch,
    v_star: f64,
    w_star: f64,
}

fn fixed_points(cfg: &ExperimentConfig) -> Result<Parts> {
    let (p, _) = operating_params(cfg)?;
    let rows: Vec<FixedPointRow> = gsk_fixed_points(&p)
        .into_iter()
        .map(|fp| FixedPointRow {
            a: p.a,
            b: p.b,
            c: p.c,
            d: p.d,
            branch: fp.branch,
            v_star: fp.v_star,
            w_star: fp.w_star,
        })
        .collect();
    let summary = rows
        .iter()
        .map(|r| format!("{:?}: v* = {:.6}, w* = {:.6}", r.branch, r.v_star, r.w_star))
        .collect();
    Ok((Table::from_records(&rows)?, summary, vec![], vec![]))
}

#[derive(Serialize)]
struct DispersionRow {
    curve: &'static str,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    k: f64,
    re_lambda1: f64,
    im_lambda1: f64,
    re_lambda2: f64,
    im_lambda2: f64,
}

fn dispersion(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let base = cp.params();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (curve, a) in [
        ("below", cp.a_crit - DISPERSION_EPS2),
        ("critical", cp.a_crit),
        ("above", cp.a_crit + DISPERSION_EPS2),
    ] {
        let p = base.with_a(a);
        let gsk = Gsk::minus(p)?;
        for i in 0..DISPERSION_SAMPLES {
            let k = -DISPERSION_K_MAX + 2.0 * DISPERSION_K_MAX * i as f64 / (DISPERSION_SAMPLES - 1) as f64;
            let e = bifurcation::dispersion(&gsk, k)?;
            rows.push(DispersionRow {
                curve,
                a,
                b: p.b,
                c: p.c,
                d: p.d,
                k,
                re_lambda1: e.lambda1.re,
                im_lambda1: e.lambda1.im,
                re_lambda2: e.lambda2.re,
                im_lambda2: e.lambda2.im,
            });
        }
        let (k_max, g) = bifurcation::growth_max_over_k(&p)?;
        summary.push(format!("{curve}: a = {a:.6}, max Re lambda1 = {g:.3e} at k = {k_max:.6}"));
    }
    Ok((Table::from_records(&rows)?, summary, vec![], vec![]))
}

#[derive(Serialize)]
struct CriticalRow {
    b: f64,
    c: f64,
    d: f64,
    a_crit: f64,
    k_c: f64,
    lambda_max: f64,
    curvature: f64,
    stable_sigma: f64,
    stable_c: f64,
    critical_lambda_max: f64,
    critical_c: f64,
}

fn critical(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let gsk = Gsk::minus(cp.params())?;
    let k_max = cfg.probe.k_max.max(2.0 * cp.k_c);
    let stable = dynamics::semigroup_decay_probe(&gsk, cp.k_c, k_max, Band::Stable, cfg.probe.t_max)?;
    let crit = dynamics::semigroup_decay_probe(&gsk, cp.k_c, k_max, Band::Critical, cfg.probe.t_max)?;
    let row = CriticalRow {
        b: cp.b,
        c: cp.c,
        d: cp.d,
        a_crit: cp.a_crit,
        k_c: cp.k_c,
        lambda_max: cp.lambda_max,
        curvature: cp.curvature,
        stable_sigma: stable.sigma,
        stable_c: stable.c,
        critical_lambda_max: crit.lambda_max,
        critical_c: crit.c,
    };
    let summary = vec![
        format!("a_crit = {:.6}, k_c = {:.6}, max Re lambda1 = {:.3e}", cp.a_crit, cp.k_c, cp.lambda_max),
        format!("stable band: sigma = {:.4e}, C = {:.4}", stable.sigma, stable.c),
        format!("critical band: max Re lambda1 = {:.3e}, C = {:.4}", crit.lambda_max, crit.c),
    ];
    Ok((Table::from_records(&[row])?, summary, vec![], vec![]))
}

#[derive(Serialize)]
struct CoeffRow {
    a_crit: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    k_c: f64,
    alpha0_re: f64,
    alpha0_im: f64,
    alpha2_re: f64,
    alpha2_im: f64,
    alpha3_re: f64,
    alpha3_im: f64,
    f1_v_re: f64,
    f1_v_im: f64,
    f1_w_re: f64,
    f1_w_im: f64,
    nu0_v: f64,
    nu0_w: f64,
    nu2_v_re: f64,
    nu2_v_im: f64,
    nu2_w_re: f64,
    nu2_w_im: f64,
    nu0_residual: f64,
    nu2_residual: f64,
}

fn gl_coeffs(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let a = cfg.model.a.resolve(cp.a_crit, cfg.simulate.eps);
    let p = cp.params().with_a(a);
    let g = gl_coefficients(&cp, &p)?;
    let row = CoeffRow {
        a_crit: g.a_crit,
        a: g.a,
        b: p.b,
        c: p.c,
        d: p.d,
        k_c: g.k_c,
        alpha0_re: g.alpha0.re,
        alpha0_im: g.alpha0.im,
        alpha2_re: g.alpha2.re,
        alpha2_im: g.alpha2.im,
        alpha3_re: g.alpha3.re,
        alpha3_im: g.alpha3.im,
        f1_v_re: g.f1[0].re,
        f1_v_im: g.f1[0].im,
        f1_w_re: g.f1[1].re,
        f1_w_im: g.f1[1].im,
        nu0_v: g.nu0[0].re,
        nu0_w: g.nu0[1].re,
        nu2_v_re: g.nu2[0].re,
        nu2_v_im: g.nu2[0].im,
        nu2_w_re: g.nu2[1].re,
        nu2_w_im: g.nu2[1].im,
        nu0_residual: g.nu0_residual,
        nu2_residual: g.nu2_residual,
    };
    let worst = g.nu0_residual.max(g.nu2_residual);
    let summary = vec![
        format!(
            "alpha0 = {:.6}, alpha2 = {:.6}, alpha3 = {:.6} ({:+.1e} i)",
            g.alpha0.re, g.alpha2.re, g.alpha3.re, g.alpha3.im
        ),
        format!("nu0 residual = {:.2e}, nu2 residual = {:.2e}", g.nu0_residual, g.nu2_residual),
        format!(
            "cubic coefficient is {}",
            if g.alpha3.re > 0.0 { "positive (subcritical)" } else { "negative (supercritical)" }
        ),
    ];
    let checks = vec![Check::new(
        "correction-residuals",
        worst <= CORRECTION_RESIDUAL_MAX,
        format!("max residual {worst:.2e} <= {CORRECTION_RESIDUAL_MAX:e}"),
    )];
    Ok((Table::from_records(&[row])?, summary, checks, vec![]))
}

/// Everything needed to run one ε.
pub struct EpsSetup {
    pub eps: f64,
    pub params: ModelParams,
    pub model: Gsk,
    pub coeffs: GLCoefficients,
    pub bundle: AnsatzBundle,
}

/// `A₀ (1 + 0.1 cos(2πX/L))` on the slow grid.
pub fn modulated_amplitude(slow: Grid1D, a0: f64) -> SpectralField {
    let vals: Vec<C64> = slow
        .points()
        .iter()
        .map(|x| C64::new(a0 * (1.0 + 0.1 * (2.0 * PI * x / slow.length()).cos()), 0.0))
        .collect();
    SpectralField::from_physical_complex(slow, &[vals]).expect("slow grid")
}

pub fn setup_eps(
    cp: &CriticalPoint,
    a: f64,
    eps: f64,
    grid: &config::GridSection,
    amplitude: impl FnOnce(Grid1D) -> SpectralField,
) -> Result<EpsSetup> {
    let params = cp.params().with_a(a);
    let model = Gsk::minus(params)?;
    let coeffs = gl_coefficients(cp, &params)?;
    let fast = approximation::fast_grid(cp.k_c, grid.carriers, grid.n)?;
    let slow = approximation::slow_grid(eps, &fast, grid.n_slow)?;
    let bundle = AnsatzBundle::new(eps, amplitude(slow), coeffs, fast)?;
    Ok(EpsSetup {
        eps,
        params,
        model,
        coeffs,
        bundle,
    })
}

/// GL solution on `[0, t0]` with `sup|A| <= c_gl`, halving `A₀` on failure.
/// Returns the accepted initial amplitude, the number of halvings and the
/// states at `record` evenly spaced times (including 0 and `t0`).
pub fn gl_prerun(
    setup: &EpsSetup,
    a0: f64,
    t0: f64,
    c_gl: f64,
    max_retries: usize,
    record: usize,
) -> Result<(f64, usize, Vec<SpectralField>)> {
    let slow = *setup.bundle.amplitude.grid();
    let steps = PRERUN_STEPS.div_ceil(record) * record;
    let cfg = IntegratorConfig {
        scheme: Scheme::EtdRk4,
        dt: t0 / steps as f64,
        t_end: t0,
        record_every: steps / record,
        clip_threshold: Some(c_gl),
    };
    let mut amp = a0;
    for retry in 0..=max_retries {
        let init = modulated_amplitude(slow, amp);
        if init.sup_norm() <= c_gl {
            match dynamics::integrate_gl(&init, &setup.coeffs, &cfg) {
                Ok(traj) => return Ok((amp, retry, traj.states)),
                Err(Error::BlowUp { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        log::info!("eps = {}: GL amplitude exceeds {c_gl} with A0 = {amp}, halving", setup.eps);
        amp *= 0.5;
    }
    Err(Error::RetryExhausted {
        bound: c_gl,
        retries: max_retries,
    })
}

/// Fast step and step count for a fast-time horizon split into `chunks`.
///
/// In auto mode the quasilinear ceiling is evaluated on the ansatz built from
/// each of `amplitudes` and the smallest value, times the safety factor, is
/// used.
pub fn choose_step(
    setup: &EpsSetup,
    it: &config::IntegratorSection,
    amplitudes: &[SpectralField],
    horizon: f64,
    chunks: usize,
) -> Result<(f64, usize)> {
    let target = match it.dt {
        StepSpec::Fixed(dt) => dt,
        StepSpec::Auto(_) => {
            let mut ceiling = f64::INFINITY;
            for a in amplitudes {
                let v = approximation::build_ansatz(&setup.bundle.with_amplitude(a.clone())?);
                ceiling = ceiling.min(dynamics::quasilinear_ceiling(&setup.model, &v));
            }
            (it.safety * ceiling).min(it.dt_max)
        }
    };
    let per_chunk = (horizon / target / chunks as f64).ceil().max(1.0) as usize;
    let steps = per_chunk * chunks;
    Ok((horizon / steps as f64, steps))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CheckpointRow {
    pub t: f64,
    pub slow_t: f64,
    pub sup_error: f64,
    pub sup_error_l1: f64,
    pub rc_norm: f64,
    pub rs_norm: f64,
    pub sup_state: f64,
    pub carrier_amplitude: f64,
}

/// Integrates the full system from `initial` and the GL equation from the
/// bundle's amplitude side by side, comparing at `chunks` checkpoints.
pub fn co_integrate(
    setup: &EpsSetup,
    initial: &SpectralField,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    chunks: usize,
    r: f64,
) -> Result<Vec<CheckpointRow>> {
    let eps = setup.eps;
    let fast = setup.bundle.fast_grid;
    let table = PropagatorTable::new(&setup.model, fast, dt, scheme);
    let gl = GlTable::new(&setup.coeffs, *setup.bundle.amplitude.grid(), dt * eps * eps, scheme);
    let per_chunk = steps / chunks;
    let clip = dynamics::CLIP_FACTOR * initial.sup_norm().max(f64::MIN_POSITIVE);
    let seg = IntegratorConfig {
        scheme,
        dt,
        t_end: dt * per_chunk as f64,
        record_every: per_chunk,
        clip_threshold: Some(clip),
    };
    let mut v = initial.clone();
    let mut a = setup.bundle.amplitude.clone();
    let mut rows = Vec::with_capacity(chunks);
    for chunk in 1..=chunks {
        let t_start = dt * ((chunk - 1) * per_chunk) as f64;
        v = match dynamics::integrate_full_with(&v, &seg, &setup.model, &table) {
            Ok(mut traj) => traj.states.pop().expect("final state"),
            Err(Error::BlowUp { t, norm, threshold }) => {
                return Err(Error::BlowUp {
                    t: t + t_start,
                    norm,
                    threshold,
                })
            }
            Err(e) => return Err(e),
        };
        for _ in 0..per_chunk {
            a = dynamics::step_gl(&a, &gl)?;
        }
        let bundle = setup.bundle.with_amplitude(a.clone())?;
        let err = approximation::error_decomposition(&v, &bundle, r)?;
        let carrier = approximation::project_amplitude(&v, bundle.carrier_index(), &setup.coeffs.f1_adj, eps)
            .map(|z| z.norm())
            .unwrap_or(0.0);
        let t = dt * (chunk * per_chunk) as f64;
        rows.push(CheckpointRow {
            t,
            slow_t: t * eps * eps,
            sup_error: err.sup_error,
            sup_error_l1: err.sup_error_l1,
            rc_norm: err.rc_norm,
            rs_norm: err.rs_norm,
            sup_state: v.sup_norm(),
            carrier_amplitude: carrier,
        });
    }
    Ok(rows)
}

fn noisy(v: &SpectralField, seed: u64, amp: f64, modes: usize) -> SpectralField {
    let grid = *v.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = (modes as i64).min(grid.quadratic_cutoff());
    let mut out = v.clone();
    for c in 0..2 {
        for j in 1..=top {
            let z = C64::new(rng.random_range(-amp..amp), rng.random_range(-amp..amp));
            out.component_mut(c)[grid.slot(j)] += z;
            out.component_mut(c)[grid.slot(-j)] += z.conj();
        }
    }
    out
}

#[derive(Serialize)]
struct SimulateRow {
    eps: f64,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    dt: f64,
    t: f64,
    slow_t: f64,
    sup_error: f64,
    sup_error_l1: f64,
    rc_norm: f64,
    rs_norm: f64,
    sup_state: f64,
    carrier_amplitude: f64,
}

fn simulate(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let eps = cfg.simulate.eps;
    let a = cfg.model.a.resolve(cp.a_crit, eps);
    let setup = setup_eps(&cp, a, eps, &cfg.grid, |g| modulated_amplitude(g, cfg.sweep.a0))?;
    let it = &cfg.integrator;
    let (a0, retries, states) = gl_prerun(&setup, cfg.sweep.a0, it.t0, cfg.sweep.c_gl, cfg.sweep.max_retries, it.checkpoints)?;
    let setup = EpsSetup {
        bundle: setup.bundle.with_amplitude(states[0].clone())?,
        ..setup
    };
    let horizon = it.t0 / (eps * eps);
    let (dt, steps) = choose_step(&setup, it, &states, horizon, it.checkpoints)?;
    let mut v0 = approximation::build_ansatz(&setup.bundle);
    if cfg.simulate.initial == InitialData::Noisy {
        v0 = noisy(&v0, cfg.seed, cfg.simulate.noise, cfg.simulate.noise_modes);
    }
    let points = co_integrate(&setup, &v0, it.scheme, dt, steps, it.checkpoints, cfg.sweep.r)?;
    let worst = points.iter().map(|p| p.sup_error).fold(0.0, f64::max);
    let rows: Vec<SimulateRow> = points
        .into_iter()
        .map(|p| SimulateRow {
            eps,
            a,
            b: setup.params.b,
            c: setup.params.c,
            d: setup.params.d,
            dt,
            t: p.t,
            slow_t: p.slow_t,
            sup_error: p.sup_error,
            sup_error_l1: p.sup_error_l1,
            rc_norm: p.rc_norm,
            rs_norm: p.rs_norm,
            sup_state: p.sup_state,
            carrier_amplitude: p.carrier_amplitude,
        })
        .collect();
    let summary = vec![
        format!("eps = {eps}, a = {a:.6}, A0 = {a0} after {retries} halvings, dt = {dt:.4e}, {steps} steps"),
        format!("max sup error = {worst:.4e}"),
    ];
    Ok((Table::from_records(&rows)?, summary, vec![], vec![]))
}

/// One row of a sweep table: either a per-ε record or a fitted slope.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SweepRow {
    pub kind: &'static str,
    pub quantity: Option<&'static str>,
    pub eps: Option<f64>,
    pub a: Option<f64>,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub r: f64,
    pub t0: f64,
    pub t_horizon: Option<f64>,
    pub a0: Option<f64>,
    pub retries: Option<usize>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub res_c: Option<f64>,
    pub res_s: Option<f64>,
    pub sup_error: Option<f64>,
    pub sup_error_l1: Option<f64>,
    pub rc_norm: Option<f64>,
    pub rs_norm: Option<f64>,
    pub slope: Option<f64>,
    pub stderr: Option<f64>,
    pub status: String,
    pub wall_time: Option<f64>,
}

fn base_row(cfg: &ExperimentConfig) -> SweepRow {
    SweepRow {
        b: cfg.model.b,
        c: cfg.model.c,
        d: cfg.model.d,
        r: cfg.sweep.r,
        t0: cfg.integrator.t0,
        ..Default::default()
    }
}

fn sorted_epsilons(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut e = cfg.sweep.epsilons.clone();
    e.sort_by(f64::total_cmp);
    e.dedup();
    e
}

fn fit_row(cfg: &ExperimentConfig, quantity: &'static str, rows: &[SweepRow], pick: impl Fn(&SweepRow) -> Option<f64>) -> (SweepRow, Option<SlopeFit>) {
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| Some((r.eps?, pick(r)?)))
        .unzip();
    let fit = fit_loglog(&x, &y);
    let row = SweepRow {
        kind: "fit",
        quantity: Some(quantity),
        slope: fit.map(|f| f.slope),
        stderr: fit.map(|f| f.stderr),
        status: if fit.is_some() { "ok".into() } else { "degenerate sweep".into() },
        ..base_row(cfg)
    };
    (row, fit)
}

/// Residual norms for one ε, maximized over `T ∈ {0, ¼, ½} T0`.
pub fn residual_run(cfg: &ExperimentConfig, cp: &CriticalPoint, eps: f64, r: f64) -> Result<SweepRow> {
    let start = Instant::now();
    let a = cp.a_crit - eps * eps;
    let setup = setup_eps(cp, a, eps, &cfg.grid, |g| modulated_amplitude(g, cfg.sweep.a0))?;
    let s = &cfg.sweep;
    let t0 = cfg.integrator.t0;
    let (a0, retries, states) = gl_prerun(&setup, s.a0, t0, s.c_gl, s.max_retries, 4)?;
    let (mut res_c, mut res_s) = (0.0f64, 0.0f64);
    for (i, amp) in states.iter().take(3).enumerate() {
        let bundle = setup.bundle.with_amplitude(amp.clone())?;
        let rep = approximation::residual(&bundle, &setup.model, 0.25 * i as f64 * t0, r)?;
        res_c = res_c.max(rep.res_c_norm);
        res_s = res_s.max(rep.res_s_norm);
    }
    Ok(SweepRow {
        kind: "eps",
        eps: Some(eps),
        a: Some(a),
        r,
        t_horizon: Some(t0 / (eps * eps)),
        a0: Some(a0),
        retries: Some(retries),
        res_c: Some(res_c),
        res_s: Some(res_s),
        status: "ok".into(),
        wall_time: cfg.output.timings.then(|| start.elapsed().as_secs_f64()),
        ..base_row(cfg)
    })
}

fn failed_row(cfg: &ExperimentConfig, eps: f64, e: &Error) -> SweepRow {
    SweepRow {
        kind: "eps",
        eps: Some(eps),
        status: e.to_string(),
        ..base_row(cfg)
    }
}

fn is_numerical_abort(e: &Error) -> bool {
    matches!(e, Error::BlowUp { .. } | Error::RetryExhausted { .. } | Error::StepTooLarge { .. })
}

/// Runs `f` for every ε in parallel; numerical aborts become failed rows.
fn sweep(
    cfg: &ExperimentConfig,
    f: impl Fn(f64) -> Result<SweepRow> + Sync,
) -> Result<(Vec<SweepRow>, Vec<String>)> {
    let results: Vec<(f64, Result<SweepRow>)> = sorted_epsilons(cfg)
        .into_par_iter()
        .map(|eps| (eps, f(eps)))
        .collect();
    let mut rows = Vec::new();
    let mut aborts = Vec::new();
    for (eps, res) in results {
        match res {
            Ok(row) => rows.push(row),
            Err(e) if is_numerical_abort(&e) => {
                log::warn!("eps = {eps}: {e}");
                aborts.push(format!("eps = {eps}: {e}"));
                rows.push(failed_row(cfg, eps, &e));
            }
            Err(e) => return Err(e),
        }
    }
    Ok((rows, aborts))
}

fn residual_scaling(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let (mut rows, aborts) = sweep(cfg, |eps| residual_run(cfg, &cp, eps, cfg.sweep.r))?;
    let (row_c, fit_c) = fit_row(cfg, "res_c", &rows, |r| r.res_c);
    let (row_s, fit_s) = fit_row(cfg, "res_s", &rows, |r| r.res_s);
    rows.push(row_c);
    rows.push(row_s);
    let mut summary = Vec::new();
    let mut checks = Vec::new();
    for (name, fit, min) in [("res_c", fit_c, RES_C_SLOPE_MIN), ("res_s", fit_s, RES_S_SLOPE_MIN)] {
        match fit {
            Some(f) => {
                summary.push(format!("{name}: slope {:.3} +- {:.3}", f.slope, f.stderr));
                checks.push(Check::new(
                    &format!("{name}-slope"),
                    f.slope >= min,
                    format!("slope {:.3} >= {min}", f.slope),
                ));
            }
            None => summary.push(format!("{name}: degenerate sweep, fit skipped")),
        }
    }
    Ok((Table::from_records(&rows)?, summary, checks, aborts))
}

/// Max-over-time approximation error for one ε.
pub fn error_run(cfg: &ExperimentConfig, cp: &CriticalPoint, eps: f64) -> Result<SweepRow> {
    let start = Instant::now();
    let a = cp.a_crit - eps * eps;
    let it = &cfg.integrator;
    let s = &cfg.sweep;
    let setup = setup_eps(cp, a, eps, &cfg.grid, |g| modulated_amplitude(g, s.a0))?;
    let (a0, retries, states) = gl_prerun(&setup, s.a0, it.t0, s.c_gl, s.max_retries, it.checkpoints)?;
    let setup = EpsSetup {
        bundle: setup.bundle.with_amplitude(states[0].clone())?,
        ..setup
    };
    let horizon = it.t0 / (eps * eps);
    let (dt, steps) = choose_step(&setup, it, &states, horizon, it.checkpoints)?;
    log::info!("eps = {eps}: A0 = {a0}, dt = {dt:.4e}, {steps} steps");
    let v0 = approximation::build_ansatz(&setup.bundle);
    let points = co_integrate(&setup, &v0, it.scheme, dt, steps, it.checkpoints, s.r)?;
    let max = |f: fn(&CheckpointRow) -> f64| points.iter().map(f).fold(0.0, f64::max);
    Ok(SweepRow {
        kind: "eps",
        eps: Some(eps),
        a: Some(a),
        t_horizon: Some(horizon),
        a0: Some(a0),
        retries: Some(retries),
        dt: Some(dt),
        steps: Some(steps),
        sup_error: Some(max(|p| p.sup_error)),
        sup_error_l1: Some(max(|p| p.sup_error_l1)),
        rc_norm: Some(max(|p| p.rc_norm)),
        rs_norm: Some(max(|p| p.rs_norm)),
        status: "ok".into(),
        wall_time: cfg.output.timings.then(|| start.elapsed().as_secs_f64()),
        ..base_row(cfg)
    })
}

fn error_scaling(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let (mut rows, aborts) = sweep(cfg, |eps| error_run(cfg, &cp, eps))?;
    let (row, fit) = fit_row(cfg, "sup_error", &rows, |r| r.sup_error);
    rows.push(row);
    let (lo, hi) = ERROR_SLOPE_BAND;
    let mut summary: Vec<String> = rows
        .iter()
        .filter(|r| r.kind == "eps")
        .map(|r| match r.sup_error {
            Some(e) => format!("eps = {}: max sup error {e:.4e}", r.eps.unwrap_or(f64::NAN)),
            None => format!("eps = {}: {}", r.eps.unwrap_or(f64::NAN), r.status),
        })
        .collect();
    let mut checks = Vec::new();
    match fit {
        Some(f) => {
            summary.push(format!("sup_error: slope {:.3} +- {:.3}", f.slope, f.stderr));
            checks.push(Check::new(
                "error-slope",
                (lo..=hi).contains(&f.slope),
                format!("slope {:.3} in [{lo}, {hi}]", f.slope),
            ));
        }
        None => summary.push("sup_error: degenerate sweep, fit skipped".into()),
    }
    Ok((Table::from_records(&rows)?, summary, checks, aborts))
}

/// Result of fitting `d|A|/dT` against odd powers of `|A|`.
#[derive(Clone, Debug, Serialize)]
pub struct SaturationFit {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub side: Side,
    pub dt: f64,
    pub samples: usize,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    pub linear: f64,
    pub beta: f64,
    pub alpha0: f64,
    pub alpha3: f64,
    pub beta_rel_dev: f64,
    pub linear_rel_dev: f64,
}

/// Least-squares coefficients of `y ≈ Σ c_p x^p`.
pub fn fit_powers(x: &[f64], y: &[f64], powers: &[i32]) -> Option<Vec<f64>> {
    let m = DMatrix::from_fn(x.len(), powers.len(), |i, j| x[i].powi(powers[j]));
    let rhs = DVector::from_column_slice(y);
    let sol = m.svd(true, true).solve(&rhs, 1e-14).ok()?;
    Some(sol.iter().copied().collect())
}

/// Amplitude-saturation oracle for the cubic coefficient.
pub fn saturation_fit(cfg: &ExperimentConfig, cp: &CriticalPoint) -> Result<SaturationFit> {
    let sat = &cfg.saturation;
    let eps = sat.eps;
    let a = match sat.side {
        Side::Unstable => cp.a_crit - eps * eps,
        Side::Stable => cp.a_crit + eps * eps,
    };
    let grid = config::GridSection {
        carriers: sat.carriers,
        n: sat.n,
        n_slow: sat.n_slow,
    };
    let constant = |g: Grid1D| {
        SpectralField::from_physical_complex(g, &[vec![C64::new(sat.a0, 0.0); g.n()]]).expect("slow grid")
    };
    let setup = setup_eps(cp, a, eps, &grid, constant)?;
    let g = setup.coeffs;
    // the largest amplitude the run should reach: the saturated level when it exists
    let mut top = sat.a0;
    let growth = match sat.side {
        Side::Unstable => g.alpha0.re,
        Side::Stable => -g.alpha0.re,
    };
    if growth > 0.0 && g.alpha3.re < 0.0 {
        top = top.max((growth / -g.alpha3.re).sqrt());
    }
    let probe = setup.bundle.with_amplitude(constant(*setup.bundle.amplitude.grid()).scaled(1.5 * top / sat.a0))?;
    let horizon = sat.t_end / (eps * eps);
    let chunks = sat.sample_every;
    let (dt, _) = choose_step(&setup, &cfg.integrator, &[probe.amplitude.clone()], horizon, 1)?;
    let steps = ((horizon / dt / chunks as f64).ceil() as usize) * chunks;
    let dt = horizon / steps as f64;
    let v0 = approximation::build_ansatz(&setup.bundle);
    let run = IntegratorConfig {
        scheme: cfg.integrator.scheme,
        dt,
        t_end: horizon,
        record_every: sat.sample_every,
        clip_threshold: None,
    };
    let traj = dynamics::integrate_full(&v0, &run, &setup.model)?;
    let m = setup.bundle.carrier_index();
    let amps: Vec<f64> = traj
        .states
        .iter()
        .map(|v| approximation::project_amplitude(v, m, &g.f1_adj, eps).map(|z| z.norm()))
        .collect::<Result<_>>()?;
    let slow_t: Vec<f64> = traj.times.iter().map(|t| t * eps * eps).collect();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 1..amps.len() - 1 {
        x.push(amps[i]);
        y.push((amps[i + 1] - amps[i - 1]) / (slow_t[i + 1] - slow_t[i - 1]));
    }
    let coef = fit_powers(&x, &y, &sat.fit_powers)
        .ok_or_else(|| Error::InvalidParameter("saturation regression is singular".into()))?;
    let at = |p: i32| coef[sat.fit_powers.iter().position(|q| *q == p).expect("validated powers")];
    let (linear, beta) = (at(1), at(3));
    let expected_linear = match sat.side {
        Side::Unstable => g.alpha0.re,
        Side::Stable => -g.alpha0.re,
    };
    Ok(SaturationFit {
        eps,
        a,
        b: cp.b,
        c: cp.c,
        d: cp.d,
        side: sat.side,
        dt,
        samples: x.len(),
        amplitude_min: x.iter().copied().fold(f64::INFINITY, f64::min),
        amplitude_max: x.iter().copied().fold(0.0, f64::max),
        linear,
        beta,
        alpha0: g.alpha0.re,
        alpha3: g.alpha3.re,
        beta_rel_dev: (beta - g.alpha3.re).abs() / g.alpha3.re.abs(),
        linear_rel_dev: (linear - expected_linear).abs() / expected_linear.abs(),
    })
}

fn saturation(cfg: &ExperimentConfig) -> Result<Parts> {
    let cp = critical_point(cfg)?;
    let fit = saturation_fit(cfg, &cp)?;
    let summary = vec![
        format!(
            "|A| in [{:.4}, {:.4}] over {} samples, dt = {:.4e}",
            fit.amplitude_min, fit.amplitude_max, fit.samples, fit.dt
        ),
        format!("linear coefficient {:.6} (alpha0 = {:.6})", fit.linear, fit.alpha0),
        format!("beta = {:.6}, Re alpha3 = {:.6}, relative deviation {:.4}", fit.beta, fit.alpha3, fit.beta_rel_dev),
    ];
    let check = match fit.side {
        Side::Unstable => Check::new(
            "saturation-beta",
            fit.beta_rel_dev <= SATURATION_REL_TOL,
            format!("|beta - Re alpha3| / |Re alpha3| = {:.4} <= {SATURATION_REL_TOL}", fit.beta_rel_dev),
        ),
        Side::Stable => Check::new(
            "stable-side-decay",
            fit.linear_rel_dev <= STABLE_SIDE_REL_TOL,
            format!("|linear + alpha0| / alpha0 = {:.4} <= {STABLE_SIDE_REL_TOL}", fit.linear_rel_dev),
        ),
    };
    Ok((Table::from_records(&[fit])?, summary, vec![check], vec![]))
}
