//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line with the
//! measured value and the pinned tolerance before asserting.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::time::Instant;

use common::*;
use gsk_gl::bifurcation::{self, find_critical, gl_coefficients};
use gsk_gl::dynamics::{self, Band, IntegratorConfig, PropagatorTable, Scheme};
use gsk_gl::experiments::{self, Command, ExperimentConfig};
use gsk_gl::matrix2;
use gsk_gl::model::{Gsk, LinearOnly, Model, ModelParams};
use gsk_gl::spectral::{self, Grid1D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const A_CRIT_TARGET: f64 = 0.2412;
const A_CRIT_TOL: f64 = 5e-4;
const RUNTIME_LIMIT_S: f64 = 5.0;
const TANGENCY_TOL: f64 = 1e-6;
const OFFSET_A: f64 = 0.02;
const ASYMPTOTIC_K: f64 = 100.0;
const ASYMPTOTIC_REL_TOL: f64 = 0.05;
const EIGEN_TOL: f64 = 1e-10;
const ORDER_TOL: f64 = 0.3;
const HERMITIAN_STEPS: f64 = 1e5;
const HERMITIAN_TOL: f64 = 1e-10;
const LINEAR_EXACT_TOL: f64 = 1e-9;
const CRITICAL_GROWTH_TOL: f64 = 1e-6;

fn report(name: &str, passed: bool, detail: String) -> bool {
    println!("[{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    passed
}

#[test]
fn critical_point_reproduction() {
    let start = Instant::now();
    let cp = find_critical(0.2, 0.0, 0.018).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = (cp.a_crit - A_CRIT_TARGET).abs() <= A_CRIT_TOL && secs < RUNTIME_LIMIT_S;
    assert!(report(
        "critical point",
        ok,
        format!(
            "a_crit = {:.6} (target {A_CRIT_TARGET} +- {A_CRIT_TOL}), k_c = {:.6}, {secs:.2}s (< {RUNTIME_LIMIT_S}s)",
            cp.a_crit, cp.k_c
        ),
    ));
}

#[test]
fn dispersion_tangency() {
    let start = Instant::now();
    let cp = find_critical(0.2, 0.0, 0.018).unwrap();
    let base = cp.params();
    let at_crit = bifurcation::growth_max_over_k(&base).unwrap().1;
    let below = bifurcation::growth_max_over_k(&base.with_a(cp.a_crit - OFFSET_A)).unwrap().1;
    let above = bifurcation::growth_max_over_k(&base.with_a(cp.a_crit + OFFSET_A)).unwrap().1;
    let at_kc = bifurcation::growth_rate(&Gsk::minus(base).unwrap(), cp.k_c);
    let secs = start.elapsed().as_secs_f64();
    let ok = at_crit.abs() <= TANGENCY_TOL
        && at_kc.abs() <= TANGENCY_TOL
        && below > 0.0
        && above < 0.0
        && secs < RUNTIME_LIMIT_S;
    assert!(report(
        "dispersion tangency",
        ok,
        format!(
            "max Re lambda1 = {at_crit:.2e} (|.| <= {TANGENCY_TOL:e}), at k_c {at_kc:.2e}; a_crit - {OFFSET_A}: {below:.4e} > 0; a_crit + {OFFSET_A}: {above:.4e} < 0; {secs:.2}s"
        ),
    ));
}

#[test]
fn large_wavenumber_asymptotics() {
    let cp = fig1();
    let gsk = Gsk::minus(cp.params()).unwrap();
    let e = bifurcation::dispersion(&gsk, ASYMPTOTIC_K).unwrap();
    let k2 = ASYMPTOTIC_K * ASYMPTOTIC_K;
    let w_star = gsk.fixed_point()[1];
    let r1 = e.lambda1.re / k2 / -cp.d;
    let r2 = e.lambda2.re / k2 / (-2.0 * w_star);
    let ok = (r1 - 1.0).abs() <= ASYMPTOTIC_REL_TOL && (r2 - 1.0).abs() <= ASYMPTOTIC_REL_TOL;
    assert!(report(
        "asymptotics",
        ok,
        format!(
            "lambda1/k^2 / (-d) = {r1:.5}, lambda2/k^2 / (-2w*) = {r2:.5} (within {ASYMPTOTIC_REL_TOL} of 1)"
        ),
    ));
}

#[test]
fn error_scaling() {
    let cfg = ExperimentConfig::default();
    let start = Instant::now();
    let out = experiments::run(Command::ValidateErrorScaling, &cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    for line in &out.summary {
        println!("    {line}");
    }
    let check = out.checks.iter().find(|c| c.name == "error-slope");
    let ok = out.aborts.is_empty() && check.is_some_and(|c| c.passed);
    assert!(report(
        "error scaling",
        ok,
        format!(
            "{} (band {:?}); aborts {:?}; {secs:.0}s",
            check.map_or("no fit".into(), |c| c.detail.clone()),
            experiments::ERROR_SLOPE_BAND,
            out.aborts
        ),
    ));
}

#[test]
fn residual_scaling() {
    let out = experiments::run(Command::ValidateResidualScaling, &ExperimentConfig::default()).unwrap();
    let ok = out.aborts.is_empty() && out.checks.len() == 2 && out.checks.iter().all(|c| c.passed);
    let detail: Vec<String> = out.checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    assert!(report("residual scaling", ok, detail.join("; ")));
}

#[test]
fn cubic_coefficient_cross_validation() {
    let out = experiments::run(Command::AmplitudeSaturation, &ExperimentConfig::default()).unwrap();
    for line in &out.summary {
        println!("    {line}");
    }
    let ok = out.checks.len() == 1 && out.checks[0].passed;
    assert!(report("cubic coefficient", ok, out.checks[0].detail.clone()));
}

fn convolution_algebra(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = 1 << rng.random_range(4..8);
        let grid = Grid1D::new(n, rng.random_range(5.0..80.0)).unwrap();
        let band = rng.random_range(1..(n as i64 / 2 - 1));
        let u = random_complex_field(grid, rng, band, 1.0);
        let v = random_complex_field(grid, rng, band, 1.0);
        let r = rng.random_range(1.05..3.0);
        let (lhs, rhs) = spectral::algebra_constant_check(&u, &v, r).unwrap();
        worst = worst.max(lhs / rhs);
    }
    (worst <= 1.0, format!("max lhs/rhs = {worst:.4} over 1000 samples"))
}

fn filter_partition(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut ok = true;
    for _ in 0..100 {
        let grid = Grid1D::new(256, 2.0 * std::f64::consts::PI * 16.0 / 2.047).unwrap();
        let f = random_real_field(grid, rng, 127, 1.0);
        let k_c = 2.047;
        let (c1, s1) = spectral::ec_es_split(&f, k_c, k_c / 10.0).unwrap();
        let (c2, s2) = spectral::ec_es_split(&c1, k_c, k_c / 10.0).unwrap();
        let (c3, s3) = spectral::ec_es_split(&s1, k_c, k_c / 10.0).unwrap();
        ok &= c1.add(&s1).unwrap().sub(&f).unwrap().max_abs() == 0.0;
        ok &= c2.sub(&c1).unwrap().max_abs() == 0.0 && s2.max_abs() == 0.0;
        ok &= s3.sub(&s1).unwrap().max_abs() == 0.0 && c3.max_abs() == 0.0;
    }
    (ok, "E_c + E_s = I, E_c² = E_c, E_s² = E_s, E_c E_s = 0 on 100 fields".into())
}

fn eigen_oracle(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let b = rng.random_range(0.05..0.5);
        let a = 4.0 * b * b * rng.random_range(1.01..6.0);
        let p = ModelParams::new(a, b, rng.random_range(-2.0..2.0), rng.random_range(0.005..2.0)).unwrap();
        let k = rng.random_range(-6.0..6.0);
        let m = Gsk::minus(p).unwrap().linear_symbol(k);
        let e = bifurcation::eigen_decompose(&m, k).unwrap();
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let mut want = eig_oracle(&m);
        want.sort_by(|x, y| y.re.total_cmp(&x.re));
        worst = worst
            .max((e.lambda1 - want[0]).norm() / scale)
            .max((e.lambda2 - want[1]).norm() / scale);
    }
    (worst <= EIGEN_TOL, format!("max relative deviation {worst:.2e} (<= {EIGEN_TOL:e})"))
}

fn linear_exactness(rng: &mut ChaCha8Rng) -> (bool, String) {
    let grid = Grid1D::new(64, 2.0 * std::f64::consts::PI * 8.0).unwrap();
    let m = gsk(0.24);
    let u0 = random_real_field(grid, rng, 30, 1.0);
    let t_end = 6.0;
    let mut worst = 0.0f64;
    for steps in [1usize, 7, 60] {
        let cfg = IntegratorConfig {
            scheme: Scheme::EtdRk4,
            dt: t_end / steps as f64,
            t_end,
            record_every: steps,
            clip_threshold: None,
        };
        let traj = dynamics::integrate_full(&u0, &cfg, &LinearOnly(&m)).unwrap();
        let last = traj.states.last().unwrap();
        for i in 0..grid.n() {
            let e = expm_oracle(&(m.linear_symbol(grid.wavenumber(i)) * c(t_end, 0.0)));
            let x = matrix2::Vec2::new(u0.component(0)[i], u0.component(1)[i]);
            let y = matrix2::Vec2::new(last.component(0)[i], last.component(1)[i]);
            worst = worst.max((y - e * x).norm());
        }
    }
    (worst <= LINEAR_EXACT_TOL, format!("max deviation {worst:.2e} for 1/7/60 steps"))
}

fn etd_orders(rng: &mut ChaCha8Rng) -> (bool, String) {
    let p2 = self_convergence_order(Scheme::EtdRk2, [0.2, 0.1, 0.05], 0.0125, rng);
    let p4 = self_convergence_order(Scheme::EtdRk4, [0.1, 0.05, 0.025], 0.003125, rng);
    (
        (p2 - 2.0).abs() <= ORDER_TOL && (p4 - 4.0).abs() <= ORDER_TOL,
        format!("orders {p2:.2} and {p4:.2} (+- {ORDER_TOL})"),
    )
}

fn hermitian_long_run(rng: &mut ChaCha8Rng) -> (bool, String) {
    let grid = Grid1D::new(16, 2.0 * std::f64::consts::PI * 2.0 / 2.047).unwrap();
    let m = gsk(0.235);
    let u0 = random_real_field(grid, rng, 3, 0.02);
    let dt = 0.05;
    let table = PropagatorTable::new(&m, grid, dt, Scheme::EtdRk4);
    let mut u = u0;
    let mut worst = 0.0f64;
    for s in 1..=HERMITIAN_STEPS as usize {
        u = dynamics::step_full(&u, &table, &m).unwrap();
        if s % 1000 == 0 {
            worst = worst.max(u.hermitian_asymmetry());
        }
    }
    (worst <= HERMITIAN_TOL, format!("max asymmetry {worst:.2e} over 1e5 steps"))
}

fn correction_residuals() -> (bool, String) {
    let cp = fig1();
    let g = gl_coefficients(cp, &cp.params()).unwrap();
    let worst = g.nu0_residual.max(g.nu2_residual);
    (
        worst <= experiments::CORRECTION_RESIDUAL_MAX,
        format!("max residual {worst:.2e}"),
    )
}

#[test]
fn property_suites() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let results = [
        ("convolution algebra bound", convolution_algebra(&mut rng)),
        ("filter partition", filter_partition(&mut rng)),
        ("eigen-solver oracle", eigen_oracle(&mut rng)),
        ("linear propagator exactness", linear_exactness(&mut rng)),
        ("ETD self-convergence", etd_orders(&mut rng)),
        ("Hermitian symmetry", hermitian_long_run(&mut rng)),
        ("correction residuals", correction_residuals()),
    ];
    let mut all = true;
    for (name, (ok, detail)) in &results {
        println!("    {} {name}: {detail}", if *ok { "ok  " } else { "FAIL" });
        all &= ok;
    }
    assert!(report("property suites", all, format!("{} sub-checks", results.len())));
}

#[test]
fn semigroup_decay() {
    let cp = fig1();
    let gsk = Gsk::minus(cp.params()).unwrap();
    let k_max = 10.0;
    let stable = dynamics::semigroup_decay_probe(&gsk, cp.k_c, k_max, Band::Stable, 2000.0).unwrap();
    let crit = dynamics::semigroup_decay_probe(&gsk, cp.k_c, k_max, Band::Critical, 2000.0).unwrap();
    let ok = stable.sigma > 0.0 && crit.lambda_max.abs() <= CRITICAL_GROWTH_TOL;
    assert!(report(
        "semigroup decay",
        ok,
        format!(
            "stable sigma = {:.4e} > 0 (C = {:.3}); critical growth bound {:.2e} (|.| <= {CRITICAL_GROWTH_TOL:e})",
            stable.sigma, stable.c, crit.lambda_max
        ),
    ));
}
