mod common;

use common::*;
use gsk_gl::approximation::{self, AnsatzBundle};
use gsk_gl::bifurcation::{self, gl_coefficients};
use gsk_gl::experiments::{fit_loglog, ExperimentConfig};
use gsk_gl::matrix2::{self, Mat2, Vec2};
use gsk_gl::model::{gsk_fixed_points, Branch, Gsk, Model, ModelParams};
use gsk_gl::spectral::{self, Grid1D, ModeFilterSpec, SpectralField};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params() -> impl Strategy<Value = ModelParams> {
    (0.05f64..0.5, 1.0f64..6.0, -2.0f64..2.0, 0.005f64..2.0)
        .prop_map(|(b, s, c, d)| ModelParams::new(4.0 * b * b * s, b, c, d).unwrap())
}

fn cvec() -> impl Strategy<Value = Vec2> {
    prop::array::uniform4(-1.0f64..1.0).prop_map(|x| Vec2::new(c(x[0], x[1]), c(x[2], x[3])))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn fixed_points_are_equilibria(p in params()) {
        for fp in gsk_fixed_points(&p) {
            let (v, w) = (fp.v_star, fp.w_star);
            prop_assert!((-p.b * v + w * v * v).abs() < 1e-10);
            prop_assert!((p.a * (1.0 - w) - w * v * v).abs() < 1e-10);
        }
    }

    #[test]
    fn symbol_is_conjugate_symmetric(p in params(), k in -20.0f64..20.0) {
        let g = Gsk::minus(p).unwrap();
        let diff = g.linear_symbol(-k) - g.linear_symbol(k).map(|z| z.conj());
        prop_assert!(diff.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn multilinear_symbols_are_symmetric(p in params(), k in -5.0f64..5.0, x in cvec(), y in cvec(), z in cvec()) {
        let g = Gsk::minus(p).unwrap();
        prop_assert!((g.b2_symbol(k, &x, &y) - g.b2_symbol(k, &y, &x)).norm() < 1e-14);
        let base = g.b3_symbol(&x, &y, &z);
        for perm in [g.b3_symbol(&y, &x, &z), g.b3_symbol(&z, &y, &x), g.b3_symbol(&x, &z, &y)] {
            prop_assert!((perm - base).norm() < 1e-14);
        }
    }

    #[test]
    fn eigen_data_is_normalized(p in params(), k in -8.0f64..8.0) {
        let m = Gsk::minus(p).unwrap().linear_symbol(k);
        let e = bifurcation::eigen_decompose(&m, k).unwrap();
        prop_assert!(e.lambda1.re >= e.lambda2.re);
        prop_assert!((e.f1.norm() - 1.0).abs() < 1e-12);
        prop_assert!(e.f1[0].im == 0.0 && e.f1[0].re >= 0.0);
        prop_assert!((matrix2::dot(&e.f1_adj, &e.f1) - 1.0).norm() < 1e-9);
        prop_assert!(matrix2::dot(&e.f1_adj, &e.f2).norm() < 1e-9);
    }

    #[test]
    fn exponential_inverts(x in prop::array::uniform8(-3.0f64..3.0)) {
        let m = Mat2::new(c(x[0], x[1]), c(x[2], x[3]), c(x[4], x[5]), c(x[6], x[7]));
        let prod = matrix2::expm(&m) * matrix2::expm(&-m);
        let diff = prod - Mat2::identity();
        prop_assert!(diff.iter().all(|z| z.norm() < 1e-9));
        let want = expm_oracle(&m);
        let scale = want.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!((matrix2::expm(&m) - want).iter().all(|z| z.norm() < 1e-11 * scale));
    }

    #[test]
    fn phi_recurrence(re in -40.0f64..5.0, im in -10.0f64..10.0) {
        let z = c(re, im);
        for j in 1..4usize {
            let lhs = matrix2::phi(j, z) * z;
            let fact: f64 = (1..j).map(|i| i as f64).product();
            let rhs = matrix2::phi(j - 1, z) - 1.0 / fact;
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn transforms_round_trip(seed in any::<u64>(), log_n in 4u32..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid1D::new(1 << log_n, 17.0).unwrap();
        let f = random_real_field(grid, &mut rng, (1i64 << log_n) / 2 - 1, 1.0);
        let back = SpectralField::from_physical(grid, &f.to_physical()).unwrap();
        prop_assert!(back.sub(&f).unwrap().max_abs() < 1e-13);
        prop_assert!(f.hermitian_asymmetry() == 0.0);
    }

    #[test]
    fn algebra_bound(seed in any::<u64>(), r in 1.05f64..4.0, len in 3.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid1D::new(64, len).unwrap();
        let u = random_complex_field(grid, &mut rng, 30, 1.0);
        let v = random_complex_field(grid, &mut rng, 30, 1.0);
        let (lhs, rhs) = spectral::algebra_constant_check(&u, &v, r).unwrap();
        prop_assert!(lhs <= rhs);
    }

    #[test]
    fn mode_filters_partition(seed in any::<u64>(), k_c in 0.5f64..3.0, frac in 0.01f64..0.45) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid1D::new(128, 2.0 * std::f64::consts::PI * 8.0 / k_c).unwrap();
        let f = random_real_field(grid, &mut rng, 63, 1.0);
        let (ec, es) = spectral::ec_es_split(&f, k_c, frac * k_c).unwrap();
        prop_assert!(ec.add(&es).unwrap().sub(&f).unwrap().max_abs() == 0.0);
        let spec = ModeFilterSpec::new(1, k_c, frac * k_c).unwrap();
        let once = spectral::mode_filter(&f, &spec);
        prop_assert!(spectral::mode_filter(&once, &spec).sub(&once).unwrap().max_abs() == 0.0);
        prop_assert!(ec.hermitian_asymmetry() == 0.0 && es.hermitian_asymmetry() == 0.0);
    }

    #[test]
    fn norm_weights_are_monotone(seed in any::<u64>(), r in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let grid = Grid1D::new(64, 25.0).unwrap();
        let f = random_real_field(grid, &mut rng, 20, 1.0);
        prop_assert!(spectral::xr_norm(&f, r) <= spectral::xr_norm(&f, r + 0.5));
        prop_assert!((spectral::xr_norm(&f, 0.0) - f.max_abs() / grid.dk()).abs() < 1e-12 * f.max_abs() / grid.dk());
    }

    #[test]
    fn power_laws_are_recovered(p in -4.0f64..4.0, scale in 0.01f64..100.0) {
        let x = [0.03, 0.05, 0.07, 0.11];
        let y: Vec<f64> = x.iter().map(|e: &f64| scale * e.powf(p)).collect();
        let fit = fit_loglog(&x, &y).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
    }

    #[test]
    fn config_round_trips(eps in prop::collection::vec(0.01f64..0.5, 1..6), r in 0.0f64..4.0, seed in any::<u64>()) {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.epsilons = eps;
        cfg.sweep.r = r;
        cfg.seed = seed;
        let again = ExperimentConfig::from_toml(&cfg.canonical()).unwrap();
        prop_assert_eq!(cfg, again);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ansatz_is_real_and_fast_time_consistent(seed in any::<u64>(), eps in 0.03f64..0.2) {
        let cp = fig1();
        let p = cp.params().with_a(cp.a_crit - eps * eps);
        let coeffs = gl_coefficients(cp, &p).unwrap();
        let fast = approximation::fast_grid(cp.k_c, 16, 512).unwrap();
        let slow = approximation::slow_grid(eps, &fast, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amp = random_complex_field(slow, &mut rng, 6, 0.5);
        let bundle = AnsatzBundle::new(eps, amp, coeffs, fast).unwrap();
        let v = approximation::build_ansatz(&bundle);
        prop_assert!(v.hermitian_asymmetry() < 1e-14);
        let dv = approximation::ansatz_time_derivative(&bundle);
        prop_assert!(dv.hermitian_asymmetry() < 1e-14);
        // doubling the amplitude doubles the leading part and quadruples the quadratic part
        let doubled = bundle.with_amplitude(bundle.amplitude.scaled(2.0)).unwrap();
        let m = bundle.carrier_index() as i64;
        let v2 = approximation::build_ansatz(&doubled);
        for comp in 0..2 {
            prop_assert!((v2.mode(comp, m) - v.mode(comp, m) * 2.0).norm() < 1e-14);
            prop_assert!((v2.mode(comp, 2 * m) - v.mode(comp, 2 * m) * 4.0).norm() < 1e-14);
        }
        let zero = bundle.with_amplitude(SpectralField::zeros(slow, 1)).unwrap();
        let model = Gsk::new(p, Branch::Minus).unwrap();
        let res = approximation::residual(&zero, &model, 0.0, 2.0).unwrap();
        prop_assert_eq!((res.res_c_norm, res.res_s_norm), (0.0, 0.0));
    }
}
