//! Property tests over randomly seeded instances.

use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use risgee::algorithms::{run_method, Method, MethodConfig, Objective};
use risgee::kernels::{max_linear_minus_quadratic_ball, project_psd_diag_cap, project_psd_trace_ball, ReflectionSet};
use risgee::linalg::{random_cmatrix, random_cvector, HermitianEigen};
use risgee::metrics::{mmse_filters, mmse_user_rates, mmse_user_rates_det_form, sinr, spectral_efficiency, Allocation};
use risgee::scenario::{ChannelSet, PowerModel};
use risgee::surrogates::{EkConvention, GammaSurrogateCoeffs, MmsePowerSurrogate, PowerSurrogate};
use risgee::{CMatrix, CVector, C64};

fn instance(seed: u64, k: usize, nr: usize, n: usize) -> (ChaCha8Rng, ChannelSet, PowerModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_cmatrix(nr, n, &mut rng);
    let h = (0..k).map(|_| random_cvector(n, &mut rng)).collect();
    let ch = ChannelSet::new(g, h, rng.random_range(0.1..3.0)).unwrap();
    let power = PowerModel::new(rng.random_range(0.5..5.0), vec![rng.random_range(0.0..2.0); k], vec![rng.random_range(1.0..20.0); k], 1.0).unwrap();
    (rng, ch, power)
}

fn hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
    let a = random_cmatrix(n, n, rng);
    (&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)
}

fn powers(rng: &mut ChaCha8Rng, power: &PowerModel) -> DVector<f64> {
    DVector::from_fn(power.users(), |k, _| rng.random_range(0.01..1.0) * power.pmax_w[k])
}

fn within(value: f64, truth: f64) -> bool {
    value <= truth + 1e-9 * truth.abs().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_projection_is_feasible_and_idempotent(seed: u64, n in 1usize..12, local: bool, bound in 0.1f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = if local { ReflectionSet::Local { cap: bound } } else { ReflectionSet::Global { budget: n as f64 * bound } };
        let x = random_cvector(n, &mut rng) * C64::new(rng.random_range(0.1..5.0), 0.0);
        let p = set.project(&x);
        prop_assert!(set.contains(&p, 1e-12 * set.total_budget(n)));
        prop_assert!((set.project(&p) - &p).norm() <= 1e-12 * p.norm().max(1.0));
        let s = set.saturate(&x);
        prop_assert!(set.contains(&s, 1e-12 * set.total_budget(n)));
        match set {
            ReflectionSet::Global { budget } => prop_assert!((s.norm_squared() - budget).abs() <= 1e-12 * budget),
            ReflectionSet::Local { cap } => prop_assert!(s.iter().all(|z| (z.norm_sqr() - cap).abs() <= 1e-12 * cap)),
        }
    }

    #[test]
    fn trace_ball_projection(seed: u64, n in 1usize..7, budget in 0.1f64..5.0, scale in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = hermitian(&mut rng, n, scale);
        let x = project_psd_trace_ball(&z, budget).unwrap();
        prop_assert!(HermitianEigen::new(&x).min() >= -1e-12 * scale);
        prop_assert!(x.trace().re <= budget * (1.0 + 1e-12));
        prop_assert!((project_psd_trace_ball(&x, budget).unwrap() - &x).norm() <= 1e-10 * scale.max(1.0));
        // no feasible point is closer than the projection
        for _ in 0..20 {
            let a = random_cmatrix(n, n, &mut rng);
            let y = &a * a.adjoint();
            let y = &y * C64::new(budget * rng.random_range(0.0..1.0) / y.trace().re, 0.0);
            prop_assert!((&z - &x).norm() <= (&z - &y).norm() + 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn diagonal_cap_projection(seed: u64, n in 1usize..7, cap in 0.1f64..3.0, scale in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = hermitian(&mut rng, n, scale);
        let x = project_psd_diag_cap(&z, cap).unwrap();
        prop_assert!(HermitianEigen::new(&x).min() >= -1e-12 * scale.max(cap));
        prop_assert!(x.diagonal().iter().all(|d| d.re <= cap * (1.0 + 1e-12)));
        prop_assert!((project_psd_diag_cap(&x, cap).unwrap() - &x).norm() <= 1e-8 * scale.max(cap));
        for _ in 0..20 {
            let v = random_cvector(n, &mut rng).map(|c| c / C64::new(c.norm(), 0.0) * C64::new(cap.sqrt() * rng.random_range(0.0..1.0), 0.0));
            let y = &v * v.adjoint();
            prop_assert!((&z - &x).norm() <= (&z - &y).norm() + 1e-8 * scale.max(cap));
        }
    }

    #[test]
    fn ball_solver_beats_feasible_points(seed: u64, n in 1usize..6, r2 in 0.01f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cmatrix(n, n, &mut rng);
        let q = &a * a.adjoint();
        let b = random_cvector(n, &mut rng) * C64::new(rng.random_range(0.1..10.0), 0.0);
        let sol = max_linear_minus_quadratic_ball(&b, &q, r2).unwrap();
        prop_assert!(sol.x.norm_squared() <= r2 * (1.0 + 1e-9));
        let f = |x: &CVector| b.dotc(x).re - x.dotc(&(&q * x)).re;
        for _ in 0..50 {
            let d = random_cvector(n, &mut rng);
            let y = &d * C64::new(r2.sqrt() * rng.random_range(0.0f64..1.0).sqrt() / d.norm(), 0.0);
            prop_assert!(f(&y) <= sol.value + 1e-9 * sol.value.abs().max(1.0));
        }
    }

    #[test]
    fn determinant_identity_and_mmse_dominance(seed: u64, k in 1usize..5, nr in 1usize..5, n in 1usize..10) {
        let (mut rng, ch, power) = instance(seed, k, nr, n);
        let gamma = random_cvector(n, &mut rng);
        let p = powers(&mut rng, &power);
        let a = mmse_user_rates(&gamma, &p, &ch).unwrap();
        let b = mmse_user_rates_det_form(&gamma, &p, &ch).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-8 * x.abs().max(f64::MIN_POSITIVE));
        }
        let filters = mmse_filters(&gamma, &p, &ch).unwrap();
        for user in 0..k {
            let best = sinr(user, &gamma, &p, &filters, &ch).unwrap();
            for _ in 0..20 {
                let mut trial = filters.clone();
                trial[user] = random_cvector(nr, &mut rng);
                prop_assert!(sinr(user, &gamma, &p, &trial, &ch).unwrap() <= best * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn gamma_surrogate_minorizes_and_touches(seed: u64, k in 1usize..4, nr in 1usize..4, n in 1usize..8) {
        let (mut rng, ch, power) = instance(seed, k, nr, n);
        let gamma = random_cvector(n, &mut rng);
        let p = powers(&mut rng, &power);
        let filters = mmse_filters(&gamma, &p, &ch).unwrap();
        let coeffs = GammaSurrogateCoeffs::build(&gamma, &p, &filters, &ch, EkConvention::Tight).unwrap();
        let truth = spectral_efficiency(&gamma, &p, &filters, &ch).unwrap();
        prop_assert!((coeffs.value(&gamma, &ch) - truth).abs() <= 1e-9 * truth.max(1.0));
        for _ in 0..30 {
            let g = random_cvector(n, &mut rng) * C64::new(rng.random_range(0.0..3.0), 0.0);
            prop_assert!(within(coeffs.value(&g, &ch), spectral_efficiency(&g, &p, &filters, &ch).unwrap()));
        }
    }

    #[test]
    fn power_surrogates_minorize_and_touch(seed: u64, k in 1usize..4, nr in 1usize..4, n in 1usize..8) {
        let (mut rng, ch, power) = instance(seed, k, nr, n);
        let gamma = random_cvector(n, &mut rng);
        let p = powers(&mut rng, &power);
        let filters = mmse_filters(&gamma, &p, &ch).unwrap();
        let fixed = PowerSurrogate::build(&p, &gamma, &filters, &ch, &power).unwrap();
        let mmse = MmsePowerSurrogate::build(&p, &gamma, &ch, &power).unwrap();
        prop_assert!((fixed.value(&p) - fixed.true_gee(&p)).abs() <= 1e-9 * fixed.true_gee(&p).max(1.0));
        prop_assert!((mmse.value(&p).unwrap() - mmse.true_gee(&p).unwrap()).abs() <= 1e-9 * mmse.true_gee(&p).unwrap().max(1.0));
        for _ in 0..30 {
            let q = DVector::from_fn(k, |j, _| rng.random_range(0.0..1.0) * power.pmax_w[j]);
            prop_assert!(within(fixed.value(&q), fixed.true_gee(&q)));
            prop_assert!(within(mmse.value(&q).unwrap(), mmse.true_gee(&q).unwrap()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn algorithms_are_monotone_feasible_and_consistent(
        seed: u64,
        k in 1usize..4,
        nr in 1usize..4,
        n in 1usize..6,
        method in prop_oneof![Just(Method::Approach1), Just(Method::Approach2)],
        rate_mode: bool,
    ) {
        let (_, ch, power) = instance(seed, k, nr, n);
        let objective = if rate_mode { Objective::SumRate } else { Objective::Gee };
        let cfg = MethodConfig::new(method).with_objective(objective);
        let out = run_method(&cfg, &ch, &power, 1.0).unwrap();
        prop_assert!(out.trace.is_non_decreasing_relative(1e-9), "{:?}", out.trace.objective_per_iteration);
        let a = &out.allocation;
        prop_assert!(a.gamma.norm_squared() <= n as f64 * (1.0 + 1e-9));
        prop_assert!(a.p.iter().zip(&power.pmax_w).all(|(x, cap)| *x >= 0.0 && *x <= cap * (1.0 + 1e-12)));
        prop_assert!(a.consistency_error(&ch, &power).unwrap() <= 1e-9);
        // the method never ends below its own starting point
        let start = Allocation::with_mmse_filters(
            ReflectionSet::Global { budget: n as f64 }.saturate(&CVector::from_element(n, C64::new(1.0, 0.0))),
            power.pmax(),
            &ch,
            &power,
        ).unwrap();
        let (end, begin) = if rate_mode { (a.sum_rate_bps(), start.sum_rate_bps()) } else { (a.gee_bits_per_joule, start.gee_bits_per_joule) };
        prop_assert!(end >= begin * (1.0 - 1e-9));
    }
}
