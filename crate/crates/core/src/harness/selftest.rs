use std::f64::consts::E;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::drop_seed;
use crate::algorithms::{apply_local_constraint, run_method, Method, MethodConfig};
use crate::error::Result;
use crate::kernels::{dinkelbach, max_linear_minus_quadratic_ball, project_psd_trace_ball, AffineDenominator, ReflectionSet, SolverOptions};
use crate::linalg::{outer, random_cmatrix, random_cvector, CMatrix, CVector, C64};
use crate::metrics::{mmse_filters, mmse_user_rates, mmse_user_rates_det_form, sinr, spectral_efficiency};
use crate::scenario::{generate_drop, total_static_power, ChannelSet, PowerModel, SystemScenario};
use crate::surrogates::{sr_mmse_lifted, EkConvention, GammaSurrogateCoeffs, LiftedSurrogate, MmsePowerSurrogate, PowerSurrogate};

/// Size of the self-test; the default is a desk-scale deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestConfig {
    pub scenario: SystemScenario,
    pub drops: usize,
    pub base_seed: u64,
}

impl Default for SelfTestConfig {
    fn default() -> Self {
        Self { scenario: SystemScenario::default().with_sizes(2, 2, 16), drops: 20, base_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
}

impl SuiteResult {
    pub fn ok(&self) -> bool {
        self.passed == self.total
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub suites: Vec<SuiteResult>,
}

impl SelfTestReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::ok)
    }
}

struct Tally {
    name: &'static str,
    passed: usize,
    total: usize,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self { name, passed: 0, total: 0 }
    }

    fn check(&mut self, ok: bool) {
        self.total += 1;
        self.passed += ok as usize;
    }

    fn done(self) -> SuiteResult {
        SuiteResult { name: self.name, passed: self.passed, total: self.total }
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn below(value: f64, truth: f64) -> bool {
    value <= truth + 1e-9 * truth.abs().max(1.0)
}

fn random_powers(rng: &mut ChaCha8Rng, power: &PowerModel) -> DVector<f64> {
    DVector::from_fn(power.users(), |k, _| rng.random_range(0.05..1.0) * power.pmax_w[k])
}

fn random_reflection(rng: &mut ChaCha8Rng, set: ReflectionSet, n: usize) -> CVector {
    set.saturate(&random_cvector(n, rng)) * C64::new(rng.random_range(0.1..1.0), 0.0)
}

fn kernel_checks(t: &mut Tally, rng: &mut ChaCha8Rng) {
    let a = random_cmatrix(4, 4, rng);
    let q = &a * a.adjoint();
    let b = random_cvector(4, rng);
    match max_linear_minus_quadratic_ball(&b, &q, 0.5) {
        Ok(sol) => t.check(sol.stationarity_residual(&b, &q) < 1e-8 && sol.x.norm_squared() <= 0.5 * (1.0 + 1e-9)),
        Err(_) => t.check(false),
    }
    let mut d = CMatrix::zeros(2, 2);
    d[(0, 0)] = C64::new(3.0, 0.0);
    d[(1, 1)] = C64::new(-1.0, 0.0);
    let mut expected = CMatrix::zeros(2, 2);
    expected[(0, 0)] = C64::new(2.0, 0.0);
    t.check(project_psd_trace_ball(&d, 2.0).is_ok_and(|p| (p - expected).norm() < 1e-12));
    let num = |x: &DVector<f64>| ((1.0 + x[0]).log2(), DVector::from_element(1, std::f64::consts::LOG2_E / (1.0 + x[0])));
    let den = AffineDenominator { coef: DVector::from_element(1, 1.0), constant: 1.0 };
    let lo = DVector::zeros(1);
    let hi = DVector::from_element(1, 10.0);
    let res = dinkelbach(num, &den, &lo, &hi, &DVector::from_element(1, 5.0), &SolverOptions::default());
    t.check(res.is_ok_and(|r| (r.x[0] - (E - 1.0)).abs() < 1e-4));
}

fn surrogate_checks(t: &mut Tally, rng: &mut ChaCha8Rng, ch: &ChannelSet, power: &PowerModel, set: ReflectionSet) -> Result<()> {
    let n = ch.ris_elements();
    let gamma = random_reflection(rng, set, n);
    let p = random_powers(rng, power);
    let filters = mmse_filters(&gamma, &p, ch)?;
    let trials = 50;

    let coeffs = GammaSurrogateCoeffs::build(&gamma, &p, &filters, ch, EkConvention::Tight)?;
    let truth = spectral_efficiency(&gamma, &p, &filters, ch)?;
    let mut ok = rel_close(coeffs.value(&gamma, ch), truth, 1e-9);
    for _ in 0..trials {
        let g = random_reflection(rng, set, n);
        ok &= below(coeffs.value(&g, ch), spectral_efficiency(&g, &p, &filters, ch)?);
    }
    t.check(ok);

    let x_bar = outer(&gamma);
    let lifted = LiftedSurrogate::build(&x_bar, &p, ch)?;
    let mut ok = rel_close(lifted.value(&x_bar, ch)?, sr_mmse_lifted(&x_bar, &p, ch)?, 1e-9);
    for _ in 0..trials {
        let x = outer(&random_reflection(rng, set, n));
        ok &= below(lifted.value(&x, ch)?, sr_mmse_lifted(&x, &p, ch)?);
    }
    t.check(ok);

    let fixed = PowerSurrogate::build(&p, &gamma, &filters, ch, power)?;
    let mut ok = rel_close(fixed.value(&p), fixed.true_gee(&p), 1e-9);
    for _ in 0..trials {
        let q = random_powers(rng, power);
        ok &= below(fixed.value(&q), fixed.true_gee(&q));
    }
    t.check(ok);

    let mmse = MmsePowerSurrogate::build(&p, &gamma, ch, power)?;
    let mut ok = rel_close(mmse.value(&p)?, mmse.true_gee(&p)?, 1e-9);
    for _ in 0..trials {
        let q = random_powers(rng, power);
        ok &= below(mmse.value(&q)?, mmse.true_gee(&q)?);
    }
    t.check(ok);
    Ok(())
}

/// Runs the invariant and oracle suites on seeded drops: kernel hand cases,
/// the determinant identity, MMSE dominance, surrogate tightness and
/// minorization, and monotone feasible convergence of both methods.
pub fn self_test(config: &SelfTestConfig) -> Result<SelfTestReport> {
    let scenario = &config.scenario;
    let power = total_static_power(scenario)?;
    let mut kernels = Tally::new("kernels");
    let mut identity = Tally::new("determinant_identity");
    let mut dominance = Tally::new("mmse_dominance");
    let mut surrogates = Tally::new("surrogates");
    let mut convergence = Tally::new("monotone_convergence");

    for d in 0..config.drops {
        let seed = drop_seed(config.base_seed, d);
        let ch = generate_drop(scenario, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let global = ReflectionSet::Global { budget: scenario.ris_elements as f64 * scenario.p_r };

        kernel_checks(&mut kernels, &mut rng);

        let gamma = random_reflection(&mut rng, global, scenario.ris_elements);
        let p = random_powers(&mut rng, &power);
        let sinr_form = mmse_user_rates(&gamma, &p, &ch)?;
        let det_form = mmse_user_rates_det_form(&gamma, &p, &ch)?;
        identity.check(sinr_form.iter().zip(&det_form).all(|(a, b)| rel_close(*a, *b, 1e-8)));

        let filters = mmse_filters(&gamma, &p, &ch)?;
        let mut ok = true;
        for k in 0..ch.users() {
            let best = sinr(k, &gamma, &p, &filters, &ch)?;
            for _ in 0..100 {
                let mut trial = filters.clone();
                trial[k] = random_cvector(ch.bs_antennas(), &mut rng);
                ok &= sinr(k, &gamma, &p, &trial, &ch)? <= best * (1.0 + 1e-9);
            }
        }
        dominance.check(ok);

        surrogate_checks(&mut surrogates, &mut rng, &ch, &power, global)?;

        for method in [Method::Approach1, Method::Approach2] {
            let cfg = MethodConfig::new(method);
            let out = run_method(&cfg, &ch, &power, scenario.p_r)?;
            let set = apply_local_constraint(&cfg, scenario.ris_elements, scenario.p_r);
            let a = &out.allocation;
            let feasible = set.contains(&a.gamma, 1e-9 * set.total_budget(scenario.ris_elements))
                && a.p.iter().zip(&power.pmax_w).all(|(x, cap)| *x >= 0.0 && *x <= cap * (1.0 + 1e-12));
            convergence.check(feasible && out.trace.converged && out.trace.is_non_decreasing_relative(1e-9));
        }
    }
    Ok(SelfTestReport { suites: vec![kernels.done(), identity.done(), dominance.done(), surrogates.done(), convergence.done()] })
}
