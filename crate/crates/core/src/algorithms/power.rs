use nalgebra::DVector;

use super::{check_power_box, scaled_gee};
use crate::error::Result;
use crate::kernels::{dinkelbach, AffineDenominator, ConvergenceTrace, SolverOptions};
use crate::linalg::CVector;
use crate::metrics::{mmse_user_rates, spectral_efficiency};
use crate::scenario::{ChannelSet, PowerModel};
use crate::surrogates::{MmsePowerSurrogate, PowerSurrogate};

trait ConcaveNumerator {
    fn numerator_at(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)>;
}

impl ConcaveNumerator for PowerSurrogate {
    fn numerator_at(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        Ok(self.numerator(p))
    }
}

impl ConcaveNumerator for MmsePowerSurrogate {
    fn numerator_at(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.numerator(p)
    }
}

/// Sequential fractional programming on `q = p / Pmax`. Each round solves
/// the surrogate ratio by Dinkelbach with the numerator scaled to unit size
/// and the denominator divided by its value at the expansion point.
fn sequential_power<S, B, E>(
    p0: &DVector<f64>,
    power: &PowerModel,
    options: &SolverOptions,
    build: B,
    spectral_efficiency: E,
) -> Result<(DVector<f64>, ConvergenceTrace)>
where
    S: ConcaveNumerator,
    B: Fn(&DVector<f64>) -> Result<S>,
    E: Fn(&DVector<f64>) -> Result<f64>,
{
    check_power_box(p0, power)?;
    let pmax = power.pmax();
    let k_users = pmax.len();
    let gee = |se: f64, p: &DVector<f64>| power.bandwidth_hz * se / power.consumed(p);

    let mut p_bar = DVector::from_fn(k_users, |i, _| p0[i].min(pmax[i]));
    let mut se = spectral_efficiency(&p_bar)?;
    let mut objective = scaled_gee(se, &p_bar, power);
    let mut trace = ConvergenceTrace::start(gee(se, &p_bar));

    for _ in 0..options.outer_max_iter {
        let surrogate = build(&p_bar)?;
        let (n_bar, g_bar) = surrogate.numerator_at(&p_bar)?;
        let grad_scale = g_bar.iter().zip(pmax.iter()).map(|(g, m)| (g * m).abs()).fold(0.0, f64::max);
        let scale = n_bar.abs().max(grad_scale).max(f64::MIN_POSITIVE);
        let numerator = |q: &DVector<f64>| {
            let p = q.component_mul(&pmax);
            match surrogate.numerator_at(&p) {
                Ok((n, g)) => (n / scale, g.component_mul(&pmax) / scale),
                Err(_) => (f64::NAN, DVector::from_element(k_users, f64::NAN)),
            }
        };
        let d_bar = power.consumed(&p_bar);
        let denominator = AffineDenominator {
            coef: DVector::from_fn(k_users, |i, _| power.mu[i] * pmax[i] / d_bar),
            constant: power.static_power_w / d_bar,
        };
        let q_bar = p_bar.component_div(&pmax);
        let res = dinkelbach(numerator, &denominator, &DVector::zeros(k_users), &DVector::from_element(k_users, 1.0), &q_bar, options)?;
        let p_new = DVector::from_fn(k_users, |i, _| (res.x[i].clamp(0.0, 1.0) * pmax[i]).min(pmax[i]));
        let se_new = spectral_efficiency(&p_new)?;
        let objective_new = scaled_gee(se_new, &p_new, power);
        if !(objective_new >= objective) {
            trace.record(gee(se, &p_bar));
            trace.converged = true;
            break;
        }
        let change = (objective_new - objective) / objective.abs().max(f64::MIN_POSITIVE);
        p_bar = p_new;
        se = se_new;
        objective = objective_new;
        trace.record(gee(se, &p_bar));
        if change < options.outer_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((p_bar, trace))
}

/// Power update of Approach 1 for fixed reflection vector and filters.
/// The trace holds the fixed-filter GEE in bit/J after every round.
pub fn optimize_power_sfp(
    p0: &DVector<f64>,
    gamma: &CVector,
    filters: &[CVector],
    channels: &ChannelSet,
    power: &PowerModel,
    options: &SolverOptions,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    sequential_power(
        p0,
        power,
        options,
        |p_bar| PowerSurrogate::build(p_bar, gamma, filters, channels, power),
        |p| spectral_efficiency(gamma, p, filters, channels),
    )
}

/// Power update of Approach 2 with MMSE filters embedded in the objective.
/// The trace holds the MMSE GEE in bit/J after every round.
pub fn optimize_power_mmse(
    p0: &DVector<f64>,
    gamma: &CVector,
    channels: &ChannelSet,
    power: &PowerModel,
    options: &SolverOptions,
) -> Result<(DVector<f64>, ConvergenceTrace)> {
    sequential_power(
        p0,
        power,
        options,
        |p_bar| MmsePowerSurrogate::build(p_bar, gamma, channels, power),
        |p| Ok(mmse_user_rates(gamma, p, channels)?.iter().sum()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_cmatrix, random_cvector, CMatrix, C64, ONE};
    use crate::metrics::{gee_mmse, mmse_filter_bank, rates_and_gee};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_user(rng: &mut ChaCha8Rng) -> (ChannelSet, CVector, PowerModel) {
        let g = random_cmatrix(2, 3, rng);
        let ch = ChannelSet::new(g, vec![random_cvector(3, rng)], 1.0).unwrap();
        let pm = PowerModel::new(rng.random_range(0.5..2.0), vec![rng.random_range(0.5..2.0)], vec![20.0], 1.0).unwrap();
        (ch, random_cvector(3, rng), pm)
    }

    fn grid_max(f: impl Fn(f64) -> f64, hi: f64, points: usize) -> f64 {
        (0..=points).map(|i| f(hi * i as f64 / points as f64)).fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn single_user_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let opts = SolverOptions::default();
        for _ in 0..10 {
            let (ch, gamma, pm) = single_user(&mut rng);
            let p0 = pm.pmax();
            let filters = mmse_filter_bank(&gamma, &p0, &ch).unwrap();
            let gee = |x: f64| rates_and_gee(&gamma, &DVector::from_element(1, x), &filters, &ch, &pm).unwrap().1;
            let best = grid_max(gee, 20.0, 10_000);
            let (p, trace) = optimize_power_sfp(&p0, &gamma, &filters, &ch, &pm, &opts).unwrap();
            assert!(gee(p[0]) >= best * (1.0 - 1e-3), "{} vs {best}", gee(p[0]));
            assert!(trace.is_non_decreasing_relative(1e-12));

            let gee = |x: f64| gee_mmse(&gamma, &DVector::from_element(1, x), &ch, &pm).unwrap();
            let best = grid_max(gee, 20.0, 10_000);
            let (p, trace) = optimize_power_mmse(&p0, &gamma, &ch, &pm, &opts).unwrap();
            assert!(gee(p[0]) >= best * (1.0 - 1e-3));
            assert!(trace.is_non_decreasing_relative(1e-12));
        }
    }

    /// Diagonal cascades and one-hot filters: user `k` only reaches antenna `k`.
    fn orthogonal_users(k: usize, rng: &mut ChaCha8Rng) -> (ChannelSet, CVector, Vec<CVector>) {
        let mut g = CMatrix::zeros(k, k);
        for i in 0..k {
            g[(i, i)] = ONE;
        }
        let h = (0..k)
            .map(|i| {
                let mut v = CVector::zeros(k);
                v[i] = C64::new(rng.random_range(0.5..2.0), 0.0);
                v
            })
            .collect();
        let ch = ChannelSet::new(g, h, 1.0).unwrap();
        let filters = (0..k)
            .map(|i| {
                let mut c = CVector::zeros(k);
                c[i] = ONE;
                c
            })
            .collect();
        (ch, CVector::from_element(k, ONE), filters)
    }

    #[test]
    fn interference_free_with_huge_static_power_goes_to_pmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ch, gamma, filters) = orthogonal_users(3, &mut rng);
        let pm = PowerModel::new(1e6 * 3.0 * 2.0, vec![1.0; 3], vec![2.0; 3], 1.0).unwrap();
        let p0 = DVector::from_element(3, 0.5);
        let (p, _) = optimize_power_sfp(&p0, &gamma, &filters, &ch, &pm, &SolverOptions::default()).unwrap();
        assert!((p - pm.pmax()).amax() < 1e-6);
        let (p, _) = optimize_power_mmse(&p0, &gamma, &ch, &pm, &SolverOptions::default()).unwrap();
        assert!((p - pm.pmax()).amax() < 1e-6);
    }

    #[test]
    fn full_power_is_a_fixed_point_without_amplifier_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (ch, gamma, filters) = orthogonal_users(2, &mut rng);
        let pm = PowerModel::new(1.0, vec![0.0; 2], vec![3.0; 2], 1.0).unwrap();
        let (p, trace) = optimize_power_sfp(&pm.pmax(), &gamma, &filters, &ch, &pm, &SolverOptions::default()).unwrap();
        assert_eq!(p, pm.pmax());
        assert_eq!(trace.iterations_used, 1);
    }

    #[test]
    fn restart_at_solution_stops_after_one_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_cmatrix(2, 3, &mut rng);
        let h = (0..2).map(|_| random_cvector(3, &mut rng)).collect();
        let ch = ChannelSet::new(g, h, 1.0).unwrap();
        let gamma = random_cvector(3, &mut rng);
        let pm = PowerModel::new(1.0, vec![1.0; 2], vec![10.0; 2], 1.0).unwrap();
        let opts = SolverOptions::default();
        let (p, _) = optimize_power_mmse(&pm.pmax(), &gamma, &ch, &pm, &opts).unwrap();
        let (p2, trace) = optimize_power_mmse(&p, &gamma, &ch, &pm, &opts).unwrap();
        assert_eq!(trace.iterations_used, 1);
        let before = gee_mmse(&gamma, &p, &ch, &pm).unwrap();
        let after = gee_mmse(&gamma, &p2, &ch, &pm).unwrap();
        assert!(after >= before && (after - before) <= opts.outer_tol * before);
    }

    #[test]
    fn rejects_start_outside_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (ch, gamma, pm) = single_user(&mut rng);
        let err = optimize_power_mmse(&DVector::from_element(1, 25.0), &gamma, &ch, &pm, &SolverOptions::default());
        assert!(matches!(err, Err(crate::error::Error::InfeasibleStart(_))));
    }
}
