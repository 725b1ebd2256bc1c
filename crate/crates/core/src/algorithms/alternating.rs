use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_power_box, check_reflection, initial_point, optimize_gamma_sca, optimize_gamma_sdr, optimize_power_mmse, optimize_power_sfp, scaled_gee, MethodConfig, RunOutput};
use crate::error::Result;
use crate::kernels::{ConvergenceTrace, ReflectionSet};
use crate::linalg::{CVector, C64};
use crate::metrics::{mmse_filter_bank, sr_mmse, Allocation};
use crate::scenario::{ChannelSet, PowerModel};

/// Unit-norm MMSE filters; SINR does not depend on the filter scale.
fn normalized_mmse_filters(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<Vec<CVector>> {
    Ok(mmse_filter_bank(gamma, p, channels)?
        .into_iter()
        .map(|c| {
            let n = c.norm();
            c / C64::new(n, 0.0)
        })
        .collect())
}

/// Approach 1 from the equal-phase, full-power start.
pub fn algorithm_one(channels: &ChannelSet, power: &PowerModel, set: ReflectionSet, config: &MethodConfig) -> Result<RunOutput> {
    let (gamma0, p0) = initial_point(set, channels.ris_elements(), power);
    algorithm_one_from(channels, power, set, config, &gamma0, &p0)
}

/// Approach 1 from a given feasible point. Each outer round updates the
/// filters, then the reflection vector, then the powers; the trace holds
/// the MMSE GEE (bit/J) after the filter refresh that closes each round.
pub fn algorithm_one_from(
    channels: &ChannelSet,
    power: &PowerModel,
    set: ReflectionSet,
    config: &MethodConfig,
    gamma0: &CVector,
    p0: &DVector<f64>,
) -> Result<RunOutput> {
    config.validate()?;
    check_reflection(gamma0, set, channels)?;
    check_power_box(p0, power)?;
    let opt_power = config.optimization_power(power);
    let options = &config.options;
    let block = options.for_block();
    let gee = |se: f64, p: &DVector<f64>| opt_power.bandwidth_hz * se / opt_power.consumed(p);

    let mut gamma = gamma0.clone();
    let mut p = p0.clone();
    let mut filters = normalized_mmse_filters(&gamma, &p, channels)?;
    let mut se = sr_mmse(&gamma, &p, channels)?;
    let mut objective = scaled_gee(se, &p, &opt_power);
    let mut trace = ConvergenceTrace::start(gee(se, &p));

    for _ in 0..options.outer_max_iter {
        let (gamma_new, _) = optimize_gamma_sca(&gamma, &p, &filters, channels, set, config.ek_convention, &block)?;
        let (p_new, _) = optimize_power_sfp(&p, &gamma_new, &filters, channels, &opt_power, &block)?;
        let se_new = sr_mmse(&gamma_new, &p_new, channels)?;
        let objective_new = scaled_gee(se_new, &p_new, &opt_power);
        if !(objective_new >= objective) {
            trace.record(gee(se, &p));
            trace.converged = true;
            break;
        }
        let change = (objective_new - objective) / objective.abs().max(f64::MIN_POSITIVE);
        gamma = gamma_new;
        p = p_new;
        filters = normalized_mmse_filters(&gamma, &p, channels)?;
        se = se_new;
        objective = objective_new;
        trace.record(gee(se, &p));
        if change < options.outer_tol {
            trace.converged = true;
            break;
        }
    }
    let allocation = Allocation::with_mmse_filters(gamma, p, channels, power)?;
    Ok(RunOutput { allocation, trace })
}

/// Approach 2 from the equal-phase, full-power start.
pub fn algorithm_two(channels: &ChannelSet, power: &PowerModel, set: ReflectionSet, config: &MethodConfig) -> Result<RunOutput> {
    let (gamma0, p0) = initial_point(set, channels.ris_elements(), power);
    algorithm_two_from(channels, power, set, config, &gamma0, &p0)
}

/// Approach 2 from a given feasible point: alternates the relaxed
/// reflection update and the MMSE power update; the trace holds the MMSE
/// GEE (bit/J) after every round.
pub fn algorithm_two_from(
    channels: &ChannelSet,
    power: &PowerModel,
    set: ReflectionSet,
    config: &MethodConfig,
    gamma0: &CVector,
    p0: &DVector<f64>,
) -> Result<RunOutput> {
    config.validate()?;
    check_reflection(gamma0, set, channels)?;
    check_power_box(p0, power)?;
    let opt_power = config.optimization_power(power);
    let options = &config.options;
    let block = options.for_block();
    let gee = |se: f64, p: &DVector<f64>| opt_power.bandwidth_hz * se / opt_power.consumed(p);

    let mut gamma = gamma0.clone();
    let mut p = p0.clone();
    let mut se = sr_mmse(&gamma, &p, channels)?;
    let mut objective = scaled_gee(se, &p, &opt_power);
    let mut trace = ConvergenceTrace::start(gee(se, &p));

    for _ in 0..options.outer_max_iter {
        let (gamma_new, _) = optimize_gamma_sdr(&gamma, &p, channels, set, &block)?;
        let (p_new, _) = optimize_power_mmse(&p, &gamma_new, channels, &opt_power, &block)?;
        let se_new = sr_mmse(&gamma_new, &p_new, channels)?;
        let objective_new = scaled_gee(se_new, &p_new, &opt_power);
        if !(objective_new >= objective) {
            trace.record(gee(se, &p));
            trace.converged = true;
            break;
        }
        let change = (objective_new - objective) / objective.abs().max(f64::MIN_POSITIVE);
        gamma = gamma_new;
        p = p_new;
        se = se_new;
        objective = objective_new;
        trace.record(gee(se, &p));
        if change < options.outer_tol {
            trace.converged = true;
            break;
        }
    }
    let allocation = Allocation::with_mmse_filters(gamma, p, channels, power)?;
    Ok(RunOutput { allocation, trace })
}

/// Full power, uniformly random phases at full reflected power, MMSE filters.
pub fn baseline_uniform_random(channels: &ChannelSet, power: &PowerModel, set: ReflectionSet, seed: u64) -> Result<Allocation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = channels.ris_elements();
    let phases = CVector::from_fn(n, |_, _| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)));
    Allocation::with_mmse_filters(set.saturate(&phases), power.pmax(), channels, power)
}
