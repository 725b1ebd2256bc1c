use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::check_reflection;
use crate::error::{Error, Result};
use crate::kernels::{
    extract_rank_one, max_linear_minus_quadratic_ball, projected_ascent, psd_projected_ascent, ConvergenceTrace,
    ReflectionSet, SolverOptions,
};
use crate::linalg::{outer, random_cvector, stack_vector, unstack_vector, CMatrix, CVector, C64};
use crate::metrics::{sr_mmse, spectral_efficiency};
use crate::scenario::ChannelSet;
use crate::surrogates::{sr_mmse_lifted, EkConvention, GammaSurrogateCoeffs, LiftedSurrogate, QuadraticModel};

/// Size of the random nudge applied to a degenerate expansion point.
const NUDGE: f64 = 1e-8;
const MAX_NUDGES: usize = 20;

fn coefficients_with_nudge(
    gamma_bar: &CVector,
    p: &DVector<f64>,
    filters: &[CVector],
    channels: &ChannelSet,
    set: ReflectionSet,
    convention: EkConvention,
    rng: &mut ChaCha8Rng,
) -> Result<(CVector, GammaSurrogateCoeffs)> {
    let mut point = gamma_bar.clone();
    for _ in 0..=MAX_NUDGES {
        match GammaSurrogateCoeffs::build(&point, p, filters, channels, convention) {
            Ok(c) => return Ok((point, c)),
            Err(Error::DegenerateExpansion(_)) => {
                let dir = random_cvector(point.len(), rng);
                let step = C64::new(NUDGE / dir.norm(), 0.0);
                point = set.project(&(&point + dir * step));
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateExpansion(0))
}

/// Maximizes the quadratic surrogate over the reflection set: exactly on the
/// ball, by projected ascent under per-element bounds.
fn maximize_model(model: &QuadraticModel, start: &CVector, set: ReflectionSet, options: &SolverOptions) -> Result<CVector> {
    match set {
        ReflectionSet::Global { budget } => Ok(max_linear_minus_quadratic_ball(&model.b, &model.q, budget)?.x),
        ReflectionSet::Local { cap } => {
            let g0 = model.gradient(start);
            let scale = model.value(start).abs().max(g0.iter().map(|z| z.norm()).fold(0.0, f64::max) * cap.sqrt()).max(f64::MIN_POSITIVE);
            let f = |x: &DVector<f64>| {
                let g = unstack_vector(x);
                (model.value(&g) / scale, stack_vector(&model.gradient(&g)) / scale)
            };
            let project = |x: &DVector<f64>| stack_vector(&set.project(&unstack_vector(x)));
            Ok(unstack_vector(&projected_ascent(f, project, &stack_vector(start), options)?.x))
        }
    }
}

/// Sequential convex update of the reflection vector for fixed powers and
/// filters. The trace holds the fixed-filter spectral efficiency.
pub fn optimize_gamma_sca(
    gamma0: &CVector,
    p: &DVector<f64>,
    filters: &[CVector],
    channels: &ChannelSet,
    set: ReflectionSet,
    convention: EkConvention,
    options: &SolverOptions,
) -> Result<(CVector, ConvergenceTrace)> {
    check_reflection(gamma0, set, channels)?;
    let mut gamma = gamma0.clone();
    let mut value = spectral_efficiency(&gamma, p, filters, channels)?;
    let mut trace = ConvergenceTrace::start(value);
    if p.iter().all(|&x| x == 0.0) {
        trace.record(value);
        trace.converged = true;
        return Ok((gamma, trace));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    for _ in 0..options.outer_max_iter {
        let (point, coeffs) = coefficients_with_nudge(&gamma, p, filters, channels, set, convention, &mut rng)?;
        let model = coeffs.quadratic_model(channels);
        let candidate = maximize_model(&model, &point, set, options)?;
        let candidate_value = spectral_efficiency(&candidate, p, filters, channels)?;
        if !(candidate_value >= value) {
            trace.record(value);
            trace.converged = true;
            break;
        }
        let change = (candidate_value - value) / value.abs().max(f64::MIN_POSITIVE);
        gamma = candidate;
        value = candidate_value;
        trace.record(value);
        if change < options.outer_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((gamma, trace))
}

/// Relaxed semidefinite update of the reflection vector under the MMSE
/// sum rate, followed by Gaussian randomization. The trace holds the
/// relaxed sum rate of every lifted iterate; the returned vector never does
/// worse than `gamma0`.
pub fn optimize_gamma_sdr(
    gamma0: &CVector,
    p: &DVector<f64>,
    channels: &ChannelSet,
    set: ReflectionSet,
    options: &SolverOptions,
) -> Result<(CVector, ConvergenceTrace)> {
    check_reflection(gamma0, set, channels)?;
    let start_value = sr_mmse(gamma0, p, channels)?;
    let mut x_bar = outer(gamma0);
    let mut value = sr_mmse_lifted(&x_bar, p, channels)?;
    let mut trace = ConvergenceTrace::start(value);
    if p.iter().all(|&x| x == 0.0) {
        trace.record(value);
        trace.converged = true;
        return Ok((gamma0.clone(), trace));
    }
    let psd_set = set.lifted();
    let n = gamma0.len();

    for _ in 0..options.outer_max_iter {
        let surrogate = LiftedSurrogate::build(&x_bar, p, channels)?;
        let (_, g_bar) = surrogate.value_and_gradient(&x_bar, channels)?;
        let scale = value.abs().max(g_bar.iter().map(|z| z.norm()).fold(0.0, f64::max) * set.total_budget(n)).max(f64::MIN_POSITIVE);
        let f = |x: &CMatrix| match surrogate.value_and_gradient(x, channels) {
            Ok((v, g)) => (v / scale, g / C64::new(scale, 0.0)),
            Err(_) => (f64::NAN, CMatrix::from_element(n, n, C64::new(f64::NAN, 0.0))),
        };
        let candidate = psd_projected_ascent(f, psd_set, &x_bar, options)?.x;
        let candidate_value = sr_mmse_lifted(&candidate, p, channels)?;
        if !(candidate_value >= value) {
            trace.record(value);
            trace.converged = true;
            break;
        }
        let change = (candidate_value - value) / value.abs().max(f64::MIN_POSITIVE);
        x_bar = candidate;
        value = candidate_value;
        trace.record(value);
        if change < options.outer_tol {
            trace.converged = true;
            break;
        }
    }

    let gamma = extract_rank_one(&x_bar, channels, p, set, options.randomization_count, options.seed)?;
    let gamma = set.project(&gamma);
    if sr_mmse(&gamma, p, channels)? >= start_value {
        Ok((gamma, trace))
    } else {
        Ok((gamma0.clone(), trace))
    }
}
