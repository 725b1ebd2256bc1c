//! The two alternating optimization methods, their sum-rate variants, and
//! the uniform-power random-phase baseline.
//!
//! Approach 1 alternates MMSE filters, a sequential convex update of the
//! reflection vector, and sequential fractional programming on the powers.
//! Approach 2 embeds the MMSE filters into the objective and alternates a
//! relaxed semidefinite update of the reflection matrix with a fractional
//! power update.

mod alternating;
mod gamma;
mod power;

pub use alternating::{algorithm_one, algorithm_one_from, algorithm_two, algorithm_two_from, baseline_uniform_random};
pub use gamma::{optimize_gamma_sca, optimize_gamma_sdr};
pub use power::{optimize_power_mmse, optimize_power_sfp};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernels::{ConvergenceTrace, ReflectionSet, SolverOptions};
use crate::linalg::{CVector, ONE};
use crate::metrics::Allocation;
use crate::scenario::{ChannelSet, PowerModel};
use crate::surrogates::EkConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Approach1,
    Approach2,
    BaselineUniformRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[default]
    Gee,
    /// GEE with every `mu_k = 0`, whose maximizer is the sum-rate maximizer.
    SumRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionConstraint {
    /// `||gamma||^2 <= N P_R`.
    #[default]
    Global,
    /// Per-element bound, see [`LocalForm`].
    Local,
}

/// How the per-element bound reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalForm {
    /// `|gamma_n|^2 <= P_R`, the same total budget as the global constraint.
    #[default]
    SquaredModulus,
    /// `|gamma_n| <= P_R`.
    AmplitudeBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub reflection_constraint: ReflectionConstraint,
    #[serde(default)]
    pub local_form: LocalForm,
    #[serde(default)]
    pub ek_convention: EkConvention,
    #[serde(default)]
    pub options: SolverOptions,
}

impl MethodConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            objective: Objective::Gee,
            reflection_constraint: ReflectionConstraint::Global,
            local_form: LocalForm::SquaredModulus,
            ek_convention: EkConvention::Tight,
            options: SolverOptions::default(),
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_constraint(mut self, constraint: ReflectionConstraint) -> Self {
        self.reflection_constraint = constraint;
        self
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.options.validate()
    }

    /// Short labels used in result tables.
    pub fn method_id(&self) -> &'static str {
        match self.method {
            Method::Approach1 => "approach1",
            Method::Approach2 => "approach2",
            Method::BaselineUniformRandom => "baseline_uniform_random",
        }
    }

    pub fn objective_id(&self) -> &'static str {
        match self.objective {
            Objective::Gee => "gee",
            Objective::SumRate => "sum_rate",
        }
    }

    pub fn constraint_id(&self) -> &'static str {
        match self.reflection_constraint {
            ReflectionConstraint::Global => "global",
            ReflectionConstraint::Local => "local",
        }
    }

    /// Power model the optimizer sees: the sum-rate objective drops the
    /// amplifier term.
    pub fn optimization_power(&self, power: &PowerModel) -> PowerModel {
        match self.objective {
            Objective::Gee => power.clone(),
            Objective::SumRate => power.without_amplifier_cost(),
        }
    }
}

/// Feasible reflection set for `n` elements. A single element makes the
/// local and global constraints the same set, and it is then always
/// returned in its global form.
pub fn apply_local_constraint(config: &MethodConfig, n: usize, p_r: f64) -> ReflectionSet {
    let cap = match config.local_form {
        LocalForm::SquaredModulus => p_r,
        LocalForm::AmplitudeBound => p_r * p_r,
    };
    match config.reflection_constraint {
        ReflectionConstraint::Global => ReflectionSet::Global { budget: n as f64 * p_r },
        ReflectionConstraint::Local if n == 1 => ReflectionSet::Global { budget: cap },
        ReflectionConstraint::Local => ReflectionSet::Local { cap },
    }
}

/// Returned allocation, evaluated under the true power model, and the
/// outer objective trace under the optimized power model.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub allocation: Allocation,
    pub trace: ConvergenceTrace,
}

/// Equal-phase start on the boundary of the set and full power.
pub fn initial_point(set: ReflectionSet, n: usize, power: &PowerModel) -> (CVector, DVector<f64>) {
    (set.saturate(&CVector::from_element(n, ONE)), power.pmax())
}

/// Runs the configured method on one channel realization.
pub fn run_method(config: &MethodConfig, channels: &ChannelSet, power: &PowerModel, p_r: f64) -> Result<RunOutput> {
    config.validate()?;
    let set = apply_local_constraint(config, channels.ris_elements(), p_r);
    match config.method {
        Method::Approach1 => algorithm_one(channels, power, set, config),
        Method::Approach2 => algorithm_two(channels, power, set, config),
        Method::BaselineUniformRandom => {
            let allocation = baseline_uniform_random(channels, power, set, config.options.seed)?;
            let mut trace = ConvergenceTrace::start(allocation.gee_bits_per_joule);
            trace.converged = true;
            Ok(RunOutput { allocation, trace })
        }
    }
}

/// GEE up to the constant factor `B / P_c`: `SE / (1 + mu^T p / P_c)`.
/// All stopping and acceptance decisions use this so that they do not
/// depend on `P_c` when `mu = 0`.
pub(crate) fn scaled_gee(spectral_efficiency: f64, p: &DVector<f64>, power: &PowerModel) -> f64 {
    spectral_efficiency / (power.consumed(p) / power.static_power_w)
}

pub(crate) fn check_power_box(p: &DVector<f64>, power: &PowerModel) -> Result<()> {
    use crate::error::Error;
    if p.len() != power.users() {
        return Err(Error::DimensionMismatch(format!("expected {} powers, got {}", power.users(), p.len())));
    }
    for (k, (&x, &cap)) in p.iter().zip(&power.pmax_w).enumerate() {
        if !(x >= 0.0 && x <= cap * (1.0 + 1e-12)) {
            return Err(Error::InfeasibleStart(format!("p[{k}] = {x} outside [0, {cap}]")));
        }
    }
    Ok(())
}

pub(crate) fn check_reflection(gamma: &CVector, set: ReflectionSet, channels: &ChannelSet) -> Result<()> {
    use crate::error::Error;
    if gamma.len() != channels.ris_elements() {
        return Err(Error::DimensionMismatch("gamma length differs from the RIS size".into()));
    }
    let slack = 1e-9 * set.total_budget(gamma.len()).max(1.0);
    if !set.contains(gamma, slack) {
        return Err(Error::InfeasibleStart("reflection vector violates its constraint".into()));
    }
    Ok(())
}
