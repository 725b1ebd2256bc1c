//! Convex building blocks called by the sequential methods on every
//! iteration: an exact ball-constrained quadratic solver, Dinkelbach's
//! method, projected ascent over boxes and PSD sets, and Gaussian
//! randomization for rank-one recovery.

mod ascent;
mod ball;
mod dinkelbach;
mod feasible;
mod psd;
mod randomization;

pub use ascent::{box_projected_ascent, projected_ascent, AscentResult};
pub use ball::{max_linear_minus_quadratic_ball, BallSolution};
pub use dinkelbach::{dinkelbach, AffineDenominator, DinkelbachResult, DINKELBACH_MAX_ITER};
pub use feasible::ReflectionSet;
pub use psd::{project_psd_diag_cap, project_psd_trace_ball, psd_projected_ascent, PsdSet};
pub use randomization::{extract_rank_one, extract_rank_one_by};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerances, iteration caps, line-search constants, and the seed shared by
/// every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative objective change that ends an outer or sequential loop.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    /// Relative change that ends a block update inside an alternating method.
    pub block_tol: f64,
    pub block_max_iter: usize,
    /// Gradient-mapping norm that ends a projected-ascent run.
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub dinkelbach_tol: f64,
    pub randomization_count: usize,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            outer_tol: 1e-6,
            outer_max_iter: 100,
            block_tol: 1e-9,
            block_max_iter: 1000,
            inner_tol: 1e-9,
            inner_max_iter: 2000,
            dinkelbach_tol: 1e-10,
            randomization_count: 100,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let tolerances = [self.outer_tol, self.block_tol, self.inner_tol, self.dinkelbach_tol];
        if tolerances.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidOptions("tolerances must be positive".into()));
        }
        if self.outer_max_iter == 0 || self.block_max_iter == 0 || self.inner_max_iter == 0 {
            return Err(Error::InvalidOptions("iteration caps must be at least 1".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::InvalidOptions("armijo_c must lie in (0, 1)".into()));
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return Err(Error::InvalidOptions("armijo_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Options for a block update called from an alternating method: the
    /// block's own sequential loop runs to `block_tol`.
    pub fn for_block(&self) -> Self {
        Self { outer_tol: self.block_tol, outer_max_iter: self.block_max_iter, ..self.clone() }
    }
}

/// Objective values of an iterative method, starting with the initial point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub objective_per_iteration: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

impl ConvergenceTrace {
    pub fn start(value: f64) -> Self {
        Self { objective_per_iteration: vec![value], converged: false, iterations_used: 0 }
    }

    pub fn record(&mut self, value: f64) {
        self.objective_per_iteration.push(value);
        self.iterations_used += 1;
    }

    pub fn last(&self) -> f64 {
        self.objective_per_iteration.last().copied().unwrap_or(f64::NAN)
    }

    /// Largest drop between consecutive entries (zero for a monotone trace).
    pub fn worst_decrease(&self) -> f64 {
        self.objective_per_iteration.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn is_non_decreasing(&self, slack: f64) -> bool {
        self.worst_decrease() <= slack
    }

    /// Monotonicity with each drop measured relative to the value it left.
    pub fn is_non_decreasing_relative(&self, slack: f64) -> bool {
        self.objective_per_iteration.windows(2).all(|w| w[0] - w[1] <= slack * w[0].abs())
    }
}
