use nalgebra::DVector;

use super::{box_projected_ascent, SolverOptions};
use crate::error::{Error, Result};

/// Hard cap on parametric iterations; superlinear convergence makes the
/// default tolerance reachable in a handful.
pub const DINKELBACH_MAX_ITER: usize = 50;

/// `D(x) = coef^T x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDenominator {
    pub coef: DVector<f64>,
    pub constant: f64,
}

impl AffineDenominator {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.coef.dot(x) + self.constant
    }

    /// Smallest value over the box, attained at a vertex.
    pub fn min_over_box(&self, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
        self.constant + self.coef.iter().zip(lo.iter().zip(hi.iter())).map(|(c, (l, h))| (c * l).min(c * h)).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct DinkelbachResult {
    pub x: DVector<f64>,
    pub value: f64,
    /// Ratio parameter at the start of every parametric iteration, then the final ratio.
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Maximizes `N(x) / D(x)` over a box for concave `N` and affine `D > 0`.
/// Each iteration maximizes `N(x) - lambda D(x)` with [`box_projected_ascent`]
/// warm-started at the incumbent, then sets `lambda = N(x) / D(x)`; stops
/// once `|N(x) - lambda D(x)| < dinkelbach_tol`. Warm starting keeps the
/// `lambda` sequence non-decreasing.
pub fn dinkelbach<F>(
    numerator: F,
    denominator: &AffineDenominator,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    x0: &DVector<f64>,
    options: &SolverOptions,
) -> Result<DinkelbachResult>
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    if denominator.coef.len() != lo.len() {
        return Err(Error::DimensionMismatch("denominator and box differ in length".into()));
    }
    let d_min = denominator.min_over_box(lo, hi);
    if !(d_min > 0.0) {
        return Err(Error::NonPositiveDenominator(d_min));
    }
    let clamp = |x: &DVector<f64>| DVector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i]));
    let mut x = clamp(x0);
    let (n0, _) = numerator(&x);
    if !n0.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut lambda = n0 / denominator.eval(&x);
    let mut lambdas = vec![lambda];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < DINKELBACH_MAX_ITER {
        iterations += 1;
        let lam = lambda;
        let parametric = |y: &DVector<f64>| {
            let (nv, ng) = numerator(y);
            (nv - lam * denominator.eval(y), ng - &denominator.coef * lam)
        };
        let res = box_projected_ascent(parametric, lo, hi, &x, options)?;
        x = res.x;
        let (nv, _) = numerator(&x);
        let dv = denominator.eval(&x);
        let gap = nv - lam * dv;
        let next = nv / dv;
        if next >= lambda {
            lambda = next;
        }
        lambdas.push(lambda);
        if gap.abs() < options.dinkelbach_tol {
            converged = true;
            break;
        }
    }
    Ok(DinkelbachResult { value: lambda, x, lambdas, iterations, converged })
}
