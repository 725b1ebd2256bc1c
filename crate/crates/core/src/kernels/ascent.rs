use nalgebra::DVector;

use super::{ConvergenceTrace, SolverOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AscentResult<T> {
    pub x: T,
    pub value: f64,
    pub trace: ConvergenceTrace,
}

const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e12;

/// Spectral projected gradient ascent. Each iteration projects one trial
/// point `P(x + s g)`, with `s` the Barzilai-Borwein estimate from the
/// previous move (1 at the start), and backtracks along the feasible segment
/// towards it until `f(x + t d) >= f(x) + c t g^T d`. Only one projection per
/// iteration is needed and the objective never decreases.
///
/// Stops when the unit-step gradient mapping `||P(x + g) - x||` drops below
/// `inner_tol`, when the line search can no longer move, or at
/// `inner_max_iter`.
pub fn projected_ascent<F, P>(
    f_and_grad: F,
    project: P,
    x0: &DVector<f64>,
    options: &SolverOptions,
) -> Result<AscentResult<DVector<f64>>>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    P: FnMut(&DVector<f64>) -> DVector<f64>,
{
    bounded_projected_ascent(f_and_grad, project, x0, f64::INFINITY, options)
}

/// [`projected_ascent`] with the trial displacement `s g` limited to
/// `max_reach` in norm. For a bounded set, reaching much further than its
/// diameter only makes the projection harder without changing where the
/// iteration can go.
pub(crate) fn bounded_projected_ascent<F, P>(
    mut f_and_grad: F,
    mut project: P,
    x0: &DVector<f64>,
    max_reach: f64,
    options: &SolverOptions,
) -> Result<AscentResult<DVector<f64>>>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
    P: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut x = project(x0);
    let (mut fx, mut g) = f_and_grad(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut trace = ConvergenceTrace::start(fx);
    let mut step = 1.0;
    let mut last_move: Option<(DVector<f64>, DVector<f64>)> = None;

    for _ in 0..options.inner_max_iter {
        let mapping = project(&(&x + &g)) - &x;
        let mapping_norm = mapping.norm();
        if mapping_norm <= options.inner_tol {
            trace.converged = true;
            break;
        }
        let direction = match &last_move {
            Some((s, y)) => {
                let curvature = -s.dot(y);
                step = if curvature > 0.0 { s.norm_squared() / curvature } else { 2.0 * step };
                step = step.clamp(MIN_STEP, MAX_STEP).min(max_reach / g.norm()).max(MIN_STEP);
                if step == 1.0 { mapping } else { project(&(&x + &g * step)) - &x }
            }
            None => mapping,
        };
        let slope = g.dot(&direction);

        let mut accepted = None;
        let mut t = 1.0;
        while t >= MIN_STEP && slope > 0.0 {
            let candidate = &x + &direction * t;
            let (fc, gc) = f_and_grad(&candidate);
            let finite = fc.is_finite() && gc.iter().all(|v| v.is_finite());
            if finite && fc >= fx + options.armijo_c * t * slope {
                accepted = Some((candidate, fc, gc));
                break;
            }
            t *= options.armijo_shrink;
        }
        let Some((candidate, fc, gc)) = accepted.filter(|(_, fc, _)| *fc > fx) else {
            // no representable ascent step left: stationary to working precision
            trace.converged = mapping_norm <= options.inner_tol.sqrt();
            break;
        };
        last_move = Some((&candidate - &x, &gc - &g));
        x = candidate;
        fx = fc;
        g = gc;
        trace.record(fx);
    }
    Ok(AscentResult { x, value: fx, trace })
}

/// [`projected_ascent`] over the box `lo <= x <= hi`.
pub fn box_projected_ascent<F>(
    f_and_grad: F,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    x0: &DVector<f64>,
    options: &SolverOptions,
) -> Result<AscentResult<DVector<f64>>>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    if lo.len() != hi.len() || lo.len() != x0.len() {
        return Err(Error::DimensionMismatch("box bounds and start differ in length".into()));
    }
    if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
        return Err(Error::InfeasibleStart("empty box".into()));
    }
    let project = |x: &DVector<f64>| DVector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i]));
    projected_ascent(f_and_grad, project, x0, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bowl(target: DVector<f64>) -> impl FnMut(&DVector<f64>) -> (f64, DVector<f64>) {
        move |x| {
            let d = x - &target;
            (-d.norm_squared(), -2.0 * d)
        }
    }

    #[test]
    fn interior_bowl_converges_to_center() {
        let lo = DVector::from_element(3, -1.0);
        let hi = DVector::from_element(3, 1.0);
        let target = DVector::from_vec(vec![0.3, -0.2, 0.9]);
        let res = box_projected_ascent(bowl(target.clone()), &lo, &hi, &DVector::zeros(3), &SolverOptions::default()).unwrap();
        assert!((res.x - target).norm() < 1e-6);
        assert!(res.trace.converged);
        assert!(res.trace.is_non_decreasing(1e-10));
    }

    #[test]
    fn exterior_bowl_converges_to_projection() {
        let lo = DVector::from_element(3, 0.0);
        let hi = DVector::from_element(3, 1.0);
        let target = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let res = box_projected_ascent(bowl(target), &lo, &hi, &DVector::from_element(3, 0.5), &SolverOptions::default()).unwrap();
        assert!((res.x - DVector::from_vec(vec![1.0, 0.0, 0.5])).norm() < 1e-6);
    }

    /// Enumerates every face of the box: free coordinates solve the reduced
    /// stationarity system, fixed ones sit at a bound. The best feasible
    /// candidate is the global maximizer of a concave quadratic.
    fn face_enumeration(h: &DMatrix<f64>, c: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
        let n = c.len();
        let f = |x: &DVector<f64>| c.dot(x) - 0.5 * x.dot(&(h * x));
        let mut best = f64::NEG_INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let mut state = vec![0usize; n];
            let mut rest = code;
            for s in state.iter_mut() {
                *s = rest % 3;
                rest /= 3;
            }
            let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
            let mut x = DVector::zeros(n);
            for i in 0..n {
                match state[i] {
                    1 => x[i] = lo[i],
                    2 => x[i] = hi[i],
                    _ => {}
                }
            }
            if !free.is_empty() {
                let m = free.len();
                let hff = DMatrix::from_fn(m, m, |r, s| h[(free[r], free[s])]);
                let rhs = DVector::from_fn(m, |r, _| {
                    let i = free[r];
                    c[i] - (0..n).filter(|j| state[*j] != 0).map(|j| h[(i, j)] * x[j]).sum::<f64>()
                });
                let Some(sol) = hff.lu().solve(&rhs) else { continue };
                for (r, &i) in free.iter().enumerate() {
                    x[i] = sol[r];
                }
            }
            if (0..n).all(|i| x[i] >= lo[i] - 1e-12 && x[i] <= hi[i] + 1e-12) {
                best = best.max(f(&x));
            }
        }
        best
    }

    #[test]
    fn random_concave_quadratic_matches_face_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-1.0..1.0));
            let h = &a * a.transpose() + DMatrix::identity(3, 3) * 0.1;
            let c = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
            let lo = DVector::from_element(3, -0.5);
            let hi = DVector::from_element(3, 1.0);
            let f = |x: &DVector<f64>| (c.dot(x) - 0.5 * x.dot(&(&h * x)), &c - &h * x);
            let res = box_projected_ascent(f, &lo, &hi, &DVector::zeros(3), &SolverOptions::default()).unwrap();
            let oracle = face_enumeration(&h, &c, &lo, &hi);
            assert!((res.value - oracle).abs() < 1e-6, "{} vs {}", res.value, oracle);
            assert!(res.trace.is_non_decreasing(1e-10));
        }
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let f = |_: &DVector<f64>| (f64::NAN, DVector::zeros(1));
        let lo = DVector::zeros(1);
        let hi = DVector::from_element(1, 1.0);
        assert!(matches!(box_projected_ascent(f, &lo, &hi, &lo, &SolverOptions::default()), Err(Error::NonFinite)));
    }
}
