use nalgebra::{DMatrix, DVector};

use super::ascent::bounded_projected_ascent;
use super::{AscentResult, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{check_hermitian, hermitian_part, stack_matrix, unstack_matrix, CMatrix, HermitianEigen, C64};

/// Feasible sets for the lifted reflection matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsdSet {
    /// `X >= 0`, `tr X <= budget`.
    TraceBall { budget: f64 },
    /// `X >= 0`, `X_nn <= cap` for every `n`.
    DiagonalCap { cap: f64 },
}

impl PsdSet {
    pub fn project(&self, x: &CMatrix) -> CMatrix {
        match *self {
            Self::TraceBall { budget } => trace_ball_projection(&hermitian_part(x), budget),
            Self::DiagonalCap { cap } => diag_cap_projection(&hermitian_part(x), cap, &mut vec![0.0; x.nrows()]),
        }
    }
}

/// Projection of `lambda` onto `{l >= 0, sum l <= budget}`.
fn project_spectrum(values: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut sorted = clipped.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut shift = 0.0;
    let mut acc = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        acc += v;
        let candidate = (acc - budget) / (j + 1) as f64;
        if v > candidate {
            shift = candidate;
        } else {
            break;
        }
    }
    clipped.iter().map(|v| (v - shift).max(0.0)).collect()
}

fn trace_ball_projection(x: &CMatrix, budget: f64) -> CMatrix {
    let eig = HermitianEigen::new(x);
    if eig.min() >= 0.0 && eig.values.iter().sum::<f64>() <= budget {
        return x.clone();
    }
    eig.compose(&project_spectrum(&eig.values, budget))
}

/// Stationarity tolerance of the diagonal-cap projection, relative to the
/// largest entry of the input.
const DIAG_CAP_TOL: f64 = 1e-10;
const DIAG_CAP_MAX_ITER: usize = 200;

struct DualPoint {
    y: Vec<f64>,
    phi: f64,
    grad: Vec<f64>,
    eig: HermitianEigen,
}

impl DualPoint {
    fn new(x: &CMatrix, cap: f64, y: Vec<f64>) -> Self {
        let mut z = x.clone();
        for (i, yi) in y.iter().enumerate() {
            z[(i, i)].re -= yi;
        }
        let eig = HermitianEigen::new(&z);
        let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        let grad = (0..y.len())
            .map(|i| cap - (0..y.len()).map(|a| clipped[a] * eig.vectors[(i, a)].norm_sqr()).sum::<f64>())
            .collect();
        let phi = 0.5 * clipped.iter().map(|v| v * v).sum::<f64>() + cap * y.iter().sum::<f64>();
        Self { y, phi, grad, eig }
    }

    fn primal(&self) -> CMatrix {
        let clipped: Vec<f64> = self.eig.values.iter().map(|v| v.max(0.0)).collect();
        self.eig.compose(&clipped)
    }

    /// `|P(y - grad) - y|_inf`, zero exactly at the dual optimum.
    fn stationarity(&self) -> f64 {
        self.y.iter().zip(&self.grad).map(|(y, g)| ((y - g).max(0.0) - y).abs()).fold(0.0, f64::max)
    }

    /// Generalized Hessian of `phi`: `H_ik = sum_ab W_ab Q_ia conj(Q_ib) conj(Q_ka) Q_kb`
    /// with the divided differences `W` of `max(., 0)` over the spectrum.
    fn hessian(&self) -> DMatrix<f64> {
        let n = self.y.len();
        let q = &self.eig.vectors;
        let lam = &self.eig.values;
        let pos: Vec<usize> = (0..n).filter(|&a| lam[a] > 0.0).collect();
        let neg: Vec<usize> = (0..n).filter(|&a| lam[a] <= 0.0).collect();
        let mut h = DMatrix::zeros(n, n);
        let proj = DMatrix::from_fn(n, n, |i, k| pos.iter().map(|&a| q[(i, a)] * q[(k, a)].conj()).sum::<C64>());
        for i in 0..n {
            for k in 0..n {
                h[(i, k)] = proj[(i, k)].norm_sqr();
            }
        }
        for &a in &pos {
            let mixed = DMatrix::from_fn(n, n, |i, k| {
                neg.iter().map(|&b| q[(i, b)] * q[(k, b)].conj() * (lam[a] / (lam[a] - lam[b]))).sum::<C64>()
            });
            for i in 0..n {
                for k in 0..n {
                    h[(i, k)] += 2.0 * (q[(i, a)] * q[(k, a)].conj() * mixed[(i, k)].conj()).re;
                }
            }
        }
        h
    }
}

/// Frobenius projection onto `{X >= 0, X_nn <= cap}`, computed through its
/// dual. With multipliers `y >= 0` on the diagonal bounds the primal point
/// is `X(y) = P_psd(Z - Diag y)` and the convex dual objective
/// `phi(y) = ||X(y)||^2 / 2 + cap sum(y)` has gradient `cap - diag X(y)`.
/// A projected semismooth Newton method (Newton step on the free
/// multipliers, gradient step on the ones held at zero, projected Armijo
/// search) minimizes it over `y >= 0`, starting from (and returning in)
/// `warm`.
fn diag_cap_projection(x: &CMatrix, cap: f64, warm: &mut Vec<f64>) -> CMatrix {
    let n = x.nrows();
    let scale = x.iter().map(|z| z.norm()).fold(cap, f64::max);
    let tol = DIAG_CAP_TOL * scale;
    let mut point = DualPoint::new(x, cap, vec![0.0; n]);
    if warm.len() == n && warm.iter().any(|&v| v > 0.0) {
        // a warm start from a point on a different scale can be far worse
        let warmed = DualPoint::new(x, cap, warm.iter().map(|v| v.max(0.0)).collect());
        if warmed.phi < point.phi {
            point = warmed;
        }
    }
    for _ in 0..DIAG_CAP_MAX_ITER {
        let residual = point.stationarity();
        if residual <= tol {
            break;
        }
        let y = &point.y;
        let g = &point.grad;
        let held: Vec<bool> = (0..n).map(|i| y[i] <= residual && g[i] > 0.0).collect();
        let free: Vec<usize> = (0..n).filter(|&i| !held[i]).collect();
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        if !free.is_empty() {
            let h = point.hessian();
            let reg = 1e-10 + residual.min(1.0) * 1e-3;
            let hff = DMatrix::from_fn(free.len(), free.len(), |r, c| h[(free[r], free[c])] + if r == c { reg } else { 0.0 });
            let rhs = DVector::from_fn(free.len(), |r, _| -g[free[r]]);
            if let Some(sol) = hff.cholesky().map(|c| c.solve(&rhs)) {
                for (r, &i) in free.iter().enumerate() {
                    d[i] = sol[r];
                }
            }
        }
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-14 {
            let trial: Vec<f64> = (0..n).map(|i| (y[i] + t * d[i]).max(0.0)).collect();
            let decrease: f64 = (0..n).map(|i| g[i] * (trial[i] - y[i])).sum();
            let candidate = DualPoint::new(x, cap, trial);
            if candidate.phi <= point.phi + 1e-4 * decrease.min(0.0) && decrease < 0.0 {
                next = Some(candidate);
                break;
            }
            t *= 0.5;
        }
        // The dual gradient is 1-Lipschitz, so a unit projected gradient
        // step always decreases `phi` when the Newton search stalls.
        point = next.unwrap_or_else(|| DualPoint::new(x, cap, (0..n).map(|i| (y[i] - g[i]).max(0.0)).collect()));
    }
    let y = point.y.clone();
    let mut primal = point.primal();
    *warm = y;
    // Congruence by a diagonal keeps the matrix PSD and clears any residual
    // excess on the diagonal left by the tolerance.
    let shrink: Vec<f64> = (0..n).map(|i| (cap / primal[(i, i)].re).sqrt().min(1.0)).collect();
    for r in 0..n {
        for c in 0..n {
            primal[(r, c)] *= shrink[r] * shrink[c];
        }
    }
    primal
}

/// Frobenius projection onto `{X >= 0, tr X <= budget}`: clip the spectrum
/// at zero, then shift it onto the capped simplex. `budget` may be infinite.
pub fn project_psd_trace_ball(x: &CMatrix, budget: f64) -> Result<CMatrix> {
    check_hermitian(x)?;
    if !(budget >= 0.0) {
        return Err(Error::NonPositive("budget"));
    }
    Ok(trace_ball_projection(&hermitian_part(x), budget))
}

/// Frobenius projection onto `{X >= 0, X_nn <= cap}`. The result is always
/// feasible; it is optimal to a dual stationarity of `1e-8` relative to the
/// input scale, or to whatever 500 dual iterations reach.
pub fn project_psd_diag_cap(x: &CMatrix, cap: f64) -> Result<CMatrix> {
    check_hermitian(x)?;
    if !(cap > 0.0) {
        return Err(Error::NonPositive("cap"));
    }
    Ok(diag_cap_projection(&hermitian_part(x), cap, &mut vec![0.0; x.nrows()]))
}

/// Projected gradient ascent on Hermitian matrices. `f_and_grad` returns the
/// value and the Hermitian gradient `G` with directional derivative
/// `Re tr(G^H D)`.
pub fn psd_projected_ascent<F>(
    mut f_and_grad: F,
    set: PsdSet,
    x0: &CMatrix,
    options: &SolverOptions,
) -> Result<AscentResult<CMatrix>>
where
    F: FnMut(&CMatrix) -> (f64, CMatrix),
{
    check_hermitian(x0)?;
    let n = x0.nrows();
    let flat_f = |v: &DVector<f64>| {
        let (value, grad) = f_and_grad(&unstack_matrix(v, n));
        (value, stack_matrix(&hermitian_part(&grad)))
    };
    let mut warm = vec![0.0; n];
    let flat_project = |v: &DVector<f64>| {
        let x = hermitian_part(&unstack_matrix(v, n));
        stack_matrix(&match set {
            PsdSet::TraceBall { budget } => trace_ball_projection(&x, budget),
            PsdSet::DiagonalCap { cap } => diag_cap_projection(&x, cap, &mut warm),
        })
    };
    let diameter = match set {
        PsdSet::TraceBall { budget } => 2.0 * budget,
        PsdSet::DiagonalCap { cap } => 2.0 * cap * n as f64,
    };
    let res = bounded_projected_ascent(flat_f, flat_project, &stack_matrix(x0), 2.0 * diameter, options)?;
    Ok(AscentResult { x: unstack_matrix(&res.x, n), value: res.value, trace: res.trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_inner, outer, random_cmatrix, random_cvector, CVector, C64};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0))))
    }

    #[test]
    fn hand_cases() {
        let x = diag(&[3.0, -1.0]);
        let p = project_psd_trace_ball(&x, f64::INFINITY).unwrap();
        assert!((p - diag(&[3.0, 0.0])).norm() < 1e-12);
        let p = project_psd_trace_ball(&x, 2.0).unwrap();
        assert!((p - diag(&[2.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn feasible_input_is_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_cmatrix(4, 4, &mut rng);
        let x = hermitian_part(&(&a * a.adjoint()));
        let budget = x.trace().re + 1.0;
        let p = project_psd_trace_ball(&x, budget).unwrap();
        assert!((p - &x).norm() <= 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut x = diag(&[1.0, 1.0]);
        x[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(project_psd_trace_ball(&x, 1.0), Err(Error::NotHermitian(_))));
    }

    fn random_feasible(rng: &mut ChaCha8Rng, n: usize, budget: f64) -> CMatrix {
        let rank = rng.random_range(1..=n);
        let a = random_cmatrix(n, rank, rng);
        let x = &a * a.adjoint();
        let t = x.trace().re;
        x * C64::new(budget * rng.random_range(0.0..1.0) / t, 0.0)
    }

    #[test]
    fn projection_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_cmatrix(4, 4, &mut rng);
            let x = hermitian_part(&a) * C64::new(3.0, 0.0);
            let budget = rng.random_range(0.5..4.0);
            let p = project_psd_trace_ball(&x, budget).unwrap();
            let eig = HermitianEigen::new(&p);
            assert!(eig.min() >= -1e-12);
            assert!(p.trace().re <= budget + 1e-10);
            let again = project_psd_trace_ball(&p, budget).unwrap();
            assert!((again - &p).norm() <= 1e-12);
            let dist = (&x - &p).norm();
            for _ in 0..50 {
                let y = random_feasible(&mut rng, 4, budget);
                assert!((&x - &y).norm() >= dist - 1e-10);
            }
        }
    }

    fn clip_diagonal(x: &CMatrix, cap: f64) -> CMatrix {
        let mut out = x.clone();
        for i in 0..out.nrows() {
            if out[(i, i)].re > cap {
                out[(i, i)].re = cap;
            }
            out[(i, i)].im = 0.0;
        }
        out
    }

    fn psd_cone_projection(x: &CMatrix) -> CMatrix {
        let eig = HermitianEigen::new(x);
        if eig.min() >= 0.0 {
            return x.clone();
        }
        let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
        eig.compose(&clipped)
    }

    /// Dykstra's alternating projections, an independent oracle.
    fn dykstra(x: &CMatrix, cap: f64, tol: f64, max_iter: usize) -> CMatrix {
        let mut z = x.clone();
        let mut p = CMatrix::zeros(x.nrows(), x.ncols());
        let mut q = CMatrix::zeros(x.nrows(), x.ncols());
        let mut y = psd_cone_projection(&z);
        for _ in 0..max_iter {
            y = psd_cone_projection(&(&z + &p));
            p = &z + &p - &y;
            let z_next = clip_diagonal(&(&y + &q), cap);
            q = &y + &q - &z_next;
            let change = (&z_next - &z).norm();
            z = z_next;
            let excess = (0..y.nrows()).map(|i| y[(i, i)].re - cap).fold(0.0, f64::max);
            if change <= tol * (1.0 + z.norm()) && excess <= tol {
                break;
            }
        }
        y
    }

    #[test]
    fn dual_projection_matches_dykstra() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let a = random_cmatrix(4, 4, &mut rng);
            let x = hermitian_part(&a) * C64::new(2.0, 0.0) + CMatrix::identity(4, 4);
            let p = project_psd_diag_cap(&x, 0.6).unwrap();
            let q = dykstra(&x, 0.6, 1e-13, 200_000);
            assert!((p - q).norm() < 1e-7);
        }
    }

    #[test]
    fn dual_hessian_matches_gradient_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = hermitian_part(&random_cmatrix(4, 4, &mut rng)) * C64::new(2.0, 0.0);
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        let point = DualPoint::new(&x, 0.5, y.clone());
        let h = point.hessian();
        let step = 1e-6;
        for k in 0..4 {
            let shifted = |sign: f64| {
                let mut v = y.clone();
                v[k] += sign * step;
                DualPoint::new(&x, 0.5, v).grad
            };
            let (up, down) = (shifted(1.0), shifted(-1.0));
            for i in 0..4 {
                let fd = (up[i] - down[i]) / (2.0 * step);
                assert!((fd - h[(i, k)]).abs() < 1e-5, "{i} {k}: {fd} vs {}", h[(i, k)]);
            }
        }
    }

    #[test]
    fn diag_cap_projection_is_feasible_and_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cap = 0.7;
        for _ in 0..10 {
            let a = random_cmatrix(3, 3, &mut rng);
            let x = hermitian_part(&a) * C64::new(2.0, 0.0);
            let p = project_psd_diag_cap(&x, cap).unwrap();
            assert!(HermitianEigen::new(&p).min() >= -1e-12);
            assert!((0..3).all(|i| p[(i, i)].re <= cap + 1e-8));
            let dist = (&x - &p).norm();
            for _ in 0..50 {
                // unit-modulus-scaled rank-one points are feasible
                let v = random_cvector(3, &mut rng).map(|z| z / z.norm() * (cap * rng.random_range(0.0..1.0)).sqrt());
                assert!((&x - outer(&v)).norm() >= dist - 1e-7);
            }
        }
    }

    #[test]
    fn linear_objective_goes_to_top_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_cmatrix(3, 3, &mut rng);
        let c = hermitian_part(&a);
        let eig = HermitianEigen::new(&c);
        assert!(eig.max() > 0.0);
        let budget = 2.0;
        let f = |x: &CMatrix| (frobenius_inner(&c, x), c.clone());
        let x0 = CMatrix::identity(3, 3) * C64::new(budget / 3.0, 0.0);
        let res = psd_projected_ascent(f, PsdSet::TraceBall { budget }, &x0, &SolverOptions::default()).unwrap();
        let v1: CVector = eig.vectors.column(0).into_owned();
        let expected = outer(&v1) * C64::new(budget, 0.0);
        assert!((res.x - expected).norm() < 1e-6);
        assert!((res.value - budget * eig.max()).abs() < 1e-8);
        assert!(res.trace.is_non_decreasing(1e-10));
    }

    #[test]
    fn distance_objective_recovers_feasible_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = random_feasible(&mut rng, 3, 1.5);
        let f = |x: &CMatrix| {
            let d = x - &target;
            (-d.norm_squared(), d * C64::new(-2.0, 0.0))
        };
        let res = psd_projected_ascent(f, PsdSet::TraceBall { budget: 1.5 }, &CMatrix::zeros(3, 3), &SolverOptions::default()).unwrap();
        assert!((res.x - target).norm() < 1e-6);
    }
}
