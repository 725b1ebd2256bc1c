use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianEigen, C64};

/// Maximizer of `Re(b^H x) - x^H Q x` over `||x||^2 <= radius2`.
#[derive(Debug, Clone)]
pub struct BallSolution {
    pub x: CVector,
    /// Multiplier of the norm constraint.
    pub multiplier: f64,
    pub value: f64,
}

impl BallSolution {
    /// `||2 Q x + 2 lambda x - b||`.
    pub fn stationarity_residual(&self, b: &CVector, q: &CMatrix) -> f64 {
        ((q * &self.x + &self.x * C64::new(self.multiplier, 0.0)) * C64::new(2.0, 0.0) - b).norm()
    }
}

fn objective(b: &CVector, q: &CMatrix, x: &CVector) -> f64 {
    b.dotc(x).re - x.dotc(&(q * x)).re
}

/// Solves the ball-constrained concave quadratic exactly. With `Q = U L U^H`
/// the stationary point for multiplier `lambda` is `(Q + lambda I)^{-1} b / 2`,
/// whose norm decreases in `lambda`; the multiplier is found by bisection on
/// `[0, ||b|| / (2 radius)]`, where the upper end is always feasible.
pub fn max_linear_minus_quadratic_ball(b: &CVector, q: &CMatrix, radius2: f64) -> Result<BallSolution> {
    if !(radius2 > 0.0) {
        return Err(Error::NonPositive("radius2"));
    }
    let n = b.len();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!("Q is {}x{} but b has length {n}", q.nrows(), q.ncols())));
    }
    let eig = HermitianEigen::new(q);
    if eig.min() < -1e-9 * eig.max().abs().max(1.0) {
        return Err(Error::NotPsd(eig.min()));
    }
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(BallSolution { x: CVector::zeros(n), multiplier: 0.0, value: 0.0 });
    }
    let lambdas: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0)).collect();
    let coords: Vec<C64> = (0..n).map(|i| eig.vectors.column(i).dotc(b)).collect();

    let norm2 = |mu: f64| -> f64 {
        lambdas
            .iter()
            .zip(&coords)
            .map(|(&l, c)| {
                let w = c.norm_sqr();
                if w == 0.0 {
                    0.0
                } else {
                    w / (4.0 * (l + mu) * (l + mu))
                }
            })
            .sum()
    };
    let build = |mu: f64| -> CVector {
        let mut x = CVector::zeros(n);
        for (i, (&l, c)) in lambdas.iter().zip(&coords).enumerate() {
            if c.norm_sqr() == 0.0 {
                continue;
            }
            x += eig.vectors.column(i) * (*c / (2.0 * (l + mu)));
        }
        x
    };

    let multiplier = if norm2(0.0) <= radius2 {
        0.0
    } else {
        let mut lo = 0.0;
        let mut hi = b_norm / (2.0 * radius2.sqrt());
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let excess = norm2(mid) - radius2;
            if excess.abs() <= 1e-13 * radius2 {
                hi = mid;
                break;
            }
            if excess > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut x = build(multiplier);
    // clamp the last ulp of infeasibility from rounding
    let x_norm2 = x.norm_squared();
    if x_norm2 > radius2 {
        x *= C64::new((radius2 / x_norm2).sqrt(), 0.0);
    }
    let value = objective(b, q, &x);
    Ok(BallSolution { x, multiplier, value })
}
