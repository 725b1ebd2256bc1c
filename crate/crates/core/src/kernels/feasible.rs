use serde::{Deserialize, Serialize};

use super::PsdSet;
use crate::linalg::{CVector, C64};

/// Feasible set of the reflection coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ReflectionSet {
    /// `||gamma||^2 <= budget`.
    Global { budget: f64 },
    /// `|gamma_n|^2 <= cap` for every element.
    Local { cap: f64 },
}

impl ReflectionSet {
    /// Total reflected-power budget for a surface of `n` elements.
    pub fn total_budget(&self, n: usize) -> f64 {
        match *self {
            Self::Global { budget } => budget,
            Self::Local { cap } => cap * n as f64,
        }
    }

    pub fn contains(&self, gamma: &CVector, slack: f64) -> bool {
        match *self {
            Self::Global { budget } => gamma.norm_squared() <= budget + slack,
            Self::Local { cap } => gamma.iter().all(|z| z.norm_sqr() <= cap + slack),
        }
    }

    /// Euclidean projection.
    pub fn project(&self, gamma: &CVector) -> CVector {
        match *self {
            Self::Global { budget } => {
                let n2 = gamma.norm_squared();
                if n2 <= budget {
                    gamma.clone()
                } else {
                    gamma * C64::new((budget / n2).sqrt(), 0.0)
                }
            }
            Self::Local { cap } => {
                let r = cap.sqrt();
                gamma.map(|z| if z.norm() > r { z * (r / z.norm()) } else { z })
            }
        }
    }

    /// Pushes a nonzero direction onto the boundary of the set: full norm for
    /// the global budget, full modulus with the same phases for the local one.
    pub fn saturate(&self, direction: &CVector) -> CVector {
        match *self {
            Self::Global { budget } => {
                let n2 = direction.norm_squared();
                if n2 == 0.0 {
                    CVector::from_element(direction.len(), C64::new((budget / direction.len() as f64).sqrt(), 0.0))
                } else {
                    direction * C64::new((budget / n2).sqrt(), 0.0)
                }
            }
            Self::Local { cap } => {
                let r = cap.sqrt();
                direction.map(|z| if z.norm() == 0.0 { C64::new(r, 0.0) } else { z * (r / z.norm()) })
            }
        }
    }

    /// Matching feasible set of the lifted matrix `X = gamma gamma^H`.
    pub fn lifted(&self) -> PsdSet {
        match *self {
            Self::Global { budget } => PsdSet::TraceBall { budget },
            Self::Local { cap } => PsdSet::DiagonalCap { cap },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_cvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_feasible_points_are_globally_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let local = ReflectionSet::Local { cap: 0.8 };
        let global = ReflectionSet::Global { budget: local.total_budget(6) };
        for _ in 0..100 {
            let g = local.project(&(random_cvector(6, &mut rng) * C64::new(3.0, 0.0)));
            assert!(local.contains(&g, 1e-12));
            assert!(global.contains(&g, 1e-12));
        }
    }

    #[test]
    fn saturate_reaches_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_cvector(5, &mut rng);
        let g = ReflectionSet::Global { budget: 5.0 }.saturate(&d);
        assert!((g.norm_squared() - 5.0).abs() < 1e-12);
        let l = ReflectionSet::Local { cap: 0.5 }.saturate(&d);
        assert!(l.iter().all(|z| (z.norm_sqr() - 0.5).abs() < 1e-12));
    }
}
