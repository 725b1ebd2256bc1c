use std::f64::consts::LOG2_E;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::AffineDenominator;
use crate::linalg::{cholesky, ln_det_identity_plus, CMatrix, CVector, C64, ONE};
use crate::scenario::{ChannelSet, PowerModel};

fn denominator_of(power: &PowerModel) -> AffineDenominator {
    AffineDenominator { coef: DVector::from_vec(power.mu.clone()), constant: power.static_power_w }
}

fn check_powers(p: &DVector<f64>, k: usize) -> Result<()> {
    if p.len() != k {
        return Err(Error::DimensionMismatch(format!("expected {k} powers, got {}", p.len())));
    }
    if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InfeasibleStart("powers must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Pseudo-concave minorizer of the fixed-filter GEE in the powers.
///
/// With normalized gains `a_km = |c_k^H A_m gamma|^2 / (sigma^2 ||c_k||^2)`
/// the spectral efficiency splits as `N1(p) - N2(p)` where
/// `N1 = sum_k log2(1 + sum_m p_m a_km)` and `N2 = sum_k log2(1 + sum_{m != k} p_m a_km)`
/// are both concave. Linearizing `N2` at `p_bar` leaves a concave numerator
/// over the affine consumed power.
#[derive(Debug, Clone)]
pub struct PowerSurrogate {
    pub p_bar: DVector<f64>,
    /// `gains[(k, m)] = a_km`.
    pub gains: nalgebra::DMatrix<f64>,
    pub bandwidth_hz: f64,
    pub denominator: AffineDenominator,
    n2_bar: f64,
    n2_grad_bar: DVector<f64>,
}

impl PowerSurrogate {
    pub fn build(
        p_bar: &DVector<f64>,
        gamma: &CVector,
        filters: &[CVector],
        channels: &ChannelSet,
        power: &PowerModel,
    ) -> Result<Self> {
        let k_users = channels.users();
        check_powers(p_bar, k_users)?;
        if filters.len() != k_users || power.users() != k_users {
            return Err(Error::DimensionMismatch("filters or power model do not match the users".into()));
        }
        let noise = channels.noise_power();
        let mut gains = nalgebra::DMatrix::zeros(k_users, k_users);
        for (k, c) in filters.iter().enumerate() {
            let d = noise * c.norm_squared();
            if d == 0.0 {
                return Err(Error::ZeroFilter(k));
            }
            for (m, a) in channels.cascades().iter().enumerate() {
                gains[(k, m)] = c.dotc(&(a * gamma)).norm_sqr() / d;
            }
        }
        let mut out = Self {
            p_bar: p_bar.clone(),
            gains,
            bandwidth_hz: power.bandwidth_hz,
            denominator: denominator_of(power),
            n2_bar: 0.0,
            n2_grad_bar: DVector::zeros(k_users),
        };
        let (n2, g2) = out.n2(p_bar);
        out.n2_bar = n2;
        out.n2_grad_bar = g2;
        Ok(out)
    }

    fn split(&self, p: &DVector<f64>, include_own: bool) -> (f64, DVector<f64>) {
        let k_users = p.len();
        let mut value = 0.0;
        let mut grad = DVector::zeros(k_users);
        for k in 0..k_users {
            let mut load = 0.0;
            for m in 0..k_users {
                if include_own || m != k {
                    load += p[m] * self.gains[(k, m)];
                }
            }
            value += load.ln_1p() * LOG2_E;
            let total = 1.0 + load;
            for m in 0..k_users {
                if include_own || m != k {
                    grad[m] += LOG2_E * self.gains[(k, m)] / total;
                }
            }
        }
        (value, grad)
    }

    /// `N1` and its gradient.
    pub fn n1(&self, p: &DVector<f64>) -> (f64, DVector<f64>) {
        self.split(p, true)
    }

    /// `N2` and its gradient.
    pub fn n2(&self, p: &DVector<f64>) -> (f64, DVector<f64>) {
        self.split(p, false)
    }

    /// Exact fixed-filter spectral efficiency `N1 - N2`.
    pub fn true_spectral_efficiency(&self, p: &DVector<f64>) -> f64 {
        self.n1(p).0 - self.n2(p).0
    }

    /// Exact fixed-filter GEE in bit/J.
    pub fn true_gee(&self, p: &DVector<f64>) -> f64 {
        self.bandwidth_hz * self.true_spectral_efficiency(p) / self.denominator.eval(p)
    }

    /// Concave numerator in bit/s with its gradient.
    pub fn numerator(&self, p: &DVector<f64>) -> (f64, DVector<f64>) {
        let (n1, g1) = self.n1(p);
        let linear = self.n2_bar + self.n2_grad_bar.dot(&(p - &self.p_bar));
        (self.bandwidth_hz * (n1 - linear), (g1 - &self.n2_grad_bar) * self.bandwidth_hz)
    }

    pub fn value(&self, p: &DVector<f64>) -> f64 {
        self.numerator(p).0 / self.denominator.eval(p)
    }

    /// Quotient-rule gradient of [`Self::value`].
    pub fn gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        let (n, g) = self.numerator(p);
        let d = self.denominator.eval(p);
        (g * d - &self.denominator.coef * n) / (d * d)
    }
}

/// Whitened signatures `A_m gamma / sigma`.
fn whitened_signatures(gamma: &CVector, channels: &ChannelSet) -> Vec<CVector> {
    let scale = C64::new(1.0 / channels.noise_power().sqrt(), 0.0);
    channels.signatures(gamma).into_iter().map(|v| v * scale).collect()
}

/// `sum_{m in set} p_m v_m v_m^H`; the covariance is `I` plus this.
fn whitened_signal(signatures: &[CVector], p: &DVector<f64>, skip: Option<usize>) -> CMatrix {
    let nr = signatures[0].len();
    let mut s = CMatrix::zeros(nr, nr);
    for (m, v) in signatures.iter().enumerate() {
        if Some(m) != skip && p[m] != 0.0 {
            s.ger(C64::new(p[m], 0.0), v, &v.conjugate(), ONE);
        }
    }
    s
}

/// Minorizer of the MMSE-embedded GEE in the powers for a fixed `gamma`.
///
/// `SR_MMSE(p) = G(p) - F(p)` with `G = K log2|I + sum_m p_m v_m v_m^H|` and
/// `F = sum_k log2|I + sum_{m != k} p_m v_m v_m^H|` in whitened signatures;
/// both are concave in `p`. The surrogate is
/// `B (G(p) - F(p_bar) - grad F(p_bar)^T (p - p_bar)) / (P_c + mu^T p)`.
#[derive(Debug, Clone)]
pub struct MmsePowerSurrogate {
    pub p_bar: DVector<f64>,
    pub signatures: Vec<CVector>,
    pub bandwidth_hz: f64,
    pub denominator: AffineDenominator,
    f_bar: f64,
    f_grad_bar: DVector<f64>,
}

impl MmsePowerSurrogate {
    pub fn build(p_bar: &DVector<f64>, gamma: &CVector, channels: &ChannelSet, power: &PowerModel) -> Result<Self> {
        let k_users = channels.users();
        check_powers(p_bar, k_users)?;
        if gamma.len() != channels.ris_elements() || power.users() != k_users {
            return Err(Error::DimensionMismatch("gamma or power model do not match the channels".into()));
        }
        let signatures = whitened_signatures(gamma, channels);
        let (f_bar, f_grad_bar) = interference_logdet(&signatures, p_bar)?;
        Ok(Self {
            p_bar: p_bar.clone(),
            signatures,
            bandwidth_hz: power.bandwidth_hz,
            denominator: denominator_of(power),
            f_bar,
            f_grad_bar,
        })
    }

    /// `G` and its gradient.
    pub fn g(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        total_logdet(&self.signatures, p)
    }

    /// `F` and its gradient.
    pub fn f(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        interference_logdet(&self.signatures, p)
    }

    pub fn true_gee(&self, p: &DVector<f64>) -> Result<f64> {
        Ok(self.bandwidth_hz * (self.g(p)?.0 - self.f(p)?.0) / self.denominator.eval(p))
    }

    /// Concave numerator in bit/s with its gradient.
    pub fn numerator(&self, p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (g, grad) = self.g(p)?;
        let linear = self.f_bar + self.f_grad_bar.dot(&(p - &self.p_bar));
        Ok((self.bandwidth_hz * (g - linear), (grad - &self.f_grad_bar) * self.bandwidth_hz))
    }

    pub fn value(&self, p: &DVector<f64>) -> Result<f64> {
        Ok(self.numerator(p)?.0 / self.denominator.eval(p))
    }

    pub fn gradient(&self, p: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, g) = self.numerator(p)?;
        let d = self.denominator.eval(p);
        Ok((g * d - &self.denominator.coef * n) / (d * d))
    }
}

fn identity_plus(s: &CMatrix) -> CMatrix {
    s + CMatrix::identity(s.nrows(), s.ncols())
}

/// `K log2|S|` with gradient `K/ln 2 * v_j^H S^{-1} v_j`.
fn total_logdet(signatures: &[CVector], p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let k_users = signatures.len();
    let signal = whitened_signal(signatures, p, None);
    let chol = cholesky(&identity_plus(&signal))?;
    let scale = k_users as f64 * LOG2_E;
    let grad = DVector::from_fn(k_users, |j, _| scale * signatures[j].dotc(&chol.solve(&signatures[j])).re);
    Ok((scale * ln_det_identity_plus(&signal)?, grad))
}

/// `sum_k log2|S_k|` with gradient `1/ln 2 * sum_{k != j} v_j^H S_k^{-1} v_j`.
fn interference_logdet(signatures: &[CVector], p: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let k_users = signatures.len();
    let mut value = 0.0;
    let mut grad = DVector::zeros(k_users);
    for k in 0..k_users {
        let signal = whitened_signal(signatures, p, Some(k));
        let chol = cholesky(&identity_plus(&signal))?;
        value += ln_det_identity_plus(&signal)? * LOG2_E;
        for j in (0..k_users).filter(|&j| j != k) {
            grad[j] += LOG2_E * signatures[j].dotc(&chol.solve(&signatures[j])).re;
        }
    }
    Ok((value, grad))
}
