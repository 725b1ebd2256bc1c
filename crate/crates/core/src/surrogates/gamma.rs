use std::f64::consts::LOG2_E;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, ONE};
use crate::scenario::ChannelSet;

/// Choice of the constant multiplying the quadratic interference term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EkConvention {
    /// `E_k = 1 / (I_k + p_k |s_k|^2)`, tight at the expansion point.
    #[default]
    Tight,
    /// `E_k = 1 / I_k`, which overestimates the penalty and is not tight.
    AsPrinted,
}

/// `Re(b^H gamma) - gamma^H Q gamma + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub b: CVector,
    pub q: CMatrix,
    pub constant: f64,
}

impl QuadraticModel {
    pub fn value(&self, gamma: &CVector) -> f64 {
        self.b.dotc(gamma).re - gamma.dotc(&(&self.q * gamma)).re + self.constant
    }

    /// `b - 2 Q gamma`; the stacked real/imaginary parts are the real gradient.
    pub fn gradient(&self, gamma: &CVector) -> CVector {
        &self.b - &self.q * gamma * C64::new(2.0, 0.0)
    }
}

/// Per-user constants of the concave minorizer of the fixed-filter sum rate
/// in `gamma`, built at `gamma_bar` for fixed powers and filters.
///
/// For an active user with `s = c^H A_k gamma`:
/// `R~_k = A_k + log2(e) B_k (D_k Re(conj(s_bar) s) / |s_bar| - E_k sum_m p_m |c^H A_m gamma|^2 - F_k)`.
#[derive(Debug, Clone)]
pub struct GammaSurrogateCoeffs {
    pub gamma_bar: CVector,
    pub p: DVector<f64>,
    pub filters: Vec<CVector>,
    pub convention: EkConvention,
    pub a_bar: Vec<f64>,
    pub b_bar: Vec<f64>,
    pub d_bar: Vec<f64>,
    pub e_bar: Vec<f64>,
    pub f_bar: Vec<f64>,
    /// Interference plus filtered noise at the expansion point.
    pub interference: Vec<f64>,
    /// `c_k^H A_k gamma_bar`.
    pub s_bar: Vec<C64>,
    /// Users with `p_k = 0` contribute nothing.
    pub active: Vec<bool>,
}

impl GammaSurrogateCoeffs {
    /// Fails with [`Error::DegenerateExpansion`] when an active user's
    /// useful signal `c_k^H A_k gamma_bar` vanishes.
    pub fn build(
        gamma_bar: &CVector,
        p: &DVector<f64>,
        filters: &[CVector],
        channels: &ChannelSet,
        convention: EkConvention,
    ) -> Result<Self> {
        let k_users = channels.users();
        if gamma_bar.len() != channels.ris_elements() || p.len() != k_users || filters.len() != k_users {
            return Err(Error::DimensionMismatch("surrogate inputs do not match the channels".into()));
        }
        let noise = channels.noise_power();
        let mut out = Self {
            gamma_bar: gamma_bar.clone(),
            p: p.clone(),
            filters: filters.to_vec(),
            convention,
            a_bar: vec![0.0; k_users],
            b_bar: vec![0.0; k_users],
            d_bar: vec![0.0; k_users],
            e_bar: vec![0.0; k_users],
            f_bar: vec![0.0; k_users],
            interference: vec![0.0; k_users],
            s_bar: vec![C64::new(0.0, 0.0); k_users],
            active: vec![false; k_users],
        };
        for k in 0..k_users {
            let c = &filters[k];
            let filter_energy = c.norm_squared();
            if filter_energy == 0.0 {
                return Err(Error::ZeroFilter(k));
            }
            let mut interference = noise * filter_energy;
            for (m, a) in channels.cascades().iter().enumerate() {
                let s = c.dotc(&(a * gamma_bar));
                if m == k {
                    out.s_bar[k] = s;
                } else {
                    interference += p[m] * s.norm_sqr();
                }
            }
            out.interference[k] = interference;
            if p[k] == 0.0 {
                continue;
            }
            let modulus = out.s_bar[k].norm();
            if modulus == 0.0 {
                return Err(Error::DegenerateExpansion(k));
            }
            let signal = p[k] * modulus * modulus;
            let ratio = signal / interference;
            let e = match convention {
                EkConvention::Tight => 1.0 / (interference + signal),
                EkConvention::AsPrinted => 1.0 / interference,
            };
            out.active[k] = true;
            out.a_bar[k] = ratio.ln_1p() * LOG2_E;
            out.b_bar[k] = ratio;
            out.d_bar[k] = 2.0 / modulus;
            out.e_bar[k] = e;
            out.f_bar[k] = e * noise * filter_energy + 1.0;
        }
        Ok(out)
    }

    /// Surrogate sum over users, in bit/s/Hz.
    pub fn value(&self, gamma: &CVector, channels: &ChannelSet) -> f64 {
        (0..channels.users()).filter(|&k| self.active[k]).map(|k| self.user_value(k, gamma, channels)).sum()
    }

    pub fn user_value(&self, k: usize, gamma: &CVector, channels: &ChannelSet) -> f64 {
        if !self.active[k] {
            return 0.0;
        }
        let c = &self.filters[k];
        let mut received = 0.0;
        let mut s_own = C64::new(0.0, 0.0);
        for (m, a) in channels.cascades().iter().enumerate() {
            let s = c.dotc(&(a * gamma));
            received += self.p[m] * s.norm_sqr();
            if m == k {
                s_own = s;
            }
        }
        let sb = self.s_bar[k];
        let linear = self.d_bar[k] * (sb.conj() * s_own).re / sb.norm();
        self.a_bar[k] + LOG2_E * self.b_bar[k] * (linear - self.e_bar[k] * received - self.f_bar[k])
    }

    /// The surrogate as `Re(b^H gamma) - gamma^H Q gamma + constant` with
    /// `Q` Hermitian PSD.
    pub fn quadratic_model(&self, channels: &ChannelSet) -> QuadraticModel {
        let n = channels.ris_elements();
        let mut b = CVector::zeros(n);
        let mut q = CMatrix::zeros(n, n);
        let mut constant = 0.0;
        for k in (0..channels.users()).filter(|&k| self.active[k]) {
            let coef = LOG2_E * self.b_bar[k];
            let c = &self.filters[k];
            let sb = self.s_bar[k];
            let own = channels.cascade(k).ad_mul(c);
            b.axpy(C64::new(coef * self.d_bar[k], 0.0) * (sb / sb.norm()), &own, ONE);
            for (m, a) in channels.cascades().iter().enumerate() {
                if self.p[m] == 0.0 {
                    continue;
                }
                let w = a.ad_mul(c);
                q.ger(C64::new(coef * self.e_bar[k] * self.p[m], 0.0), &w, &w.conjugate(), ONE);
            }
            constant += self.a_bar[k] - coef * self.f_bar[k];
        }
        QuadraticModel { b, q, constant }
    }

    /// Gradient in the stacked real/imaginary convention.
    pub fn gradient(&self, gamma: &CVector, channels: &ChannelSet) -> CVector {
        self.quadratic_model(channels).gradient(gamma)
    }
}
