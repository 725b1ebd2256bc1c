use std::f64::consts::LOG2_E;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{check_hermitian, check_psd, cholesky, frobenius_inner, ln_det_identity_plus, CMatrix, C64};
use crate::scenario::ChannelSet;

/// Whitened signal part `sum_{m != skip} p_m A_m X A_m^H / sigma^2`; the
/// covariance is `I` plus this.
fn lifted_signal(x: &CMatrix, p: &DVector<f64>, channels: &ChannelSet, skip: Option<usize>) -> CMatrix {
    let nr = channels.bs_antennas();
    let inv_noise = 1.0 / channels.noise_power();
    let mut s = CMatrix::zeros(nr, nr);
    for (m, a) in channels.cascades().iter().enumerate() {
        if Some(m) != skip && p[m] != 0.0 {
            s += a * x * a.adjoint() * C64::new(p[m] * inv_noise, 0.0);
        }
    }
    s
}

/// `sum_m p_m A_m^H (I + S)^{-1} A_m / sigma^2` over `m != skip`.
fn congruence_sum(s: &CMatrix, p: &DVector<f64>, channels: &ChannelSet, skip: Option<usize>) -> Result<CMatrix> {
    let chol = cholesky(&(s + CMatrix::identity(s.nrows(), s.ncols())))?;
    let n = channels.ris_elements();
    let inv_noise = 1.0 / channels.noise_power();
    let mut out = CMatrix::zeros(n, n);
    for (m, a) in channels.cascades().iter().enumerate() {
        if Some(m) != skip && p[m] != 0.0 {
            out += a.adjoint() * chol.solve(a) * C64::new(p[m] * inv_noise, 0.0);
        }
    }
    Ok(out)
}

fn check_inputs(x: &CMatrix, p: &DVector<f64>, channels: &ChannelSet) -> Result<()> {
    let n = channels.ris_elements();
    if x.nrows() != n || x.ncols() != n || p.len() != channels.users() {
        return Err(Error::DimensionMismatch("lifted surrogate inputs do not match the channels".into()));
    }
    check_psd(x).map(|_| ())
}

/// `G1(X) = K log2|sigma^2 I + sum_m p_m A_m X A_m^H|` and
/// `G2(X) = sum_k log2|sigma^2 I + sum_{m != k} p_m A_m X A_m^H|`, whose
/// difference is the MMSE sum rate of the lifted variable. The
/// `log2|sigma^2 I|` parts cancel in the difference and are carried
/// separately to avoid cancellation.
#[derive(Debug, Clone, Copy)]
pub struct LiftedSplit {
    pub g1_whitened: f64,
    pub g2_whitened: f64,
    /// `K N_R log2 sigma^2`, common to `G1` and `G2`.
    pub noise_offset: f64,
}

impl LiftedSplit {
    pub fn g1(&self) -> f64 {
        self.g1_whitened + self.noise_offset
    }

    pub fn g2(&self) -> f64 {
        self.g2_whitened + self.noise_offset
    }

    pub fn sum_rate(&self) -> f64 {
        self.g1_whitened - self.g2_whitened
    }
}

pub fn lifted_split(x: &CMatrix, p: &DVector<f64>, channels: &ChannelSet) -> Result<LiftedSplit> {
    check_inputs(x, p, channels)?;
    let k_users = channels.users();
    let g1 = k_users as f64 * LOG2_E * ln_det_identity_plus(&lifted_signal(x, p, channels, None))?;
    let mut g2 = 0.0;
    for k in 0..k_users {
        g2 += LOG2_E * ln_det_identity_plus(&lifted_signal(x, p, channels, Some(k)))?;
    }
    let noise_offset = (k_users * channels.bs_antennas()) as f64 * channels.noise_power().log2();
    Ok(LiftedSplit { g1_whitened: g1, g2_whitened: g2, noise_offset })
}

/// MMSE sum rate in bit/s/Hz of a lifted (possibly high-rank) `X`.
pub fn sr_mmse_lifted(x: &CMatrix, p: &DVector<f64>, channels: &ChannelSet) -> Result<f64> {
    Ok(lifted_split(x, p, channels)?.sum_rate())
}

/// Hermitian gradient of `G1`.
pub fn g1_gradient(x: &CMatrix, p: &DVector<f64>, channels: &ChannelSet) -> Result<CMatrix> {
    let s = lifted_signal(x, p, channels, None);
    Ok(congruence_sum(&s, p, channels, None)? * C64::new(channels.users() as f64 * LOG2_E, 0.0))
}

/// Hermitian gradient of `G2`.
pub fn g2_gradient(x: &CMatrix, p: &DVector<f64>, channels: &ChannelSet) -> Result<CMatrix> {
    let n = channels.ris_elements();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..channels.users() {
        let s = lifted_signal(x, p, channels, Some(k));
        out += congruence_sum(&s, p, channels, Some(k))?;
    }
    Ok(out * C64::new(LOG2_E, 0.0))
}

/// Concave minorizer `G1(X) - G2(X_bar) - <grad G2(X_bar), X - X_bar>` of
/// the lifted MMSE sum rate.
#[derive(Debug, Clone)]
pub struct LiftedSurrogate {
    pub x_bar: CMatrix,
    pub p: DVector<f64>,
    g2_bar: f64,
    g2_grad_bar: CMatrix,
}

impl LiftedSurrogate {
    pub fn build(x_bar: &CMatrix, p: &DVector<f64>, channels: &ChannelSet) -> Result<Self> {
        let split = lifted_split(x_bar, p, channels)?;
        Ok(Self {
            x_bar: x_bar.clone(),
            p: p.clone(),
            g2_bar: split.g2_whitened,
            g2_grad_bar: g2_gradient(x_bar, p, channels)?,
        })
    }

    /// Value and Hermitian gradient. Accepts any Hermitian `X` for which
    /// the covariance stays positive definite, which covers the iterates
    /// of a projected solver.
    pub fn value_and_gradient(&self, x: &CMatrix, channels: &ChannelSet) -> Result<(f64, CMatrix)> {
        check_hermitian(x)?;
        let s = lifted_signal(x, &self.p, channels, None);
        let k = channels.users() as f64;
        let g1 = k * LOG2_E * ln_det_identity_plus(&s)?;
        let grad = congruence_sum(&s, &self.p, channels, None)? * C64::new(k * LOG2_E, 0.0) - &self.g2_grad_bar;
        let value = g1 - self.g2_bar - frobenius_inner(&self.g2_grad_bar, &(x - &self.x_bar));
        Ok((value, grad))
    }

    pub fn value(&self, x: &CMatrix, channels: &ChannelSet) -> Result<f64> {
        Ok(self.value_and_gradient(x, channels)?.0)
    }

    pub fn gradient_of_g2_at_expansion(&self) -> &CMatrix {
        &self.g2_grad_bar
    }
}
