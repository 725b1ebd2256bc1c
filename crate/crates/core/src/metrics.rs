//! Exact SINR, rate, and energy-efficiency evaluation.
//!
//! Everything here is the ground truth that surrogates and solvers are
//! checked against. Rates returned without a bandwidth factor are spectral
//! efficiencies in bit/s/Hz.

use std::f64::consts::LOG2_E;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, CMatrix, CVector, HermitianEigen, C64, ONE, ZERO};
use crate::scenario::{ChannelSet, PowerModel};

fn check_dims(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<()> {
    if gamma.len() != channels.ris_elements() {
        return Err(Error::DimensionMismatch(format!(
            "gamma has length {} but the RIS has {} elements",
            gamma.len(),
            channels.ris_elements()
        )));
    }
    if p.len() != channels.users() {
        return Err(Error::DimensionMismatch(format!(
            "p has length {} but there are {} users",
            p.len(),
            channels.users()
        )));
    }
    Ok(())
}

fn check_filters(filters: &[CVector], channels: &ChannelSet) -> Result<()> {
    if filters.len() != channels.users() || filters.iter().any(|c| c.len() != channels.bs_antennas()) {
        return Err(Error::DimensionMismatch("filter bank shape does not match the channels".into()));
    }
    Ok(())
}

/// Output SINR of user `k` behind the linear filter `c_k`.
pub fn sinr(k: usize, gamma: &CVector, p: &DVector<f64>, filters: &[CVector], channels: &ChannelSet) -> Result<f64> {
    check_dims(gamma, p, channels)?;
    check_filters(filters, channels)?;
    let c = &filters[k];
    let filter_energy = c.norm_squared();
    if filter_energy == 0.0 {
        return Err(Error::ZeroFilter(k));
    }
    let mut interference = channels.noise_power() * filter_energy;
    let mut signal = 0.0;
    for (m, a) in channels.cascades().iter().enumerate() {
        let gain = c.dotc(&(a * gamma)).norm_sqr();
        if m == k {
            signal = p[k] * gain;
        } else {
            interference += p[m] * gain;
        }
    }
    Ok(signal / interference)
}

pub fn sinrs(gamma: &CVector, p: &DVector<f64>, filters: &[CVector], channels: &ChannelSet) -> Result<Vec<f64>> {
    (0..channels.users()).map(|k| sinr(k, gamma, p, filters, channels)).collect()
}

/// `sum_k log2(1 + SINR_k)` for a fixed filter bank.
pub fn spectral_efficiency(gamma: &CVector, p: &DVector<f64>, filters: &[CVector], channels: &ChannelSet) -> Result<f64> {
    Ok(sinrs(gamma, p, filters, channels)?.iter().map(|s| s.ln_1p() * LOG2_E).sum())
}

/// Per-user rates `B log2(1 + SINR_k)` in bit/s and the GEE in bit/J.
pub fn rates_and_gee(
    gamma: &CVector,
    p: &DVector<f64>,
    filters: &[CVector],
    channels: &ChannelSet,
    power: &PowerModel,
) -> Result<(Vec<f64>, f64)> {
    let rates: Vec<f64> = sinrs(gamma, p, filters, channels)?
        .iter()
        .map(|s| power.bandwidth_hz * s.ln_1p() * LOG2_E)
        .collect();
    let gee = rates.iter().sum::<f64>() / power.consumed(p);
    Ok((rates, gee))
}

/// Interference-plus-noise covariance `M_k = sum_{m != k} p_m v_m v_m^H + sigma^2 I`.
fn interference_covariance(k: usize, signatures: &[CVector], p: &DVector<f64>, noise: f64) -> CMatrix {
    let nr = signatures[0].len();
    let mut m = CMatrix::identity(nr, nr) * C64::new(noise, 0.0);
    for (j, v) in signatures.iter().enumerate() {
        if j != k && p[j] != 0.0 {
            m.ger(C64::new(p[j], 0.0), v, &v.conjugate(), ONE);
        }
    }
    m
}

/// Closed-form MMSE filter `sqrt(p_k) M_k^{-1} A_k gamma`.
pub fn mmse_filter(k: usize, gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<CVector> {
    check_dims(gamma, p, channels)?;
    let sig = channels.signatures(gamma);
    let m = interference_covariance(k, &sig, p, channels.noise_power());
    let solved = cholesky(&m)?.solve(&sig[k]);
    Ok(solved * C64::new(p[k].sqrt(), 0.0))
}

pub fn mmse_filters(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<Vec<CVector>> {
    (0..channels.users()).map(|k| mmse_filter(k, gamma, p, channels)).collect()
}

/// MMSE filters with nonzero stand-ins where the closed form vanishes
/// (`p_k = 0` or `A_k gamma = 0`). SINR is scale invariant, so the
/// unscaled `M_k^{-1} A_k gamma` is used first and `e_1` as a last resort.
/// Either way the SINR of such a user is zero.
pub fn mmse_filter_bank(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<Vec<CVector>> {
    check_dims(gamma, p, channels)?;
    let sig = channels.signatures(gamma);
    (0..channels.users())
        .map(|k| {
            let m = interference_covariance(k, &sig, p, channels.noise_power());
            let solved = cholesky(&m)?.solve(&sig[k]);
            if solved.norm_squared() > 0.0 {
                Ok(if p[k] > 0.0 { solved * C64::new(p[k].sqrt(), 0.0) } else { solved })
            } else {
                let mut e1 = CVector::from_element(channels.bs_antennas(), ZERO);
                e1[0] = ONE;
                Ok(e1)
            }
        })
        .collect()
}

/// Per-user MMSE spectral efficiencies `log2(1 + p_k gamma^H A_k^H M_k^{-1} A_k gamma)`.
pub fn mmse_user_rates(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<Vec<f64>> {
    check_dims(gamma, p, channels)?;
    let sig = channels.signatures(gamma);
    (0..channels.users())
        .map(|k| {
            if p[k] == 0.0 {
                return Ok(0.0);
            }
            let m = interference_covariance(k, &sig, p, channels.noise_power());
            let quad = sig[k].dotc(&cholesky(&m)?.solve(&sig[k])).re.max(0.0);
            Ok((p[k] * quad).ln_1p() * LOG2_E)
        })
        .collect()
}

/// Same per-user rates through the log-determinant identity
/// `log2|sigma^2 I + sum_m B_m| - log2|M_k|`. Both sides are divided by
/// `sigma^2` and evaluated as `sum log1p(lambda)` over the eigenvalues of the
/// whitened signal part, which keeps weak links accurate.
pub fn mmse_user_rates_det_form(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<Vec<f64>> {
    check_dims(gamma, p, channels)?;
    let sig = channels.signatures(gamma);
    let noise = channels.noise_power();
    let nr = channels.bs_antennas();
    let ln_det_plus_identity = |skip: Option<usize>| {
        let mut s = CMatrix::zeros(nr, nr);
        for (m, v) in sig.iter().enumerate().filter(|(m, _)| Some(*m) != skip) {
            s.ger(C64::new(p[m] / noise, 0.0), v, &v.conjugate(), ONE);
        }
        HermitianEigen::new(&s).values.iter().map(|l| l.max(0.0).ln_1p()).sum::<f64>()
    };
    let ln_total = ln_det_plus_identity(None);
    Ok((0..channels.users()).map(|k| (ln_total - ln_det_plus_identity(Some(k))) * LOG2_E).collect())
}

/// MMSE-embedded sum rate in bit/s/Hz.
pub fn sr_mmse(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<f64> {
    Ok(mmse_user_rates(gamma, p, channels)?.iter().sum())
}

pub fn sr_mmse_det_form(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet) -> Result<f64> {
    Ok(mmse_user_rates_det_form(gamma, p, channels)?.iter().sum())
}

/// `B SR_MMSE / (P_c + sum_k mu_k p_k)` in bit/J.
pub fn gee_mmse(gamma: &CVector, p: &DVector<f64>, channels: &ChannelSet, power: &PowerModel) -> Result<f64> {
    Ok(power.bandwidth_hz * sr_mmse(gamma, p, channels)? / power.consumed(p))
}

/// Decision variables with their exactly evaluated metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub gamma: CVector,
    pub p: DVector<f64>,
    pub filters: Vec<CVector>,
    pub sinr: Vec<f64>,
    pub rates_bps: Vec<f64>,
    pub gee_bits_per_joule: f64,
}

impl Allocation {
    pub fn evaluate(
        gamma: CVector,
        p: DVector<f64>,
        filters: Vec<CVector>,
        channels: &ChannelSet,
        power: &PowerModel,
    ) -> Result<Self> {
        let sinr = sinrs(&gamma, &p, &filters, channels)?;
        let rates_bps: Vec<f64> = sinr.iter().map(|s| power.bandwidth_hz * s.ln_1p() * LOG2_E).collect();
        let gee_bits_per_joule = rates_bps.iter().sum::<f64>() / power.consumed(&p);
        Ok(Self { gamma, p, filters, sinr, rates_bps, gee_bits_per_joule })
    }

    /// Evaluates `(gamma, p)` behind the MMSE filter bank.
    pub fn with_mmse_filters(gamma: CVector, p: DVector<f64>, channels: &ChannelSet, power: &PowerModel) -> Result<Self> {
        let filters = mmse_filter_bank(&gamma, &p, channels)?;
        Self::evaluate(gamma, p, filters, channels, power)
    }

    pub fn sum_rate_bps(&self) -> f64 {
        self.rates_bps.iter().sum()
    }

    /// Re-evaluates the stored variables and returns the worst relative
    /// deviation of the stored rates and GEE.
    pub fn consistency_error(&self, channels: &ChannelSet, power: &PowerModel) -> Result<f64> {
        let (rates, gee) = rates_and_gee(&self.gamma, &self.p, &self.filters, channels, power)?;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
        let worst_rate = rates
            .iter()
            .zip(&self.rates_bps)
            .map(|(a, b)| if *b == 0.0 { a.abs() } else { rel(*a, *b) })
            .fold(0.0, f64::max);
        let gee_err = if self.gee_bits_per_joule == 0.0 { gee.abs() } else { rel(gee, self.gee_bits_per_joule) };
        Ok(worst_rate.max(gee_err))
    }
}
