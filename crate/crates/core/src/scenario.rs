//! Network geometry, path loss, Rician fading, and the hardware power model.
//!
//! A drop places the RIS at the origin (at `ris_height_m`), the base station
//! `bs_ris_distance_m` away along the x axis, and the users uniformly in a
//! disc around the RIS. Each link segment gets its own path-loss amplitude
//! and Rician fading; there is no direct user to base-station path.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_normal, CMatrix, CVector, C64};

/// All physical and deployment parameters of the uplink. Powers are in dBm.
/// Fields missing from a JSON file take their [`Default`] values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemScenario {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "N_R")]
    pub bs_antennas: usize,
    #[serde(rename = "N")]
    pub ris_elements: usize,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub pathloss_exponent: f64,
    pub ref_gain_db_at_1m: f64,
    pub user_radius_m: f64,
    pub bs_ris_distance_m: f64,
    pub ris_height_m: f64,
    pub bs_height_m: f64,
    pub user_height_range_m: [f64; 2],
    #[serde(rename = "rice_K_tx")]
    pub rice_k_tx: f64,
    #[serde(rename = "rice_K_rx")]
    pub rice_k_rx: f64,
    #[serde(rename = "P0_dbm")]
    pub p0_dbm: f64,
    #[serde(rename = "P0_ris_dbm")]
    pub p0_ris_dbm: f64,
    #[serde(rename = "Pcn_dbm")]
    pub pcn_dbm: f64,
    pub mu: Vec<f64>,
    #[serde(rename = "P_R")]
    pub p_r: f64,
    #[serde(rename = "Pmax_dbm")]
    pub pmax_dbm: f64,
}

impl Default for SystemScenario {
    fn default() -> Self {
        Self {
            users: 4,
            bs_antennas: 4,
            ris_elements: 100,
            bandwidth_hz: 20e6,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 10.0,
            pathloss_exponent: 4.0,
            ref_gain_db_at_1m: -30.0,
            user_radius_m: 100.0,
            bs_ris_distance_m: 50.0,
            ris_height_m: 15.0,
            bs_height_m: 10.0,
            user_height_range_m: [0.0, 5.0],
            rice_k_tx: 4.0,
            rice_k_rx: 2.0,
            p0_dbm: 40.0,
            p0_ris_dbm: 20.0,
            pcn_dbm: 0.0,
            mu: vec![1.0; 4],
            p_r: 1.0,
            pmax_dbm: 30.0,
        }
    }
}

impl SystemScenario {
    /// Same deployment with different array sizes; `mu` is resized by
    /// repeating its first entry.
    pub fn with_sizes(mut self, users: usize, bs_antennas: usize, ris_elements: usize) -> Self {
        let fill = self.mu.first().copied().unwrap_or(1.0);
        self.mu.resize(users, fill);
        self.users = users;
        self.bs_antennas = bs_antennas;
        self.ris_elements = ris_elements;
        self
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let scenario: Self = serde_json::from_str(&text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(msg.to_string()));
        if self.users == 0 || self.bs_antennas == 0 || self.ris_elements == 0 {
            return bad("K, N_R and N must be at least 1");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive");
        }
        if !(self.pathloss_exponent > 0.0) {
            return bad("pathloss_exponent must be positive");
        }
        if !(self.rice_k_tx >= 0.0) || !(self.rice_k_rx >= 0.0) {
            return bad("Rician factors must be nonnegative");
        }
        if !(self.p_r > 0.0 && self.p_r <= 1.0) {
            return bad("P_R must lie in (0, 1]");
        }
        if self.mu.len() != self.users {
            return bad("mu must have one entry per user");
        }
        if self.mu.iter().any(|&m| !(m > 0.0)) {
            return bad("every mu_k must be positive");
        }
        let [lo, hi] = self.user_height_range_m;
        if !(lo <= hi) {
            return bad("user_height_range_m must satisfy lo <= hi");
        }
        if !(self.user_radius_m >= 0.0) || !(self.bs_ris_distance_m >= 0.0) {
            return bad("distances must be nonnegative");
        }
        let ris_bs = self.ris_bs_distance();
        if ris_bs < 1.0 {
            return bad("RIS to base-station distance must be at least 1 m");
        }
        if !self.pmax_dbm.is_finite() {
            return bad("Pmax_dbm must be finite");
        }
        Ok(())
    }

    pub fn noise_power_w(&self) -> f64 {
        noise_power(self.bandwidth_hz, self.noise_psd_dbm_hz, self.noise_figure_db)
    }

    pub fn ris_position(&self) -> [f64; 3] {
        [0.0, 0.0, self.ris_height_m]
    }

    pub fn bs_position(&self) -> [f64; 3] {
        [self.bs_ris_distance_m, 0.0, self.bs_height_m]
    }

    fn ris_bs_distance(&self) -> f64 {
        distance(self.ris_position(), self.bs_position())
    }
}

/// Static power `P_c`, amplifier inefficiencies, power caps, and bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerModel {
    pub static_power_w: f64,
    pub mu: Vec<f64>,
    pub pmax_w: Vec<f64>,
    pub bandwidth_hz: f64,
}

impl PowerModel {
    pub fn new(static_power_w: f64, mu: Vec<f64>, pmax_w: Vec<f64>, bandwidth_hz: f64) -> Result<Self> {
        if !(static_power_w > 0.0) {
            return Err(Error::InvalidPowerModel(format!("P_c = {static_power_w} W must be positive")));
        }
        if mu.len() != pmax_w.len() {
            return Err(Error::InvalidPowerModel("mu and Pmax lengths differ".into()));
        }
        if pmax_w.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidPowerModel("every Pmax_k must be positive and finite".into()));
        }
        if mu.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidPowerModel("mu must be nonnegative and finite".into()));
        }
        if !(bandwidth_hz > 0.0) {
            return Err(Error::InvalidPowerModel("bandwidth must be positive".into()));
        }
        Ok(Self { static_power_w, mu, pmax_w, bandwidth_hz })
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }

    /// `P_c + sum_k mu_k p_k`.
    pub fn consumed(&self, p: &DVector<f64>) -> f64 {
        self.static_power_w + self.mu.iter().zip(p.iter()).map(|(m, x)| m * x).sum::<f64>()
    }

    pub fn pmax(&self) -> DVector<f64> {
        DVector::from_vec(self.pmax_w.clone())
    }

    /// Copy with every `mu_k = 0`, turning GEE into sum rate over `P_c`.
    pub fn without_amplifier_cost(&self) -> Self {
        Self { mu: vec![0.0; self.mu.len()], ..self.clone() }
    }
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Thermal noise power over the band, including the receiver noise figure.
pub fn noise_power(bandwidth_hz: f64, psd_dbm_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watt(psd_dbm_hz + noise_figure_db) * bandwidth_hz
}

/// `P_c = P_0 + N P_cn + P_0,RIS` together with `mu` and the power caps.
pub fn total_static_power(scenario: &SystemScenario) -> Result<PowerModel> {
    let static_power = dbm_to_watt(scenario.p0_dbm)
        + scenario.ris_elements as f64 * dbm_to_watt(scenario.pcn_dbm)
        + dbm_to_watt(scenario.p0_ris_dbm);
    PowerModel::new(
        static_power,
        scenario.mu.clone(),
        vec![dbm_to_watt(scenario.pmax_dbm); scenario.users],
        scenario.bandwidth_hz,
    )
}

/// Linear power gain `10^(g0/10) d^-eta` for `d >= 1` m.
pub fn path_loss_gain(distance_m: f64, exponent: f64, ref_gain_db_at_1m: f64) -> Result<f64> {
    if !(distance_m >= 1.0) {
        return Err(Error::DistanceTooShort(distance_m));
    }
    Ok(10f64.powf(ref_gain_db_at_1m / 10.0) * distance_m.powf(-exponent))
}

/// One channel realization: RIS-to-BS matrix `G`, user-to-RIS vectors `h_k`,
/// and the cascades `A_k = G diag(h_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    g: CMatrix,
    h: Vec<CVector>,
    a: Vec<CMatrix>,
    noise_power_w: f64,
}

impl ChannelSet {
    pub fn new(g: CMatrix, h: Vec<CVector>, noise_power_w: f64) -> Result<Self> {
        if !(noise_power_w > 0.0 && noise_power_w.is_finite()) {
            return Err(Error::NonPositive("noise power"));
        }
        if h.is_empty() {
            return Err(Error::EmptyInput("user channels"));
        }
        let a = build_cascades(&g, &h)?;
        let finite = g.iter().chain(h.iter().flat_map(|v| v.iter())).all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(Error::NonFinite);
        }
        Ok(Self { g, h, a, noise_power_w })
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    pub fn bs_antennas(&self) -> usize {
        self.g.nrows()
    }

    pub fn ris_elements(&self) -> usize {
        self.g.ncols()
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn h(&self, k: usize) -> &CVector {
        &self.h[k]
    }

    pub fn cascade(&self, k: usize) -> &CMatrix {
        &self.a[k]
    }

    pub fn cascades(&self) -> &[CMatrix] {
        &self.a
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power_w
    }

    /// Received signatures `v_k = A_k gamma` for every user.
    pub fn signatures(&self, gamma: &CVector) -> Vec<CVector> {
        self.a.iter().map(|a| a * gamma).collect()
    }
}

/// `A_k = G diag(h_k)`: column `n` of `A_k` is column `n` of `G` times `h_k(n)`.
pub fn build_cascades(g: &CMatrix, h: &[CVector]) -> Result<Vec<CMatrix>> {
    h.iter()
        .enumerate()
        .map(|(k, hk)| {
            if hk.len() != g.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "h_{k} has length {} but G has {} columns",
                    hk.len(),
                    g.ncols()
                )));
            }
            let mut a = g.clone();
            for (n, mut col) in a.column_iter_mut().enumerate() {
                col *= hk[n];
            }
            Ok(a)
        })
        .collect()
}

/// Unit-modulus rank-one line-of-sight matrix `u v^H` with half-wavelength
/// linear phase progressions at angles `row_angle` and `col_angle` and a
/// common phase offset.
pub fn los_component(rows: usize, cols: usize, row_angle: f64, col_angle: f64, phase: f64) -> CMatrix {
    let u = CVector::from_fn(rows, |i, _| C64::from_polar(1.0, PI * i as f64 * row_angle.sin() + phase));
    let v = CVector::from_fn(cols, |j, _| C64::from_polar(1.0, PI * j as f64 * col_angle.sin()));
    &u * v.adjoint()
}

fn draw_los<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let row_angle = rng.random_range(-PI / 2.0..PI / 2.0);
    let col_angle = rng.random_range(-PI / 2.0..PI / 2.0);
    let phase = rng.random_range(0.0..2.0 * PI);
    los_component(rows, cols, row_angle, col_angle, phase)
}

fn rician_weights(k_factor: f64) -> (f64, f64) {
    if k_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k_factor / (k_factor + 1.0)).sqrt(), (1.0 / (k_factor + 1.0)).sqrt())
    }
}

/// `amplitude (sqrt(K/(K+1)) los + sqrt(1/(K+1)) nlos)` with a fresh NLOS draw.
pub fn rician_with_los<R: Rng + ?Sized>(los: &CMatrix, k_factor: f64, amplitude: f64, rng: &mut R) -> CMatrix {
    let (w_los, w_nlos) = rician_weights(k_factor);
    CMatrix::from_fn(los.nrows(), los.ncols(), |r, c| {
        let nlos = complex_normal(rng);
        (los[(r, c)] * w_los + nlos * w_nlos) * amplitude
    })
}

pub fn rician_channel_with<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    k_factor: f64,
    amplitude: f64,
    rng: &mut R,
) -> CMatrix {
    let los = draw_los(rows, cols, rng);
    rician_with_los(&los, k_factor, amplitude, rng)
}

pub fn rician_channel(rows: usize, cols: usize, k_factor: f64, amplitude: f64, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rician_channel_with(rows, cols, k_factor, amplitude, &mut rng)
}

/// Positions and line-of-sight parts behind a drop, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DropGeometry {
    pub users: Vec<[f64; 3]>,
    pub user_ris_distance_m: Vec<f64>,
    pub ris_bs_distance_m: f64,
    /// Line-of-sight part of `G`, already scaled by its path-loss amplitude.
    pub g_los: CMatrix,
    pub h_los: Vec<CVector>,
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn generate_drop(scenario: &SystemScenario, seed: u64) -> Result<ChannelSet> {
    generate_drop_with_geometry(scenario, seed).map(|(channels, _)| channels)
}

pub fn generate_drop_with_geometry(scenario: &SystemScenario, seed: u64) -> Result<(ChannelSet, DropGeometry)> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ris = scenario.ris_position();
    let [h_lo, h_hi] = scenario.user_height_range_m;

    let mut users = Vec::with_capacity(scenario.users);
    let mut user_dist = Vec::with_capacity(scenario.users);
    while users.len() < scenario.users {
        let radius = scenario.user_radius_m * rng.random::<f64>().sqrt();
        let angle = rng.random_range(0.0..2.0 * PI);
        let height = if h_hi > h_lo { rng.random_range(h_lo..h_hi) } else { h_lo };
        let pos = [radius * angle.cos(), radius * angle.sin(), height];
        let d = distance(pos, ris);
        if d < 1.0 {
            continue;
        }
        users.push(pos);
        user_dist.push(d);
    }

    let ris_bs = scenario.ris_bs_distance();
    let eta = scenario.pathloss_exponent;
    let g0 = scenario.ref_gain_db_at_1m;
    let g_amp = path_loss_gain(ris_bs, eta, g0)?.sqrt();
    let g_los = draw_los(scenario.bs_antennas, scenario.ris_elements, &mut rng);
    let g = rician_with_los(&g_los, scenario.rice_k_tx, g_amp, &mut rng);

    let mut h = Vec::with_capacity(scenario.users);
    let mut h_los = Vec::with_capacity(scenario.users);
    for &d in &user_dist {
        let amp = path_loss_gain(d, eta, g0)?.sqrt();
        let los = draw_los(scenario.ris_elements, 1, &mut rng);
        let hk = rician_with_los(&los, scenario.rice_k_rx, amp, &mut rng);
        h.push(hk.column(0).into_owned());
        let (w_los, _) = rician_weights(scenario.rice_k_rx);
        h_los.push(los.column(0) * C64::new(amp * w_los, 0.0));
    }
    let (w_los, _) = rician_weights(scenario.rice_k_tx);
    let geometry = DropGeometry {
        users,
        user_ris_distance_m: user_dist,
        ris_bs_distance_m: ris_bs,
        g_los: g_los * C64::new(g_amp * w_los, 0.0),
        h_los,
    };
    let channels = ChannelSet::new(g, h, scenario.noise_power_w())?;
    Ok((channels, geometry))
}
