//! Monte Carlo experiments: configuration, seeded drops, paired method runs,
//! CSV output, summaries, and the self-test behind the `check` command.

mod selftest;
mod summary;

pub use selftest::{self_test, SelfTestConfig, SelfTestReport, SuiteResult};
pub use summary::{summarize, GroupKey, SummaryRow};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_method, Method, MethodConfig, Objective};
use crate::error::{Error, Result};
use crate::metrics::Allocation;
use crate::scenario::{generate_drop, total_static_power, SystemScenario};

/// Scenario parameter varied across the sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "Pmax_dbm")]
    PmaxDbm,
    /// Both Rician factors at once.
    #[serde(rename = "rice_K")]
    RiceK,
    #[serde(rename = "rice_K_tx")]
    RiceKTx,
    #[serde(rename = "rice_K_rx")]
    RiceKRx,
    #[serde(rename = "P_R")]
    PR,
    /// Number of RIS elements.
    N,
}

impl SweepVar {
    pub fn id(&self) -> &'static str {
        match self {
            Self::PmaxDbm => "Pmax_dbm",
            Self::RiceK => "rice_K",
            Self::RiceKTx => "rice_K_tx",
            Self::RiceKRx => "rice_K_rx",
            Self::PR => "P_R",
            Self::N => "N",
        }
    }

    /// Copy of `scenario` with this variable set to `value`.
    pub fn apply(&self, scenario: &SystemScenario, value: f64) -> Result<SystemScenario> {
        let mut s = scenario.clone();
        match self {
            Self::PmaxDbm => s.pmax_dbm = value,
            Self::RiceK => {
                s.rice_k_tx = value;
                s.rice_k_rx = value;
            }
            Self::RiceKTx => s.rice_k_tx = value,
            Self::RiceKRx => s.rice_k_rx = value,
            Self::PR => s.p_r = value,
            Self::N => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::InvalidConfig(format!("N must be a positive integer, got {value}")));
                }
                s.ris_elements = value as usize;
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

fn default_drops() -> usize {
    100
}

/// One experiment: every method runs on every (sweep value, drop) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: SystemScenario,
    pub methods: Vec<MethodConfig>,
    /// Without a sweep the scenario runs as given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_drops")]
    pub drops: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.drops == 0 {
            return bad("drops must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("method list is empty".into());
        }
        for m in &self.methods {
            m.validate()?;
        }
        self.scenario.validate()?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return bad("sweep has no values".into());
            }
            if let Some(v) = sweep.values.iter().find(|v| !v.is_finite()) {
                return bad(format!("sweep value {v} is not finite"));
            }
            for &v in &sweep.values {
                sweep.var.apply(&self.scenario, v)?;
            }
        }
        Ok(())
    }

    /// `(var id, value, scenario)` for every sweep point.
    fn points(&self) -> Result<Vec<(&'static str, f64, SystemScenario)>> {
        match &self.sweep {
            None => Ok(vec![("none", 0.0, self.scenario.clone())]),
            Some(sweep) => sweep.values.iter().map(|&v| Ok((sweep.var.id(), v, sweep.var.apply(&self.scenario, v)?))).collect(),
        }
    }

    /// The default deployment with both methods in GEE mode, both in
    /// sum-rate mode, and the random-phase baseline, over a sweep of the
    /// transmit-power limit.
    pub fn defaults() -> Self {
        let gee = |m| MethodConfig::new(m);
        let rate = |m| MethodConfig::new(m).with_objective(Objective::SumRate);
        Self {
            scenario: SystemScenario::default(),
            methods: vec![
                gee(Method::Approach1),
                gee(Method::Approach2),
                rate(Method::Approach1),
                rate(Method::Approach2),
                gee(Method::BaselineUniformRandom),
            ],
            sweep: Some(Sweep { var: SweepVar::PmaxDbm, values: vec![-10.0, 0.0, 10.0, 20.0, 30.0, 40.0] }),
            drops: default_drops(),
            base_seed: 0,
            output_path: Some(PathBuf::from("results.csv")),
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Channel seed of a drop; every method and sweep point at that drop shares it.
pub fn drop_seed(base_seed: u64, drop_index: usize) -> u64 {
    splitmix64(base_seed ^ drop_index as u64)
}

/// One method on one drop at one sweep point.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub drop_index: usize,
    pub seed: u64,
    pub method: &'static str,
    pub objective: &'static str,
    pub constraint: &'static str,
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub gee_bits_per_joule: f64,
    pub sum_rate_bps: f64,
    pub rates_bps: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Returned variables, evaluated under the true power model.
    pub allocation: Allocation,
}

fn run_point(scenario: &SystemScenario, sweep: (&'static str, f64), drop_index: usize, config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let seed = drop_seed(config.base_seed, drop_index);
    let channels = generate_drop(scenario, seed)?;
    let power = total_static_power(scenario)?;
    config
        .methods
        .iter()
        .map(|method| {
            let mut method = method.clone();
            method.options.seed = splitmix64(seed ^ method.options.seed);
            let start = Instant::now();
            let out = run_method(&method, &channels, &power, scenario.p_r)?;
            let wall_time_s = start.elapsed().as_secs_f64();
            let allocation = out.allocation;
            Ok(ResultRecord {
                drop_index,
                seed,
                method: method.method_id(),
                objective: method.objective_id(),
                constraint: method.constraint_id(),
                sweep_var: sweep.0,
                sweep_value: sweep.1,
                gee_bits_per_joule: allocation.gee_bits_per_joule,
                sum_rate_bps: allocation.sum_rate_bps(),
                rates_bps: allocation.rates_bps.clone(),
                iterations_used: out.trace.iterations_used,
                converged: out.trace.converged,
                wall_time_s,
                allocation,
            })
        })
        .collect()
}

/// Runs every method on every (sweep value, drop) pair with `threads`
/// workers. Records come back ordered by sweep value, drop, then method
/// regardless of the worker count.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    if threads == 0 {
        return Err(Error::InvalidConfig("threads must be at least 1".into()));
    }
    let points = config.points()?;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..config.drops).map(move |d| (i, d))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let batches: Vec<Result<Vec<ResultRecord>>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, d)| {
                let (var, value, scenario) = &points[i];
                run_point(scenario, (var, *value), d, config)
            })
            .collect()
    });
    let mut records = Vec::with_capacity(jobs.len() * config.methods.len());
    for batch in batches {
        records.extend(batch?);
    }
    Ok(records)
}

fn float(v: f64) -> String {
    format!("{v:.11e}")
}

/// CSV header for `users` per-user rate columns.
pub fn csv_header(users: usize) -> Vec<String> {
    let mut header: Vec<String> =
        ["drop", "seed", "method", "objective", "constraint", "sweep_var", "sweep_value", "gee", "sum_rate"].map(String::from).to_vec();
    header.extend((1..=users).map(|k| format!("rate_{k}")));
    header.extend(["iters", "wall_time_s"].map(String::from));
    header
}

/// Writes the records as CSV; floats carry 12 significant digits.
pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> Result<()> {
    let users = records.first().map_or(0, |r| r.rates_bps.len());
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(csv_header(users))?;
    for r in records {
        if r.rates_bps.len() != users {
            return Err(Error::DimensionMismatch("records differ in user count".into()));
        }
        let mut row = vec![
            r.drop_index.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
            r.objective.to_string(),
            r.constraint.to_string(),
            r.sweep_var.to_string(),
            float(r.sweep_value),
            float(r.gee_bits_per_joule),
            float(r.sum_rate_bps),
        ];
        row.extend(r.rates_bps.iter().map(|&v| float(v)));
        row.push(r.iterations_used.to_string());
        row.push(float(r.wall_time_s));
        writer.write_record(&row)?;
    }
    writer.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_csv_file(records: &[ResultRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(records, std::io::BufWriter::new(file))
}
