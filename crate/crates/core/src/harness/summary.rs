use serde::{Deserialize, Serialize};

use super::ResultRecord;
use crate::error::{Error, Result};

/// Record field a summary groups by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Method,
    Objective,
    Constraint,
    SweepValue,
}

impl GroupKey {
    fn label(&self, r: &ResultRecord) -> String {
        match self {
            Self::Method => r.method.to_string(),
            Self::Objective => r.objective.to_string(),
            Self::Constraint => r.constraint.to_string(),
            Self::SweepValue => format!("{:.11e}", r.sweep_value),
        }
    }
}

/// Mean and population standard deviation of GEE and sum rate in a group.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub key: Vec<String>,
    pub count: usize,
    pub gee_mean: f64,
    pub gee_sd: f64,
    pub sum_rate_mean: f64,
    pub sum_rate_sd: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Groups records by `keys`; groups appear in order of first occurrence.
pub fn summarize(records: &[ResultRecord], keys: &[GroupKey]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::EmptyInput("records"));
    }
    let mut groups: Vec<(Vec<String>, Vec<f64>, Vec<f64>)> = Vec::new();
    for r in records {
        let key: Vec<String> = keys.iter().map(|k| k.label(r)).collect();
        let slot = match groups.iter().position(|g| g.0 == key) {
            Some(i) => i,
            None => {
                groups.push((key, Vec::new(), Vec::new()));
                groups.len() - 1
            }
        };
        groups[slot].1.push(r.gee_bits_per_joule);
        groups[slot].2.push(r.sum_rate_bps);
    }
    Ok(groups
        .into_iter()
        .map(|(key, gee, rate)| {
            let (gee_mean, gee_sd) = mean_sd(&gee);
            let (sum_rate_mean, sum_rate_sd) = mean_sd(&rate);
            SummaryRow { key, count: gee.len(), gee_mean, gee_sd, sum_rate_mean, sum_rate_sd }
        })
        .collect())
}
