//! Run reports and their CSV/JSON rendering.
//!
//! All numbers in a report are pre-rounded to 12 significant digits so the
//! CSV and JSON renderings agree, round-trip exactly, and are byte-identical
//! across runs of the same seeded configuration.

use crate::config::RunConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::PathBuf;

/// Rounds to 12 significant digits.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Renders with at most 12 significant digits, shortest form.
pub fn fmt_sig12(x: f64) -> String {
    let r = round_sig12(x);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

/// One checkpoint of a self-play run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub round: u64,
    pub ext1: f64,
    pub ext2: f64,
    /// Policy regret of player 1 per deviation action, canonical order.
    pub pol1: Vec<f64>,
    pub pol2: Vec<f64>,
    pub pol1_max: f64,
    pub pol2_max: f64,
    pub slack: f64,
    pub l1_sigma_tilde_hat: f64,
    pub stat_res_hat: f64,
    pub stat_res_tilde: f64,
}

impl CheckpointRow {
    pub fn rounded(mut self) -> CheckpointRow {
        self.ext1 = round_sig12(self.ext1);
        self.ext2 = round_sig12(self.ext2);
        for v in self.pol1.iter_mut().chain(self.pol2.iter_mut()) {
            *v = round_sig12(*v);
        }
        self.pol1_max = round_sig12(self.pol1_max);
        self.pol2_max = round_sig12(self.pol2_max);
        self.slack = round_sig12(self.slack);
        self.l1_sigma_tilde_hat = round_sig12(self.l1_sigma_tilde_hat);
        self.stat_res_hat = round_sig12(self.stat_res_hat);
        self.stat_res_tilde = round_sig12(self.stat_res_tilde);
        self
    }
}

/// Full report of one run: config echo plus per-checkpoint rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub seed: u64,
    pub rows: Vec<CheckpointRow>,
}

pub const CSV_HEADER: &str =
    "round,ext1,ext2,pol1_max,pol2_max,slack,l1_sigma_tilde_hat,stat_res_hat,stat_res_tilde";

impl RunReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.round,
                fmt_sig12(r.ext1),
                fmt_sig12(r.ext2),
                fmt_sig12(r.pol1_max),
                fmt_sig12(r.pol2_max),
                fmt_sig12(r.slack),
                fmt_sig12(r.l1_sigma_tilde_hat),
                fmt_sig12(r.stat_res_hat),
                fmt_sig12(r.stat_res_tilde),
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes `<prefix>.csv` and `<prefix>.json`; returns the two paths.
pub fn emit_report(report: &RunReport, out_prefix: &str) -> Result<(PathBuf, PathBuf)> {
    let csv_path = PathBuf::from(format!("{out_prefix}.csv"));
    let json_path = PathBuf::from(format!("{out_prefix}.json"));
    if let Some(dir) = csv_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    fs::write(&csv_path, report.to_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;
    fs::write(&json_path, report.to_json()?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{LearnerConfig, Mode};

    fn dummy_config() -> RunConfig {
        RunConfig {
            mode: Mode::Selfplay,
            game: None,
            rounds: 8,
            memory: 1,
            learner1: LearnerConfig {
                algo: "mwu".into(),
                seed: 1,
                eta_scale: 1.0,
                gamma_scale: 1.0,
            },
            learner2: LearnerConfig {
                algo: "mwu".into(),
                seed: 2,
                eta_scale: 1.0,
                gamma_scale: 1.0,
            },
            lagged_empirical: false,
            perturb: false,
            record_every: 1,
            out: "x".into(),
            seed: 3,
            sigma: None,
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let report = RunReport {
            config: dummy_config(),
            seed: 3,
            rows: vec![],
        };
        let csv = report.to_csv();
        assert_eq!(csv.trim_end(), CSV_HEADER);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 9);
    }

    #[test]
    fn rows_round_trip_through_json() {
        let row = CheckpointRow {
            round: 4,
            ext1: 1.0 / 3.0,
            ext2: -0.25,
            pol1: vec![0.1, -0.2],
            pol2: vec![0.0, 0.0],
            pol1_max: 0.1,
            pol2_max: 0.0,
            slack: 2e-17,
            l1_sigma_tilde_hat: 0.5,
            stat_res_hat: 0.0,
            stat_res_tilde: 0.0,
        }
        .rounded();
        let report = RunReport {
            config: dummy_config(),
            seed: 3,
            rows: vec![row.clone()],
        };
        let text = report.to_json().unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.rows[0], row);
        assert_eq!(back.config, report.config);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(0.75), "0.75");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(round_sig12(123456789012345.0), 123456789012000.0);
    }
}
