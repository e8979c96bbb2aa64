//! Run configuration: the structured-text contract of the `simulate` mode.

use anyhow::{anyhow, bail, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

fn default_scale() -> f64 {
    1.0
}

fn default_record_every() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Selfplay,
    Incompat,
    CheckEq,
    Example,
}

/// One learner's configuration. Effective step sizes are
/// `eta = eta_scale / sqrt(T)` and `gamma = gamma_scale / sqrt(T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algo: String,
    pub seed: u64,
    #[serde(default = "default_scale")]
    pub eta_scale: f64,
    #[serde(default = "default_scale")]
    pub gamma_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgoSpec {
    Mwu,
    Exp3,
    Fixed(usize),
    CceTrack,
}

impl LearnerConfig {
    pub fn algo_spec(&self) -> Result<AlgoSpec> {
        let algo = self.algo.as_str();
        if algo == "mwu" {
            Ok(AlgoSpec::Mwu)
        } else if algo == "exp3" {
            Ok(AlgoSpec::Exp3)
        } else if algo == "cce-track" {
            Ok(AlgoSpec::CceTrack)
        } else if let Some(idx) = algo.strip_prefix("fixed:") {
            let idx: usize = idx
                .parse()
                .map_err(|_| anyhow!("bad fixed action index in algo {algo:?}"))?;
            Ok(AlgoSpec::Fixed(idx))
        } else {
            bail!("unknown algo {algo:?}; expected mwu, exp3, fixed:<index>, or cce-track")
        }
    }
}

/// Full run configuration, serialized with exactly these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(default)]
    pub game: Option<PathBuf>,
    pub rounds: u64,
    pub memory: usize,
    pub learner1: LearnerConfig,
    pub learner2: LearnerConfig,
    #[serde(default)]
    pub lagged_empirical: bool,
    #[serde(default)]
    pub perturb: bool,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    pub out: String,
    pub seed: u64,
    /// Target joint distribution for cce-track learners (path to a
    /// JointDistribution file). Ignored by the other algorithms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds < 4.max(self.memory as u64 + 1) {
            bail!(
                "rounds = {} below the minimum max(4, memory + 1) = {}",
                self.rounds,
                4.max(self.memory as u64 + 1)
            );
        }
        if self.memory == 0 {
            bail!("memory must be at least 1");
        }
        if self.record_every == 0 {
            bail!("record_every must be at least 1");
        }
        let spec1 = self.learner1.algo_spec()?;
        let spec2 = self.learner2.algo_spec()?;
        for spec in [spec1, spec2] {
            if spec == AlgoSpec::CceTrack {
                if self.sigma.is_none() {
                    bail!("cce-track learners need a `sigma` target distribution path");
                }
                if self.perturb {
                    bail!("perturbation would break the tracker's correlated sampling");
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> RunConfig {
        RunConfig {
            mode: Mode::Selfplay,
            game: None,
            rounds: 100,
            memory: 1,
            learner1: LearnerConfig {
                algo: "mwu".into(),
                seed: 1,
                eta_scale: 1.0,
                gamma_scale: 1.0,
            },
            learner2: LearnerConfig {
                algo: "fixed:0".into(),
                seed: 2,
                eta_scale: 1.0,
                gamma_scale: 1.0,
            },
            lagged_empirical: false,
            perturb: false,
            record_every: 1,
            out: "out/run".into(),
            seed: 7,
        sigma: None,
        }
    }

    #[test]
    fn parses_algo_specs() {
        let mut cfg = base_config();
        assert_eq!(cfg.learner1.algo_spec().unwrap(), AlgoSpec::Mwu);
        assert_eq!(cfg.learner2.algo_spec().unwrap(), AlgoSpec::Fixed(0));
        cfg.learner1.algo = "exp3".into();
        assert_eq!(cfg.learner1.algo_spec().unwrap(), AlgoSpec::Exp3);
        cfg.learner1.algo = "banana".into();
        assert!(cfg.learner1.algo_spec().is_err());
    }

    #[test]
    fn validates_round_floor() {
        let mut cfg = base_config();
        cfg.rounds = 3;
        assert!(cfg.validate().is_err());
        cfg.rounds = 4;
        assert!(cfg.validate().is_ok());
        cfg.memory = 10;
        cfg.rounds = 10;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn tracker_requires_sigma() {
        let mut cfg = base_config();
        cfg.learner1.algo = "cce-track".into();
        assert!(cfg.validate().is_err());
        cfg.sigma = Some("sigma.json".into());
        assert!(cfg.validate().is_ok());
        cfg.perturb = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip_preserves_fields() {
        let cfg = base_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
