//! The incompatibility experiment: external vs policy regret against the
//! reactive adversary, on two arms.
//!
//! Arm `fixed` plays action 1 forever: zero policy regret, linear external
//! regret. Arm `mwu` runs full-information MWU on the reactive sequence:
//! sublinear external regret, linear policy regret.

use anyhow::{bail, Context, Result};
use policy_dyn_core::learners::{Learner, ReactiveUtility, WindowUtility};
use policy_dyn_core::regret::{
    external_regret_reactive, policy_regret_reactive, realized_reactive_utility,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Fixed,
    Mwu,
}

impl std::str::FromStr for Arm {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Arm> {
        match s {
            "fixed" => Ok(Arm::Fixed),
            "mwu" => Ok(Arm::Mwu),
            other => bail!("unknown arm {other:?}; expected fixed or mwu"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: Arm,
    pub rounds: u64,
    pub memory: usize,
    pub seed: u64,
    pub realized_utility: f64,
    pub external_regret: f64,
    /// Policy regret per deviation action (0 and 1).
    pub policy_regrets: Vec<f64>,
    pub policy_regret_max: f64,
}

fn action_sequence(arm: Arm, rule: &ReactiveUtility, rounds: u64, seed: u64) -> Result<Vec<usize>> {
    match arm {
        Arm::Fixed => Ok(vec![1usize; rounds as usize]),
        Arm::Mwu => {
            let mut learner = Learner::mwu(2, rounds, 1.0, seed)?;
            let m = rule.memory();
            let mut actions: Vec<usize> = Vec::with_capacity(rounds as usize);
            for t in 1..=rounds {
                let strategy = learner.strategy();
                let a = learner.sample_round_action(t, &strategy);
                actions.push(a);
                // Full information: the utility of each own action given the
                // realized window prefix, early rounds padded with the first
                // action.
                let mut column = [0.0f64; 2];
                for (alt, slot) in column.iter_mut().enumerate() {
                    let window: Vec<usize> = (0..m)
                        .map(|k| {
                            let pos = (t as usize + k + 1) as isize - m as isize;
                            if pos == t as isize {
                                alt
                            } else if pos < 1 {
                                actions[0]
                            } else {
                                actions[pos as usize - 1]
                            }
                        })
                        .collect();
                    *slot = rule.eval(&window)?;
                }
                learner.observe(policy_dyn_core::Feedback::Full(&column))?;
            }
            Ok(actions)
        }
    }
}

/// Runs one arm of the experiment.
pub fn run_arm(arm: Arm, rounds: u64, memory: usize, seed: u64) -> Result<ArmReport> {
    let rule = ReactiveUtility::new(memory)?;
    let actions = action_sequence(arm, &rule, rounds, seed)?;
    let realized = realized_reactive_utility(&actions, &rule)?;
    let external = external_regret_reactive(&actions, &rule, 2)?;
    let policy: Vec<f64> = (0..2)
        .map(|dev| policy_regret_reactive(&actions, &rule, memory, dev))
        .collect::<policy_dyn_core::Result<_>>()?;
    let policy_max = policy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ArmReport {
        arm,
        rounds,
        memory,
        seed,
        realized_utility: realized,
        external_regret: external,
        policy_regrets: policy,
        policy_regret_max: policy_max,
    })
}

/// Runs the requested arm, or both when `arm` is `None`.
pub fn run_incompat(
    rounds: u64,
    memory: usize,
    seed: u64,
    arm: Option<Arm>,
) -> Result<Vec<ArmReport>> {
    let arms: Vec<Arm> = match arm {
        Some(a) => vec![a],
        None => vec![Arm::Fixed, Arm::Mwu],
    };
    arms.into_iter()
        .map(|a| run_arm(a, rounds, memory, seed))
        .collect()
}

/// Writes `<prefix>.json` (full detail) and `<prefix>.csv` (one row per arm).
pub fn emit_incompat(reports: &[ArmReport], out_prefix: &str) -> Result<(PathBuf, PathBuf)> {
    use crate::report::fmt_sig12;
    let csv_path = PathBuf::from(format!("{out_prefix}.csv"));
    let json_path = PathBuf::from(format!("{out_prefix}.json"));
    if let Some(dir) = csv_path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let mut csv = String::from(
        "arm,rounds,memory,seed,realized_utility,external_regret,policy_regret_max\n",
    );
    for r in reports {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            match r.arm {
                Arm::Fixed => "fixed",
                Arm::Mwu => "mwu",
            },
            r.rounds,
            r.memory,
            r.seed,
            fmt_sig12(r.realized_utility),
            fmt_sig12(r.external_regret),
            fmt_sig12(r.policy_regret_max),
        ));
    }
    fs::write(&csv_path, csv).with_context(|| format!("writing {}", csv_path.display()))?;
    fs::write(&json_path, serde_json::to_string_pretty(reports)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}
