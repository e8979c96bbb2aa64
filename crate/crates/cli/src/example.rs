//! Zero-setup reproduction of the built-in worked example.
//!
//! The row player responds to everything with `a`; the column player maps
//! `a -> c` and `b -> d`. The point mass on that function pair is a policy
//! equilibrium with witness concentrated on `(a, c)` worth 3/4 to the row
//! player, while the same joint distribution is not a CCE: deviating to `b`
//! against an unchanged column marginal pays 1.

use anyhow::Result;
use policy_dyn_core::equilibria::{is_cce, is_policy_equilibrium, EquilibriumVerdict};
use policy_dyn_core::game::{expected_utility, Game, JointDistribution, Player};
use policy_dyn_core::markov::{induced_chain, FunctionPairDistribution};
use serde::Serialize;

pub const CERT_TOL: f64 = 1e-10;

/// The embedded example game, compiled in so the run needs no files.
pub fn example_game() -> Game {
    Game::new(
        vec!["a".into(), "b".into()],
        vec!["c".into(), "d".into()],
        vec![vec![0.75, 0.0], vec![1.0, 0.0]],
        vec![vec![1.0, 1.0], vec![1.0, 1.0]],
    )
    .expect("embedded game is valid")
}

/// The example's function-pair distribution: row player constant `a`,
/// column player the responder `a -> c, b -> d`.
pub fn example_pi() -> FunctionPairDistribution {
    FunctionPairDistribution::dirac(2, 2, &[0, 0], &[0, 1]).expect("embedded pair is valid")
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct ExampleOutcome {
    pub policy_verdict: EquilibriumVerdict,
    pub cce_verdict: EquilibriumVerdict,
    pub witness_value: f64,
    pub deviation_value_b: f64,
    pub cce_slack_b: f64,
    pub checks: Vec<Check>,
}

impl ExampleOutcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every assertion of the worked example at `cce_tol` for the CCE check
/// (the policy-equilibrium certification always runs at [`CERT_TOL`]).
pub fn run_example(cce_tol: f64) -> Result<ExampleOutcome> {
    let game = example_game();
    let pi = example_pi();
    let mut checks = Vec::new();
    let mut check = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    // The induced chain must match the display: rows from (a, .) go to
    // (a, c), rows from (b, .) go to (a, d).
    let chain = induced_chain(&pi);
    let expect = [
        [1.0, 0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ];
    let chain_ok = chain
        .rows
        .iter()
        .zip(expect.iter())
        .all(|(row, want)| row.iter().zip(want).all(|(x, y)| (x - y).abs() <= CERT_TOL));
    check(
        "induced-chain",
        chain_ok,
        "induced chain equals the example transition matrix".into(),
    );

    let policy_verdict = is_policy_equilibrium(&pi, &game, CERT_TOL)?;
    check(
        "policy-equilibrium",
        policy_verdict.is_equilibrium,
        format!("certified: {}", policy_verdict.is_equilibrium),
    );

    let witness = policy_verdict
        .witness
        .clone()
        .unwrap_or_else(|| JointDistribution::uniform(2, 2));
    let witness_value = expected_utility(&witness, &game, Player::One)?;
    check(
        "witness-is-dirac-ac",
        (witness.prob(0, 0) - 1.0).abs() <= CERT_TOL,
        format!("witness mass on (a,c): {}", witness.prob(0, 0)),
    );
    check(
        "witness-value-0.75",
        (witness_value - 0.75).abs() <= CERT_TOL,
        format!("E[u1] = {witness_value}"),
    );

    let deviation_value_b = policy_dyn_core::markov::deviation_stationary(&pi, Player::One, 1)
        .and_then(|sigma| expected_utility(&sigma, &game, Player::One))?;
    check(
        "deviation-to-b-value-0",
        deviation_value_b.abs() <= CERT_TOL,
        format!("row deviation to b is worth {deviation_value_b}"),
    );

    let sigma = JointDistribution::dirac(2, 2, 0, 0);
    let cce_verdict = is_cce(&sigma, &game, cce_tol)?;
    let cce_slack_b = cce_verdict.slack_of(Player::One, 1).unwrap_or(f64::NAN);
    check(
        "cce-slack-0.25",
        (cce_slack_b - 0.25).abs() <= CERT_TOL,
        format!("deviation-to-b slack = {cce_slack_b}"),
    );
    // At the default tolerance the point must be rejected as a CCE.
    let expect_reject = cce_tol < 0.25;
    check(
        "cce-verdict",
        cce_verdict.is_equilibrium != expect_reject,
        format!(
            "is_cce = {} at tol = {cce_tol}",
            cce_verdict.is_equilibrium
        ),
    );

    Ok(ExampleOutcome {
        policy_verdict,
        cce_verdict,
        witness_value,
        deviation_value_b,
        cce_slack_b,
        checks,
    })
}
