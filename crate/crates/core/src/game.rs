//! Two-player bimatrix games and distributions over actions.
//!
//! A [`Game`] holds a pair of payoff matrices with entries in `[0, 1]`.
//! Distributions come in two flavors: [`MixedStrategy`] over one player's
//! action set and [`JointDistribution`] over the joint action space
//! `A = A1 x A2`, indexed row-major with the player-1 action as the major
//! index. Every other module shares that joint index order.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance under which probability vectors are accepted and renormalized.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// One of the two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// 1-based number, matching the usual "player 1 / player 2" naming.
    pub fn number(self) -> u8 {
        match self {
            Player::One => 1,
            Player::Two => 2,
        }
    }
}

/// A finite two-player game with payoffs in `[0, 1]`.
///
/// `u1` and `u2` are row lists indexed `[player-1 action][player-2 action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub actions1: Vec<String>,
    pub actions2: Vec<String>,
    pub u1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
}

impl Game {
    pub fn new(
        actions1: Vec<String>,
        actions2: Vec<String>,
        u1: Vec<Vec<f64>>,
        u2: Vec<Vec<f64>>,
    ) -> Result<Game> {
        let game = Game {
            actions1,
            actions2,
            u1,
            u2,
        };
        game.validate()?;
        Ok(game)
    }

    /// Parse from the structured-text game format and validate.
    pub fn from_json(text: &str) -> Result<Game> {
        let game: Game = serde_json::from_str(text).map_err(|e| Error::LpFailure {
            detail: format!("game parse error: {e}"),
        })?;
        game.validate()?;
        Ok(game)
    }

    pub fn validate(&self) -> Result<()> {
        let n1 = self.actions1.len();
        let n2 = self.actions2.len();
        if n1 == 0 {
            return Err(Error::DimensionMismatch {
                what: "actions1",
                expected: 1,
                actual: 0,
            });
        }
        if n2 == 0 {
            return Err(Error::DimensionMismatch {
                what: "actions2",
                expected: 1,
                actual: 0,
            });
        }
        for (name, matrix, player) in [("u1", &self.u1, 1u8), ("u2", &self.u2, 2u8)] {
            if matrix.len() != n1 {
                return Err(Error::DimensionMismatch {
                    what: name,
                    expected: n1,
                    actual: matrix.len(),
                });
            }
            for (i, row) in matrix.iter().enumerate() {
                if row.len() != n2 {
                    return Err(Error::DimensionMismatch {
                        what: name,
                        expected: n2,
                        actual: row.len(),
                    });
                }
                for (j, &v) in row.iter().enumerate() {
                    // Out-of-range payoffs are a hard error, never clamped.
                    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                        return Err(Error::UtilityOutOfRange {
                            player,
                            row: i,
                            col: j,
                            value: v,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n1(&self) -> usize {
        self.actions1.len()
    }

    pub fn n2(&self) -> usize {
        self.actions2.len()
    }

    /// Size of the joint action space `|A| = n1 * n2`.
    pub fn joint_size(&self) -> usize {
        self.n1() * self.n2()
    }

    /// Canonical joint index: row-major, player-1 action major.
    pub fn joint_index(&self, a: usize, b: usize) -> usize {
        a * self.n2() + b
    }

    /// Inverse of [`Game::joint_index`].
    pub fn joint_actions(&self, x: usize) -> (usize, usize) {
        (x / self.n2(), x % self.n2())
    }

    pub fn action_count(&self, player: Player) -> usize {
        match player {
            Player::One => self.n1(),
            Player::Two => self.n2(),
        }
    }

    pub fn utility_matrix(&self, player: Player) -> &Vec<Vec<f64>> {
        match player {
            Player::One => &self.u1,
            Player::Two => &self.u2,
        }
    }

    pub fn utility(&self, player: Player, a: usize, b: usize) -> f64 {
        self.utility_matrix(player)[a][b]
    }

    /// Utility vector over the given player's own actions, with the opponent's
    /// action held fixed. This is the full-information feedback column.
    pub fn utility_column(&self, player: Player, opponent_action: usize) -> Vec<f64> {
        match player {
            Player::One => (0..self.n1())
                .map(|a| self.u1[a][opponent_action])
                .collect(),
            Player::Two => (0..self.n2())
                .map(|b| self.u2[opponent_action][b])
                .collect(),
        }
    }

    pub fn action_label(&self, player: Player, action: usize) -> &str {
        match player {
            Player::One => &self.actions1[action],
            Player::Two => &self.actions2[action],
        }
    }
}

fn check_simplex(what: &'static str, probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::DimensionMismatch {
            what,
            expected: 1,
            actual: 0,
        });
    }
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::BadProbability {
                what,
                index: i,
                value: p,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::NotADistribution { what, sum });
    }
    Ok(sum)
}

/// A probability vector over one player's action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    probs: Vec<f64>,
}

impl MixedStrategy {
    /// Validates non-negativity and a total within [`SIMPLEX_TOL`] of 1, then
    /// renormalizes once.
    pub fn new(probs: Vec<f64>) -> Result<MixedStrategy> {
        let sum = check_simplex("mixed strategy", &probs)?;
        let mut probs = probs;
        for p in &mut probs {
            *p /= sum;
        }
        Ok(MixedStrategy { probs })
    }

    pub fn dirac(action: usize, arity: usize) -> MixedStrategy {
        assert!(action < arity, "dirac action out of range");
        let mut probs = vec![0.0; arity];
        probs[action] = 1.0;
        MixedStrategy { probs }
    }

    pub fn uniform(arity: usize) -> MixedStrategy {
        MixedStrategy {
            probs: vec![1.0 / arity as f64; arity],
        }
    }

    /// Builds from positive weights, normalizing by their sum.
    pub fn from_weights(weights: &[f64]) -> MixedStrategy {
        let sum: f64 = weights.iter().sum();
        MixedStrategy {
            probs: weights.iter().map(|w| w / sum).collect(),
        }
    }

    pub fn arity(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.probs[action]
    }
}

/// A probability vector over the joint action space, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    pub n1: usize,
    pub n2: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(n1: usize, n2: usize, probs: Vec<f64>) -> Result<JointDistribution> {
        if probs.len() != n1 * n2 {
            return Err(Error::DimensionMismatch {
                what: "joint distribution",
                expected: n1 * n2,
                actual: probs.len(),
            });
        }
        let sum = check_simplex("joint distribution", &probs)?;
        let mut probs = probs;
        for p in &mut probs {
            *p /= sum;
        }
        Ok(JointDistribution { n1, n2, probs })
    }

    pub fn from_json(text: &str) -> Result<JointDistribution> {
        #[derive(Deserialize)]
        struct Raw {
            n1: usize,
            n2: usize,
            probs: Vec<f64>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::LpFailure {
            detail: format!("distribution parse error: {e}"),
        })?;
        JointDistribution::new(raw.n1, raw.n2, raw.probs)
    }

    pub fn dirac(n1: usize, n2: usize, a: usize, b: usize) -> JointDistribution {
        let mut probs = vec![0.0; n1 * n2];
        probs[a * n2 + b] = 1.0;
        JointDistribution { n1, n2, probs }
    }

    pub fn uniform(n1: usize, n2: usize) -> JointDistribution {
        JointDistribution {
            n1,
            n2,
            probs: vec![1.0 / (n1 * n2) as f64; n1 * n2],
        }
    }

    /// Builds from non-negative weights, normalizing by their sum.
    pub fn from_weights(n1: usize, n2: usize, weights: &[f64]) -> JointDistribution {
        let sum: f64 = weights.iter().sum();
        JointDistribution {
            n1,
            n2,
            probs: weights.iter().map(|w| w / sum).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.probs[a * self.n2 + b]
    }

    pub fn marginal(&self, player: Player) -> MixedStrategy {
        match player {
            Player::One => self.marginal1(),
            Player::Two => self.marginal2(),
        }
    }

    pub fn marginal1(&self) -> MixedStrategy {
        let mut m = vec![0.0; self.n1];
        for a in 0..self.n1 {
            for b in 0..self.n2 {
                m[a] += self.prob(a, b);
            }
        }
        MixedStrategy::from_weights(&m)
    }

    pub fn marginal2(&self) -> MixedStrategy {
        let mut m = vec![0.0; self.n2];
        for a in 0..self.n1 {
            for b in 0..self.n2 {
                m[b] += self.prob(a, b);
            }
        }
        MixedStrategy::from_weights(&m)
    }
}

/// Expected utility of `player` when the joint action is drawn from `sigma`.
pub fn expected_utility(sigma: &JointDistribution, game: &Game, player: Player) -> Result<f64> {
    if sigma.len() != game.joint_size() {
        return Err(Error::DimensionMismatch {
            what: "joint distribution vs game",
            expected: game.joint_size(),
            actual: sigma.len(),
        });
    }
    let u = game.utility_matrix(player);
    let mut total = 0.0;
    for a in 0..game.n1() {
        for b in 0..game.n2() {
            total += sigma.prob(a, b) * u[a][b];
        }
    }
    Ok(total)
}

/// Product distribution `p1 x p2` over the joint action space.
pub fn product_distribution(p1: &MixedStrategy, p2: &MixedStrategy) -> JointDistribution {
    let n1 = p1.arity();
    let n2 = p2.arity();
    let mut probs = Vec::with_capacity(n1 * n2);
    for a in 0..n1 {
        for b in 0..n2 {
            probs.push(p1.prob(a) * p2.prob(b));
        }
    }
    JointDistribution { n1, n2, probs }
}

/// l1 distance between two equal-length vectors.
pub fn l1_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            what: "l1 distance",
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
}

/// Mixes `p` with the uniform distribution using weight `sqrt(|A| eps)`.
///
/// Every output entry is at least `sqrt(|A| eps) / n`, which keeps empirical
/// chain denominators bounded away from zero.
pub fn perturb_strategy(
    p: &MixedStrategy,
    epsilon_tilde: f64,
    joint_size: usize,
) -> Result<MixedStrategy> {
    let weight = (joint_size as f64 * epsilon_tilde).sqrt();
    if !weight.is_finite() || !(0.0..=1.0).contains(&weight) {
        return Err(Error::BadMixingWeight { weight });
    }
    let n = p.arity() as f64;
    let probs = p
        .probs()
        .iter()
        .map(|&q| (1.0 - weight) * q + weight / n)
        .collect();
    Ok(MixedStrategy { probs })
}

/// Largest singular value, by power iteration on `M^T M`.
///
/// Converges to relative tolerance 1e-10 or fails after 10,000 iterations,
/// returning the last iterate and residual in the error.
pub fn spectral_norm(matrix: &[Vec<f64>]) -> Result<f64> {
    const REL_TOL: f64 = 1e-10;
    const MAX_ITERS: usize = 10_000;

    let rows = matrix.len();
    if rows == 0 {
        return Ok(0.0);
    }
    let cols = matrix[0].len();
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::DimensionMismatch {
                what: "matrix row",
                expected: cols,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadParameter {
                name: "matrix entry",
                value: row[i.min(row.len() - 1)],
            });
        }
    }
    if cols == 0 {
        return Ok(0.0);
    }

    // Gram matrix B = M^T M (cols x cols).
    let mut gram = vec![vec![0.0; cols]; cols];
    for row in matrix {
        for i in 0..cols {
            for j in 0..cols {
                gram[i][j] += row[i] * row[j];
            }
        }
    }

    // Deterministic start with unequal entries so it is not orthogonal to the
    // leading eigenvector in symmetric cases.
    let mut v: Vec<f64> = (0..cols).map(|i| 1.0 + 0.1 * i as f64).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }

    let mut lambda = 0.0;
    for _ in 0..MAX_ITERS {
        let mut w = vec![0.0; cols];
        for i in 0..cols {
            for j in 0..cols {
                w[i] += gram[i][j] * v[j];
            }
        }
        let w_norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        for x in &mut w {
            *x /= w_norm;
        }
        let mut new_lambda = 0.0;
        for i in 0..cols {
            let mut bi = 0.0;
            for j in 0..cols {
                bi += gram[i][j] * w[j];
            }
            new_lambda += w[i] * bi;
        }
        let residual = (new_lambda - lambda).abs();
        v = w;
        lambda = new_lambda;
        if residual <= REL_TOL * lambda.max(1.0) {
            return Ok(lambda.max(0.0).sqrt());
        }
    }
    Err(Error::PowerIterationStalled {
        residual: lambda,
        iterate: v,
    })
}
