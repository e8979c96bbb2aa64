//! Markov chains over the joint action space.
//!
//! Chains arise three ways: empirically from per-round strategy
//! distributions, empirically from realized play, and analytically from a
//! distribution over response-function pairs. Stationary distributions are
//! certified by residual checks and found under linear constraints by the
//! two-phase simplex in [`crate::simplex`].

use crate::error::{Error, Result};
use crate::game::{JointDistribution, MixedStrategy};
use crate::simplex::{self, Constraint, LpOutcome, Rel};
use serde::{Deserialize, Serialize};

/// Row-sum certification tolerance for transition matrices.
pub const ROW_TOL: f64 = 1e-10;
/// Residual below which an LP point counts as feasible.
pub const LP_FEASIBILITY_TOL: f64 = 1e-9;
/// Default cap on the number of enumerable function pairs.
pub const DEFAULT_PAIR_CAP: u128 = 1_000_000;

/// A row-stochastic matrix over the joint action space, canonical state order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    pub dim: usize,
    pub rows: Vec<Vec<f64>>,
    /// States with zero visit weight, given a self-loop row by convention.
    #[serde(skip)]
    pub dead_states: Vec<usize>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<TransitionMatrix> {
        let dim = rows.len();
        let mut rows = rows;
        for (i, row) in rows.iter_mut().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "transition row",
                    expected: dim,
                    actual: row.len(),
                });
            }
            let mut sum = 0.0;
            for &v in row.iter() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::RowNotStochastic { row: i, sum: v });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(Error::RowNotStochastic { row: i, sum });
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        Ok(TransitionMatrix {
            dim,
            rows,
            dead_states: Vec::new(),
        })
    }

    pub fn from_json(text: &str) -> Result<TransitionMatrix> {
        let raw: TransitionMatrix = serde_json::from_str(text).map_err(|e| Error::LpFailure {
            detail: format!("transition matrix parse error: {e}"),
        })?;
        TransitionMatrix::new(raw.rows)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

fn build_rows(dim: usize, num: Vec<Vec<f64>>, den: Vec<f64>) -> TransitionMatrix {
    let mut rows = vec![vec![0.0; dim]; dim];
    let mut dead = Vec::new();
    for i in 0..dim {
        if den[i] > 0.0 {
            let mut sum = 0.0;
            for j in 0..dim {
                rows[i][j] = num[i][j] / den[i];
                sum += rows[i][j];
            }
            for v in rows[i].iter_mut() {
                *v /= sum;
            }
        } else {
            // Dead state: the literal zero row would break stochasticity,
            // so it gets a self-loop and goes on the dead list.
            rows[i][i] = 1.0;
            dead.push(i);
        }
    }
    TransitionMatrix {
        dim,
        rows,
        dead_states: dead,
    }
}

/// Builds a chain from externally maintained numerator/denominator
/// accumulators, applying the same dead-state convention as
/// [`empirical_chain`]. Used by streaming harnesses.
pub fn chain_from_accumulators(num: &[Vec<f64>], den: &[f64]) -> TransitionMatrix {
    build_rows(den.len(), num.to_vec(), den.to_vec())
}

/// Empirical chain from per-round strategy distributions.
///
/// Same-`t` products by default, which makes the averaged strategy an exact
/// stationary distribution; `lagged` switches to `p_(t-1) x p_t` products
/// for sensitivity studies.
pub fn empirical_chain(strategies: &[JointDistribution], lagged: bool) -> Result<TransitionMatrix> {
    if strategies.is_empty() {
        return Err(Error::TooFewRounds {
            needed: 1,
            actual: 0,
        });
    }
    let dim = strategies[0].len();
    for s in strategies {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "strategy sequence",
                expected: dim,
                actual: s.len(),
            });
        }
    }
    let mut num = vec![vec![0.0; dim]; dim];
    let mut den = vec![0.0; dim];
    if lagged {
        for t in 1..strategies.len() {
            let prev = strategies[t - 1].probs();
            let cur = strategies[t].probs();
            for i in 0..dim {
                if prev[i] == 0.0 {
                    continue;
                }
                den[i] += prev[i];
                for j in 0..dim {
                    num[i][j] += prev[i] * cur[j];
                }
            }
        }
    } else {
        for s in strategies {
            let p = s.probs();
            for i in 0..dim {
                if p[i] == 0.0 {
                    continue;
                }
                den[i] += p[i];
                for j in 0..dim {
                    num[i][j] += p[i] * p[j];
                }
            }
        }
    }
    Ok(build_rows(dim, num, den))
}

/// Lagged count estimator over realized consecutive joint-action pairs.
pub fn observed_chain(joint_actions: &[usize], dim: usize) -> Result<TransitionMatrix> {
    if joint_actions.len() < 2 {
        return Err(Error::TooFewRounds {
            needed: 2,
            actual: joint_actions.len(),
        });
    }
    for &x in joint_actions {
        if x >= dim {
            return Err(Error::ActionOutOfRange {
                action: x,
                arity: dim,
            });
        }
    }
    let mut num = vec![vec![0.0; dim]; dim];
    let mut den = vec![0.0; dim];
    for w in joint_actions.windows(2) {
        num[w[0]][w[1]] += 1.0;
        den[w[0]] += 1.0;
    }
    Ok(build_rows(dim, num, den))
}

/// A distribution over response-function pairs `F1 x F2`, where
/// `F1 = {f : A2 -> A1}` and `F2 = {g : A1 -> A2}`.
///
/// `f` is encoded as a base-`n1` numeral over `A2` inputs in canonical order
/// with `f(0)` the most significant digit, `g` symmetrically; the pair index
/// is `f_index * |F2| + g_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionPairDistribution {
    pub n1: usize,
    pub n2: usize,
    probs: Vec<f64>,
}

/// Number of response functions `|{A_in -> A_out}| = n_out ^ n_in`.
fn function_count(n_out: usize, n_in: usize) -> u128 {
    (n_out as u128).pow(n_in as u32)
}

/// Total pairs `n1^n2 * n2^n1`, checked against the cap.
pub fn pair_count(n1: usize, n2: usize, cap: u128) -> Result<usize> {
    let size = function_count(n1, n2).saturating_mul(function_count(n2, n1));
    if size > cap {
        return Err(Error::FunctionSpaceTooLarge { size, cap });
    }
    Ok(size as usize)
}

fn encode_table(table: &[usize], base: usize) -> usize {
    table.iter().fold(0, |acc, &d| acc * base + d)
}

fn decode_table(mut index: usize, base: usize, len: usize) -> Vec<usize> {
    let mut table = vec![0; len];
    for slot in (0..len).rev() {
        table[slot] = index % base;
        index /= base;
    }
    table
}

/// Yields all `(f table, g table)` pairs in canonical pair-index order.
pub fn enumerate_function_pairs(
    n1: usize,
    n2: usize,
) -> impl Iterator<Item = (Vec<usize>, Vec<usize>)> {
    let f_count = function_count(n1, n2) as usize;
    let g_count = function_count(n2, n1) as usize;
    (0..f_count).flat_map(move |fi| {
        (0..g_count).map(move |gi| (decode_table(fi, n1, n2), decode_table(gi, n2, n1)))
    })
}

impl FunctionPairDistribution {
    pub fn new(n1: usize, n2: usize, probs: Vec<f64>) -> Result<FunctionPairDistribution> {
        Self::with_cap(n1, n2, probs, DEFAULT_PAIR_CAP)
    }

    pub fn with_cap(
        n1: usize,
        n2: usize,
        probs: Vec<f64>,
        cap: u128,
    ) -> Result<FunctionPairDistribution> {
        let expected = pair_count(n1, n2, cap)?;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "function pair distribution",
                expected,
                actual: probs.len(),
            });
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::BadProbability {
                    what: "function pair distribution",
                    index: i,
                    value: p,
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotADistribution {
                what: "function pair distribution",
                sum,
            });
        }
        let mut probs = probs;
        for p in &mut probs {
            *p /= sum;
        }
        Ok(FunctionPairDistribution { n1, n2, probs })
    }

    pub fn from_json(text: &str) -> Result<FunctionPairDistribution> {
        let raw: FunctionPairDistribution =
            serde_json::from_str(text).map_err(|e| Error::LpFailure {
                detail: format!("function pair distribution parse error: {e}"),
            })?;
        FunctionPairDistribution::new(raw.n1, raw.n2, raw.probs)
    }

    /// Point mass on one `(f, g)` pair given as explicit tables.
    pub fn dirac(n1: usize, n2: usize, f_table: &[usize], g_table: &[usize]) -> Result<Self> {
        let total = pair_count(n1, n2, DEFAULT_PAIR_CAP)?;
        if f_table.len() != n2 || g_table.len() != n1 {
            return Err(Error::DimensionMismatch {
                what: "function table",
                expected: n2,
                actual: f_table.len(),
            });
        }
        for &a in f_table {
            if a >= n1 {
                return Err(Error::ActionOutOfRange {
                    action: a,
                    arity: n1,
                });
            }
        }
        for &b in g_table {
            if b >= n2 {
                return Err(Error::ActionOutOfRange {
                    action: b,
                    arity: n2,
                });
            }
        }
        let g_count = function_count(n2, n1) as usize;
        let idx = encode_table(f_table, n1) * g_count + encode_table(g_table, n2);
        let mut probs = vec![0.0; total];
        probs[idx] = 1.0;
        Ok(FunctionPairDistribution { n1, n2, probs })
    }

    pub fn uniform(n1: usize, n2: usize) -> Result<Self> {
        let total = pair_count(n1, n2, DEFAULT_PAIR_CAP)?;
        Ok(FunctionPairDistribution {
            n1,
            n2,
            probs: vec![1.0 / total as f64; total],
        })
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

    pub fn pair_index(&self, f_table: &[usize], g_table: &[usize]) -> usize {
        let g_count = function_count(self.n2, self.n1) as usize;
        encode_table(f_table, self.n1) * g_count + encode_table(g_table, self.n2)
    }

    pub fn prob_of(&self, f_table: &[usize], g_table: &[usize]) -> f64 {
        self.probs[self.pair_index(f_table, g_table)]
    }

    fn joint_dim(&self) -> usize {
        self.n1 * self.n2
    }

    /// Iterates `(pair index, f table, g table, probability)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, Vec<usize>, Vec<usize>, f64)> + '_ {
        enumerate_function_pairs(self.n1, self.n2)
            .enumerate()
            .map(|(i, (f, g))| (i, f, g, self.probs[i]))
    }
}

/// Transition matrix induced by a function-pair distribution: the row at
/// `(a, b)` is the law of `(f(b), g(a))` under `pi`.
pub fn induced_chain(pi: &FunctionPairDistribution) -> TransitionMatrix {
    let dim = pi.joint_dim();
    let mut rows = vec![vec![0.0; dim]; dim];
    for (_, f, g, p) in pi.support() {
        if p == 0.0 {
            continue;
        }
        for a in 0..pi.n1 {
            for b in 0..pi.n2 {
                let x = a * pi.n2 + b;
                let y = f[b] * pi.n2 + g[a];
                rows[x][y] += p;
            }
        }
    }
    for row in &mut rows {
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    TransitionMatrix {
        dim,
        rows,
        dead_states: Vec::new(),
    }
}

/// The distribution and chain after one player deviates to a fixed action:
/// the deviator's function marginal collapses to the constant function, the
/// opponent's marginal is kept.
pub fn deviation_chain(
    pi: &FunctionPairDistribution,
    player: crate::game::Player,
    action: usize,
) -> Result<(FunctionPairDistribution, TransitionMatrix)> {
    use crate::game::Player;
    let (n1, n2) = (pi.n1, pi.n2);
    let arity = match player {
        Player::One => n1,
        Player::Two => n2,
    };
    if action >= arity {
        return Err(Error::ActionOutOfRange { action, arity });
    }
    let g_count = function_count(n2, n1) as usize;
    let f_count = function_count(n1, n2) as usize;
    let mut probs = vec![0.0; pi.len()];
    match player {
        Player::One => {
            let const_f = encode_table(&vec![action; n2], n1);
            for (idx, &p) in pi.probs.iter().enumerate() {
                let g_idx = idx % g_count;
                probs[const_f * g_count + g_idx] += p;
            }
        }
        Player::Two => {
            let const_g = encode_table(&vec![action; n1], n2);
            for (idx, &p) in pi.probs.iter().enumerate() {
                let f_idx = idx / g_count;
                probs[f_idx * g_count + const_g] += p;
            }
        }
    }
    debug_assert!(f_count * g_count == pi.len());
    let dev = FunctionPairDistribution { n1, n2, probs };
    let matrix = induced_chain(&dev);
    Ok((dev, matrix))
}

/// The constructive stationary distribution of the deviation chain: zero off
/// the deviator's action, and on it the law of the opponent's response to
/// the deviation action. Certified stationary to [`ROW_TOL`].
pub fn deviation_stationary(
    pi: &FunctionPairDistribution,
    player: crate::game::Player,
    action: usize,
) -> Result<JointDistribution> {
    use crate::game::Player;
    let (n1, n2) = (pi.n1, pi.n2);
    let arity = match player {
        Player::One => n1,
        Player::Two => n2,
    };
    if action >= arity {
        return Err(Error::ActionOutOfRange { action, arity });
    }
    let mut weights = vec![0.0; n1 * n2];
    match player {
        Player::One => {
            for (_, _, g, p) in pi.support() {
                weights[action * n2 + g[action]] += p;
            }
        }
        Player::Two => {
            for (_, f, _, p) in pi.support() {
                weights[f[action] * n2 + action] += p;
            }
        }
    }
    let sigma = JointDistribution::from_weights(n1, n2, &weights);
    let (_, matrix) = deviation_chain(pi, player, action)?;
    let residual = stationary_residual(&matrix, &sigma)?;
    if residual > ROW_TOL {
        return Err(Error::StationarityViolated { residual });
    }
    Ok(sigma)
}

/// `|| sigma^T M - sigma ||_1`.
pub fn stationary_residual(m: &TransitionMatrix, sigma: &JointDistribution) -> Result<f64> {
    if sigma.len() != m.dim {
        return Err(Error::DimensionMismatch {
            what: "stationary residual",
            expected: m.dim,
            actual: sigma.len(),
        });
    }
    let p = sigma.probs();
    let mut residual = 0.0;
    for j in 0..m.dim {
        let mut v = 0.0;
        for i in 0..m.dim {
            v += p[i] * m.rows[i][j];
        }
        residual += (v - p[j]).abs();
    }
    Ok(residual)
}

/// Same residual for a strategy-level vector that is not necessarily an exact
/// simplex element (used on raw accumulator averages).
pub fn stationary_residual_raw(m: &TransitionMatrix, p: &[f64]) -> Result<f64> {
    if p.len() != m.dim {
        return Err(Error::DimensionMismatch {
            what: "stationary residual",
            expected: m.dim,
            actual: p.len(),
        });
    }
    let mut residual = 0.0;
    for j in 0..m.dim {
        let mut v = 0.0;
        for i in 0..m.dim {
            v += p[i] * m.rows[i][j];
        }
        residual += (v - p[j]).abs();
    }
    Ok(residual)
}

/// Empirical distribution over function pairs fitted to the empirical chain.
///
/// The product-of-transition-weights ansatz is normalized and then fitted by
/// cyclic proportional scaling so that, for every visited state, the law of
/// the pair's image matches the empirical transition row. Whenever the chain
/// is exactly inducible by a pair distribution (in particular for constant
/// strategy sequences, correlated or not) the fit is exact; the induced
/// chain then reproduces the empirical chain entrywise. Function values that
/// no visited state pins down are filled with the empirical marginal of play,
/// matching the stable-responder reading of the deviation machinery.
pub fn empirical_function_distribution(
    strategies: &[JointDistribution],
    lagged: bool,
) -> Result<FunctionPairDistribution> {
    const FIT_TOL: f64 = 1e-13;
    const MAX_SWEEPS: usize = 5_000;

    let chain = empirical_chain(strategies, lagged)?;
    let n1 = strategies[0].n1;
    let n2 = strategies[0].n2;
    let dim = n1 * n2;
    let total = pair_count(n1, n2, DEFAULT_PAIR_CAP)?;

    // Visit-weighted average of play, for filling unpinned function values.
    let mut avg = vec![0.0; dim];
    for s in strategies {
        for (a, &p) in avg.iter_mut().zip(s.probs()) {
            *a += p;
        }
    }
    let sigma_hat = JointDistribution::from_weights(n1, n2, &avg);
    let marg1 = sigma_hat.marginal1();
    let marg2 = sigma_hat.marginal2();

    let visited: Vec<usize> = (0..dim)
        .filter(|x| !chain.dead_states.contains(x))
        .collect();
    let mut f_slot_pinned = vec![false; n2];
    let mut g_slot_pinned = vec![false; n1];
    for &x in &visited {
        f_slot_pinned[x % n2] = true;
        g_slot_pinned[x / n2] = true;
    }

    let tables: Vec<(Vec<usize>, Vec<usize>)> = enumerate_function_pairs(n1, n2).collect();
    let mut probs = vec![0.0; total];
    for (idx, (f, g)) in tables.iter().enumerate() {
        let mut w = 1.0;
        for &x in &visited {
            let (a, b) = (x / n2, x % n2);
            w *= chain.rows[x][f[b] * n2 + g[a]];
        }
        for b in 0..n2 {
            if !f_slot_pinned[b] {
                w *= marg1.prob(f[b]);
            }
        }
        for a in 0..n1 {
            if !g_slot_pinned[a] {
                w *= marg2.prob(g[a]);
            }
        }
        probs[idx] = w;
    }
    let z: f64 = probs.iter().sum();
    if z <= 0.0 {
        // Conflicting zero-pattern in the ansatz; restart flat and let the
        // scaling loop do what it can.
        probs = vec![1.0 / total as f64; total];
    } else {
        for p in &mut probs {
            *p /= z;
        }
    }

    // Cyclic proportional fitting over the visited-state image constraints.
    let mut image = vec![0.0; dim];
    for _ in 0..MAX_SWEEPS {
        let mut worst: f64 = 0.0;
        for &x in &visited {
            let (a, b) = (x / n2, x % n2);
            image.iter_mut().for_each(|v| *v = 0.0);
            for (idx, (f, g)) in tables.iter().enumerate() {
                image[f[b] * n2 + g[a]] += probs[idx];
            }
            for y in 0..dim {
                worst = worst.max((image[y] - chain.rows[x][y]).abs());
            }
            for (idx, (f, g)) in tables.iter().enumerate() {
                let y = f[b] * n2 + g[a];
                if image[y] > 0.0 {
                    probs[idx] *= chain.rows[x][y] / image[y];
                }
            }
        }
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        if worst <= FIT_TOL {
            break;
        }
    }

    Ok(FunctionPairDistribution { n1, n2, probs })
}

/// LP feasibility over the stationary polytope of `m` with extra linear
/// inequalities `c . sigma >= r`. Returns a feasible point, optionally
/// maximizing `objective`, or `None` when infeasible.
pub fn solve_constrained_stationary(
    m: &TransitionMatrix,
    n1: usize,
    n2: usize,
    inequalities: &[(Vec<f64>, f64)],
    objective: Option<&[f64]>,
) -> Result<Option<JointDistribution>> {
    let dim = m.dim;
    if n1 * n2 != dim {
        return Err(Error::DimensionMismatch {
            what: "stationary LP",
            expected: dim,
            actual: n1 * n2,
        });
    }
    let mut constraints = Vec::with_capacity(1 + dim + inequalities.len());
    constraints.push(Constraint::new(vec![1.0; dim], Rel::Eq, 1.0));
    for j in 0..dim {
        let coeffs: Vec<f64> = (0..dim)
            .map(|i| m.rows[i][j] - if i == j { 1.0 } else { 0.0 })
            .collect();
        constraints.push(Constraint::new(coeffs, Rel::Eq, 0.0));
    }
    for (c, r) in inequalities {
        if c.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "stationary LP inequality",
                expected: dim,
                actual: c.len(),
            });
        }
        constraints.push(Constraint::new(c.clone(), Rel::Ge, *r));
    }
    match simplex::solve(dim, &constraints, objective, LP_FEASIBILITY_TOL)? {
        LpOutcome::Optimal { x, .. } => {
            let clamped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
            Ok(Some(JointDistribution::from_weights(n1, n2, &clamped)))
        }
        LpOutcome::Infeasible { .. } => Ok(None),
        LpOutcome::Unbounded => Err(Error::LpFailure {
            detail: "stationary polytope LP reported unbounded".into(),
        }),
    }
}

/// Convenience: the product strategies of a play round.
pub fn strategy_product(p1: &MixedStrategy, p2: &MixedStrategy) -> JointDistribution {
    crate::game::product_distribution(p1, p2)
}
