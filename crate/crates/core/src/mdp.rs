//! Finite MDPs, stochastic policies and the exact value oracles used as
//! ground truth throughout the crate.

use alloc::vec::Vec;

use crate::chain;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Row sums of every probability table must match 1 within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// One point of a finite reward distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardOutcome {
    pub value: f64,
    pub prob: f64,
}

impl RewardOutcome {
    pub fn new(value: f64, prob: f64) -> Self {
        Self { value, prob }
    }
}

/// A finite Markov decision process with finite-support rewards.
///
/// `gamma == 1` selects the long-run average formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    gamma: f64,
    /// `P(s'|s,a)` stored at `(s * n_actions + a) * n_states + s'`.
    transition: Vec<f64>,
    /// Reward support per `(s, a)`, stored at `s * n_actions + a`.
    rewards: Vec<Vec<RewardOutcome>>,
    r_max: f64,
}

fn check_distribution(what: &'static str, row: usize, probs: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidProbability { what, row, value: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::NotStochastic { what, row, sum });
    }
    Ok(())
}

impl Mdp {
    /// Builds and validates an MDP from nested `[s][a][s']` transitions and
    /// `[s][a]` reward supports.
    pub fn new(
        gamma: f64,
        transition: Vec<Vec<Vec<f64>>>,
        rewards: Vec<Vec<Vec<RewardOutcome>>>,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidDiscount(gamma));
        }
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::DimensionMismatch { what: "transition states", expected: 1, found: 0 });
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::DimensionMismatch { what: "transition actions", expected: 1, found: 0 });
        }
        if rewards.len() != n_states {
            return Err(Error::DimensionMismatch { what: "reward states", expected: n_states, found: rewards.len() });
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        let mut flat_rewards = Vec::with_capacity(n_states * n_actions);
        let mut r_max = 0.0_f64;
        for (s, (per_action, reward_rows)) in transition.into_iter().zip(rewards).enumerate() {
            if per_action.len() != n_actions {
                return Err(Error::DimensionMismatch { what: "transition actions", expected: n_actions, found: per_action.len() });
            }
            if reward_rows.len() != n_actions {
                return Err(Error::DimensionMismatch { what: "reward actions", expected: n_actions, found: reward_rows.len() });
            }
            for (a, (row, support)) in per_action.into_iter().zip(reward_rows).enumerate() {
                let idx = s * n_actions + a;
                if row.len() != n_states {
                    return Err(Error::DimensionMismatch { what: "transition successors", expected: n_states, found: row.len() });
                }
                check_distribution("transition", idx, row.iter().copied())?;
                if support.is_empty() {
                    return Err(Error::NotStochastic { what: "reward distribution", row: idx, sum: 0.0 });
                }
                check_distribution("reward distribution", idx, support.iter().map(|o| o.prob))?;
                for o in &support {
                    if !o.value.is_finite() {
                        return Err(Error::InvalidProbability { what: "reward value", row: idx, value: o.value });
                    }
                    r_max = r_max.max(o.value.abs());
                }
                flat.extend(row);
                flat_rewards.push(support);
            }
        }
        Ok(Self { n_states, n_actions, gamma, transition: flat, rewards: flat_rewards, r_max })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_average_reward(&self) -> bool {
        self.gamma == 1.0
    }

    /// Largest absolute reward in any support.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Same dynamics with another discount factor.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidDiscount(gamma));
        }
        let mut out = self.clone();
        out.gamma = gamma;
        Ok(out)
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + next]
    }

    /// Successor distribution `P(·|s,a)`.
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn rewards(&self, s: usize, a: usize) -> &[RewardOutcome] {
        &self.rewards[s * self.n_actions + a]
    }

    /// `Σ_r r P(r|s,a)`.
    pub fn expected_reward(&self, s: usize, a: usize) -> f64 {
        self.rewards(s, a).iter().map(|o| o.value * o.prob).sum()
    }

    /// Position of `reward` in the declared support of `(s, a)`.
    pub fn reward_index(&self, s: usize, a: usize, reward: f64) -> Option<usize> {
        let support = self.rewards(s, a);
        support
            .iter()
            .position(|o| o.value == reward)
            .or_else(|| support.iter().position(|o| (o.value - reward).abs() <= 1e-12 * (1.0 + reward.abs())))
    }

    pub fn check_state(&self, s: usize) -> Result<()> {
        if s < self.n_states {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { what: "state", index: s, size: self.n_states })
        }
    }

    pub fn check_policy(&self, policy: &Policy) -> Result<()> {
        if policy.n_states() != self.n_states {
            return Err(Error::DimensionMismatch { what: "policy states", expected: self.n_states, found: policy.n_states() });
        }
        if policy.n_actions() != self.n_actions {
            return Err(Error::DimensionMismatch { what: "policy actions", expected: self.n_actions, found: policy.n_actions() });
        }
        Ok(())
    }
}

/// Per-state action distribution `π(a|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_states = rows.len();
        if n_states == 0 {
            return Err(Error::DimensionMismatch { what: "policy states", expected: 1, found: 0 });
        }
        let n_actions = rows[0].len();
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for (s, row) in rows.into_iter().enumerate() {
            if row.len() != n_actions || n_actions == 0 {
                return Err(Error::DimensionMismatch { what: "policy actions", expected: n_actions.max(1), found: row.len() });
            }
            check_distribution("policy", s, row.iter().copied())?;
            probs.extend(row);
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self { n_states, n_actions, probs: alloc::vec![p; n_states * n_actions] }
    }

    /// Deterministic policy taking `actions[s]` in state `s`.
    pub fn deterministic(actions: &[usize], n_actions: usize) -> Result<Self> {
        let mut probs = alloc::vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::IndexOutOfRange { what: "action", index: a, size: n_actions });
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self { n_states: actions.len(), n_actions, probs })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.row(s).to_vec()).collect()
    }

    /// The chosen action per state if every row is a point mass.
    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().position(|&p| p == 1.0))
            .collect()
    }
}

/// `P^π(s,s') = Σ_a π(a|s) P(s'|s,a)`.
pub fn transition_kernel(mdp: &Mdp, policy: &Policy) -> Result<Matrix> {
    mdp.check_policy(policy)?;
    let n = mdp.n_states();
    let mut k = Matrix::zeros(n, n);
    for s in 0..n {
        for a in 0..mdp.n_actions() {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for (next, p) in mdp.successors(s, a).iter().enumerate() {
                k[(s, next)] += w * p;
            }
        }
    }
    Ok(k)
}

/// Policy-averaged expected reward `ξ^π(s) = Σ_{a,r} π(a|s) P(r|s,a) r`.
pub fn expected_rewards(mdp: &Mdp, policy: &Policy) -> Result<Vector> {
    mdp.check_policy(policy)?;
    Ok(Vector::from_fn(mdp.n_states(), |s, _| {
        (0..mdp.n_actions()).map(|a| policy.prob(s, a) * mdp.expected_reward(s, a)).sum()
    }))
}

/// Exact solution of the unified Bellman equation for one policy.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueOracle {
    /// `γ < 1`: `V = (I - γP^π)^{-1} r^π`.
    Discounted { values: Vector },
    /// `γ = 1`: gain `r̄` and bias `V̄` normalized so that `μ^π · V̄ = 0`.
    Average { average_reward: f64, bias: Vector, stationary: Vector },
}

impl ValueOracle {
    /// The value part of the unified solution (`V_γ` or `V̄`).
    pub fn values(&self) -> &Vector {
        match self {
            Self::Discounted { values } => values,
            Self::Average { bias, .. } => bias,
        }
    }

    /// The average-reward part (`0` in the discounted case).
    pub fn average_reward(&self) -> f64 {
        match self {
            Self::Discounted { .. } => 0.0,
            Self::Average { average_reward, .. } => *average_reward,
        }
    }
}

pub fn exact_values(mdp: &Mdp, policy: &Policy) -> Result<ValueOracle> {
    let kernel = transition_kernel(mdp, policy)?;
    let xi = expected_rewards(mdp, policy)?;
    let n = mdp.n_states();
    let identity = Matrix::identity(n, n);
    if mdp.gamma() < 1.0 {
        let values = linalg::solve(&(identity - kernel * mdp.gamma()), &xi, "discounted value")?;
        return Ok(ValueOracle::Discounted { values });
    }
    let mu = chain::stationary_distribution(&kernel)?;
    let gain = mu.dot(&xi);
    // (I - P + 1μᵀ) is invertible for a unichain kernel and its solution
    // automatically satisfies μ·V̄ = 0.
    let fundamental = &identity - &kernel + Vector::from_element(n, 1.0) * mu.transpose();
    let rhs = xi.add_scalar(-gain);
    let bias = linalg::solve(&fundamental, &rhs, "average-reward bias")?;
    let residual = (&identity - &kernel) * &bias - &rhs;
    if linalg::sup_norm(&residual) > 1e-8 * (1.0 + linalg::sup_norm(&rhs)) {
        return Err(Error::Singular("average-reward bias"));
    }
    Ok(ValueOracle::Average { average_reward: gain, bias, stationary: mu })
}

/// Pointwise residual of the unified Bellman equation,
/// `ξ^π(s) - r̄ + γ (P^π V)(s) - V(s)`.
pub fn bellman_residual(mdp: &Mdp, policy: &Policy, values: &Vector, average_reward: f64) -> Result<Vector> {
    if values.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch { what: "value vector", expected: mdp.n_states(), found: values.len() });
    }
    let kernel = transition_kernel(mdp, policy)?;
    let xi = expected_rewards(mdp, policy)?;
    Ok(xi.add_scalar(-average_reward) + (kernel * values) * mdp.gamma() - values)
}

/// Distribution-shift constants between a target and a behavior policy.
///
/// A constant equal to `f64::INFINITY` flags missing coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftConstants {
    /// `max π(a|s) / (μ^b(s) b(a|s))` over target-supported pairs.
    pub policy_ratio_c: f64,
    /// `max μ^π(s) / μ^b(s)`.
    pub measure_ratio_c: f64,
}

impl ShiftConstants {
    pub fn is_covered(&self) -> bool {
        self.policy_ratio_c.is_finite() && self.measure_ratio_c.is_finite()
    }

    pub fn max(&self) -> f64 {
        self.policy_ratio_c.max(self.measure_ratio_c)
    }
}

pub fn shift_constants(mdp: &Mdp, target: &Policy, behavior: &Policy) -> Result<ShiftConstants> {
    mdp.check_policy(target)?;
    let mu_b = chain::stationary_distribution(&transition_kernel(mdp, behavior)?)?;
    let mu_pi = chain::limiting_distribution(&transition_kernel(mdp, target)?);
    Ok(shift_constants_with(target, behavior, &mu_pi, &mu_b))
}

/// Shift constants from already computed occupancy measures.
pub fn shift_constants_with(target: &Policy, behavior: &Policy, mu_pi: &Vector, mu_b: &Vector) -> ShiftConstants {
    let mut policy_ratio_c = 0.0_f64;
    let mut measure_ratio_c = 0.0_f64;
    for s in 0..target.n_states() {
        for a in 0..target.n_actions() {
            let p = target.prob(s, a);
            if p > 0.0 {
                let denom = mu_b[s] * behavior.prob(s, a);
                policy_ratio_c = policy_ratio_c.max(if denom > 0.0 { p / denom } else { f64::INFINITY });
            }
        }
        if mu_pi[s] > 0.0 {
            measure_ratio_c = measure_ratio_c.max(if mu_b[s] > 0.0 { mu_pi[s] / mu_b[s] } else { f64::INFINITY });
        }
    }
    ShiftConstants { policy_ratio_c, measure_ratio_c }
}
