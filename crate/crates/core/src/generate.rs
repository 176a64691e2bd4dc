//! Random MDPs and policies with full-support (hence ergodic) dynamics.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{Mdp, Policy, RewardOutcome};
use crate::trajectory::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    /// Rewards are drawn uniformly from this interval.
    pub reward_range: (f64, f64),
    /// Number of reward values per `(s, a)`.
    pub reward_support: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> Self {
        Self { n_states, n_actions, gamma, reward_range: (0.0, 1.0), reward_support: 2, seed }
    }
}

/// Flat Dirichlet draw via normalized exponentials.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -libm::log(1.0 - rng.random::<f64>())).collect();
    let sum: f64 = w.iter().sum();
    for x in &mut w {
        *x /= sum;
    }
    w
}

pub fn random_mdp(spec: &GeneratorSpec) -> Result<Mdp> {
    if spec.n_states == 0 || spec.n_actions == 0 || spec.reward_support == 0 {
        return Err(Error::InvalidConfig("generator sizes must be positive".into()));
    }
    let (lo, hi) = spec.reward_range;
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(Error::InvalidConfig("reward range must satisfy lo <= hi".into()));
    }
    let mut rng = stream_rng(spec.seed, 0);
    let mut transition = Vec::with_capacity(spec.n_states);
    let mut rewards = Vec::with_capacity(spec.n_states);
    for _ in 0..spec.n_states {
        let mut t_row = Vec::with_capacity(spec.n_actions);
        let mut r_row = Vec::with_capacity(spec.n_actions);
        for _ in 0..spec.n_actions {
            t_row.push(dirichlet(&mut rng, spec.n_states));
            let probs = dirichlet(&mut rng, spec.reward_support);
            r_row.push(probs.into_iter().map(|p| RewardOutcome::new(lo + (hi - lo) * rng.random::<f64>(), p)).collect());
        }
        transition.push(t_row);
        rewards.push(r_row);
    }
    Mdp::new(spec.gamma, transition, rewards)
}

/// Policy with Dirichlet rows, drawn from stream 1 of `seed`.
pub fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> Policy {
    let mut rng = stream_rng(seed, 1);
    Policy::new((0..n_states).map(|_| dirichlet(&mut rng, n_actions)).collect()).expect("dirichlet rows are distributions")
}
