//! Offline data generation under a behavior policy.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain;
use crate::error::{Error, Result};
use crate::mdp::{transition_kernel, Mdp, Policy};

/// One logged step `z_t = (s_t, a_t, r_t, s'_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// One trajectory with `s_{t+1} = s'_t`.
    #[default]
    Markov,
    /// Independent states drawn from the behavior stationary law.
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialState {
    Fixed(usize),
    #[default]
    Uniform,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub horizon: usize,
    pub initial_state: InitialState,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn markov(horizon: usize, seed: u64) -> Self {
        Self { mode: SamplingMode::Markov, horizon, initial_state: InitialState::Uniform, seed }
    }

    /// Generator for run `stream` of this seed.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        stream_rng(self.seed, stream)
    }
}

/// Independent ChaCha8 stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Index drawn from a finite distribution by inverse CDF.
pub fn draw_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Streaming transition generator.
pub struct Sampler<'a, R> {
    mdp: &'a Mdp,
    behavior: &'a Policy,
    remaining: usize,
    state: usize,
    stationary: Option<Vec<f64>>,
    reward_probs: Vec<Vec<f64>>,
    rng: R,
}

impl<'a, R: Rng> Sampler<'a, R> {
    pub fn new(mdp: &'a Mdp, behavior: &'a Policy, config: &SamplerConfig, mut rng: R) -> Result<Self> {
        mdp.check_policy(behavior)?;
        if config.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        let needs_stationary =
            config.mode == SamplingMode::Iid || config.initial_state == InitialState::Stationary;
        let stationary = if needs_stationary {
            let mu = chain::stationary_distribution(&transition_kernel(mdp, behavior)?)?;
            Some(mu.iter().copied().collect::<Vec<_>>())
        } else {
            None
        };
        let n = mdp.n_states();
        let state = match config.initial_state {
            InitialState::Fixed(s) => {
                mdp.check_state(s)?;
                s
            }
            InitialState::Uniform => rng.random_range(0..n),
            InitialState::Stationary => draw_index(&mut rng, stationary.as_deref().unwrap_or(&[])),
        };
        let reward_probs = (0..n)
            .flat_map(|s| (0..mdp.n_actions()).map(move |a| (s, a)))
            .map(|(s, a)| mdp.rewards(s, a).iter().map(|o| o.prob).collect())
            .collect();
        Ok(Self {
            mdp,
            behavior,
            remaining: config.horizon,
            state,
            stationary: if config.mode == SamplingMode::Iid { stationary } else { None },
            reward_probs,
            rng,
        })
    }
}

impl<R: Rng> Iterator for Sampler<'_, R> {
    type Item = Transition;

    fn next(&mut self) -> Option<Transition> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let s = self.state;
        let a = draw_index(&mut self.rng, self.behavior.row(s));
        let support = self.mdp.rewards(s, a);
        let r = support[draw_index(&mut self.rng, &self.reward_probs[s * self.mdp.n_actions() + a])].value;
        let s_next = draw_index(&mut self.rng, self.mdp.successors(s, a));
        self.state = match &self.stationary {
            Some(mu) => draw_index(&mut self.rng, mu),
            None => s_next,
        };
        Some(Transition { s, a, r, s_next })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

pub fn sample_trajectory<R: Rng>(
    mdp: &Mdp,
    behavior: &Policy,
    config: &SamplerConfig,
    rng: R,
) -> Result<Vec<Transition>> {
    Ok(Sampler::new(mdp, behavior, config, rng)?.collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RewardOutcome;
    use alloc::vec;

    fn cycle() -> Mdp {
        let r = || vec![RewardOutcome::new(0.0, 1.0)];
        Mdp::new(0.9, vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]], vec![vec![r()], vec![r()]]).unwrap()
    }

    #[test]
    fn deterministic_cycle() {
        let m = cycle();
        let b = Policy::uniform(2, 1);
        let cfg = SamplerConfig { initial_state: InitialState::Fixed(0), ..SamplerConfig::markov(3, 1) };
        let traj = sample_trajectory(&m, &b, &cfg, cfg.rng(0)).unwrap();
        let states: Vec<usize> = traj.iter().map(|z| z.s).collect();
        assert_eq!(states, vec![0, 1, 0]);
        let one = SamplerConfig { horizon: 1, ..cfg };
        let traj = sample_trajectory(&m, &b, &one, one.rng(0)).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj[0].s, 0);
    }

    #[test]
    fn chaining_and_reproducibility() {
        let r = |v| vec![RewardOutcome::new(v, 0.5), RewardOutcome::new(-v, 0.5)];
        let m = Mdp::new(
            0.9,
            vec![vec![vec![0.3, 0.7], vec![0.6, 0.4]], vec![vec![0.5, 0.5], vec![0.1, 0.9]]],
            vec![vec![r(1.0), r(2.0)], vec![r(3.0), r(4.0)]],
        )
        .unwrap();
        let b = Policy::uniform(2, 2);
        let cfg = SamplerConfig::markov(500, 42);
        let a = sample_trajectory(&m, &b, &cfg, cfg.rng(3)).unwrap();
        let again = sample_trajectory(&m, &b, &cfg, cfg.rng(3)).unwrap();
        assert_eq!(a, again);
        let other = sample_trajectory(&m, &b, &cfg, cfg.rng(4)).unwrap();
        assert_ne!(a, other);
        for w in a.windows(2) {
            assert_eq!(w[0].s_next, w[1].s);
        }
        for z in &a {
            assert!(m.reward_index(z.s, z.a, z.r).is_some());
        }
    }

    #[test]
    fn iid_requires_ergodic_behavior() {
        let split = Mdp::new(
            0.9,
            vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            vec![vec![vec![RewardOutcome::new(0.0, 1.0)]], vec![vec![RewardOutcome::new(0.0, 1.0)]]],
        )
        .unwrap();
        let cfg = SamplerConfig { mode: SamplingMode::Iid, ..SamplerConfig::markov(10, 0) };
        assert!(sample_trajectory(&split, &Policy::uniform(2, 1), &cfg, cfg.rng(0)).is_err());
    }
}
