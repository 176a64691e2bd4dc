//! Running sample-average estimates of the transition law, the reward law
//! and the behavior occupancy measure.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::Vector;
use crate::mdp::{Mdp, Policy};
use crate::trajectory::Transition;

/// Visit counts collected from a transition stream.
///
/// Counts are stored as `f64` so that exact expected counts can be injected.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    n_states: usize,
    n_actions: usize,
    supports: Vec<Vec<f64>>,
    count_sa: Vec<f64>,
    count_sas: Vec<f64>,
    count_sar: Vec<Vec<f64>>,
    count_s: Vec<f64>,
    t: f64,
}

impl EmpiricalModel {
    pub fn new(mdp: &Mdp) -> Self {
        let (n, m) = (mdp.n_states(), mdp.n_actions());
        let supports: Vec<Vec<f64>> = (0..n)
            .flat_map(|s| (0..m).map(move |a| (s, a)))
            .map(|(s, a)| mdp.rewards(s, a).iter().map(|o| o.value).collect())
            .collect();
        let count_sar = supports.iter().map(|sup| vec![0.0; sup.len()]).collect();
        Self {
            n_states: n,
            n_actions: m,
            supports,
            count_sa: vec![0.0; n * m],
            count_sas: vec![0.0; n * m * n],
            count_sar,
            count_s: vec![0.0; n],
            t: 0.0,
        }
    }

    /// Counts equal to `total` times the stationary occupancy
    /// `μ^b(s) b(a|s) P(s'|s,a) P(r|s,a)`.
    pub fn with_expected_counts(mdp: &Mdp, behavior: &Policy, mu_b: &Vector, total: f64) -> Self {
        let mut model = Self::new(mdp);
        for s in 0..model.n_states {
            model.count_s[s] = total * mu_b[s];
            for a in 0..model.n_actions {
                let sa = s * model.n_actions + a;
                let visits = total * mu_b[s] * behavior.prob(s, a);
                model.count_sa[sa] = visits;
                for (next, p) in mdp.successors(s, a).iter().enumerate() {
                    model.count_sas[sa * model.n_states + next] = visits * p;
                }
                for (i, o) in mdp.rewards(s, a).iter().enumerate() {
                    model.count_sar[sa][i] = visits * o.prob;
                }
            }
        }
        model.t = total;
        model
    }

    pub fn update(&mut self, z: &Transition) -> Result<()> {
        if z.s >= self.n_states || z.s_next >= self.n_states {
            return Err(Error::IndexOutOfRange { what: "state", index: z.s.max(z.s_next), size: self.n_states });
        }
        if z.a >= self.n_actions {
            return Err(Error::IndexOutOfRange { what: "action", index: z.a, size: self.n_actions });
        }
        let sa = z.s * self.n_actions + z.a;
        let support = &self.supports[sa];
        let slot = support
            .iter()
            .position(|&v| v == z.r)
            .or_else(|| support.iter().position(|&v| (v - z.r).abs() <= 1e-12 * (1.0 + z.r.abs())))
            .ok_or(Error::UnknownReward { state: z.s, action: z.a, reward: z.r })?;
        self.count_sa[sa] += 1.0;
        self.count_sas[sa * self.n_states + z.s_next] += 1.0;
        self.count_sar[sa][slot] += 1.0;
        self.count_s[z.s] += 1.0;
        self.t += 1.0;
        Ok(())
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn count_s(&self, s: usize) -> f64 {
        self.count_s[s]
    }

    pub fn count_sa(&self, s: usize, a: usize) -> f64 {
        self.count_sa[s * self.n_actions + a]
    }

    pub fn count_sas(&self, s: usize, a: usize) -> &[f64] {
        let sa = s * self.n_actions + a;
        &self.count_sas[sa * self.n_states..(sa + 1) * self.n_states]
    }

    pub fn count_sar(&self, s: usize, a: usize) -> &[f64] {
        &self.count_sar[s * self.n_actions + a]
    }

    pub fn reward_support(&self, s: usize, a: usize) -> &[f64] {
        &self.supports[s * self.n_actions + a]
    }

    /// `p̂(s'|s,a)`; uniform over successors before the first visit.
    pub fn transition_row(&self, s: usize, a: usize, out: &mut [f64]) {
        let visits = self.count_sa(s, a);
        if visits > 0.0 {
            for (o, c) in out.iter_mut().zip(self.count_sas(s, a)) {
                *o = c / visits;
            }
        } else {
            out.fill(1.0 / self.n_states as f64);
        }
    }

    /// `p̂(r|s,a)` over the declared support; uniform before the first visit.
    pub fn reward_row(&self, s: usize, a: usize) -> Vec<f64> {
        let visits = self.count_sa(s, a);
        let counts = self.count_sar(s, a);
        if visits > 0.0 {
            counts.iter().map(|c| c / visits).collect()
        } else {
            vec![1.0 / counts.len() as f64; counts.len()]
        }
    }

    /// `p̂_t(·|s) = Σ_a π(a|s) p̂(·|s,a)`.
    pub fn estimate_transition(&self, target: &Policy, s: usize) -> Vector {
        let mut out = Vector::zeros(self.n_states);
        let mut row = vec![0.0; self.n_states];
        for a in 0..self.n_actions {
            let w = target.prob(s, a);
            if w == 0.0 {
                continue;
            }
            self.transition_row(s, a, &mut row);
            for (o, p) in out.iter_mut().zip(&row) {
                *o += w * p;
            }
        }
        out
    }

    /// `ξ̂_t(s) = Σ_r r p̂_t(r|s)`.
    pub fn estimate_reward(&self, target: &Policy, s: usize) -> f64 {
        (0..self.n_actions)
            .filter(|&a| target.prob(s, a) > 0.0)
            .map(|a| {
                let probs = self.reward_row(s, a);
                let mean: f64 = probs.iter().zip(self.reward_support(s, a)).map(|(p, r)| p * r).sum();
                target.prob(s, a) * mean
            })
            .sum()
    }

    /// Plug-in `(ξ̂_t(s), φ̂_t(s))`.
    pub fn estimate_moments(&self, target: &Policy, features: &FeatureMap, s: usize) -> (f64, Vector) {
        let p_hat = self.estimate_transition(target, s);
        let mut phi_next = Vector::zeros(features.dim());
        for (next, p) in p_hat.iter().enumerate() {
            if *p != 0.0 {
                phi_next.axpy(*p, features.phi(next), 1.0);
            }
        }
        (self.estimate_reward(target, s), phi_next)
    }

    /// `μ̂_t^b(s) = N(s)/t`, or `0` before any observation.
    pub fn estimate_invariant(&self, s: usize) -> f64 {
        if self.t > 0.0 {
            self.count_s[s] / self.t
        } else {
            0.0
        }
    }

    /// Lower clamp `1/(2 t |S|)` applied before inverting `μ̂`.
    pub fn invariant_floor(&self) -> f64 {
        1.0 / (2.0 * self.t.max(1.0) * self.n_states as f64)
    }

    pub fn clamped_invariant(&self, s: usize) -> f64 {
        self.estimate_invariant(s).max(self.invariant_floor())
    }

    /// Estimation error `ẽ_t` at state `s` against the true model: the largest
    /// of `‖p̂(·|s) - p^π(·|s)‖_∞`, the reward-law sup error and
    /// `|1/μ̂(s) - 1/μ^b(s)|` (with the clamped `μ̂`).
    pub fn estimation_error(&self, mdp: &Mdp, target: &Policy, mu_b: &Vector, s: usize) -> f64 {
        let p_hat = self.estimate_transition(target, s);
        let mut err = 0.0_f64;
        for next in 0..self.n_states {
            let p: f64 = (0..self.n_actions).map(|a| target.prob(s, a) * mdp.p(s, a, next)).sum();
            err = err.max((p_hat[next] - p).abs());
        }
        let mut reward_diff: Vec<(f64, f64)> = Vec::new();
        for a in 0..self.n_actions {
            let w = target.prob(s, a);
            if w == 0.0 {
                continue;
            }
            for ((value, p_hat), o) in self.reward_support(s, a).iter().zip(self.reward_row(s, a)).zip(mdp.rewards(s, a)) {
                let d = w * (p_hat - o.prob);
                match reward_diff.iter_mut().find(|(v, _)| v == value) {
                    Some(entry) => entry.1 += d,
                    None => reward_diff.push((*value, d)),
                }
            }
        }
        for (_, d) in reward_diff {
            err = err.max(d.abs());
        }
        if mu_b[s] > 0.0 {
            err = err.max((1.0 / self.clamped_invariant(s) - 1.0 / mu_b[s]).abs());
        }
        err
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain;
    use crate::mdp::{expected_rewards, transition_kernel, RewardOutcome};

    fn mdp4() -> Mdp {
        let r = || vec![RewardOutcome::new(1.0, 1.0)];
        let row = vec![0.25; 4];
        Mdp::new(0.9, vec![vec![row.clone(), row.clone()]; 4], vec![vec![r(), r()]; 4]).unwrap()
    }

    #[test]
    fn single_and_repeated_updates() {
        let m = mdp4();
        let mut e = EmpiricalModel::new(&m);
        let z = Transition { s: 0, a: 0, r: 1.0, s_next: 1 };
        e.update(&z).unwrap();
        assert_eq!(e.count_sa(0, 0), 1.0);
        assert_eq!(e.count_sas(0, 0)[1], 1.0);
        assert_eq!(e.count_s(0), 1.0);
        e.update(&z).unwrap();
        assert_eq!(e.count_sa(0, 0), 2.0);
        assert_eq!(e.count_sas(0, 0)[1], 2.0);
        assert_eq!(e.count_sar(0, 0)[0], 2.0);
        assert_eq!(e.t(), 2.0);
        let bad = Transition { r: 0.5, ..z };
        assert!(matches!(e.update(&bad), Err(Error::UnknownReward { .. })));
    }

    #[test]
    fn frequency_estimates() {
        let m = mdp4();
        let mut e = EmpiricalModel::new(&m);
        for next in [0, 0, 1] {
            e.update(&Transition { s: 0, a: 0, r: 1.0, s_next: next }).unwrap();
        }
        let pi = Policy::deterministic(&[0, 0, 0, 0], 2).unwrap();
        let p = e.estimate_transition(&pi, 0);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        // unvisited pair falls back to uniform
        let p = e.estimate_transition(&pi, 2);
        assert!(p.iter().all(|&v| v == 0.25));
        assert!((e.estimate_reward(&pi, 0) - 1.0).abs() < 1e-15);
        assert!((e.estimate_invariant(0) - 1.0).abs() < 1e-15);

        let f = FeatureMap::tabular(4, 0.9);
        let (xi, phi) = e.estimate_moments(&pi, &f, 0);
        assert_eq!(xi, 1.0);
        assert!((phi[0] - 2.0 / 3.0).abs() < 1e-15 && (phi[1] - 1.0 / 3.0).abs() < 1e-15 && phi[2] == 0.0);

        let mut e = EmpiricalModel::new(&m);
        for s in [0, 0, 1] {
            e.update(&Transition { s, a: 0, r: 1.0, s_next: 0 }).unwrap();
        }
        assert!((e.estimate_invariant(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((e.invariant_floor() - 1.0 / 24.0).abs() < 1e-15);
        assert!((e.clamped_invariant(3) - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn expected_counts_reproduce_the_model() {
        let m = Mdp::new(
            0.7,
            vec![vec![vec![0.2, 0.8], vec![0.6, 0.4]], vec![vec![0.5, 0.5], vec![0.9, 0.1]]],
            vec![
                vec![vec![RewardOutcome::new(1.0, 0.3), RewardOutcome::new(-1.0, 0.7)], vec![RewardOutcome::new(2.0, 1.0)]],
                vec![vec![RewardOutcome::new(0.0, 1.0)], vec![RewardOutcome::new(0.5, 0.5), RewardOutcome::new(1.5, 0.5)]],
            ],
        )
        .unwrap();
        let b = Policy::new(vec![vec![0.4, 0.6], vec![0.7, 0.3]]).unwrap();
        let pi = Policy::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let mu_b = chain::stationary_distribution(&transition_kernel(&m, &b).unwrap()).unwrap();
        let e = EmpiricalModel::with_expected_counts(&m, &b, &mu_b, 1000.0);
        let k = transition_kernel(&m, &pi).unwrap();
        let xi = expected_rewards(&m, &pi).unwrap();
        for s in 0..2 {
            let p = e.estimate_transition(&pi, s);
            for next in 0..2 {
                assert!((p[next] - k[(s, next)]).abs() < 1e-12);
            }
            assert!((e.estimate_reward(&pi, s) - xi[s]).abs() < 1e-12);
            assert!((e.estimate_invariant(s) - mu_b[s]).abs() < 1e-12);
            assert!(e.estimation_error(&m, &pi, &mu_b, s) < 1e-12);
        }
    }
}
