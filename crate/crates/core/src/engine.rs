//! Projected approximate stochastic iteration with Polyak averaging.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimation::EmpiricalModel;
use crate::features::LossModel;
use crate::linalg::Vector;
use crate::mdp::Mdp;
use crate::trajectory::Transition;
use crate::updates::{Estimates, EvalMode, UpdateRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `η_t = η_0 / √t`.
    InverseSqrt { eta0: f64 },
    /// `η_{t+1} = exp(-½ c η_t) η_t` from `η_1 ∈ [1/c, 2/c]`.
    Contraction { eta1: f64, c: f64 },
}

impl StepSchedule {
    /// Contraction schedule started at `η_1 = 1/c`.
    pub fn contraction(c: f64) -> Self {
        StepSchedule::Contraction { eta1: 1.0 / c, c }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::InverseSqrt { eta0 } if !(eta0 > 0.0 && eta0.is_finite()) => {
                Err(Error::InvalidSchedule("eta0 must be positive".into()))
            }
            StepSchedule::Contraction { c, .. } if !(c > 0.0 && c.is_finite()) => {
                Err(Error::InvalidSchedule(alloc::format!("contraction constant {c} must be positive")))
            }
            StepSchedule::Contraction { eta1, c } if !(1.0 / c <= eta1 && eta1 <= 2.0 / c) => {
                Err(Error::InvalidSchedule(alloc::format!("eta1 = {eta1} must lie in [1/c, 2/c] with c = {c}")))
            }
            _ => Ok(()),
        }
    }

    /// Streaming `η_1, η_2, …`.
    pub fn iter(&self) -> StepSizes {
        StepSizes { schedule: *self, t: 0, eta: 0.0 }
    }
}

/// Iterator over the step sizes of a schedule.
#[derive(Debug, Clone)]
pub struct StepSizes {
    schedule: StepSchedule,
    t: u64,
    eta: f64,
}

impl Iterator for StepSizes {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        self.t += 1;
        self.eta = match self.schedule {
            StepSchedule::InverseSqrt { eta0 } => eta0 / libm::sqrt(self.t as f64),
            StepSchedule::Contraction { eta1, .. } if self.t == 1 => eta1,
            StepSchedule::Contraction { c, .. } => libm::exp(-0.5 * c * self.eta) * self.eta,
        };
        Some(self.eta)
    }
}

/// `η_t` for `t ≥ 1`, computed by running the recursion.
pub fn step_size(schedule: &StepSchedule, t: usize) -> f64 {
    assert!(t >= 1, "step index starts at 1");
    schedule.iter().nth(t - 1).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionSet {
    Ball { radius: f64 },
    Box { half_width: Vector },
}

impl ProjectionSet {
    pub fn cube(dim: usize, half_width: f64) -> Self {
        ProjectionSet::Box { half_width: Vector::from_element(dim, half_width) }
    }

    pub fn project(&self, theta: &Vector) -> Vector {
        let mut out = theta.clone();
        self.project_mut(&mut out);
        out
    }

    pub fn project_mut(&self, theta: &mut Vector) {
        match self {
            ProjectionSet::Ball { radius } => {
                let norm = theta.norm();
                if norm > *radius {
                    *theta *= radius / norm;
                }
            }
            ProjectionSet::Box { half_width } => {
                for (x, w) in theta.iter_mut().zip(half_width.iter()) {
                    *x = x.clamp(-w, *w);
                }
            }
        }
    }

    pub fn contains(&self, theta: &Vector, tol: f64) -> bool {
        match self {
            ProjectionSet::Ball { radius } => theta.norm() <= radius + tol,
            ProjectionSet::Box { half_width } => theta.iter().zip(half_width.iter()).all(|(x, w)| x.abs() <= w + tol),
        }
    }

    /// Radius `C̃_1` of a Euclidean ball containing the set.
    pub fn radius_bound(&self) -> f64 {
        match self {
            ProjectionSet::Ball { radius } => *radius,
            ProjectionSet::Box { half_width } => half_width.norm(),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self {
            ProjectionSet::Box { half_width } if half_width.len() != dim => {
                Err(Error::DimensionMismatch { what: "projection box", expected: dim, found: half_width.len() })
            }
            _ => Ok(()),
        }
    }
}

/// Metrics at one recorded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub t: usize,
    pub eta: f64,
    /// `l(θ̄_t) - l(θ*)`.
    pub loss_gap: Option<f64>,
    /// `‖θ_t - θ*‖²`.
    pub dist_sq: Option<f64>,
    /// `‖ĝ_t - g‖` at `(θ_{t-1}, z_t)`.
    pub e_t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Records are written when `t` first reaches each power of this ratio.
    pub record_ratio: f64,
    /// Fail when `l(θ̄_T) - l*` ends above this multiple of `l(θ_0) - l*`.
    pub divergence_factor: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_ratio: 1.1, divergence_factor: None }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub theta: Vector,
    pub theta_bar: Vector,
    pub records: Vec<RunRecord>,
    pub steps: usize,
    /// TD(0) steps whose `μ̂` hit the lower clamp.
    pub clamped_steps: usize,
}

/// Runs `θ_t = P_C(θ_{t-1} - η_t ĝ_t(θ_{t-1}, z_t))` over the stream and
/// returns the last iterate, `θ̄_T = (1/(T+1)) Σ_{t=0}^T θ_t` and the metric
/// trace.
#[allow(clippy::too_many_arguments)]
pub fn run<I>(
    mdp: &Mdp,
    rule: &UpdateRule,
    data: I,
    schedule: &StepSchedule,
    set: &ProjectionSet,
    theta0: &Vector,
    oracle: Option<&LossModel>,
    options: &RunOptions,
) -> Result<RunOutput>
where
    I: IntoIterator<Item = Transition>,
{
    schedule.validate()?;
    let dim = rule.dim();
    if theta0.len() != dim {
        return Err(Error::DimensionMismatch { what: "theta0", expected: dim, found: theta0.len() });
    }
    set.check_dim(dim)?;
    if !set.contains(theta0, 1e-12) {
        return Err(Error::InfeasibleStart);
    }
    if rule.mode == EvalMode::Oracle && oracle.is_none() {
        return Err(Error::InvalidConfig("oracle mode needs the exact loss model".into()));
    }
    if options.record_ratio.is_nan() || options.record_ratio <= 1.0 {
        return Err(Error::InvalidConfig("record ratio must exceed 1".into()));
    }

    let mut model = EmpiricalModel::new(mdp);
    let mut theta = theta0.clone();
    let mut theta_bar = theta0.clone();
    let mut records = Vec::new();
    let mut next_mark = 1.0_f64;
    let mut clamped_steps = 0;
    let start_gap = oracle.map(|m| m.loss_gap(theta0));
    let mut etas = schedule.iter();
    let mut t = 0usize;
    let mut data = data.into_iter().peekable();

    while let Some(z) = data.next() {
        t += 1;
        let eta = etas.next().unwrap_or(f64::NAN);
        let g = match rule.mode {
            EvalMode::Oracle => {
                check_transition(mdp, &z)?;
                rule.direction(&theta, &z, Estimates::Oracle(oracle.expect("checked above")))
            }
            EvalMode::Empirical => {
                model.update(&z)?;
                if model.estimate_invariant(z.s) < model.invariant_floor() {
                    clamped_steps += 1;
                }
                rule.direction(&theta, &z, Estimates::Empirical(&model))
            }
        };
        let record_now = t as f64 >= next_mark || data.peek().is_none();
        let e_t = match (record_now, rule.mode, oracle) {
            (true, EvalMode::Empirical, Some(m)) => Some(rule.direction_error(&theta, &z, &model, m)),
            _ => None,
        };
        theta.axpy(-eta, &g, 1.0);
        set.project_mut(&mut theta);
        theta_bar.axpy(1.0 / (t as f64 + 1.0), &(&theta - &theta_bar), 1.0);

        if record_now {
            while next_mark <= t as f64 {
                next_mark = libm::round(next_mark * options.record_ratio).max(next_mark + 1.0);
            }
            let loss_gap = oracle.map(|m| m.loss_gap(&theta_bar));
            let dist_sq = oracle.map(|m| (&theta - m.theta_star()).norm_squared());
            records.push(RunRecord { t, eta, loss_gap, dist_sq, e_t });
        }
    }
    if let (Some(factor), Some(m), Some(start)) = (options.divergence_factor, oracle, start_gap) {
        let gap = m.loss_gap(&theta_bar);
        if start > 0.0 && gap > factor * start || !gap.is_finite() {
            return Err(Error::Diverged { round: 0, gap, start });
        }
    }
    Ok(RunOutput { theta, theta_bar, records, steps: t, clamped_steps })
}

fn check_transition(mdp: &Mdp, z: &Transition) -> Result<()> {
    mdp.check_state(z.s)?;
    mdp.check_state(z.s_next)?;
    if z.a >= mdp.n_actions() {
        return Err(Error::IndexOutOfRange { what: "action", index: z.a, size: mdp.n_actions() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMap;
    use crate::mdp::{Policy, RewardOutcome};
    use crate::updates::RuleKind;
    use alloc::vec;

    #[test]
    fn projections() {
        let ball = ProjectionSet::Ball { radius: 1.0 };
        let v = Vector::from_vec(vec![0.5, 0.5]);
        assert_eq!(ball.project(&v), v);
        let p = ball.project(&Vector::from_vec(vec![3.0, 4.0]));
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let cube = ProjectionSet::cube(2, 1.0);
        assert_eq!(cube.project(&Vector::from_vec(vec![2.0, -0.5])).as_slice(), &[1.0, -0.5]);
    }

    #[test]
    fn step_sizes() {
        let s = StepSchedule::Contraction { eta1: 2.0, c: 1.0 };
        assert!((step_size(&s, 2) - 2.0 * (-1.0_f64).exp()).abs() < 1e-15);
        let e3 = step_size(&s, 3);
        assert!((1.0 / 3.0..=2.0 / 3.0).contains(&e3));
        assert_eq!(step_size(&StepSchedule::InverseSqrt { eta0: 1.0 }, 4), 0.5);
        assert!(StepSchedule::Contraction { eta1: 0.5, c: 1.0 }.validate().is_err());
        assert!(StepSchedule::Contraction { eta1: 1.0, c: 0.0 }.validate().is_err());
    }

    fn one_state() -> Mdp {
        Mdp::new(0.5, vec![vec![vec![1.0]]], vec![vec![vec![RewardOutcome::new(1.0, 1.0)]]]).unwrap()
    }

    #[test]
    fn empty_stream_and_projection() {
        let m = one_state();
        let pi = Policy::uniform(1, 1);
        let f = FeatureMap::tabular(1, 0.5);
        let model = LossModel::build(&m, &pi, &pi, &f).unwrap();
        let rule = UpdateRule::new(&m, RuleKind::DirectSgd, pi.clone(), pi, f, EvalMode::Oracle).unwrap();
        let sched = StepSchedule::contraction(0.25);
        let set = ProjectionSet::Ball { radius: 1.0 };
        let theta0 = Vector::from_vec(vec![0.3]);
        let out = run(&m, &rule, Vec::new(), &sched, &set, &theta0, Some(&model), &RunOptions::default()).unwrap();
        assert_eq!(out.theta, theta0);
        assert_eq!(out.theta_bar, theta0);
        assert!(out.records.is_empty());

        let z = Transition { s: 0, a: 0, r: 1.0, s_next: 0 };
        let data = vec![z; 500];
        let out = run(&m, &rule, data, &sched, &set, &theta0, Some(&model), &RunOptions::default()).unwrap();
        assert!((out.theta[0] - 1.0).abs() < 1e-12);
        assert_eq!(out.records.last().unwrap().t, 500);
        assert!(out.records.windows(2).all(|w| w[0].t < w[1].t));
    }
}
