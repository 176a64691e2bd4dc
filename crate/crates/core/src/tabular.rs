//! Sparse tabular forms of the three update rules.
//!
//! Coordinates `0..|S|` hold `V(s)`; when `γ = 1` the extra last coordinate
//! holds `r̄`. TD-SGD touches only `s_t`, `s'_t` and `r̄`; TD(0) touches only
//! `s_t` and `r̄`; direct-SGD moves every value coordinate.

use alloc::vec;
use alloc::vec::Vec;

use crate::chain;
use crate::engine::{ProjectionSet, StepSchedule};
use crate::error::{Error, Result};
use crate::estimation::EmpiricalModel;
use crate::linalg::Vector;
use crate::mdp::{expected_rewards, transition_kernel, Mdp, Policy};
use crate::trajectory::Transition;
use crate::updates::{EvalMode, RuleKind};

struct Exact {
    xi: Vector,
    kernel: crate::linalg::Matrix,
    mu_b: Vector,
}

/// Returns `(θ_T, θ̄_T)` with the same averaging convention as
/// [`crate::engine::run`].
#[allow(clippy::too_many_arguments)]
pub fn run_tabular<I>(
    mdp: &Mdp,
    kind: RuleKind,
    target: &Policy,
    behavior: &Policy,
    mode: EvalMode,
    data: I,
    schedule: &StepSchedule,
    set: &ProjectionSet,
    theta0: &Vector,
) -> Result<(Vector, Vector)>
where
    I: IntoIterator<Item = Transition>,
{
    schedule.validate()?;
    let n = mdp.n_states();
    let gamma = mdp.gamma();
    let avg = mdp.is_average_reward();
    let dim = if avg { n + 1 } else { n };
    if theta0.len() != dim {
        return Err(Error::DimensionMismatch { what: "theta0", expected: dim, found: theta0.len() });
    }
    let exact = match mode {
        EvalMode::Oracle => Some(Exact {
            xi: expected_rewards(mdp, target)?,
            kernel: transition_kernel(mdp, target)?,
            mu_b: chain::stationary_distribution(&transition_kernel(mdp, behavior)?)?,
        }),
        EvalMode::Empirical => None,
    };
    let mut model = EmpiricalModel::new(mdp);
    let mut theta = theta0.clone();
    let mut theta_bar = theta0.clone();
    let mut p_row: Vec<f64> = vec![0.0; n];
    let mut etas = schedule.iter();
    let mut t = 0usize;

    for z in data {
        t += 1;
        let eta = etas.next().unwrap_or(f64::NAN);
        if mode == EvalMode::Empirical {
            model.update(&z)?;
        } else {
            mdp.check_state(z.s)?;
            mdp.check_state(z.s_next)?;
        }
        let (s, a) = (z.s, z.a);
        let r_bar = if avg { theta[n] } else { 0.0 };
        let ratio = if target.prob(s, a) == 0.0 { 0.0 } else { target.prob(s, a) / behavior.prob(s, a) };

        match kind {
            RuleKind::DirectSgd | RuleKind::TdSgd => {
                let xi = match &exact {
                    Some(e) => {
                        for (j, p) in p_row.iter_mut().enumerate() {
                            *p = e.kernel[(s, j)];
                        }
                        e.xi[s]
                    }
                    None => {
                        let row = model.estimate_transition(target, s);
                        p_row.copy_from_slice(row.as_slice());
                        model.estimate_reward(target, s)
                    }
                };
                let next_value: f64 = p_row.iter().zip(theta.iter()).map(|(p, v)| p * v).sum();
                let delta = xi - r_bar + gamma * next_value - theta[s];
                if kind == RuleKind::DirectSgd {
                    for (j, p) in p_row.iter().enumerate() {
                        theta[j] -= eta * delta * gamma * p;
                    }
                    theta[s] += eta * delta;
                    if avg {
                        theta[n] += eta * delta;
                    }
                } else if ratio != 0.0 {
                    let step = eta * ratio * delta;
                    theta[s] += step;
                    theta[z.s_next] -= gamma * step;
                    if avg {
                        theta[n] += step;
                    }
                }
            }
            RuleKind::Td0 => {
                if ratio != 0.0 {
                    let mu = match &exact {
                        Some(e) => e.mu_b[s],
                        None => model.clamped_invariant(s),
                    };
                    let delta = -ratio / mu * (z.r - r_bar + gamma * theta[z.s_next] - theta[s]);
                    theta[s] -= eta * delta;
                    if avg {
                        theta[n] -= eta * delta;
                    }
                }
            }
        }
        set.project_mut(&mut theta);
        theta_bar.axpy(1.0 / (t as f64 + 1.0), &(&theta - &theta_bar), 1.0);
    }
    Ok((theta, theta_bar))
}
