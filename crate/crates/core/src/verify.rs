//! Invariant suite run by the `verify` command.
//!
//! Three statements do not hold as written for general chains: the tabular
//! `½(D+Dᵀ) ⪰ (1-γ)I` bound and the orthonormal-feature `D` bound need
//! `‖P^π‖₂ ≤ 1`, and the discounted value-error constant `2C/(1-γ(1-λ))²`
//! is too small along the constant direction. The suite checks the first two
//! on doubly stochastic chains and the third with `2C/(1-γ)²`, and reports
//! how often the literal forms fail as notes. Gaps `λ` are
//! variance-contraction gaps throughout.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::chain;
use crate::engine::{self, ProjectionSet, RunOptions, StepSchedule};
use crate::error::Result;
use crate::estimation::EmpiricalModel;
use crate::features::{ContractionKind, FeatureMap, LossModel};
use crate::generate::{dirichlet, random_mdp, random_policy, GeneratorSpec};
use crate::linalg::{self, Matrix, Vector};
use crate::mdp::{bellman_residual, exact_values, expected_rewards, shift_constants_with, transition_kernel, Mdp, Policy, RewardOutcome};
use crate::policy_iter::{optimal_oracle, policy_iteration_with};
use crate::tabular::run_tabular;
use crate::theory;
use crate::trajectory::{stream_rng, Sampler, SamplerConfig, Transition};
use crate::updates::{feature_reward_bound, rule_constants, Estimates, EvalMode, RuleKind, UpdateRule};

/// Deliberate defects the suite must detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Flip the sign of the discount term in `D`.
    FlipDSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub notes: Vec<String>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub const SAMPLE_COMPLEXITY_NOTE: &str = "sample-complexity constants for approximate policy iteration are not reproduced; \
only the exponent gap between the slow (inverse-sqrt) and fast (contraction) evaluation rates is evidenced";

fn check(name: &'static str, passed: bool, detail: String) -> CheckResult {
    CheckResult { name, passed, detail }
}

fn mdp(seed: u64, n: usize, m: usize, gamma: f64) -> Mdp {
    random_mdp(&GeneratorSpec::new(n, m, gamma, seed)).expect("generator output is valid")
}

/// Single-action MDP whose kernel is a random mixture of permutations and
/// the uniform kernel.
pub fn doubly_stochastic_mdp(seed: u64, n: usize, gamma: f64) -> Mdp {
    let mut rng = stream_rng(seed, 7);
    let weights = dirichlet(&mut rng, 4);
    // a uniform component keeps the chain irreducible and aperiodic
    let mut kernel = vec![vec![0.2 / n as f64; n]; n];
    for w in weights {
        let w = 0.8 * w;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        for (i, &j) in perm.iter().enumerate() {
            kernel[i][j] += w;
        }
    }
    let transition = kernel.into_iter().map(|row| vec![row]).collect();
    let rewards = (0..n).map(|_| vec![vec![RewardOutcome::new(rng.random::<f64>(), 1.0)]]).collect();
    Mdp::new(gamma, transition, rewards).expect("permutation mixtures are stochastic")
}

fn random_theta(rng: &mut ChaCha8Rng, dim: usize, half_width: f64) -> Vector {
    Vector::from_iterator(dim, (0..dim).map(|_| half_width * (2.0 * rng.random::<f64>() - 1.0)))
}

fn setting(seed: u64, gamma: f64) -> (Mdp, Policy, Policy) {
    let m = mdp(seed, 5, 3, gamma);
    (m, random_policy(5, 3, seed + 10_000), random_policy(5, 3, seed + 20_000))
}

fn stationary_check() -> CheckResult {
    let mut worst = 0.0_f64;
    for seed in 0..50 {
        let (m, pi, _) = setting(seed, 0.9);
        let k = transition_kernel(&m, &pi).expect("valid");
        let mu = chain::stationary_distribution(&k).expect("ergodic");
        worst = worst.max(linalg::sup_norm(&(k.transpose() * &mu - &mu)));
    }
    check("stationary-distribution", worst <= 1e-10, format!("max |muP - mu| = {worst:.2e} over 50 kernels"))
}

fn mixing_check() -> CheckResult {
    let mut ok = true;
    let mut kernels: Vec<Matrix> = (0..20)
        .map(|seed| {
            let (m, pi, _) = setting(seed, 0.9);
            transition_kernel(&m, &pi).expect("valid")
        })
        .collect();
    kernels.push(Matrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]));
    for k in &kernels {
        let a = chain::analyze_chain(k).expect("ergodic");
        let trace: Vec<f64> = chain::worst_tv_trace(k, &a.stationary).take(a.mixing_time).collect();
        let last = trace[a.mixing_time - 1];
        let before_ok = a.mixing_time == 1 || trace[a.mixing_time - 2] > chain::MIXING_TV;
        ok &= last <= chain::MIXING_TV && before_ok;
    }
    check("mixing-time-certificate", ok, format!("{} chains, tau passes and tau-1 fails", kernels.len()))
}

fn variance_gap_check() -> CheckResult {
    let mut rng = stream_rng(3, 0);
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let (m, pi, _) = setting(seed, 0.9);
        let k = transition_kernel(&m, &pi).expect("valid");
        let mu = chain::stationary_distribution(&k).expect("ergodic");
        let lambda = chain::variance_gap(&k, &mu);
        for _ in 0..100 {
            let f = random_theta(&mut rng, 5, 1.0);
            let (pf, v) = chain::variance_pair(&k, &mu, &f);
            worst = worst.min((1.0 - lambda) * (1.0 - lambda) * v - pf);
        }
    }
    check("variance-contraction", worst >= -1e-12, format!("min slack {worst:.2e} over 2000 functions"))
}

fn bellman_check() -> CheckResult {
    let mut worst = 0.0_f64;
    for seed in 0..50 {
        for gamma in [0.5, 0.9, 1.0] {
            let (m, pi, _) = setting(seed, gamma);
            let v = exact_values(&m, &pi).expect("solvable");
            let r = bellman_residual(&m, &pi, v.values(), v.average_reward()).expect("dims");
            worst = worst.max(linalg::sup_norm(&r));
        }
    }
    check("bellman-residual", worst <= 1e-10, format!("max residual {worst:.2e} over 150 cases"))
}

/// Coordinates of the exact solution in a realizable feature map. The value
/// part is matched up to the additive constant the map cannot represent.
pub fn exact_theta(features: &FeatureMap, oracle: &crate::mdp::ValueOracle) -> Vector {
    let v = oracle.values();
    let n = v.len();
    let phi = features.phi_matrix();
    let gram = phi.transpose() * &phi;
    let project = |x: &Vector| -> Vector { &phi * linalg::least_squares(&gram, &(phi.transpose() * x), 1e-12) };
    let mut target = v.clone();
    if features.has_zeta() {
        let ones = Vector::from_element(n, 1.0);
        let r1 = &ones - project(&ones);
        let rv = v - project(v);
        let denom = r1.norm_squared();
        if denom > 1e-12 {
            target.add_scalar_mut(-r1.dot(&rv) / denom);
        }
    }
    let mut theta = linalg::least_squares(&gram, &(phi.transpose() * target), 1e-12);
    if features.has_zeta() {
        let z = features.zeta();
        theta.axpy(oracle.average_reward() / z.norm_squared(), z, 1.0);
    }
    theta
}

fn minimizer_check() -> CheckResult {
    let mut worst_residual = 0.0_f64;
    let mut worst_loss = 0.0_f64;
    for seed in 0..20 {
        for (gamma, features) in [
            (0.9, FeatureMap::tabular(5, 0.9)),
            (1.0, FeatureMap::tabular(5, 1.0)),
            (1.0, FeatureMap::orthonormal(5)),
            (1.0, FeatureMap::anchored(5)),
        ] {
            let (m, pi, b) = setting(seed, gamma);
            let model = LossModel::build(&m, &pi, &b, &features).expect("realizable");
            let theta = model.theta_star();
            let r = bellman_residual(&m, &pi, &features.values(theta), features.average_reward(theta)).expect("dims");
            worst_residual = worst_residual.max(linalg::sup_norm(&r));
            let oracle = exact_values(&m, &pi).expect("solvable");
            worst_loss = worst_loss.max(model.loss(&exact_theta(&features, &oracle)));
        }
    }
    check(
        "minimizer-solves-bellman",
        worst_residual <= 1e-9 && worst_loss <= 1e-18,
        format!("max residual {worst_residual:.2e}, max loss at exact values {worst_loss:.2e}"),
    )
}

fn gradient_identity_check() -> CheckResult {
    let mut rng = stream_rng(11, 0);
    let mut worst = 0.0_f64;
    for seed in 0..20 {
        let gamma = if seed % 2 == 0 { 0.5 } else { 0.9 };
        let (m, pi, b) = setting(seed, gamma);
        let f = FeatureMap::tabular(5, gamma);
        let model = LossModel::build(&m, &pi, &b, &f).expect("realizable");
        let rule = UpdateRule::new(&m, RuleKind::TdSgd, pi, b, f, EvalMode::Oracle).expect("covered");
        for _ in 0..10 {
            let theta = random_theta(&mut rng, 5, 5.0);
            let diff = rule.mean_direction(&m, &model, &theta) - model.loss_and_grad(&theta).1;
            worst = worst.max(diff.norm());
        }
    }
    check("td-sgd-mean-is-gradient", worst <= 1e-12, format!("max deviation {worst:.2e} at 200 points"))
}

fn hessian_check() -> CheckResult {
    let mut rng = stream_rng(12, 0);
    let (m, pi, b) = setting(3, 0.9);
    let f = FeatureMap::tabular(5, 0.9);
    let model = LossModel::build(&m, &pi, &b, &f).expect("realizable");
    let h = 1e-4;
    let mut worst = 0.0_f64;
    for _ in 0..5 {
        let theta = random_theta(&mut rng, 5, 5.0);
        for i in 0..5 {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let col = (model.loss_and_grad(&plus).1 - model.loss_and_grad(&minus).1) / (2.0 * h);
            worst = worst.max((col - model.hessian().column(i)).amax());
        }
    }
    check("hessian-constant", worst <= 1e-6, format!("max finite-difference deviation {worst:.2e}"))
}

fn min_mu(model: &LossModel) -> f64 {
    model.mu_b().min()
}

fn tabular_spectra_check(fault: Fault, notes: &mut Vec<String>) -> CheckResult {
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        for gamma in [0.5, 0.9] {
            let m = doubly_stochastic_mdp(seed, 5, gamma);
            let pi = Policy::uniform(5, 1);
            let f = FeatureMap::tabular(5, gamma);
            let mut model = LossModel::build(&m, &pi, &pi, &f).expect("realizable");
            if fault == Fault::FlipDSign {
                model.inject_d_sign_fault(&f);
            }
            let h = model.contraction_constant(ContractionKind::Sgd) - min_mu(&model) * (1.0 - gamma) * (1.0 - gamma);
            let d = model.d_constant() - (1.0 - gamma);
            worst = worst.min(h).min(d);
        }
    }
    let mut general = 0;
    for seed in 0..20 {
        let (m, pi, b) = setting(seed, 0.9);
        let model = LossModel::build(&m, &pi, &b, &FeatureMap::tabular(5, 0.9)).expect("realizable");
        general += usize::from(model.d_constant() < 0.1 - 1e-10);
    }
    notes.push(format!("defect: tabular D bound fails on {general}/20 general random MDPs (needs ||P||_2 <= 1)"));
    check("tabular-spectra (doubly stochastic)", worst >= -1e-10, format!("min slack {worst:.2e}"))
}

fn anchored_check() -> CheckResult {
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let (m, pi, b) = setting(seed, 1.0);
        let model = LossModel::build(&m, &pi, &b, &FeatureMap::anchored(5)).expect("realizable");
        let mut tilde = transition_kernel(&m, &pi).expect("valid");
        tilde.column_mut(4).fill(0.0);
        let p = linalg::operator_norm(&tilde);
        let h = model.contraction_constant(ContractionKind::Sgd) - min_mu(&model) * (1.0 - p) * (1.0 - p);
        let d = model.d_constant() - (1.0 - p);
        worst = worst.min(h).min(d);
    }
    check("anchored-spectra", worst >= -1e-10, format!("min slack {worst:.2e} over 20 MDPs"))
}

fn orthonormal_check(notes: &mut Vec<String>) -> CheckResult {
    let mut worst = f64::INFINITY;
    for seed in 0..20 {
        let m = doubly_stochastic_mdp(seed, 5, 1.0);
        let pi = Policy::uniform(5, 1);
        let model = LossModel::build(&m, &pi, &pi, &FeatureMap::orthonormal(5)).expect("realizable");
        let k = transition_kernel(&m, &pi).expect("valid");
        let lambda = chain::variance_gap(&k, &chain::stationary_distribution(&k).expect("ergodic"));
        let h = model.contraction_constant(ContractionKind::Sgd) - min_mu(&model) * lambda * lambda;
        worst = worst.min(h).min(model.d_constant() - lambda);
    }
    let (mut variance, mut eigen) = (0, 0);
    for seed in 0..200 {
        let (m, pi, b) = setting(seed, 1.0);
        let model = LossModel::build(&m, &pi, &b, &FeatureMap::orthonormal(5)).expect("realizable");
        let k = transition_kernel(&m, &pi).expect("valid");
        let c = model.contraction_constant(ContractionKind::Sgd);
        let floor = min_mu(&model);
        let fails = |lambda: f64| c - floor * lambda * lambda < -1e-10 || model.d_constant() - lambda < -1e-10;
        variance += usize::from(fails(chain::variance_gap(&k, &chain::stationary_distribution(&k).expect("ergodic"))));
        eigen += usize::from(fails(chain::spectral_gap(&k)));
    }
    notes.push(format!(
        "defect: orthonormal-feature bounds fail on {variance}/200 general random MDPs with the variance gap \
         and on {eigen}/200 with the eigenvalue-modulus gap"
    ));
    check("orthonormal-spectra (doubly stochastic)", worst >= -1e-10, format!("min slack {worst:.2e}"))
}

fn contraction_check(fault: Fault) -> CheckResult {
    let mut rng = stream_rng(13, 0);
    let mut worst = f64::INFINITY;
    let mut min_c = f64::INFINITY;
    for seed in 0..10 {
        let m = doubly_stochastic_mdp(seed, 5, 0.9);
        let pi = Policy::uniform(5, 1);
        let f = FeatureMap::tabular(5, 0.9);
        let mut model = LossModel::build(&m, &pi, &pi, &f).expect("realizable");
        if fault == Fault::FlipDSign {
            model.inject_d_sign_fault(&f);
        }
        for kind in RuleKind::ALL {
            let rule = UpdateRule::new(&m, kind, pi.clone(), pi.clone(), f.clone(), EvalMode::Oracle).expect("covered");
            // with ζ = 0 the TD(0) constant is read off D directly
            let c = match kind {
                RuleKind::Td0 => model.d_constant(),
                _ => model.contraction_constant(ContractionKind::Sgd),
            };
            min_c = min_c.min(c);
            for _ in 0..100 {
                let theta = random_theta(&mut rng, 5, 10.0);
                let x = &theta - model.theta_star();
                let g = rule.mean_direction(&m, &model, &theta);
                worst = worst.min(x.dot(&g) - c * x.norm_squared());
            }
        }
    }
    check(
        "mean-field-contraction",
        worst >= -1e-9 && min_c > 0.0,
        format!("min slack {worst:.2e}, min c {min_c:.3e}"),
    )
}

fn boundedness_check() -> (CheckResult, CheckResult) {
    let mut rng = stream_rng(14, 0);
    let mut bound_ok = true;
    let mut lip_ok = true;
    let mut worst_ratio = 0.0_f64;
    let mut worst_lip = 0.0_f64;
    for seed in 0..5 {
        let (m, pi, b) = setting(seed, 0.9);
        let f = FeatureMap::tabular(5, 0.9);
        let model = LossModel::build(&m, &pi, &b, &f).expect("realizable");
        let mu_pi = chain::stationary_distribution(&transition_kernel(&m, &pi).expect("valid")).expect("ergodic");
        let shift = shift_constants_with(&pi, &b, &mu_pi, model.mu_b());
        let radius = 1.2 * model.theta_star().norm();
        let ball = ProjectionSet::Ball { radius };
        let c0 = feature_reward_bound(&m, &f);
        for kind in RuleKind::ALL {
            let consts = rule_constants(kind, c0, radius, shift.policy_ratio_c);
            let rule = UpdateRule::new(&m, kind, pi.clone(), b.clone(), f.clone(), EvalMode::Oracle).expect("covered");
            for _ in 0..2000 {
                let t1 = ball.project(&random_theta(&mut rng, 5, radius));
                let t2 = ball.project(&random_theta(&mut rng, 5, radius));
                let s = rng.random_range(0..5);
                let a = rng.random_range(0..3);
                let next = rng.random_range(0..5);
                let outcomes = m.rewards(s, a);
                let r = outcomes[rng.random_range(0..outcomes.len())].value;
                let z = Transition { s, a, r, s_next: next };
                let g1 = rule.direction(&t1, &z, Estimates::Oracle(&model));
                let g2 = rule.direction(&t2, &z, Estimates::Oracle(&model));
                worst_ratio = worst_ratio.max(g1.norm() / consts.grad_bound);
                bound_ok &= g1.norm() <= consts.grad_bound * (1.0 + 1e-12);
                let dist = (&t1 - &t2).norm();
                if dist > 0.0 {
                    let ratio = (g1 - g2).norm() / (consts.lipschitz * dist);
                    worst_lip = worst_lip.max(ratio);
                    lip_ok &= ratio <= 1.0 + 1e-12;
                }
            }
        }
    }
    (
        check("direction-bound", bound_ok, format!("max |g| / C0 = {worst_ratio:.3}")),
        check("direction-lipschitz", lip_ok, format!("max |g1-g2| / (G |t1-t2|) = {worst_lip:.3}")),
    )
}

fn step_bracket_check() -> (CheckResult, CheckResult) {
    let mut ok = true;
    let mut tele = 0.0_f64;
    for c in [0.1, 1.0, 10.0] {
        for eta1 in [1.0 / c, 2.0 / c] {
            let schedule = StepSchedule::Contraction { eta1, c };
            let etas: Vec<f64> = schedule.iter().take(1_000_000).collect();
            for (i, &eta) in etas.iter().enumerate() {
                let t = (i + 1) as f64;
                ok &= 1.0 / (c * t) <= eta && eta <= 2.0 / (c * t);
            }
            for (t, t_end) in [(1, 2), (1, 100), (10, 1000), (500, 100_000), (1000, 1_000_000)] {
                let lhs = theory::telescoped_step(&etas, c, t, t_end);
                tele = tele.max((lhs - etas[t_end - 1]).abs() / etas[t_end - 1]);
            }
        }
    }
    (
        check("step-size-bracket", ok, "1/(ct) <= eta_t <= 2/(ct) for t <= 1e6, c in {0.1, 1, 10}".into()),
        check("step-size-telescoping", tele <= 1e-9, format!("max relative deviation {tele:.2e}")),
    )
}

fn sparse_equivalence_check() -> CheckResult {
    let mut worst = 0.0_f64;
    for gamma in [0.9, 1.0] {
        let (m, pi, b) = setting(5, gamma);
        let f = FeatureMap::tabular(5, gamma);
        let set = ProjectionSet::cube(f.dim(), 50.0);
        let theta0 = Vector::zeros(f.dim());
        let config = SamplerConfig::markov(10_000, 5);
        let data: Vec<Transition> = Sampler::new(&m, &b, &config, config.rng(0)).expect("valid").collect();
        for kind in RuleKind::ALL {
            for mode in [EvalMode::Oracle, EvalMode::Empirical] {
                let schedule = StepSchedule::InverseSqrt { eta0: 0.5 };
                let model = LossModel::build(&m, &pi, &b, &f).expect("realizable");
                let rule = UpdateRule::new(&m, kind, pi.clone(), b.clone(), f.clone(), mode).expect("covered");
                let generic = engine::run(&m, &rule, data.iter().copied(), &schedule, &set, &theta0, Some(&model), &RunOptions::default())
                    .expect("runs");
                let (theta, theta_bar) =
                    run_tabular(&m, kind, &pi, &b, mode, data.iter().copied(), &schedule, &set, &theta0).expect("runs");
                worst = worst.max((generic.theta - theta).amax()).max((generic.theta_bar - theta_bar).amax());
            }
        }
    }
    check("tabular-sparse-equivalence", worst <= 1e-12, format!("max iterate deviation {worst:.2e} over 1e4 steps"))
}

fn value_error_check(notes: &mut Vec<String>) -> CheckResult {
    let mut rng = stream_rng(15, 0);
    let mut worst = f64::INFINITY;
    let mut literal_violations = 0;
    let mut literal_total = 0;
    for (i, gamma) in [0.5, 0.9, 1.0].into_iter().enumerate() {
        let (m, pi, b) = setting(30 + i as u64, gamma);
        let f = if gamma < 1.0 { FeatureMap::tabular(5, gamma) } else { FeatureMap::orthonormal(5) };
        let model = LossModel::build(&m, &pi, &b, &f).expect("realizable");
        let k = transition_kernel(&m, &pi).expect("valid");
        let mu_pi = chain::stationary_distribution(&k).expect("ergodic");
        let lambda = chain::variance_gap(&k, &mu_pi);
        let c = shift_constants_with(&pi, &b, &mu_pi, model.mu_b()).measure_ratio_c;
        let oracle = exact_values(&m, &pi).expect("solvable");
        let literal = theory::value_error_constant(gamma, lambda, c);
        let constant = if gamma < 1.0 { theory::value_error_constant_gapless(gamma, c) } else { literal };
        for _ in 0..1000 {
            let theta = random_theta(&mut rng, f.dim(), 10.0);
            let lhs = theory::weighted_value_error(&oracle, &f, &mu_pi, &theta);
            let gap = model.loss_gap(&theta);
            worst = worst.min((constant * gap - lhs) / (1.0 + lhs));
            if gamma < 1.0 {
                literal_total += 1;
                literal_violations += usize::from(literal * gap < lhs * (1.0 - 1e-12));
            }
        }
    }
    notes.push(format!(
        "defect: discounted value-error bound with 2C/(1-gamma(1-lambda))^2 fails at {literal_violations}/{literal_total} random points"
    ));
    check("value-error-bound", worst >= -1e-10, format!("min relative slack {worst:.2e}; discounted case uses 2C/(1-gamma)^2"))
}

fn estimator_check() -> CheckResult {
    let mut worst = 0.0_f64;
    for seed in 0..10 {
        let (m, pi, b) = setting(seed, 0.9);
        let f = FeatureMap::tabular(5, 0.9);
        let model = LossModel::build(&m, &pi, &b, &f).expect("realizable");
        let counts = EmpiricalModel::with_expected_counts(&m, &b, model.mu_b(), 1e6);
        let xi = expected_rewards(&m, &pi).expect("valid");
        for s in 0..5 {
            let (xi_hat, phi_hat) = counts.estimate_moments(&pi, &f, s);
            worst = worst.max((xi_hat - xi[s]).abs()).max((phi_hat - &model.moments().phi_next[s]).amax());
            worst = worst.max((counts.estimate_invariant(s) - model.mu_b()[s]).abs());
        }
    }
    check("estimator-consistency", worst <= 1e-12, format!("max deviation {worst:.2e} with expected counts"))
}

fn policy_iteration_check() -> CheckResult {
    let mut ok = true;
    for seed in 0..10 {
        let m = mdp(seed + 50, 5, 3, 0.9);
        let opt = optimal_oracle(&m).expect("discounted");
        let report = policy_iteration_with(&m, &Policy::uniform(5, 3), 10, |_, p| Ok(exact_values(&m, p)?.values().clone()))
            .expect("exact evaluation");
        let sub: Vec<f64> = report.rounds.iter().map(|r| r.suboptimality).collect();
        ok &= sub.windows(2).all(|w| w[1] <= w[0] + 1e-10);
        ok &= report.final_policy() == &opt.policy;
        ok &= sub.iter().all(|&x| x >= -1e-10);
    }
    check("exact-policy-iteration", ok, "monotone mu*-weighted improvement to the optimal policy on 10 MDPs".into())
}

/// Runs every check. `fault` injects a known defect.
pub fn run_all(fault: Fault) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut notes = Vec::new();
    report.checks.push(stationary_check());
    report.checks.push(mixing_check());
    report.checks.push(variance_gap_check());
    report.checks.push(bellman_check());
    report.checks.push(minimizer_check());
    report.checks.push(gradient_identity_check());
    report.checks.push(hessian_check());
    report.checks.push(tabular_spectra_check(fault, &mut notes));
    report.checks.push(anchored_check());
    report.checks.push(orthonormal_check(&mut notes));
    report.checks.push(contraction_check(fault));
    let (bound, lip) = boundedness_check();
    report.checks.push(bound);
    report.checks.push(lip);
    let (bracket, tele) = step_bracket_check();
    report.checks.push(bracket);
    report.checks.push(tele);
    report.checks.push(sparse_equivalence_check());
    report.checks.push(value_error_check(&mut notes));
    report.checks.push(estimator_check());
    report.checks.push(policy_iteration_check());
    notes.push(String::from(SAMPLE_COMPLEXITY_NOTE));
    report.notes = notes;
    Ok(report)
}
