use offpe_core::chain;
use offpe_core::engine::{step_size, ProjectionSet, RunOptions, StepSchedule};
use offpe_core::policy_iter::injected_error_iteration;
use offpe_core::rate::{fit_rate, fit_seed_mean, trace};
use offpe_core::trajectory::Sampler;
use offpe_core::*;
use proptest::prelude::*;

fn two_state(gamma: f64) -> Mdp {
    let r = |v| vec![RewardOutcome::new(v, 1.0)];
    Mdp::new(gamma, vec![vec![vec![0.9, 0.1]], vec![vec![0.1, 0.9]]], vec![vec![r(1.0)], vec![r(0.0)]]).unwrap()
}

/// Same chain with two actions that share the kernel but pay differently.
fn two_state_two_actions() -> Mdp {
    let r = |v| vec![RewardOutcome::new(v, 0.5), RewardOutcome::new(-v, 0.5)];
    let row = |p: f64| vec![vec![p, 1.0 - p], vec![p, 1.0 - p]];
    Mdp::new(0.9, vec![row(0.9), row(0.1)], vec![vec![r(1.0), r(2.0)], vec![r(3.0), r(4.0)]]).unwrap()
}

fn geometric_ts(end: usize) -> Vec<usize> {
    let mut ts = Vec::new();
    let mut x = 1.0_f64;
    while (x as usize) <= end {
        let t = x.round() as usize;
        if ts.last() != Some(&t) {
            ts.push(t);
        }
        x *= 1.1;
    }
    ts
}

#[test]
fn blackwell_limit() {
    let avg = exact_values(&two_state(1.0), &Policy::uniform(2, 1)).unwrap();
    let disc = exact_values(&two_state(0.999), &Policy::uniform(2, 1)).unwrap();
    let shift = avg.average_reward() / (1.0 - 0.999);
    for s in 0..2 {
        assert!((disc.values()[s] - shift - avg.values()[s]).abs() <= 0.05);
    }
}

#[test]
fn trajectory_frequencies() {
    let m = two_state_two_actions();
    let b = Policy::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
    let cfg = SamplerConfig::markov(100_000, 9);
    let data = sample_trajectory(&m, &b, &cfg, cfg.rng(0)).unwrap();
    let n = data.len() as f64;
    let mu = chain::stationary_distribution(&transition_kernel(&m, &b).unwrap()).unwrap();
    assert!((mu[0] - 0.5).abs() < 1e-12);
    let share = data.iter().filter(|z| z.s == 0).count() as f64 / n;
    assert!((share - 0.5).abs() <= 0.01, "{share}");
    // the chain has autocorrelation 0.8, so the standard error carries a
    // (1+ρ)/(1-ρ) = 9 variance inflation
    for s in 0..2 {
        for a in 0..2 {
            let p = mu[s] * b.prob(s, a);
            let freq = data.iter().filter(|z| z.s == s && z.a == a).count() as f64 / n;
            let se = (9.0 * p * (1.0 - p) / n).sqrt();
            assert!((freq - p).abs() <= 3.0 * se, "({s},{a}) {freq} vs {p}");
        }
    }
    let mut model = EmpiricalModel::new(&m);
    for z in &data {
        model.update(z).unwrap();
    }
    assert!((model.estimate_invariant(0) - 0.5).abs() <= 0.01);
    for s in 0..2 {
        let p_hat = model.estimate_transition(&b, s);
        let p = transition_kernel(&m, &b).unwrap();
        for next in 0..2 {
            assert!((p_hat[next] - p[(s, next)]).abs() <= 0.02);
        }
    }
}

#[test]
fn estimation_error_decays() {
    let m = two_state(0.9);
    let pi = Policy::uniform(2, 1);
    let mu = chain::stationary_distribution(&transition_kernel(&m, &pi).unwrap()).unwrap();
    let ts = geometric_ts(100_000);
    let traces: Vec<Vec<(f64, f64)>> = (0..20)
        .map(|seed| {
            let cfg = SamplerConfig::markov(100_000, seed);
            let mut model = EmpiricalModel::new(&m);
            let mut out = Vec::new();
            let mut next = 0;
            for (i, z) in Sampler::new(&m, &pi, &cfg, cfg.rng(0)).unwrap().enumerate() {
                model.update(&z).unwrap();
                if next < ts.len() && ts[next] == i + 1 {
                    let e = (0..2).map(|s| model.estimation_error(&m, &pi, &mu, s)).fold(0.0, f64::max);
                    out.push(((i + 1) as f64, e * e));
                    next += 1;
                }
            }
            out
        })
        .collect();
    let fit = fit_seed_mean(&traces, (1e3, 1e5)).unwrap();
    assert!(fit.slope <= -0.8, "slope {}", fit.slope);
}

#[test]
fn direction_error_decays() {
    let m = two_state(0.9);
    let pi = Policy::uniform(2, 1);
    let f = FeatureMap::tabular(2, 0.9);
    let model = LossModel::build(&m, &pi, &pi, &f).unwrap();
    let rule = UpdateRule::new(&m, RuleKind::TdSgd, pi.clone(), pi.clone(), f, EvalMode::Empirical).unwrap();
    let set = ProjectionSet::cube(2, 10.0);
    let schedule = StepSchedule::contraction(model.contraction_constant(ContractionKind::Sgd));
    let traces: Vec<Vec<(f64, f64)>> = (0..20)
        .map(|seed| {
            let cfg = SamplerConfig::markov(100_000, seed);
            let data = Sampler::new(&m, &pi, &cfg, cfg.rng(0)).unwrap();
            let out = run(&m, &rule, data, &schedule, &set, &Vector::zeros(2), Some(&model), &RunOptions::default()).unwrap();
            trace(&out.records, |r| r.e_t.map(|e| e * e))
        })
        .collect();
    let fit = fit_seed_mean(&traces, (1e3, 1e5)).unwrap();
    assert!(fit.slope <= -0.8, "slope {}", fit.slope);
}

#[test]
fn injected_errors_respect_propagation_bound() {
    for seed in 0..20 {
        let m = generate::random_mdp(&generate::GeneratorSpec::new(5, 3, 0.9, 300 + seed)).unwrap();
        for eps in [0.01, 0.5] {
            let report = injected_error_iteration(&m, &Policy::uniform(5, 3), 10, eps, seed).unwrap();
            for (k, bound) in report.prefix_bounds(0.9).into_iter().enumerate() {
                assert!(report.rounds[k + 1].suboptimality <= bound + 1e-10);
            }
        }
    }
}

#[test]
fn rate_fit_examples() {
    let ts = geometric_ts(100_000);
    let inv: Vec<(f64, f64)> = ts.iter().map(|&t| (t as f64, 1.0 / t as f64)).collect();
    assert!((fit_rate(&inv, (1e3, 1e5)).unwrap().slope + 1.0).abs() <= 0.01);
    let logged: Vec<(f64, f64)> = ts.iter().map(|&t| (t as f64, (t as f64).ln() / (t as f64).sqrt())).collect();
    let slope = fit_rate(&logged, (1e3, 1e5)).unwrap().slope;
    assert!((-0.5..=-0.35).contains(&slope), "{slope}");
}

proptest! {
    #[test]
    fn projection_is_idempotent_and_nonexpansive(
        a in prop::collection::vec(-10.0..10.0f64, 3),
        b in prop::collection::vec(-10.0..10.0f64, 3),
        radius in 0.1..5.0f64,
    ) {
        let a = Vector::from_vec(a);
        let b = Vector::from_vec(b);
        for set in [ProjectionSet::Ball { radius }, ProjectionSet::cube(3, radius)] {
            let pa = set.project(&a);
            prop_assert!(set.contains(&pa, 1e-12));
            prop_assert!((set.project(&pa) - &pa).amax() <= 1e-12);
            prop_assert!((&pa - set.project(&b)).norm() <= (&a - &b).norm() + 1e-12);
        }
    }

    #[test]
    fn contraction_steps_stay_in_bracket(c in 0.01..100.0f64, t in 1usize..5000) {
        let schedule = StepSchedule::contraction(c);
        let eta = step_size(&schedule, t);
        let tf = t as f64;
        prop_assert!(1.0 / (c * tf) <= eta && eta <= 2.0 / (c * tf));
    }

    #[test]
    fn sampled_rewards_lie_in_support(seed in 0u64..1000) {
        let m = two_state_two_actions();
        let cfg = SamplerConfig::markov(50, seed);
        for z in sample_trajectory(&m, &Policy::uniform(2, 2), &cfg, cfg.rng(0)).unwrap() {
            prop_assert!(m.reward_index(z.s, z.a, z.r).is_some());
        }
    }
}
