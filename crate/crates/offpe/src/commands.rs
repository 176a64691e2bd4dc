//! Subcommand implementations. Each writes its files under `out` and
//! returns the lines it would print.

use std::fs;
use std::path::{Path, PathBuf};

use offpe_core::engine::{run, RunOptions};
use offpe_core::generate::random_mdp;
use offpe_core::policy_iter::approximate_policy_iteration;
use offpe_core::rate::{fit_seed_mean, trace};
use offpe_core::trajectory::Sampler;
use offpe_core::verify::{run_all, Fault};
use offpe_core::{EmpiricalModel, RunRecord, Transition};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, GeneratorConfig};
use crate::io::{self, CountsFile, MdpFile, PolicyFile};
use crate::{CliError, CliResult};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))
}

pub fn mdp_gen(gen: &GeneratorConfig, out: &Path) -> CliResult<Vec<String>> {
    let mdp = random_mdp(&gen.spec())?;
    ensure_dir(out)?;
    let path = out.join("mdp.json");
    io::write_json(&path, &MdpFile::from_mdp(&mdp))?;
    Ok(vec![format!("wrote {}", path.display())])
}

#[derive(Debug, Serialize)]
struct SeedSummary {
    seed: u64,
    steps: usize,
    clamped_steps: usize,
    final_loss_gap: f64,
    final_dist_sq: f64,
    theta_bar: Vec<f64>,
    values: Vec<f64>,
    average_reward: f64,
}

#[derive(Debug, Serialize)]
struct EvaluateSummary {
    rule: &'static str,
    contraction_constant: f64,
    theta_star: Vec<f64>,
    l_star: f64,
    runs: Vec<SeedSummary>,
}

fn collect_data(exp: &Experiment, seed: u64) -> CliResult<Vec<Transition>> {
    let mut sampler = exp.sampler;
    sampler.seed = seed;
    Ok(Sampler::new(&exp.mdp, &exp.behavior, &sampler, sampler.rng(0))?.collect())
}

/// Runs every seed, writing `seed_<s>.csv` for each and `mean.csv` for the
/// seed average.
pub fn evaluate(exp: &Experiment, out: &Path, save_data: bool, dump_counts: bool) -> CliResult<Vec<String>> {
    let eval = exp
        .evaluation
        .as_ref()
        .ok_or_else(|| CliError::Invalid("config has a learn section; use the learn command".into()))?;
    ensure_dir(out)?;
    let seeds: Vec<u64> = match &exp.dataset {
        Some((_, seed)) => vec![*seed],
        None => exp.seeds.clone(),
    };
    let runs: Vec<CliResult<(u64, Vec<RunRecord>, SeedSummary)>> = seeds
        .par_iter()
        .map(|&seed| {
            let data = match &exp.dataset {
                Some((data, _)) => data.clone(),
                None => collect_data(exp, seed)?,
            };
            let output = run(
                &exp.mdp,
                &eval.rule,
                data.iter().copied(),
                &eval.schedule,
                &exp.projection,
                &exp.theta0(),
                Some(&eval.model),
                &RunOptions::default(),
            )?;
            io::write_file(&out.join(format!("seed_{seed}.csv")), &io::format_records(&output.records))?;
            if save_data {
                io::write_file(&out.join(format!("data_{seed}.csv")), &io::format_dataset(&data, seed))?;
            }
            if dump_counts {
                let mut counts = EmpiricalModel::new(&exp.mdp);
                for z in &data {
                    counts.update(z)?;
                }
                io::write_json(&out.join(format!("counts_{seed}.json")), &CountsFile::from_model(&counts))?;
            }
            let summary = SeedSummary {
                seed,
                steps: output.steps,
                clamped_steps: output.clamped_steps,
                final_loss_gap: eval.model.loss_gap(&output.theta_bar),
                final_dist_sq: (&output.theta - eval.model.theta_star()).norm_squared(),
                theta_bar: output.theta_bar.iter().copied().collect(),
                values: exp.features.values(&output.theta_bar).iter().copied().collect(),
                average_reward: exp.features.average_reward(&output.theta_bar),
            };
            Ok((seed, output.records, summary))
        })
        .collect();
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut lines = Vec::new();
    for r in runs {
        let (seed, recs, summary) = r?;
        lines.push(format!(
            "seed {seed}: loss_gap(theta_bar) = {:e}, |theta_T - theta*|^2 = {:e}",
            summary.final_loss_gap, summary.final_dist_sq
        ));
        records.push(recs);
        summaries.push(summary);
    }
    io::write_file(&out.join("mean.csv"), &io::format_records(&io::mean_records(&records)))?;
    let summary = EvaluateSummary {
        rule: eval.rule.kind.name(),
        contraction_constant: eval.model.contraction_constant(eval.rule.kind.contraction_kind()),
        theta_star: eval.model.theta_star().iter().copied().collect(),
        l_star: eval.model.l_star(),
        runs: summaries,
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    lines.push(format!("wrote {} seed files and mean.csv to {}", records.len(), out.display()));
    Ok(lines)
}

#[derive(Debug, Serialize)]
struct LearnSummary {
    seed: u64,
    final_policy: Vec<Vec<f64>>,
    optimal_policy: Vec<Vec<f64>>,
    matches_optimal: bool,
    final_suboptimality: f64,
    bound: f64,
    diagnostic: Option<String>,
}

/// Approximate policy iteration per seed: `report_<s>.csv`,
/// `policy_<s>.json` and `summary_<s>.json`.
pub fn learn(exp: &Experiment, out: &Path) -> CliResult<Vec<String>> {
    let (config, initial) = exp.learn.as_ref().ok_or_else(|| CliError::Invalid("config has no learn section".into()))?;
    ensure_dir(out)?;
    let results: Vec<CliResult<String>> = exp
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut config = config.clone();
            config.seed = seed;
            let report = approximate_policy_iteration(&exp.mdp, &exp.behavior, initial, &config)?;
            io::write_file(&out.join(format!("report_{seed}.csv")), &io::format_report(&report))?;
            io::write_json(&out.join(format!("policy_{seed}.json")), &PolicyFile::from_policy(report.final_policy()))?;
            let matches = report.final_policy() == &report.optimal.policy;
            let summary = LearnSummary {
                seed,
                final_policy: report.final_policy().rows(),
                optimal_policy: report.optimal.policy.rows(),
                matches_optimal: matches,
                final_suboptimality: report.rounds.last().expect("round 0 exists").suboptimality,
                bound: report.bound(exp.mdp.gamma()),
                diagnostic: report.coverage_diagnostic.as_ref().map(|e| e.to_string()),
            };
            io::write_json(&out.join(format!("summary_{seed}.json")), &summary)?;
            let mut line = format!(
                "seed {seed}: {} rounds, suboptimality {:e}, optimal policy {}",
                report.rounds.len() - 1,
                summary.final_suboptimality,
                if matches { "recovered" } else { "missed" }
            );
            if let Some(d) = &summary.diagnostic {
                line.push_str(&format!(" (stopped: {d})"));
            }
            Ok(line)
        })
        .collect();
    let mut lines = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    let optimal = offpe_core::policy_iter::optimal_oracle(&exp.mdp)?;
    io::write_json(&out.join("optimal_policy.json"), &PolicyFile::from_policy(&optimal.policy))?;
    lines.push(format!("wrote reports for {} seeds to {}", exp.seeds.len(), out.display()));
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    LossGap,
    DistSq,
    ESq,
}

impl Metric {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "loss_gap" => Ok(Metric::LossGap),
            "dist_sq" => Ok(Metric::DistSq),
            "e_t_sq" => Ok(Metric::ESq),
            other => Err(CliError::Invalid(format!("unknown metric {other:?}; use loss_gap, dist_sq or e_t_sq"))),
        }
    }

    pub fn read(self, r: &RunRecord) -> Option<f64> {
        match self {
            Metric::LossGap => r.loss_gap,
            Metric::DistSq => r.dist_sq,
            Metric::ESq => r.e_t.map(|e| e * e),
        }
    }
}

#[derive(Debug, Serialize)]
struct FitFile {
    metric: String,
    slope: f64,
    intercept: f64,
    window: (f64, f64),
    points: usize,
    seeds: usize,
}

/// Fits `log(mean metric)` against `log t` over the given record files.
pub fn rate_fit(files: &[PathBuf], metric: Metric, window: (f64, f64), out: Option<&Path>) -> CliResult<Vec<String>> {
    if files.is_empty() {
        return Err(CliError::Invalid("rate-fit needs at least one records file".into()));
    }
    let traces = files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| CliError::Io(p.display().to_string(), e))?;
            Ok(trace(&io::parse_records(&text)?, |r| metric.read(r)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let fit = fit_seed_mean(&traces, window)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        let file = FitFile {
            metric: format!("{metric:?}"),
            slope: fit.slope,
            intercept: fit.intercept,
            window: fit.window,
            points: fit.points,
            seeds: fit.seeds,
        };
        io::write_json(&dir.join("fit.json"), &file)?;
    }
    Ok(vec![format!(
        "slope {:.4} intercept {:.4} over t in [{:e}, {:e}] ({} points, {} files)",
        fit.slope, fit.intercept, fit.window.0, fit.window.1, fit.points, fit.seeds
    )])
}

/// Runs the invariant suite, returning the report lines and the names of
/// failed checks.
pub fn verify(fault: Fault) -> CliResult<(Vec<String>, Vec<&'static str>)> {
    let report = run_all(fault)?;
    let mut lines: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    lines.extend(report.notes.iter().map(|n| format!("note: {n}")));
    let failed: Vec<&'static str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    lines.push(format!("{}/{} checks passed", report.checks.len() - failed.len(), report.checks.len()));
    Ok((lines, failed))
}
