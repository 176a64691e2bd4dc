//! JSON and CSV file formats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use offpe_core::policy_iter::IterationReport;
use offpe_core::{EmpiricalModel, FeatureMap, Mdp, Policy, RewardOutcome, RunRecord, Transition, Vector};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<Vec<RewardEntry>>>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &Mdp) -> Self {
        let (n, m) = (mdp.n_states(), mdp.n_actions());
        Self {
            n_states: n,
            n_actions: m,
            gamma: mdp.gamma(),
            transition: (0..n).map(|s| (0..m).map(|a| mdp.successors(s, a).to_vec()).collect()).collect(),
            rewards: (0..n)
                .map(|s| {
                    (0..m)
                        .map(|a| mdp.rewards(s, a).iter().map(|o| RewardEntry { r: o.value, p: o.prob }).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn into_mdp(self) -> CliResult<Mdp> {
        if self.transition.len() != self.n_states || self.rewards.len() != self.n_states {
            return Err(CliError::Invalid(format!("mdp tables must have n_states = {} rows", self.n_states)));
        }
        if self.transition.iter().any(|row| row.len() != self.n_actions) || self.rewards.iter().any(|row| row.len() != self.n_actions) {
            return Err(CliError::Invalid(format!("mdp tables must have n_actions = {} entries per state", self.n_actions)));
        }
        let rewards = self
            .rewards
            .into_iter()
            .map(|row| row.into_iter().map(|sa| sa.into_iter().map(|e| RewardOutcome::new(e.r, e.p)).collect()).collect())
            .collect();
        Ok(Mdp::new(self.gamma, self.transition, rewards)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub probs: Vec<Vec<f64>>,
}

impl PolicyFile {
    pub fn from_policy(policy: &Policy) -> Self {
        Self { probs: policy.rows() }
    }

    pub fn into_policy(self) -> CliResult<Policy> {
        Ok(Policy::new(self.probs)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub dim: usize,
    pub phi: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
}

impl FeatureFile {
    pub fn from_features(features: &FeatureMap) -> Self {
        Self {
            dim: features.dim(),
            phi: (0..features.n_states()).map(|s| features.phi(s).iter().copied().collect()).collect(),
            zeta: features.zeta().iter().copied().collect(),
        }
    }

    pub fn into_features(self) -> CliResult<FeatureMap> {
        if self.zeta.len() != self.dim || self.phi.iter().any(|row| row.len() != self.dim) {
            return Err(CliError::Invalid(format!("feature rows and zeta must have dim = {} entries", self.dim)));
        }
        let phi = self.phi.into_iter().map(Vector::from_vec).collect();
        Ok(FeatureMap::new(phi, Vector::from_vec(self.zeta))?)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    write_file(path, &text)
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(path.display().to_string(), e))
}

pub fn load_mdp(path: &Path) -> CliResult<Mdp> {
    read_json::<MdpFile>(path)?
        .into_mdp()
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn load_policy(path: &Path) -> CliResult<Policy> {
    read_json::<PolicyFile>(path)?
        .into_policy()
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub fn load_features(path: &Path) -> CliResult<FeatureMap> {
    read_json::<FeatureFile>(path)?
        .into_features()
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

pub const DATASET_TAG: &str = "#offline-v1";

pub fn format_dataset(data: &[Transition], seed: u64) -> String {
    let mut out = format!("{DATASET_TAG},T={},seed={seed}\n", data.len());
    for z in data {
        writeln!(out, "{},{},{},{}", z.s, z.a, z.r, z.s_next).expect("string write");
    }
    out
}

/// Parses a dataset file, returning the transitions and the header seed.
pub fn parse_dataset(text: &str) -> CliResult<(Vec<Transition>, u64)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CliError::Invalid("empty dataset".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    let (t, seed) = match fields.as_slice() {
        [tag, t, seed] if *tag == DATASET_TAG => (
            t.strip_prefix("T=").and_then(|v| v.parse::<usize>().ok()),
            seed.strip_prefix("seed=").and_then(|v| v.parse::<u64>().ok()),
        ),
        _ => (None, None),
    };
    let (Some(t), Some(seed)) = (t, seed) else {
        return Err(CliError::Invalid(format!("bad dataset header {header:?}, expected {DATASET_TAG},T=<n>,seed=<n>")));
    };
    let mut data = Vec::with_capacity(t);
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        let bad = || CliError::Invalid(format!("dataset line {}: expected s,a,r,s_next", i + 2));
        if parts.len() != 4 {
            return Err(bad());
        }
        data.push(Transition {
            s: parts[0].parse().map_err(|_| bad())?,
            a: parts[1].parse().map_err(|_| bad())?,
            r: parts[2].parse().map_err(|_| bad())?,
            s_next: parts[3].parse().map_err(|_| bad())?,
        });
    }
    if data.len() != t {
        return Err(CliError::Invalid(format!("dataset header says T={t} but has {} transitions", data.len())));
    }
    Ok((data, seed))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub const RECORDS_HEADER: &str = "t,eta,loss_gap,dist_sq,e_t";

pub fn format_records(records: &[RunRecord]) -> String {
    let mut out = format!("{RECORDS_HEADER}\n");
    for r in records {
        writeln!(out, "{},{:e},{},{},{}", r.t, r.eta, opt(r.loss_gap), opt(r.dist_sq), opt(r.e_t)).expect("string write");
    }
    out
}

pub fn parse_records(text: &str) -> CliResult<Vec<RunRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(RECORDS_HEADER) {
        return Err(CliError::Invalid(format!("records file must start with {RECORDS_HEADER}")));
    }
    let field = |s: &str| -> Result<Option<f64>, std::num::ParseFloatError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some)
        }
    };
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || CliError::Invalid(format!("records line {}: malformed", i + 2));
            let p: Vec<&str> = line.split(',').collect();
            if p.len() != 5 {
                return Err(bad());
            }
            Ok(RunRecord {
                t: p[0].parse().map_err(|_| bad())?,
                eta: p[1].parse().map_err(|_| bad())?,
                loss_gap: field(p[2]).map_err(|_| bad())?,
                dist_sq: field(p[3]).map_err(|_| bad())?,
                e_t: field(p[4]).map_err(|_| bad())?,
            })
        })
        .collect()
}

/// Arithmetic mean over seeds at every `t` recorded by all of them; a
/// column is empty where any seed lacks it.
pub fn mean_records(runs: &[Vec<RunRecord>]) -> Vec<RunRecord> {
    let Some(first) = runs.first() else { return Vec::new() };
    first
        .iter()
        .filter_map(|r0| {
            let rows: Vec<&RunRecord> = runs.iter().filter_map(|run| run.iter().find(|r| r.t == r0.t)).collect();
            if rows.len() != runs.len() {
                return None;
            }
            let mean = |f: fn(&RunRecord) -> Option<f64>| -> Option<f64> {
                let vals: Option<Vec<f64>> = rows.iter().map(|r| f(r)).collect();
                vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
            };
            Some(RunRecord {
                t: r0.t,
                eta: r0.eta,
                loss_gap: mean(|r| r.loss_gap),
                dist_sq: mean(|r| r.dist_sq),
                e_t: mean(|r| r.e_t),
            })
        })
        .collect()
}

pub const REPORT_HEADER: &str = "k,eps_hat,suboptimality,shift_c";

pub fn format_report(report: &IterationReport) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in &report.rounds {
        writeln!(out, "{},{},{:e},{}", r.k, opt(r.eps_hat), r.suboptimality, opt(r.shift_c)).expect("string write");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardCount {
    pub r: f64,
    pub n: f64,
}

/// Count tables laid out like the MDP file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub t: f64,
    pub state: Vec<f64>,
    pub state_action: Vec<Vec<f64>>,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<Vec<RewardCount>>>,
}

impl CountsFile {
    pub fn from_model(model: &EmpiricalModel) -> Self {
        let (n, m) = (model.n_states(), model.n_actions());
        Self {
            n_states: n,
            n_actions: m,
            t: model.t(),
            state: (0..n).map(|s| model.count_s(s)).collect(),
            state_action: (0..n).map(|s| (0..m).map(|a| model.count_sa(s, a)).collect()).collect(),
            transition: (0..n).map(|s| (0..m).map(|a| model.count_sas(s, a).to_vec()).collect()).collect(),
            rewards: (0..n)
                .map(|s| {
                    (0..m)
                        .map(|a| {
                            model
                                .reward_support(s, a)
                                .iter()
                                .zip(model.count_sar(s, a))
                                .map(|(&r, &n)| RewardCount { r, n })
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }
}
