//! Experiment configuration files.

use std::path::{Path, PathBuf};

use offpe_core::engine::{ProjectionSet, StepSchedule};
use offpe_core::generate::{random_mdp, random_policy, GeneratorSpec};
use offpe_core::policy_iter::{EvalSchedule, PolicyIterConfig};
use offpe_core::trajectory::InitialState;
use offpe_core::{
    EvalMode, FeatureMap, LossModel, Mdp, Policy, RuleKind, SamplerConfig, SamplingMode, UpdateRule,
    Vector,
};
use serde::{Deserialize, Serialize};

use crate::io;
use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default = "default_reward_range")]
    pub reward_range: (f64, f64),
    #[serde(default = "default_reward_support")]
    pub reward_support: usize,
}

fn default_reward_range() -> (f64, f64) {
    (0.0, 1.0)
}

fn default_reward_support() -> usize {
    2
}

impl GeneratorConfig {
    pub fn spec(&self) -> GeneratorSpec {
        GeneratorSpec {
            n_states: self.n_states,
            n_actions: self.n_actions,
            gamma: self.gamma,
            reward_range: self.reward_range,
            reward_support: self.reward_support,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MdpSource {
    File(PathBuf),
    Generate(GeneratorConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Uniform,
    /// Dirichlet rows drawn from this seed.
    Random(u64),
    Deterministic(Vec<usize>),
    Probs(Vec<Vec<f64>>),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSpec {
    Tabular,
    Anchored,
    Orthonormal,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    InverseSqrt { eta0: f64 },
    Contraction { c: f64, eta1: Option<f64> },
    /// Contraction schedule with `c` computed from the exact loss model.
    FromModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSpec {
    Ball { radius: f64 },
    Cube { half_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSpec {
    DirectSgd,
    TdSgd,
    Td0,
}

impl From<RuleSpec> for RuleKind {
    fn from(r: RuleSpec) -> Self {
        match r {
            RuleSpec::DirectSgd => RuleKind::DirectSgd,
            RuleSpec::TdSgd => RuleKind::TdSgd,
            RuleSpec::Td0 => RuleKind::Td0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Oracle,
    #[default]
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplingSpec {
    #[default]
    Markov,
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub rounds: usize,
    #[serde(default = "uniform")]
    pub initial: PolicySpec,
}

fn uniform() -> PolicySpec {
    PolicySpec::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mdp: MdpSource,
    #[serde(default = "uniform")]
    pub target: PolicySpec,
    #[serde(default = "uniform")]
    pub behavior: PolicySpec,
    #[serde(default = "tabular")]
    pub features: FeatureSpec,
    pub rule: RuleSpec,
    #[serde(default)]
    pub mode: ModeSpec,
    pub schedule: ScheduleSpec,
    /// Defaults to a cube of half-width `r_max/(1-γ)`, or `100 r_max` when
    /// `γ = 1`.
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    /// Trajectory length `T`.
    pub horizon: usize,
    pub seeds: Vec<u64>,
    /// Offline dataset to evaluate instead of sampling one per seed.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub save_data: bool,
    #[serde(default)]
    pub dump_counts: bool,
    #[serde(default)]
    pub learn: Option<LearnConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn tabular() -> FeatureSpec {
    FeatureSpec::Tabular
}

/// Resolves relative paths against the config file's directory.
fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Target-policy evaluation settings, built when the config has no `learn`
/// section.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub target: Policy,
    pub rule: UpdateRule,
    pub model: LossModel,
    pub schedule: StepSchedule,
}

/// A config with every file loaded and every precondition checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub mdp: Mdp,
    pub behavior: Policy,
    pub features: FeatureMap,
    pub projection: ProjectionSet,
    pub sampler: SamplerConfig,
    pub seeds: Vec<u64>,
    pub dataset: Option<(Vec<offpe_core::Transition>, u64)>,
    pub evaluation: Option<Evaluation>,
    pub learn: Option<(PolicyIterConfig, Policy)>,
}

pub fn build_policy(spec: &PolicySpec, mdp: &Mdp, base: &Path) -> CliResult<Policy> {
    let (n, m) = (mdp.n_states(), mdp.n_actions());
    let policy = match spec {
        PolicySpec::Uniform => Policy::uniform(n, m),
        PolicySpec::Random(seed) => random_policy(n, m, *seed),
        PolicySpec::Deterministic(actions) => Policy::deterministic(actions, m)?,
        PolicySpec::Probs(rows) => Policy::new(rows.clone())?,
        PolicySpec::File(p) => io::load_policy(&resolve(base, p))?,
    };
    mdp.check_policy(&policy)?;
    Ok(policy)
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<(Self, PathBuf)> {
        let config = io::read_json(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    pub fn build_mdp(&self, base: &Path) -> CliResult<Mdp> {
        match &self.mdp {
            MdpSource::File(p) => io::load_mdp(&resolve(base, p)),
            MdpSource::Generate(g) => Ok(random_mdp(&g.spec())?),
        }
    }

    pub fn build(&self, base: &Path) -> CliResult<Experiment> {
        if self.horizon == 0 {
            return Err(CliError::Invalid("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Invalid("seeds must not be empty".into()));
        }
        let mdp = self.build_mdp(base)?;
        let behavior = build_policy(&self.behavior, &mdp, base)?;
        let features = match &self.features {
            FeatureSpec::Tabular => FeatureMap::tabular(mdp.n_states(), mdp.gamma()),
            FeatureSpec::Anchored => FeatureMap::anchored(mdp.n_states()),
            FeatureSpec::Orthonormal => FeatureMap::orthonormal(mdp.n_states()),
            FeatureSpec::File(p) => io::load_features(&resolve(base, p))?,
        };
        features.check(&mdp)?;
        let kind = RuleKind::from(self.rule);
        let mode = match self.mode {
            ModeSpec::Oracle => EvalMode::Oracle,
            ModeSpec::Empirical => EvalMode::Empirical,
        };
        let fixed_schedule = |c_from_model: Option<f64>| -> CliResult<Option<StepSchedule>> {
            let schedule = match self.schedule {
                ScheduleSpec::InverseSqrt { eta0 } => StepSchedule::InverseSqrt { eta0 },
                ScheduleSpec::Contraction { c, eta1 } => StepSchedule::Contraction { eta1: eta1.unwrap_or(1.0 / c), c },
                ScheduleSpec::FromModel => match c_from_model {
                    Some(c) => StepSchedule::contraction(c),
                    None => return Ok(None),
                },
            };
            schedule.validate()?;
            Ok(Some(schedule))
        };
        let evaluation = if self.learn.is_none() {
            let target = build_policy(&self.target, &mdp, base)?;
            let rule = UpdateRule::new(&mdp, kind, target.clone(), behavior.clone(), features.clone(), mode)?;
            let model = LossModel::build(&mdp, &target, &behavior, &features)?;
            let c = model.contraction_constant(kind.contraction_kind());
            let schedule = fixed_schedule(Some(c))?.expect("schedule resolved");
            Some(Evaluation { target, rule, model, schedule })
        } else {
            None
        };
        let projection = match &self.projection {
            Some(ProjectionSpec::Ball { radius }) => ProjectionSet::Ball { radius: *radius },
            Some(ProjectionSpec::Cube { half_width }) => ProjectionSet::cube(features.dim(), *half_width),
            None => ProjectionSet::cube(features.dim(), default_half_width(&mdp)),
        };
        if projection.radius_bound().is_nan() || projection.radius_bound() <= 0.0 {
            return Err(CliError::Invalid("projection set must have a positive size".into()));
        }
        let mut sampler = SamplerConfig::markov(self.horizon, 0);
        sampler.mode = match self.sampling {
            SamplingSpec::Markov => SamplingMode::Markov,
            SamplingSpec::Iid => SamplingMode::Iid,
        };
        if sampler.mode == SamplingMode::Iid {
            sampler.initial_state = InitialState::Stationary;
        }
        let dataset = match &self.dataset {
            Some(p) => {
                let path = resolve(base, p);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
                let (data, seed) = io::parse_dataset(&text)?;
                for z in &data {
                    mdp.check_state(z.s)?;
                    mdp.check_state(z.s_next)?;
                    if z.a >= mdp.n_actions() || mdp.reward_index(z.s, z.a, z.r).is_none() {
                        return Err(offpe_core::Error::UnknownReward { state: z.s, action: z.a, reward: z.r }.into());
                    }
                }
                Some((data, seed))
            }
            None => None,
        };
        let learn = match &self.learn {
            Some(l) => {
                if mdp.is_average_reward() {
                    return Err(CliError::Invalid("learn needs gamma < 1".into()));
                }
                let initial = build_policy(&l.initial, &mdp, base)?;
                let eval_schedule = match fixed_schedule(None)? {
                    Some(schedule) => EvalSchedule::Fixed(schedule),
                    None => EvalSchedule::ContractionFromModel,
                };
                let config = PolicyIterConfig {
                    rounds: l.rounds,
                    t_eval: self.horizon,
                    rule: kind,
                    mode,
                    schedule: eval_schedule,
                    projection: self.projection.as_ref().map(|_| projection.clone()),
                    seed: 0,
                };
                Some((config, initial))
            }
            None => None,
        };
        Ok(Experiment {
            mdp,
            behavior,
            features,
            projection,
            sampler,
            seeds: self.seeds.clone(),
            dataset,
            evaluation,
            learn,
        })
    }
}

pub fn default_half_width(mdp: &Mdp) -> f64 {
    let r = mdp.r_max().max(1e-12);
    if mdp.is_average_reward() {
        100.0 * r
    } else {
        r / (1.0 - mdp.gamma())
    }
}

impl Experiment {
    pub fn theta0(&self) -> Vector {
        Vector::zeros(self.features.dim())
    }
}
