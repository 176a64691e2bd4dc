//! Finite-MDP offline policy evaluation and approximate policy iteration
//! with exact linear-algebra oracles.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chain;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod features;
pub mod generate;
pub mod linalg;
pub mod mdp;
pub mod policy_iter;
pub mod rate;
pub mod tabular;
pub mod theory;
pub mod trajectory;
pub mod updates;
pub mod verify;

pub use chain::{analyze_chain, ChainAnalysis};
pub use error::{Error, Result};
pub use estimation::EmpiricalModel;
pub use features::{ContractionKind, FeatureMap, LossModel, OracleMoments};
pub use linalg::{Matrix, Vector};
pub use mdp::{exact_values, transition_kernel, Mdp, Policy, RewardOutcome, ShiftConstants, ValueOracle};
pub use trajectory::{sample_trajectory, SamplerConfig, SamplingMode, Transition};
pub use updates::{EvalMode, Estimates, RuleKind, UpdateRule};
pub use engine::{run, ProjectionSet, RunOptions, RunOutput, RunRecord, StepSchedule};
