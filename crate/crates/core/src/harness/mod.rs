//! Experiment plumbing: configuration files, the phase runner that writes
//! metrics, evaluation reports, traces and bundles, and the analyses of a
//! trained team (role-weight PCA and visitation maps).
//!
//! Every artifact carries the configuration hash and the run seed: JSON
//! files as fields, CSV files as a leading `#` comment line.

mod analysis;
mod config;
mod output;
mod run;

use thiserror::Error;

pub use analysis::{
    analysis_episodes, evaluate, evaluate_actor, learner_from_bundle, pca_project, role_weight_samples, silhouette,
    visitation_map, Projection, VisitationMap, WeightSample,
};
pub use config::{
    resolve_map, AnalysisConfig, Arm, ArmConfig, ExperimentConfig, MapRef, PcaDriver, SourceConfig, TargetConfig,
};
pub use output::{pca_csv, read_traces, visits_csv, write_traces, Provenance};
pub use run::{run_experiment, ArmSeedResult, Manifest, PhaseResult, PhaseSelect, RunOptions};

pub use crate::trainer::EvalReport;

use crate::env::EnvError;
use crate::expert::ExpertError;
use crate::mixer::MixerError;
use crate::policy::Phase;
use crate::trainer::TrainError;
use rolemix_tensor::TensorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("arm {arm}, seed {seed}, {phase:?} phase: {source}")]
    Phase {
        arm: String,
        seed: u64,
        phase: Phase,
        #[source]
        source: TrainError,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error(transparent)]
    Mixer(#[from] MixerError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Whether the failure lies in the inputs (configuration, maps,
    /// incompatible bundles) rather than in running them.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            HarnessError::Config(_)
                | HarnessError::Train(TrainError::Config(_) | TrainError::Incompatible(_) | TrainError::Bundle(_))
                | HarnessError::Env(EnvError::InvalidMap(_) | EnvError::MapParse(_))
        )
    }
}

#[cfg(test)]
mod tests;
