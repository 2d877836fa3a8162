//! Episode replay, loss assembly, optimisation, target networks and the
//! two-phase curriculum.
//!
//! A [`Learner`] owns the online and target parameters of one team. The
//! training loss is `L_TD + λ₁ L_sup + λ₂ L_LSTRR`: a team-value regression
//! against double-estimated bootstrapped targets, a demonstration
//! log-likelihood over each agent's available actions, and the LSTRR
//! regulariser on the return-tied roles. [`run_phase`] drives collection,
//! updates and periodic greedy evaluation; [`TransferBundle`] carries the
//! team-size-independent weights from one phase to the next.

mod batch;
mod bundle;
mod config;
mod loss;
mod optim;
mod phase;
mod replay;

use rand::Rng;
use rolemix_tensor::{Graph, ParamStore, TensorError};
use thiserror::Error;

pub use batch::Batch;
pub use bundle::{load_transfer, BundleHeader, FieldDiff, TransferBundle, BUNDLE_FORMAT, BUNDLE_MAGIC};
pub use config::{LadderConfig, LossWeights, MixerVariant, ModelConfig, TdTarget, TrainConfig};
pub use loss::{build_losses, sup_loss, td_targets, LossNodes, LossReport, Nets};
pub use optim::{RmsProp, RmsPropConfig, StepReport};
pub use phase::{evaluate_policy, run_phase, EvalReport, MetricsRecord, PhaseConfig, PhaseOutput, EVAL_SEED_OFFSET};
pub use replay::ReplayBuffer;

use crate::env::{EnvError, MapSpec, STATE_DIM};
use crate::expert::ExpertError;
use crate::mixer::{Mixer, MixerError, QmixMixer, RoleMixer};
use crate::policy::{AgentNet, PolicyError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("malformed batch: {0}")]
    Batch(String),
    #[error("supervision weight is positive but no demonstrations were supplied")]
    MissingDemos,
    #[error("corrupt demonstration: step row {row}, agent {agent} took unavailable action {action}")]
    CorruptDemo { row: usize, agent: usize, action: usize },
    #[error("incompatible transfer bundle: {}", FieldDiff::describe(.0))]
    Incompatible(Vec<FieldDiff>),
    #[error("malformed transfer bundle: {0}")]
    Bundle(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mixer(#[from] MixerError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Expert(#[from] ExpertError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Team-dependent sizes a learner is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TeamLayout {
    pub obs_dim: usize,
    pub state_dim: usize,
    pub agents: usize,
}

impl TeamLayout {
    pub fn of(spec: &MapSpec) -> Self {
        Self {
            obs_dim: spec.obs_dim(),
            state_dim: STATE_DIM,
            agents: spec.num_agents(),
        }
    }
}

/// What one gradient step did.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainStepReport {
    pub loss: LossReport,
    pub step: StepReport,
}

/// Online and target networks of one team plus optimiser state.
#[derive(Clone, Debug)]
pub struct Learner {
    pub model: ModelConfig,
    pub layout: TeamLayout,
    pub store: ParamStore<f32>,
    pub target: ParamStore<f32>,
    pub agent: AgentNet,
    pub mixer: Mixer,
    opt: RmsProp<f32>,
    grad_steps: u64,
    target_refresh: u64,
}

/// Parameter-name prefixes inside a learner's store and bundles.
pub const POLICY_PREFIX: &str = "policy.";
pub const MIXER_PREFIX: &str = "mixer.";

impl Learner {
    /// Fresh weights: the agent network is registered before the mixer so
    /// the initialisation stream is the same for every variant's policy.
    pub fn new<R: Rng + ?Sized>(
        model: ModelConfig,
        layout: TeamLayout,
        optimizer: RmsPropConfig,
        target_refresh: u64,
        rng: &mut R,
    ) -> Result<Self, TrainError> {
        let mut store = ParamStore::new();
        let agent = AgentNet::new(&mut store, POLICY_PREFIX, layout.obs_dim, model.hidden, rng)?;
        let mixer = if model.variant.is_role() {
            Mixer::Role(RoleMixer::new(
                &mut store,
                MIXER_PREFIX,
                layout.obs_dim,
                layout.state_dim,
                model.mixer_hidden,
                model.k,
                rng,
            )?)
        } else {
            Mixer::Qmix(QmixMixer::new(
                &mut store,
                MIXER_PREFIX,
                layout.agents,
                layout.state_dim,
                model.mixer_hidden,
                model.k,
                rng,
            )?)
        };
        Ok(Self::assemble(model, layout, store, agent, mixer, optimizer, target_refresh))
    }

    fn assemble(
        model: ModelConfig,
        layout: TeamLayout,
        store: ParamStore<f32>,
        agent: AgentNet,
        mixer: Mixer,
        optimizer: RmsPropConfig,
        target_refresh: u64,
    ) -> Self {
        Self {
            model,
            layout,
            target: store.clone(),
            opt: RmsProp::new(optimizer, &store),
            store,
            agent,
            mixer,
            grad_steps: 0,
            target_refresh: target_refresh.max(1),
        }
    }

    pub fn nets(&self) -> Nets<'_> {
        Nets {
            agent: &self.agent,
            mixer: &self.mixer,
        }
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    /// One optimiser step on `batch` (and `demos` for the supervised term).
    /// The target networks are refreshed every `target_refresh` steps.
    pub fn train_step(
        &mut self,
        batch: &Batch,
        demos: Option<&Batch>,
        weights: LossWeights,
        mode: TdTarget,
    ) -> Result<TrainStepReport, TrainError> {
        self.store.zero_grad();
        let (grads, loss) = {
            let mut g = Graph::new();
            let nets = Nets {
                agent: &self.agent,
                mixer: &self.mixer,
            };
            let nodes = build_losses(&mut g, &self.store, &self.target, nets, batch, demos, weights, mode)?;
            (g.backward(nodes.total)?, nodes.report(&g))
        };
        self.store.accumulate(&grads);
        let step = self.opt.step(&mut self.store);
        self.grad_steps += 1;
        if self.grad_steps % self.target_refresh == 0 {
            self.refresh_target();
        }
        Ok(TrainStepReport { loss, step })
    }

    pub fn refresh_target(&mut self) {
        self.target.copy_values_from(&self.store);
    }

    /// Serialises the online weights with a compatibility header.
    pub fn bundle(&self) -> TransferBundle {
        TransferBundle::from_learner(self)
    }
}
