use serde::{Deserialize, Serialize};

use super::optim::RmsPropConfig;
use crate::mixer::{lstrr_roles, DiscountLadder, MixerError, MIXER_HIDDEN};
use crate::policy::{Phase, EPS_END, EPS_START, HIDDEN};

/// Which mixing network the team is trained with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MixerVariant {
    #[serde(rename = "role-mixer")]
    RoleMixer,
    #[serde(rename = "role-mixer+lstrr")]
    RoleMixerLstrr,
    #[serde(rename = "qmix-baseline")]
    QmixBaseline,
}

impl MixerVariant {
    pub fn is_role(self) -> bool {
        !matches!(self, MixerVariant::QmixBaseline)
    }

    pub fn uses_lstrr(self) -> bool {
        matches!(self, MixerVariant::RoleMixerLstrr)
    }

    pub fn name(self) -> &'static str {
        match self {
            MixerVariant::RoleMixer => "role-mixer",
            MixerVariant::RoleMixerLstrr => "role-mixer+lstrr",
            MixerVariant::QmixBaseline => "qmix-baseline",
        }
    }
}

/// Network sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden: usize,
    pub mixer_hidden: usize,
    pub k: usize,
    pub variant: MixerVariant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: HIDDEN,
            mixer_hidden: MIXER_HIDDEN,
            k: 16,
            variant: MixerVariant::RoleMixerLstrr,
        }
    }
}

/// `λ₁` scales the demonstration term, `λ₂` the LSTRR term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_sup: f64,
    pub lambda_lstrr: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_sup: 1.0,
            lambda_lstrr: 0.1,
        }
    }
}

/// How the team-value regression target is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdTarget {
    /// `r + γ (1 − terminal) Q_tot⁻(s', a')` with online-argmax `a'`.
    Bootstrap,
    /// Discounted Monte-Carlo return of the stored episode.
    MonteCarlo,
}

/// Linear discount ladder for the return-tied roles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub first: f64,
    pub last: f64,
    pub team: f64,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            first: 0.99,
            last: 0.50,
            team: 0.99,
        }
    }
}

impl LadderConfig {
    pub fn build(&self, k: usize) -> Result<DiscountLadder, MixerError> {
        DiscountLadder::linear(lstrr_roles(k), self.first, self.last, self.team)
    }
}

/// Schedules and optimisation settings for one training phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Environment steps of interaction (demonstrations excluded).
    pub env_steps: u64,
    pub batch_size: usize,
    /// Demonstration episodes per supervised batch.
    pub demo_batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient steps between target-network refreshes.
    pub target_refresh: u64,
    pub grad_steps_per_episode: usize,
    /// Episodes in the buffer before gradient steps begin.
    pub min_buffer: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Anneal length in env steps; the phase default when absent.
    pub eps_horizon: Option<u64>,
    pub optimizer: RmsPropConfig,
    pub td_target: TdTarget,
    pub ladder: LadderConfig,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env_steps: 300_000,
            batch_size: 32,
            demo_batch_size: 16,
            buffer_capacity: 5000,
            target_refresh: 200,
            grad_steps_per_episode: 1,
            min_buffer: 32,
            eval_interval: 10_000,
            eval_episodes: 32,
            eps_start: EPS_START,
            eps_end: EPS_END,
            eps_horizon: None,
            optimizer: RmsPropConfig::default(),
            td_target: TdTarget::Bootstrap,
            ladder: LadderConfig::default(),
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    /// The loss weights actually used: the target phase never supervises,
    /// and only the LSTRR variant regularises role values.
    pub fn effective_weights(&self, phase: Phase, variant: MixerVariant) -> LossWeights {
        LossWeights {
            lambda_sup: match phase {
                Phase::Source => self.weights.lambda_sup,
                Phase::Target => 0.0,
            },
            lambda_lstrr: if variant.uses_lstrr() { self.weights.lambda_lstrr } else { 0.0 },
        }
    }

    pub fn eps_horizon(&self, phase: Phase) -> u64 {
        self.eps_horizon.unwrap_or_else(|| phase.anneal_horizon())
    }
}
