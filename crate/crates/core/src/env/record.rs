use std::sync::Arc;

use super::{
    reset, Action, ActionMask, EnvError, EnvState, EpisodeTrace, MapSpec, Observation, SparseObs,
    NUM_ACTIONS,
};

/// Everything the learner needs from one finished episode.
///
/// Per-step vectors indexed by `t` hold `len() + 1` entries for observations,
/// summaries and masks (the state after the last action is kept for
/// bootstrapping) and `len()` entries for actions and rewards. Dead agents
/// carry zero observations, an empty mask and a placeholder `Stay` action.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub n_agents: usize,
    pub obs_dim: usize,
    pub obs: Vec<Vec<SparseObs>>,
    pub summaries: Vec<Vec<f32>>,
    pub masks: Vec<Vec<u8>>,
    pub actions: Vec<Vec<u8>>,
    pub rewards: Vec<f32>,
    /// True when the actions came from the scripted expert.
    pub demo: bool,
    pub breach: bool,
    pub prey_cleared: bool,
}

impl EpisodeRecord {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn alive(&self, t: usize, agent: usize) -> bool {
        self.masks[t][agent] != 0
    }

    pub fn mask(&self, t: usize, agent: usize) -> ActionMask {
        ActionMask::from_bits(self.masks[t][agent])
    }

    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().map(|&r| r as f64).sum()
    }

    /// Count of non-zero observation entries, a proxy for memory use.
    pub fn stored_entries(&self) -> usize {
        self.obs.iter().flatten().map(|o| o.ones.len()).sum()
    }
}

/// Chooses a joint action from the current state. Implementations must only
/// read local observations and masks when acting for a decentralised team;
/// the full state is offered for scripted players.
pub trait Actor {
    fn begin_episode(&mut self, state: &EnvState);

    fn act(
        &mut self,
        state: &EnvState,
        observations: &[Observation],
        masks: &[Option<ActionMask>],
    ) -> Result<Vec<Option<Action>>, EnvError>;
}

/// Plays one episode to termination and records it in both learner and
/// trace form.
pub fn run_episode(
    spec: &Arc<MapSpec>,
    seed: u64,
    actor: &mut impl Actor,
    demo: bool,
) -> Result<(EpisodeRecord, EpisodeTrace), EnvError> {
    let (mut state, mut obs, mut summary) = reset(spec.clone(), seed)?;
    let n = state.num_agents();
    let mut rec = EpisodeRecord {
        seed,
        n_agents: n,
        obs_dim: spec.obs_dim(),
        obs: Vec::new(),
        summaries: Vec::new(),
        masks: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        demo,
        breach: false,
        prey_cleared: false,
    };
    let mut trace = EpisodeTrace::new(spec, seed);
    actor.begin_episode(&state);
    loop {
        let masks = state.action_masks();
        rec.obs.push(obs.iter().map(Observation::to_sparse).collect());
        rec.summaries.push(summary.0);
        rec.masks
            .push(masks.iter().map(|m| m.map_or(0, |m| m.bits())).collect());
        if state.is_done() {
            break;
        }
        let actions = actor.act(&state, &obs, &masks)?;
        let before = state.clone();
        let out = state.step(&actions)?;
        trace.record(&before, &actions, &out);
        rec.actions.push(
            actions
                .iter()
                .map(|a| a.unwrap_or(Action::Stay) as u8)
                .collect(),
        );
        rec.rewards.push(out.reward as f32);
        rec.breach |= out.info.breach;
        obs = out.observations;
        summary = out.summary;
    }
    rec.prey_cleared = state.prey_alive() == 0;
    debug_assert!(rec.masks.iter().flatten().all(|&m| m < 1 << NUM_ACTIONS));
    Ok((rec, trace))
}
