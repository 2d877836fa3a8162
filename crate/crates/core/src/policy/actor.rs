use rand::Rng;
use rolemix_tensor::{ParamStore, Tensor};

use super::{select_action, AgentNet, HiddenState};
use crate::env::{Action, ActionMask, Actor, EnvError, EnvState, Observation};

/// Decentralised team controller: each agent feeds only its own observation
/// and hidden state through the shared network and picks ε-greedily among
/// its available actions.
pub struct TeamActor<'a, R> {
    pub store: &'a ParamStore<f32>,
    pub net: &'a AgentNet,
    pub eps: f64,
    pub rng: R,
    hidden: HiddenState<f32>,
    /// Per-step `[N, 7]` action values of the last decision, kept for
    /// inspection.
    pub last_q: Option<Tensor<f32>>,
}

impl<'a, R: Rng> TeamActor<'a, R> {
    pub fn new(store: &'a ParamStore<f32>, net: &'a AgentNet, eps: f64, rng: R) -> Self {
        Self {
            store,
            net,
            eps,
            rng,
            hidden: HiddenState::zeros(0, net.hidden),
            last_q: None,
        }
    }

    pub fn hidden(&self) -> &HiddenState<f32> {
        &self.hidden
    }
}

/// Stacks per-agent observations into an `[N, D]` tensor.
pub fn stack_observations(observations: &[Observation]) -> Tensor<f32> {
    let d = observations.first().map_or(0, Observation::len);
    let data = observations.iter().flat_map(|o| o.as_slice().iter().copied()).collect();
    Tensor::new([observations.len(), d], data).expect("equal-length observations")
}

impl<R: Rng> Actor for TeamActor<'_, R> {
    fn begin_episode(&mut self, state: &EnvState) {
        self.hidden = HiddenState::zeros(state.num_agents(), self.net.hidden);
        self.last_q = None;
    }

    fn act(
        &mut self,
        _: &EnvState,
        observations: &[Observation],
        masks: &[Option<ActionMask>],
    ) -> Result<Vec<Option<Action>>, EnvError> {
        let x = stack_observations(observations);
        let (q, next) = self
            .net
            .q_values(self.store, &x, &self.hidden)
            .map_err(|e| EnvError::Trace(format!("policy evaluation failed: {e}")))?;
        let alive: Vec<bool> = masks.iter().map(Option::is_some).collect();
        self.hidden.merge(&next, &alive);
        let actions = masks
            .iter()
            .enumerate()
            .map(|(i, m)| match m {
                None => Ok(None),
                Some(m) => select_action(q.row(i), m, self.eps, &mut self.rng)
                    .map(Some)
                    .map_err(|e| EnvError::Trace(format!("agent {i}: {e}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        self.last_q = Some(q);
        Ok(actions)
    }
}
