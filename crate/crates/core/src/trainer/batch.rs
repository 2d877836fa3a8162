use std::sync::Arc;

use crate::env::{Action, EpisodeRecord, NUM_ACTIONS};
use crate::mixer::{lstrr_returns, DiscountLadder};

use super::TrainError;

/// `B` episodes padded to a common length `T`, laid out time-major: row
/// `t * B + b` is step `t` of episode `b`, and agent rows are
/// `(t * B + b) * N + i`. Step-indexed inputs (observations, summaries,
/// availability, liveness) have `T + 1` time slices so the state after the
/// final action is available for bootstrapping; transition fields have `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub episodes: usize,
    pub steps: usize,
    pub agents: usize,
    pub obs_dim: usize,
    pub state_dim: usize,
    /// `[(T + 1) * B * N, D]`
    pub obs: Vec<f32>,
    /// `[(T + 1) * B, S]`
    pub state: Vec<f32>,
    /// `[(T + 1) * B * N, 7]`
    pub avail: Vec<bool>,
    /// `[(T + 1) * B * N]`
    pub alive: Vec<bool>,
    /// `[T * B * N]`; `Stay` for dead agents and padding.
    pub actions: Vec<usize>,
    /// `[T * B]`
    pub rewards: Vec<f64>,
    /// `[T * B]`; true on the last transition of each episode.
    pub terminal: Vec<bool>,
    /// `[T * B]`; false on padding.
    pub valid: Vec<bool>,
    /// Discounted team return from each step, `[T * B]`.
    pub team_return: Vec<f64>,
    /// Role targets from each step, `[T * B, K2]`.
    pub role_returns: Vec<f64>,
    pub k2: usize,
    /// Discount of the bootstrapped team target.
    pub team_discount: f64,
}

impl Batch {
    pub fn from_records(records: &[Arc<EpisodeRecord>], ladder: &DiscountLadder) -> Result<Self, TrainError> {
        let Some(first) = records.first() else {
            return Err(TrainError::EmptyBatch);
        };
        let (n, d) = (first.n_agents, first.obs_dim);
        let s = first.summaries.first().map_or(0, Vec::len);
        if records.iter().any(|r| r.n_agents != n || r.obs_dim != d) {
            return Err(TrainError::Batch("episodes from different team layouts".into()));
        }
        let b = records.len();
        let t_max = records.iter().map(|r| r.len()).max().unwrap_or(0);
        let k2 = ladder.len();
        let mut batch = Batch {
            episodes: b,
            steps: t_max,
            agents: n,
            obs_dim: d,
            state_dim: s,
            obs: vec![0.0; (t_max + 1) * b * n * d],
            state: vec![0.0; (t_max + 1) * b * s],
            avail: vec![false; (t_max + 1) * b * n * NUM_ACTIONS],
            alive: vec![false; (t_max + 1) * b * n],
            actions: vec![Action::Stay.index(); t_max * b * n],
            rewards: vec![0.0; t_max * b],
            terminal: vec![false; t_max * b],
            valid: vec![false; t_max * b],
            team_return: vec![0.0; t_max * b],
            role_returns: vec![0.0; t_max * b * k2],
            k2,
            team_discount: ladder.team,
        };
        for (e, rec) in records.iter().enumerate() {
            let rewards: Vec<f64> = rec.rewards.iter().map(|&r| r as f64).collect();
            let roles = lstrr_returns(&rewards, ladder);
            let mut g = 0.0;
            let mut team = vec![0.0; rewards.len()];
            for t in (0..rewards.len()).rev() {
                g = rewards[t] + ladder.team * g;
                team[t] = g;
            }
            for t in 0..=rec.len() {
                let row = t * b + e;
                batch.state[row * s..(row + 1) * s].copy_from_slice(&rec.summaries[t]);
                for i in 0..n {
                    let ar = row * n + i;
                    rec.obs[t][i].write_dense(&mut batch.obs[ar * d..(ar + 1) * d]);
                    let mask = rec.mask(t, i);
                    batch.alive[ar] = rec.alive(t, i);
                    batch.avail[ar * NUM_ACTIONS..(ar + 1) * NUM_ACTIONS].copy_from_slice(&mask.0);
                    if t < rec.len() {
                        batch.actions[ar] = rec.actions[t][i] as usize;
                    }
                }
                if t < rec.len() {
                    batch.rewards[row] = rewards[t];
                    batch.terminal[row] = t + 1 == rec.len();
                    batch.valid[row] = true;
                    batch.team_return[row] = team[t];
                    batch.role_returns[row * k2..(row + 1) * k2].copy_from_slice(&roles[t]);
                }
            }
        }
        Ok(batch)
    }

    /// Extends the batch with padding so it spans `steps` transitions.
    /// Padding carries no live agents and no valid transitions.
    pub fn pad_to(&mut self, steps: usize) {
        if steps <= self.steps {
            return;
        }
        let (b, n) = (self.episodes, self.agents);
        let extra = steps - self.steps;
        let grow = |v: &mut Vec<f32>, per_row: usize| v.resize(v.len() + extra * b * per_row, 0.0);
        grow(&mut self.obs, n * self.obs_dim);
        grow(&mut self.state, self.state_dim);
        self.avail.resize(self.avail.len() + extra * b * n * NUM_ACTIONS, false);
        self.alive.resize(self.alive.len() + extra * b * n, false);
        self.actions.resize(self.actions.len() + extra * b * n, Action::Stay.index());
        self.rewards.resize(self.rewards.len() + extra * b, 0.0);
        self.terminal.resize(self.terminal.len() + extra * b, false);
        self.valid.resize(self.valid.len() + extra * b, false);
        self.team_return.resize(self.team_return.len() + extra * b, 0.0);
        self.role_returns.resize(self.role_returns.len() + extra * b * self.k2, 0.0);
        self.steps = steps;
    }

    /// Transition rows `T * B`.
    pub fn rows(&self) -> usize {
        self.steps * self.episodes
    }

    pub fn valid_steps(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}
