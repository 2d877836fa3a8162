//! Shared recurrent action-value network and ε-greedy exploration.
//!
//! Every agent runs the same weights on its own observation and hidden
//! state; there is no agent-index input, so the network is indifferent to
//! team size and ordering.

use rand::Rng;
use rolemix_tensor::{uniform_init, Graph, NodeId, ParamId, ParamStore, Scalar, Tensor, TensorError};
use thiserror::Error;

use crate::env::{Action, ActionMask, NUM_ACTIONS};

mod actor;
pub use actor::{stack_observations, TeamActor};

/// Default recurrent width.
pub const HIDDEN: usize = 64;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("{what}: expected {expected}, got {got}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("every action is masked")]
    AllMasked,
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Encoder (dense + ReLU), GRU cell and linear head. The GRU uses fused
/// gate weights in reset, update, candidate order:
///
/// `r = σ(x·Wr + br + h·Ur + cr)`, `z = σ(x·Wz + bz + h·Uz + cz)`,
/// `n = tanh(x·Wn + bn + r ⊙ (h·Un + cn))`, `h' = n + z ⊙ (h − n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentNet {
    pub obs_dim: usize,
    pub hidden: usize,
    enc_w: ParamId,
    enc_b: ParamId,
    w_ih: ParamId,
    b_ih: ParamId,
    w_hh: ParamId,
    b_hh: ParamId,
    out_w: ParamId,
    out_b: ParamId,
}

const PARAM_NAMES: [&str; 8] = ["enc.w", "enc.b", "gru.w_ih", "gru.b_ih", "gru.w_hh", "gru.b_hh", "head.w", "head.b"];

impl AgentNet {
    /// Registers freshly initialised weights under `prefix` (e.g. `policy.`).
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        prefix: &str,
        obs_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self, PolicyError> {
        let shapes = Self::shapes(obs_dim, hidden);
        for (name, (shape, fan_in)) in PARAM_NAMES.iter().zip(shapes) {
            store.add(format!("{prefix}{name}"), uniform_init(shape, fan_in, rng))?;
        }
        Self::bind(store, prefix, obs_dim, hidden)
    }

    /// Looks up existing weights under `prefix`, checking their shapes.
    pub fn bind<S: Scalar>(
        store: &ParamStore<S>,
        prefix: &str,
        obs_dim: usize,
        hidden: usize,
    ) -> Result<Self, PolicyError> {
        let shapes = Self::shapes(obs_dim, hidden);
        let mut ids = Vec::with_capacity(PARAM_NAMES.len());
        for (name, (shape, _)) in PARAM_NAMES.iter().zip(shapes) {
            let full = format!("{prefix}{name}");
            let id = store.find(&full).ok_or_else(|| PolicyError::MissingParam(full.clone()))?;
            if store.value(id).shape() != shape.as_slice() {
                return Err(TensorError::ShapeMismatch {
                    op: "bind agent net",
                    lhs: shape,
                    rhs: store.value(id).shape().to_vec(),
                }
                .into());
            }
            ids.push(id);
        }
        Ok(Self {
            obs_dim,
            hidden,
            enc_w: ids[0],
            enc_b: ids[1],
            w_ih: ids[2],
            b_ih: ids[3],
            w_hh: ids[4],
            b_hh: ids[5],
            out_w: ids[6],
            out_b: ids[7],
        })
    }

    fn shapes(d: usize, h: usize) -> [(Vec<usize>, usize); 8] {
        [
            (vec![d, h], d),
            (vec![h], d),
            (vec![h, 3 * h], h),
            (vec![3 * h], h),
            (vec![h, 3 * h], h),
            (vec![3 * h], h),
            (vec![h, NUM_ACTIONS], h),
            (vec![NUM_ACTIONS], h),
        ]
    }

    pub fn param_ids(&self) -> [ParamId; 8] {
        [
            self.enc_w, self.enc_b, self.w_ih, self.b_ih, self.w_hh, self.b_hh, self.out_w, self.out_b,
        ]
    }

    /// Input-side GRU pre-activations `[M, 3H]` for observations `[M, D]`.
    /// Independent of the hidden state, so a whole sequence can be encoded
    /// with one matrix product.
    pub fn input_gates<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        obs: NodeId,
    ) -> Result<NodeId, PolicyError> {
        let d = g.shape(obs).last().copied().unwrap_or(0);
        if d != self.obs_dim {
            return Err(PolicyError::Dim {
                what: "observation length",
                expected: self.obs_dim,
                got: d,
            });
        }
        let w = g.param(store, self.enc_w);
        let b = g.param(store, self.enc_b);
        let e = g.matmul(obs, w)?;
        let e = g.add(e, b)?;
        let e = g.relu(e);
        let w = g.param(store, self.w_ih);
        let b = g.param(store, self.b_ih);
        let gi = g.matmul(e, w)?;
        Ok(g.add(gi, b)?)
    }

    /// One GRU step from input gates `[M, 3H]` and hidden state `[M, H]`.
    /// `alive`, if given, is an `[M, H]` 0/1 constant; rows with 0 keep
    /// their previous hidden state.
    pub fn recur<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        gi: NodeId,
        h: NodeId,
        alive: Option<NodeId>,
    ) -> Result<NodeId, PolicyError> {
        let hd = self.hidden;
        let w = g.param(store, self.w_hh);
        let b = g.param(store, self.b_hh);
        let gh = g.matmul(h, w)?;
        let gh = g.add(gh, b)?;
        let i_rz = g.slice(gi, 1, 0, 2 * hd)?;
        let h_rz = g.slice(gh, 1, 0, 2 * hd)?;
        let rz = g.add(i_rz, h_rz)?;
        let rz = g.sigmoid(rz);
        let r = g.slice(rz, 1, 0, hd)?;
        let z = g.slice(rz, 1, hd, hd)?;
        let i_n = g.slice(gi, 1, 2 * hd, hd)?;
        let h_n = g.slice(gh, 1, 2 * hd, hd)?;
        let rn = g.mul(r, h_n)?;
        let n = g.add(i_n, rn)?;
        let n = g.tanh(n);
        let diff = g.sub(h, n)?;
        let zd = g.mul(z, diff)?;
        let next = g.add(n, zd)?;
        match alive {
            None => Ok(next),
            Some(mask) => {
                let delta = g.sub(next, h)?;
                let kept = g.mul(delta, mask)?;
                Ok(g.add(h, kept)?)
            }
        }
    }

    /// Action values `[M, 7]` from hidden states `[M, H]`.
    pub fn head<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        h: NodeId,
    ) -> Result<NodeId, PolicyError> {
        let w = g.param(store, self.out_w);
        let b = g.param(store, self.out_b);
        let q = g.matmul(h, w)?;
        Ok(g.add(q, b)?)
    }

    /// Single step for `M` agents: `obs` is `[M, D]`, `h` is `[M, H]`.
    /// Returns `(q [M, 7], h' [M, H])`.
    pub fn q_values<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        obs: &Tensor<S>,
        h: &HiddenState<S>,
    ) -> Result<(Tensor<S>, HiddenState<S>), PolicyError> {
        let m = obs.shape().first().copied().unwrap_or(0);
        if obs.rank() != 2 {
            return Err(PolicyError::Dim {
                what: "observation rank",
                expected: 2,
                got: obs.rank(),
            });
        }
        if h.0.shape() != [m, self.hidden] {
            return Err(PolicyError::Dim {
                what: "hidden state rows x width",
                expected: m * self.hidden,
                got: h.0.len(),
            });
        }
        let mut g = Graph::new();
        let x = g.constant_ref(obs);
        let hn = g.constant_ref(&h.0);
        let gi = self.input_gates(&mut g, store, x)?;
        let h2 = self.recur(&mut g, store, gi, hn, None)?;
        let q = self.head(&mut g, store, h2)?;
        Ok((g.value(q).clone(), HiddenState(g.value(h2).clone())))
    }
}

/// Recurrent state for a team, one row of width `H` per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState<S>(pub Tensor<S>);

impl<S: Scalar> HiddenState<S> {
    pub fn zeros(agents: usize, hidden: usize) -> Self {
        Self(Tensor::zeros([agents, hidden]))
    }

    pub fn agent(&self, i: usize) -> &[S] {
        self.0.row(i)
    }

    /// Keeps rows where `update[i]` is false, e.g. for agents already dead.
    pub fn merge(&mut self, next: &HiddenState<S>, update: &[bool]) {
        let h = self.0.shape()[1];
        let dst = self.0.data_mut();
        for (i, &u) in update.iter().enumerate() {
            if u {
                dst[i * h..(i + 1) * h].copy_from_slice(next.agent(i));
            }
        }
    }
}

/// Index of the largest value among available actions; ties go to the lowest
/// index.
pub fn greedy_action(q: &[f32], mask: &ActionMask) -> Result<Action, PolicyError> {
    mask.available()
        .fold(None::<(Action, f32)>, |best, a| match best {
            Some((_, v)) if v >= q[a.index()] => best,
            _ => Some((a, q[a.index()])),
        })
        .map(|(a, _)| a)
        .ok_or(PolicyError::AllMasked)
}

/// ε-greedy: with probability `eps` a uniform draw over available actions,
/// otherwise [`greedy_action`].
pub fn select_action<R: Rng + ?Sized>(
    q: &[f32],
    mask: &ActionMask,
    eps: f64,
    rng: &mut R,
) -> Result<Action, PolicyError> {
    if q.len() != NUM_ACTIONS {
        return Err(PolicyError::Dim {
            what: "action values",
            expected: NUM_ACTIONS,
            got: q.len(),
        });
    }
    let n = mask.count();
    if n == 0 {
        return Err(PolicyError::AllMasked);
    }
    if eps > 0.0 && rng.gen::<f64>() < eps {
        let k = rng.gen_range(0..n);
        return Ok(mask.available().nth(k).expect("k < count"));
    }
    greedy_action(q, mask)
}

/// Which curriculum phase an exploration schedule belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Small team, pre-training.
    Source,
    /// Larger team after transfer.
    Target,
}

impl Phase {
    pub fn anneal_horizon(self) -> u64 {
        match self {
            Phase::Source => 50_000,
            Phase::Target => 100_000,
        }
    }
}

pub const EPS_START: f64 = 0.15;
pub const EPS_END: f64 = 0.05;

/// Linear decay from 0.15 at `t = 0` to 0.05 at the phase horizon, then flat.
pub fn anneal_eps(t: u64, phase: Phase) -> f64 {
    linear_eps(t, phase.anneal_horizon(), EPS_START, EPS_END)
}

pub fn linear_eps(t: u64, horizon: u64, start: f64, end: f64) -> f64 {
    if horizon == 0 || t >= horizon {
        return end;
    }
    start + (end - start) * (t as f64 / horizon as f64)
}
