//! Monotonic mixing networks.
//!
//! [`RoleMixer`] turns per-agent action values into a team value through `K`
//! latent roles. Each agent's observation is mapped by a shared two-layer
//! hyper-network to one logit per role, and a softmax over the agent axis
//! gives the role-selection weights `W1` (`N x K`). Only the hyper-network
//! sizes `(D, H_m, K)` appear in the parameter shapes, so the same weights
//! serve any team size. The first `K2 = ceil(K / 2)` role values are summed
//! before the second layer and can be tied to returns under a ladder of
//! decreasing discounts (see [`lstrr_loss`]).
//!
//! [`QmixMixer`] is the state-conditioned baseline: `W1` comes from the
//! global summary, so its shape is tied to the team size it was built for.

mod lstrr;

use rand::Rng;
use rolemix_tensor::{uniform_init, Graph, NodeId, ParamId, ParamStore, Scalar, Tensor, TensorError};
use thiserror::Error;

pub use lstrr::{lstrr_loss, lstrr_loss_node, lstrr_returns, lstrr_role_targets, DiscountLadder};

/// Default hyper-network hidden width.
pub const MIXER_HIDDEN: usize = 32;

/// Logit offset that removes dead agents from the role softmax.
pub const DEAD_LOGIT: f64 = -1e9;

#[derive(Debug, Error)]
pub enum MixerError {
    #[error("every agent is dead")]
    AllDead,
    #[error("mixer was built for {expected} agents, got {got}")]
    TeamSize { expected: usize, got: usize },
    #[error("{what}: expected {expected}, got {got}")]
    Dim {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("missing parameter {0:?}")]
    MissingParam(String),
    #[error("invalid discount ladder: {0}")]
    Ladder(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Number of roles tied to long/short-horizon returns: `ceil(K / 2)`.
pub fn lstrr_roles(k: usize) -> usize {
    k.div_ceil(2)
}

/// Length of the wired role vector fed to the second mixing layer.
pub fn wired_len(k: usize) -> usize {
    k - lstrr_roles(k) + 1
}

/// Inputs for one mixing pass over `R` rows (time steps x episodes) of `N`
/// agents.
pub struct MixInputs<'a> {
    /// Chosen-action values, `[R * N]`, zero for dead agents.
    pub q: NodeId,
    /// Agent observations, `[R * N, D]`.
    pub obs: NodeId,
    /// Liveness per agent row, length `R * N`.
    pub alive: &'a [bool],
    /// Pooled state summaries, `[R, S]`.
    pub state: NodeId,
    pub agents: usize,
}

pub struct MixOutput {
    /// `[R]`
    pub q_tot: NodeId,
    /// Role values after the first layer, `[R, K]`.
    pub q_star: NodeId,
    /// Role-selection weights, `[R, N, K]`.
    pub w1: NodeId,
}

fn lookup<S: Scalar>(
    store: &ParamStore<S>,
    name: String,
    shape: &[usize],
) -> Result<ParamId, MixerError> {
    let id = store.find(&name).ok_or(MixerError::MissingParam(name))?;
    if store.value(id).shape() != shape {
        return Err(TensorError::ShapeMismatch {
            op: "bind mixer",
            lhs: shape.to_vec(),
            rhs: store.value(id).shape().to_vec(),
        }
        .into());
    }
    Ok(id)
}

fn register<S: Scalar, R: Rng + ?Sized>(
    store: &mut ParamStore<S>,
    prefix: &str,
    specs: &[(&str, Vec<usize>, usize)],
    rng: &mut R,
) -> Result<(), MixerError> {
    for (name, shape, fan_in) in specs {
        store.add(format!("{prefix}{name}"), uniform_init(shape.clone(), *fan_in, rng))?;
    }
    Ok(())
}

/// State-conditioned heads shared by both mixers: `b1 = s·A + a` (`[R, K]`),
/// `W2 = |ELU(s·B1 + c1)·B2 + c2|` (`[R, L]`) and
/// `b2 = ELU(s·C1 + e1)·C2 + e2` (`[R]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateHeads {
    b1: [ParamId; 2],
    w2: [ParamId; 4],
    b2: [ParamId; 4],
}

pub const STATE_HEAD_PREFIX: &str = "head.";

impl StateHeads {
    fn specs(s: usize, hm: usize, k: usize, l: usize) -> Vec<(&'static str, Vec<usize>, usize)> {
        vec![
            ("head.b1.w", vec![s, k], s),
            ("head.b1.b", vec![k], s),
            ("head.w2.w1", vec![s, hm], s),
            ("head.w2.b1", vec![hm], s),
            ("head.w2.w2", vec![hm, l], hm),
            ("head.w2.b2", vec![l], hm),
            ("head.b2.w1", vec![s, hm], s),
            ("head.b2.b1", vec![hm], s),
            ("head.b2.w2", vec![hm, 1], hm),
            ("head.b2.b2", vec![1], hm),
        ]
    }

    fn bind<S: Scalar>(
        store: &ParamStore<S>,
        prefix: &str,
        s: usize,
        hm: usize,
        k: usize,
        l: usize,
    ) -> Result<Self, MixerError> {
        let ids = Self::specs(s, hm, k, l)
            .into_iter()
            .map(|(n, shape, _)| lookup(store, format!("{prefix}{n}"), &shape))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            b1: [ids[0], ids[1]],
            w2: [ids[2], ids[3], ids[4], ids[5]],
            b2: [ids[6], ids[7], ids[8], ids[9]],
        })
    }

    fn params(&self) -> Vec<ParamId> {
        self.b1.iter().chain(&self.w2).chain(&self.b2).copied().collect()
    }

    fn dense<'p, S: Scalar>(
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        x: NodeId,
        w: ParamId,
        b: ParamId,
    ) -> Result<NodeId, MixerError> {
        let wn = g.param(store, w);
        let bn = g.param(store, b);
        let y = g.matmul(x, wn)?;
        Ok(g.add(y, bn)?)
    }

    fn two_layer<'p, S: Scalar>(
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        x: NodeId,
        ids: &[ParamId; 4],
    ) -> Result<NodeId, MixerError> {
        let h = Self::dense(g, store, x, ids[0], ids[1])?;
        let h = g.elu(h);
        Self::dense(g, store, h, ids[2], ids[3])
    }

    /// Returns `(b1 [R, K], W2 [R, L], b2 [R])` for summaries `[R, S]`.
    pub fn forward<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        state: NodeId,
    ) -> Result<(NodeId, NodeId, NodeId), MixerError> {
        let rows = g.shape(state)[0];
        let b1 = Self::dense(g, store, state, self.b1[0], self.b1[1])?;
        let w2 = Self::two_layer(g, store, state, &self.w2)?;
        let w2 = g.abs(w2);
        let b2 = Self::two_layer(g, store, state, &self.b2)?;
        let b2 = g.reshape(b2, [rows])?;
        Ok((b1, w2, b2))
    }
}

/// `Q* = ELU(Σ_i W1[i,k] q_i + b1_k)` for every row: `q` is `[R * N]`,
/// `w1` is `[R, N, K]`, `b1` is `[R, K]`; returns `[R, K]`.
pub fn role_q_values<'p, S: Scalar>(
    g: &mut Graph<'p, S>,
    q: NodeId,
    w1: NodeId,
    b1: NodeId,
) -> Result<NodeId, MixerError> {
    let (rows, n, k) = match g.shape(w1) {
        [r, n, k] => (*r, *n, *k),
        other => {
            return Err(MixerError::Dim {
                what: "role weight rank",
                expected: 3,
                got: other.len(),
            })
        }
    };
    let q3 = g.reshape(q, [rows, 1, n])?;
    let mixed = g.batch_matmul(q3, w1)?;
    let mixed = g.reshape(mixed, [rows, k])?;
    let pre = g.add(mixed, b1)?;
    Ok(g.elu(pre))
}

/// `[Σ_{k<K2} Q*_k, Q*_{K2}, ..., Q*_{K-1}]`, length `K - K2 + 1`.
pub fn wire<S: Scalar>(g: &mut Graph<'_, S>, q_star: NodeId) -> Result<NodeId, MixerError> {
    let (rows, k) = (g.shape(q_star)[0], g.shape(q_star)[1]);
    let k2 = lstrr_roles(k);
    let head = g.slice(q_star, 1, 0, k2)?;
    let head = g.sum_axis(head, 1)?;
    let head = g.reshape(head, [rows, 1])?;
    if k2 == k {
        return Ok(head);
    }
    let tail = g.slice(q_star, 1, k2, k - k2)?;
    Ok(g.concat(&[head, tail], 1)?)
}

/// `Q_tot = b2 + Σ_j W2_j u_j` per row; `u` and `w2` are `[R, L]`, `b2` is `[R]`.
pub fn mix<S: Scalar>(g: &mut Graph<'_, S>, u: NodeId, w2: NodeId, b2: NodeId) -> Result<NodeId, MixerError> {
    let weighted = g.mul(u, w2)?;
    let summed = g.sum_axis(weighted, 1)?;
    Ok(g.add(summed, b2)?)
}

fn dead_penalty<S: Scalar>(alive: &[bool], rows: usize, n: usize, k: usize) -> Tensor<S> {
    let mut data = Vec::with_capacity(rows * n * k);
    for &a in alive {
        let v = if a { S::zero() } else { S::of(DEAD_LOGIT) };
        data.extend(std::iter::repeat(v).take(k));
    }
    Tensor::new([rows, n, k], data).expect("alive has rows * n entries")
}

/// The transferable role-based mixer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleMixer {
    pub obs_dim: usize,
    pub state_dim: usize,
    pub hidden: usize,
    pub k: usize,
    u1: ParamId,
    u2: ParamId,
    heads: StateHeads,
}

impl RoleMixer {
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        prefix: &str,
        obs_dim: usize,
        state_dim: usize,
        hidden: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self, MixerError> {
        if k == 0 {
            return Err(MixerError::Dim {
                what: "role count",
                expected: 1,
                got: 0,
            });
        }
        register(store, prefix, &Self::hyper_specs(obs_dim, hidden, k), rng)?;
        register(store, prefix, &StateHeads::specs(state_dim, hidden, k, wired_len(k)), rng)?;
        Self::bind(store, prefix, obs_dim, state_dim, hidden, k)
    }

    fn hyper_specs(d: usize, hm: usize, k: usize) -> Vec<(&'static str, Vec<usize>, usize)> {
        vec![("u1", vec![d, hm], d), ("u2", vec![hm, k], hm)]
    }

    pub fn bind<S: Scalar>(
        store: &ParamStore<S>,
        prefix: &str,
        obs_dim: usize,
        state_dim: usize,
        hidden: usize,
        k: usize,
    ) -> Result<Self, MixerError> {
        let hyper = Self::hyper_specs(obs_dim, hidden, k)
            .into_iter()
            .map(|(n, shape, _)| lookup(store, format!("{prefix}{n}"), &shape))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            obs_dim,
            state_dim,
            hidden,
            k,
            u1: hyper[0],
            u2: hyper[1],
            heads: StateHeads::bind(store, prefix, state_dim, hidden, k, wired_len(k))?,
        })
    }

    pub fn k2(&self) -> usize {
        lstrr_roles(self.k)
    }

    /// Observation hyper-network parameters `U1`, `U2`.
    pub fn hyper_params(&self) -> [ParamId; 2] {
        [self.u1, self.u2]
    }

    pub fn head_params(&self) -> Vec<ParamId> {
        self.heads.params()
    }

    /// Per-agent role logits `U2·ELU(U1·o)`: `[M, D] -> [M, K]`.
    pub fn role_logits<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        obs: NodeId,
    ) -> Result<NodeId, MixerError> {
        let u1 = g.param(store, self.u1);
        let u2 = g.param(store, self.u2);
        let h = g.matmul(obs, u1)?;
        let h = g.elu(h);
        Ok(g.matmul(h, u2)?)
    }

    /// Role-selection weights `[R, N, K]`: softmax over the agent axis with
    /// dead agents excluded.
    pub fn role_weights_node<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        obs: NodeId,
        alive: &[bool],
        agents: usize,
    ) -> Result<NodeId, MixerError> {
        let m = g.shape(obs)[0];
        if agents == 0 || m % agents != 0 || alive.len() != m {
            return Err(MixerError::Dim {
                what: "agent rows",
                expected: alive.len(),
                got: m,
            });
        }
        let rows = m / agents;
        let logits = self.role_logits(g, store, obs)?;
        let logits = g.reshape(logits, [rows, agents, self.k])?;
        let pen = g.constant(dead_penalty(alive, rows, agents, self.k));
        let masked = g.add(logits, pen)?;
        Ok(g.softmax(masked, 1)?)
    }

    pub fn forward<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        x: &MixInputs<'_>,
    ) -> Result<MixOutput, MixerError> {
        let w1 = self.role_weights_node(g, store, x.obs, x.alive, x.agents)?;
        let (b1, w2, b2) = self.heads.forward(g, store, x.state)?;
        let q_star = role_q_values(g, x.q, w1, b1)?;
        let u = wire(g, q_star)?;
        let q_tot = mix(g, u, w2, b2)?;
        Ok(MixOutput { q_tot, q_star, w1 })
    }

    /// `W1` for one team snapshot: `obs` is `[N, D]`.
    pub fn role_weights<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        obs: &Tensor<S>,
        alive: &[bool],
    ) -> Result<RoleWeights<S>, MixerError> {
        if !alive.iter().any(|&a| a) {
            return Err(MixerError::AllDead);
        }
        if obs.rank() != 2 || obs.shape()[1] != self.obs_dim {
            return Err(MixerError::Dim {
                what: "observation length",
                expected: self.obs_dim,
                got: obs.shape().last().copied().unwrap_or(0),
            });
        }
        let n = obs.shape()[0];
        let mut g = Graph::new();
        let x = g.constant_ref(obs);
        let w1 = self.role_weights_node(&mut g, store, x, alive, n)?;
        let w = g.value(w1).clone().reshape([n, self.k])?;
        Ok(RoleWeights(w))
    }
}

/// `N x K` role-selection probabilities; each column sums to one over alive
/// agents.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleWeights<S>(pub Tensor<S>);

impl<S: Scalar> RoleWeights<S> {
    pub fn agents(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn roles(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn column_sum(&self, k: usize) -> S {
        (0..self.agents()).map(|i| self.0.row(i)[k]).sum()
    }
}

/// State-conditioned baseline with a team size fixed at construction.
/// `W1 = |s·Wh + bh|` reshaped to `N x K`; no per-role normalisation and no
/// wiring of the role values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QmixMixer {
    pub agents: usize,
    pub state_dim: usize,
    pub hidden: usize,
    pub k: usize,
    w1: [ParamId; 2],
    heads: StateHeads,
}

impl QmixMixer {
    pub fn new<S: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<S>,
        prefix: &str,
        agents: usize,
        state_dim: usize,
        hidden: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self, MixerError> {
        register(store, prefix, &Self::hyper_specs(agents, state_dim, k), rng)?;
        register(store, prefix, &StateHeads::specs(state_dim, hidden, k, k), rng)?;
        Self::bind(store, prefix, agents, state_dim, hidden, k)
    }

    fn hyper_specs(n: usize, s: usize, k: usize) -> Vec<(&'static str, Vec<usize>, usize)> {
        vec![("w1.w", vec![s, n * k], s), ("w1.b", vec![n * k], s)]
    }

    pub fn bind<S: Scalar>(
        store: &ParamStore<S>,
        prefix: &str,
        agents: usize,
        state_dim: usize,
        hidden: usize,
        k: usize,
    ) -> Result<Self, MixerError> {
        let ids = Self::hyper_specs(agents, state_dim, k)
            .into_iter()
            .map(|(n, shape, _)| lookup(store, format!("{prefix}{n}"), &shape))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            agents,
            state_dim,
            hidden,
            k,
            w1: [ids[0], ids[1]],
            heads: StateHeads::bind(store, prefix, state_dim, hidden, k, k)?,
        })
    }

    pub fn forward<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        x: &MixInputs<'_>,
    ) -> Result<MixOutput, MixerError> {
        if x.agents != self.agents {
            return Err(MixerError::TeamSize {
                expected: self.agents,
                got: x.agents,
            });
        }
        let rows = g.shape(x.state)[0];
        let w1 = StateHeads::dense(g, store, x.state, self.w1[0], self.w1[1])?;
        let w1 = g.abs(w1);
        let w1 = g.reshape(w1, [rows, self.agents, self.k])?;
        let (b1, w2, b2) = self.heads.forward(g, store, x.state)?;
        let q_star = role_q_values(g, x.q, w1, b1)?;
        let q_tot = mix(g, q_star, w2, b2)?;
        Ok(MixOutput { q_tot, q_star, w1 })
    }
}

/// Either mixer behind one interface.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mixer {
    Role(RoleMixer),
    Qmix(QmixMixer),
}

impl Mixer {
    pub fn forward<'p, S: Scalar>(
        &self,
        g: &mut Graph<'p, S>,
        store: &'p ParamStore<S>,
        x: &MixInputs<'_>,
    ) -> Result<MixOutput, MixerError> {
        match self {
            Mixer::Role(m) => m.forward(g, store, x),
            Mixer::Qmix(m) => m.forward(g, store, x),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Mixer::Role(m) => m.k,
            Mixer::Qmix(m) => m.k,
        }
    }

    pub fn as_role(&self) -> Option<&RoleMixer> {
        match self {
            Mixer::Role(m) => Some(m),
            Mixer::Qmix(_) => None,
        }
    }
}
