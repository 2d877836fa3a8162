use rolemix_tensor::{Graph, NodeId, ParamStore, Scalar, SparseRows, Tensor};

use super::batch::Batch;
use super::config::{LossWeights, TdTarget};
use super::TrainError;
use crate::env::{Action, NUM_ACTIONS};
use crate::mixer::{lstrr_loss_node, MixInputs, Mixer, DEAD_LOGIT};
use crate::policy::AgentNet;

/// The networks a loss is evaluated with. Online and target stores share
/// parameter names and ids, so one set of handles serves both.
#[derive(Clone, Copy)]
pub struct Nets<'a> {
    pub agent: &'a AgentNet,
    pub mixer: &'a Mixer,
}

/// Graph nodes of the loss terms. `sup` and `lstrr` are absent when their
/// weight is zero.
#[derive(Clone, Copy, Debug)]
pub struct LossNodes {
    pub td: NodeId,
    pub sup: Option<NodeId>,
    pub lstrr: Option<NodeId>,
    pub total: NodeId,
}

/// Scalar values of the loss terms after a forward pass.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossReport {
    pub td: f64,
    pub sup: f64,
    pub lstrr: f64,
    pub total: f64,
}

impl LossNodes {
    pub fn report<S: Scalar>(&self, g: &Graph<'_, S>) -> LossReport {
        let v = |n: NodeId| g.value(n).item().map_or(f64::NAN, Scalar::to_f64_lossy);
        LossReport {
            td: v(self.td),
            sup: self.sup.map_or(0.0, v),
            lstrr: self.lstrr.map_or(0.0, v),
            total: v(self.total),
        }
    }
}

fn tensor<S: Scalar>(shape: impl Into<Vec<usize>>, data: impl Iterator<Item = f64>) -> Tensor<S> {
    Tensor::new(shape, data.map(S::of).collect()).expect("shape matches data")
}

/// Observation node `[(T + 1) B N, D]` and action values `[(T + 1) B N, 7]`
/// for every step of a batch, unrolling the recurrence with dead agents'
/// hidden states frozen.
fn unroll<'p, S: Scalar>(
    g: &mut Graph<'p, S>,
    store: &'p ParamStore<S>,
    agent: &AgentNet,
    batch: &Batch,
) -> Result<(NodeId, NodeId), TrainError> {
    let m = batch.episodes * batch.agents;
    let slices = batch.steps + 1;
    let cols = batch.obs_dim;
    let x = g.sparse_constant(SparseRows::from_rows(
        cols,
        batch.obs.chunks(cols.max(1)).take(slices * m).map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(c, &v)| (c, S::of(v as f64)))
        }),
    )?);
    let gates = agent.input_gates(g, store, x)?;
    let mut h = g.constant(Tensor::zeros([m, agent.hidden]));
    let mut states = Vec::with_capacity(slices);
    for t in 0..slices {
        let gi = g.slice(gates, 0, t * m, m)?;
        let alive = &batch.alive[t * m..(t + 1) * m];
        let mask = g.constant(tensor(
            [m, agent.hidden],
            alive.iter().flat_map(|&a| std::iter::repeat(a as u8 as f64).take(agent.hidden)),
        ));
        h = agent.recur(g, store, gi, h, Some(mask))?;
        states.push(h);
    }
    let all = g.concat(&states, 0)?;
    let q = agent.head(g, store, all)?;
    Ok((x, q))
}

/// Team values of the chosen actions over time slices `from..from + T`.
#[allow(clippy::too_many_arguments)]
fn team_values<'p, S: Scalar>(
    g: &mut Graph<'p, S>,
    store: &'p ParamStore<S>,
    mixer: &Mixer,
    batch: &Batch,
    x: NodeId,
    q: NodeId,
    from: usize,
    actions: &[usize],
) -> Result<crate::mixer::MixOutput, TrainError> {
    let m = batch.episodes * batch.agents;
    let rows = batch.steps * batch.episodes;
    let alive = &batch.alive[from * m..(from + batch.steps) * m];
    let q_rows = g.slice(q, 0, from * m, batch.steps * m)?;
    let chosen = g.gather(q_rows, actions.to_vec())?;
    let alive_node = g.constant(tensor([rows * batch.agents], alive.iter().map(|&a| a as u8 as f64)));
    let chosen = g.mul(chosen, alive_node)?;
    let obs = g.slice(x, 0, from * m, batch.steps * m)?;
    let s = batch.state_dim;
    let state = g.constant(tensor(
        [rows, s],
        batch.state[from * batch.episodes * s..(from * batch.episodes + rows) * s]
            .iter()
            .map(|&v| v as f64),
    ));
    Ok(mixer.forward(
        g,
        store,
        &MixInputs {
            q: chosen,
            obs,
            alive,
            state,
            agents: batch.agents,
        },
    )?)
}

/// Online-argmax next actions `a'` over available actions at slices
/// `1..=T`; `Stay` for agents with nothing available.
fn next_actions<S: Scalar>(q_all: &Tensor<S>, batch: &Batch) -> Vec<usize> {
    let m = batch.episodes * batch.agents;
    (m..(batch.steps + 1) * m)
        .map(|r| {
            let row = q_all.row(r);
            let avail = &batch.avail[r * NUM_ACTIONS..(r + 1) * NUM_ACTIONS];
            (0..NUM_ACTIONS)
                .filter(|&a| avail[a])
                .fold(None::<usize>, |best, a| match best {
                    Some(b) if row[b] >= row[a] => Some(b),
                    _ => Some(a),
                })
                .unwrap_or(Action::Stay.index())
        })
        .collect()
}

/// Team values of the target networks at the next state, evaluated at the
/// given next actions, folded into `r + γ (1 − terminal) Q_tot⁻`.
fn bootstrap<S: Scalar>(
    target: &ParamStore<S>,
    nets: Nets<'_>,
    batch: &Batch,
    a_next: &[usize],
) -> Result<Vec<f64>, TrainError> {
    let mut g = Graph::new();
    let (x, q) = unroll(&mut g, target, nets.agent, batch)?;
    let out = team_values(&mut g, target, nets.mixer, batch, x, q, 1, a_next)?;
    let next = g.value(out.q_tot).data();
    Ok((0..batch.rows())
        .map(|r| {
            let cont = if batch.terminal[r] { 0.0 } else { 1.0 };
            batch.rewards[r] + batch.team_discount * cont * next[r].to_f64_lossy()
        })
        .collect())
}

/// Per-transition regression targets `[T B]` for the team value.
pub fn td_targets<S: Scalar>(
    online: &ParamStore<S>,
    target: &ParamStore<S>,
    nets: Nets<'_>,
    batch: &Batch,
    mode: TdTarget,
) -> Result<Vec<f64>, TrainError> {
    match mode {
        TdTarget::MonteCarlo => Ok(batch.team_return.clone()),
        TdTarget::Bootstrap => {
            let mut g = Graph::new();
            let (_, q) = unroll(&mut g, online, nets.agent, batch)?;
            let a_next = next_actions(g.value(q), batch);
            bootstrap(target, nets, batch, &a_next)
        }
    }
}

/// Builds `L = L_TD + λ₁ L_sup + λ₂ L_LSTRR` on `g` against the online
/// parameters in `store`, with team-value targets (see [`td_targets`])
/// entering as constants.
#[allow(clippy::too_many_arguments)]
pub fn build_losses<'p, S: Scalar>(
    g: &mut Graph<'p, S>,
    store: &'p ParamStore<S>,
    target: &ParamStore<S>,
    nets: Nets<'_>,
    batch: &Batch,
    demos: Option<&Batch>,
    weights: LossWeights,
    mode: TdTarget,
) -> Result<LossNodes, TrainError> {
    let rows = batch.rows();
    let valid = batch.valid_steps();
    if rows == 0 || valid == 0 {
        return Err(TrainError::EmptyBatch);
    }
    if weights.lambda_sup > 0.0 && demos.is_none() {
        return Err(TrainError::MissingDemos);
    }
    let (x, q) = unroll(g, store, nets.agent, batch)?;
    let targets = match mode {
        TdTarget::MonteCarlo => batch.team_return.clone(),
        TdTarget::Bootstrap => bootstrap(target, nets, batch, &next_actions(g.value(q), batch))?,
    };
    let out = team_values(g, store, nets.mixer, batch, x, q, 0, &batch.actions)?;

    let step_weights: Vec<f64> = batch
        .valid
        .iter()
        .map(|&v| if v { 1.0 / valid as f64 } else { 0.0 })
        .collect();
    let y = g.constant(tensor([rows], targets.iter().copied()));
    let diff = g.sub(out.q_tot, y)?;
    let sq = g.mul(diff, diff)?;
    let w = g.constant(tensor([rows], step_weights.iter().copied()));
    let weighted = g.mul(sq, w)?;
    let td = g.sum_all(weighted);
    let mut total = td;

    let lstrr = if weights.lambda_lstrr > 0.0 {
        let Some(role) = nets.mixer.as_role() else {
            return Err(TrainError::Batch("the LSTRR term needs the role mixer".into()));
        };
        if role.k2() != batch.k2 {
            return Err(TrainError::Batch(format!(
                "discount ladder has {} entries, the mixer ties {} roles",
                batch.k2,
                role.k2()
            )));
        }
        let node = lstrr_loss_node(
            g,
            out.q_star,
            tensor([rows, batch.k2], batch.role_returns.iter().copied()),
            tensor([rows], step_weights.iter().copied()),
        )?;
        let scaled = g.scale(node, weights.lambda_lstrr);
        total = g.add(total, scaled)?;
        Some(node)
    } else {
        None
    };

    let sup = if weights.lambda_sup > 0.0 {
        let demos = demos.ok_or(TrainError::MissingDemos)?;
        if demos.obs_dim != batch.obs_dim {
            return Err(TrainError::Batch("demonstrations from a different observation layout".into()));
        }
        let node = sup_loss(g, store, nets.agent, demos)?;
        let scaled = g.scale(node, weights.lambda_sup);
        total = g.add(total, scaled)?;
        Some(node)
    } else {
        None
    };

    Ok(LossNodes { td, sup, lstrr, total })
}

/// Mean negative log-likelihood of the demonstrated actions under a softmax
/// over each agent's available actions, averaged over alive agents within a
/// step and then over unpadded steps.
pub fn sup_loss<'p, S: Scalar>(
    g: &mut Graph<'p, S>,
    store: &'p ParamStore<S>,
    agent: &AgentNet,
    demos: &Batch,
) -> Result<NodeId, TrainError> {
    let n = demos.agents;
    let m = demos.episodes * n;
    let rows = demos.rows();
    let valid = demos.valid_steps();
    if rows == 0 || valid == 0 {
        return Err(TrainError::EmptyBatch);
    }
    let mut penalty = Vec::with_capacity(rows * n * NUM_ACTIONS);
    let mut weights = vec![0.0; rows * n];
    for r in 0..rows {
        let agents = r * n..(r + 1) * n;
        let alive = demos.alive[agents.clone()].iter().filter(|&&a| a).count();
        for ar in agents {
            let avail = &demos.avail[ar * NUM_ACTIONS..(ar + 1) * NUM_ACTIONS];
            penalty.extend(avail.iter().map(|&a| if a { 0.0 } else { DEAD_LOGIT }));
            if demos.valid[r] && demos.alive[ar] {
                let a = demos.actions[ar];
                if !avail[a] {
                    return Err(TrainError::CorruptDemo {
                        row: r,
                        agent: ar % n,
                        action: a,
                    });
                }
                weights[ar] = 1.0 / (alive as f64 * valid as f64);
            }
        }
    }
    let (_, q) = unroll(g, store, agent, demos)?;
    let q = g.slice(q, 0, 0, rows * n)?;
    debug_assert_eq!(rows * n, demos.steps * m);
    let pen = g.constant(tensor([rows * n, NUM_ACTIONS], penalty.into_iter()));
    let masked = g.add(q, pen)?;
    let logp = g.log_softmax(masked, 1)?;
    let picked = g.gather(logp, demos.actions.clone())?;
    let w = g.constant(tensor([rows * n], weights.into_iter()));
    let weighted = g.mul(picked, w)?;
    let sum = g.sum_all(weighted);
    Ok(g.scale(sum, -1.0))
}
