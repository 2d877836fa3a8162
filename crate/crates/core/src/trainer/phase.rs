use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::Batch;
use super::bundle::{load_transfer, TransferBundle};
use super::config::{ModelConfig, TrainConfig};
use super::loss::LossReport;
use super::replay::ReplayBuffer;
use super::{Learner, TeamLayout, TrainError};
use crate::env::{run_episode, EpisodeRecord, EpisodeTrace, MapSpec};
use crate::expert::DemoSet;
use crate::policy::{linear_eps, AgentNet, Phase, TeamActor};

/// Offset separating evaluation episode seeds from training seeds.
pub const EVAL_SEED_OFFSET: u64 = 1 << 40;

/// Greedy-evaluation statistics over a set of episodes. Returns are
/// undiscounted episode sums of the team reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    pub breach_rate: f64,
    pub prey_cleared_rate: f64,
    pub mean_length: f64,
}

impl EvalReport {
    /// Statistics recomputed from persisted traces.
    pub fn from_traces(traces: &[EpisodeTrace]) -> Self {
        let n = traces.len().max(1) as f64;
        let returns: Vec<f64> = traces.iter().map(EpisodeTrace::episode_return).collect();
        let mean = returns.iter().sum::<f64>() / n;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
        Self {
            episodes: traces.len(),
            mean_return: mean,
            std_return: var.sqrt(),
            breach_rate: traces.iter().filter(|t| t.breached()).count() as f64 / n,
            prey_cleared_rate: traces.iter().filter(|t| t.kills() == t.header.prey).count() as f64 / n,
            mean_length: traces.iter().map(EpisodeTrace::len).sum::<usize>() as f64 / n,
        }
    }
}

/// Runs `episodes` greedy, decentralised episodes with env seeds
/// `seed, seed + 1, …`.
pub fn evaluate_policy(
    store: &rolemix_tensor::ParamStore<f32>,
    agent: &AgentNet,
    spec: &Arc<MapSpec>,
    episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<EpisodeTrace>), TrainError> {
    let mut actor = TeamActor::new(store, agent, 0.0, ChaCha8Rng::seed_from_u64(seed));
    let traces = (0..episodes as u64)
        .map(|e| run_episode(spec, seed.wrapping_add(e), &mut actor, false).map(|(_, t)| t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((EvalReport::from_traces(&traces), traces))
}

/// One line of the metrics log, written at every evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub phase: Phase,
    pub seed: u64,
    pub config_hash: Option<String>,
    pub env_steps: u64,
    pub episodes: u64,
    pub grad_steps: u64,
    pub eps: f64,
    pub eval_mean_return: f64,
    pub eval_std_return: f64,
    pub eval_breach_rate: f64,
    pub eval_prey_cleared_rate: f64,
    pub eval_mean_length: f64,
    /// Loss components averaged over the gradient steps since the previous
    /// record; absent when there were none.
    pub loss_td: Option<f64>,
    pub loss_sup: Option<f64>,
    pub loss_lstrr: Option<f64>,
    pub loss_total: Option<f64>,
    pub skipped_steps: u64,
}

/// Everything that determines one training phase.
#[derive(Clone, Debug)]
pub struct PhaseConfig {
    pub phase: Phase,
    pub map: Arc<MapSpec>,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub config_hash: Option<String>,
}

pub struct PhaseOutput {
    pub learner: Learner,
    pub metrics: Vec<MetricsRecord>,
    pub final_eval: EvalReport,
    /// Episodes of the final greedy evaluation.
    pub final_traces: Vec<EpisodeTrace>,
    pub bundle: TransferBundle,
    pub env_steps: u64,
}

#[derive(Default)]
struct LossAverage {
    sum: LossReport,
    steps: u64,
    skipped: u64,
}

impl LossAverage {
    fn add(&mut self, r: &LossReport, applied: bool) {
        self.sum.td += r.td;
        self.sum.sup += r.sup;
        self.sum.lstrr += r.lstrr;
        self.sum.total += r.total;
        self.steps += 1;
        self.skipped += u64::from(!applied);
    }

    fn take(&mut self) -> (Option<LossReport>, u64) {
        let out = (self.steps > 0).then(|| {
            let n = self.steps as f64;
            LossReport {
                td: self.sum.td / n,
                sup: self.sum.sup / n,
                lstrr: self.sum.lstrr / n,
                total: self.sum.total / n,
            }
        });
        let skipped = self.skipped;
        *self = Self::default();
        (out, skipped)
    }
}

/// Trains one curriculum phase: ε-greedy collection of one episode at a
/// time, `grad_steps_per_episode` updates on replayed batches after each,
/// and a greedy evaluation at step 0, every `eval_interval` env steps and
/// at the end. `sink` sees each metrics record as soon as it exists.
///
/// In the source phase the demonstrations are added to the replay buffer
/// and also drive the supervised term. The target phase never supervises
/// and ignores any demonstrations it is given.
pub fn run_phase(
    cfg: &PhaseConfig,
    init: Option<&TransferBundle>,
    demos: Option<&DemoSet>,
    sink: &mut dyn FnMut(&MetricsRecord) -> Result<(), TrainError>,
) -> Result<PhaseOutput, TrainError> {
    let train = &cfg.train;
    let layout = TeamLayout::of(&cfg.map);
    let weights = train.effective_weights(cfg.phase, cfg.model.variant);
    if cfg.phase == Phase::Target && train.weights.lambda_sup > 0.0 {
        log::info!("target phase: supervision weight forced to 0");
    }
    let demo_records: Vec<Arc<EpisodeRecord>> = if weights.lambda_sup > 0.0 {
        let set = demos.filter(|d| !d.is_empty()).ok_or(TrainError::MissingDemos)?;
        if set.episodes.iter().any(|e| e.n_agents != layout.agents || e.obs_dim != layout.obs_dim) {
            return Err(TrainError::Config("demonstrations were recorded on a different team layout".into()));
        }
        set.episodes.iter().cloned().map(Arc::new).collect()
    } else {
        Vec::new()
    };
    if train.batch_size == 0 || train.eval_interval == 0 {
        return Err(TrainError::Config("batch_size and eval_interval must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut learner = match init {
        Some(bundle) => load_transfer(bundle, cfg.model, layout, train.optimizer, train.target_refresh, &mut rng)?,
        None => Learner::new(cfg.model, layout, train.optimizer, train.target_refresh, &mut rng)?,
    };
    let ladder = train.ladder.build(cfg.model.k)?;
    let mut explore = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);
    let eval_seed = cfg.seed.wrapping_add(EVAL_SEED_OFFSET);
    let horizon = train.eps_horizon(cfg.phase);

    let mut buffer = ReplayBuffer::new(train.buffer_capacity);
    for d in &demo_records {
        buffer.push(d.clone());
    }

    let mut metrics = Vec::new();
    let mut losses = LossAverage::default();
    let (mut env_steps, mut episodes) = (0u64, 0u64);
    let mut eps = train.eps_start;

    let mut evaluate = |learner: &Learner,
                        env_steps: u64,
                        episodes: u64,
                        eps: f64,
                        losses: &mut LossAverage|
     -> Result<(EvalReport, Vec<EpisodeTrace>), TrainError> {
        let (report, traces) =
            evaluate_policy(&learner.store, &learner.agent, &cfg.map, train.eval_episodes, eval_seed)?;
        let (loss, skipped) = losses.take();
        let record = MetricsRecord {
            phase: cfg.phase,
            seed: cfg.seed,
            config_hash: cfg.config_hash.clone(),
            env_steps,
            episodes,
            grad_steps: learner.grad_steps(),
            eps,
            eval_mean_return: report.mean_return,
            eval_std_return: report.std_return,
            eval_breach_rate: report.breach_rate,
            eval_prey_cleared_rate: report.prey_cleared_rate,
            eval_mean_length: report.mean_length,
            loss_td: loss.map(|l| l.td),
            loss_sup: loss.map(|l| l.sup),
            loss_lstrr: loss.map(|l| l.lstrr),
            loss_total: loss.map(|l| l.total),
            skipped_steps: skipped,
        };
        log::info!(
            "{:?} seed {} step {}: return {:.3} breach {:.2} cleared {:.2}",
            cfg.phase,
            cfg.seed,
            env_steps,
            report.mean_return,
            report.breach_rate,
            report.prey_cleared_rate
        );
        sink(&record)?;
        metrics.push(record);
        Ok((report, traces))
    };

    let mut last = evaluate(&learner, 0, 0, eps, &mut losses)?;
    let mut last_eval_at = 0;
    let mut next_eval = train.eval_interval;
    while env_steps < train.env_steps {
        eps = linear_eps(env_steps, horizon, train.eps_start, train.eps_end);
        let env_seed: u64 = rng.gen();
        let (record, _) = {
            let mut actor = TeamActor::new(&learner.store, &learner.agent, eps, &mut explore);
            run_episode(&cfg.map, env_seed, &mut actor, false)?
        };
        env_steps += record.len() as u64;
        episodes += 1;
        buffer.push(record);

        if buffer.len() >= train.min_buffer.clamp(1, buffer.capacity()) {
            for _ in 0..train.grad_steps_per_episode {
                let sampled = buffer.sample(train.batch_size, &mut rng);
                let batch = Batch::from_records(&sampled, &ladder)?;
                let demo_batch = if weights.lambda_sup > 0.0 {
                    let n = train.demo_batch_size.clamp(1, demo_records.len());
                    let picked: Vec<_> = sample(&mut rng, demo_records.len(), n)
                        .into_iter()
                        .map(|i| demo_records[i].clone())
                        .collect();
                    Some(Batch::from_records(&picked, &ladder)?)
                } else {
                    None
                };
                let report = learner.train_step(&batch, demo_batch.as_ref(), weights, train.td_target)?;
                losses.add(&report.loss, report.step.applied);
            }
        }

        if env_steps >= next_eval {
            last = evaluate(&learner, env_steps, episodes, eps, &mut losses)?;
            last_eval_at = env_steps;
            while next_eval <= env_steps {
                next_eval += train.eval_interval;
            }
        }
    }
    if last_eval_at != env_steps {
        last = evaluate(&learner, env_steps, episodes, eps, &mut losses)?;
    }

    let mut bundle = learner.bundle();
    bundle.header.config_hash = cfg.config_hash.clone();
    bundle.header.seed = Some(cfg.seed);
    let (final_eval, final_traces) = last;
    Ok(PhaseOutput {
        learner,
        metrics,
        final_eval,
        final_traces,
        bundle,
        env_steps,
    })
}
