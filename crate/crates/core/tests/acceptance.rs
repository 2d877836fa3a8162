//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The training criteria (6–9) run at desk scale. Their env-step budgets
//! are multiplied by `ROLEMIX_ACCEPTANCE_SCALE` (default 1). Use
//! `ROLEMIX_ACCEPTANCE_ONLY=2,5` to run a subset. A failing criterion is
//! reported, not hidden. The exit status is 0 unless
//! `ROLEMIX_ACCEPTANCE_STRICT=1` is set, in which case any failure exits
//! with status 1.

use std::error::Error;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rolemix::env::{reset, run_episode, Action, EnvState, MapSpec, STATE_DIM};
use rolemix::expert::{generate_demos, DemoSet, Role, ScriptedExpert};
use rolemix::harness::{
    analysis_episodes, learner_from_bundle, pca_csv, pca_project, role_weight_samples, silhouette, PcaDriver,
    Provenance,
};
use rolemix::mixer::{
    lstrr_loss, lstrr_loss_node, lstrr_returns, lstrr_role_targets, lstrr_roles, wire, wired_len, DiscountLadder,
    MixInputs, Mixer, MixerError, RoleMixer, MIXER_HIDDEN,
};
use rolemix::policy::{stack_observations, HiddenState, Phase};
use rolemix::trainer::{
    load_transfer, run_phase, Batch, EvalReport, LadderConfig, Learner, LossWeights, MetricsRecord, MixerVariant,
    ModelConfig, PhaseConfig, RmsPropConfig, TdTarget, TeamLayout, TrainConfig, TrainError, TransferBundle,
    EVAL_SEED_OFFSET,
};
use rolemix_tensor::gradcheck::RandomGraph;
use rolemix_tensor::{Graph, ParamStore, Tensor};

type Res<T> = Result<T, Box<dyn Error>>;

const SEEDS: [u64; 3] = [1, 2, 3];
const BREACH_THRESHOLD: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Res<Outcome> {
    Ok(Outcome {
        pass,
        detail: detail.into(),
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

fn scaled(steps: u64) -> u64 {
    let scale: f64 = std::env::var("ROLEMIX_ACCEPTANCE_SCALE")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|s: &f64| *s > 0.0)
        .unwrap_or(1.0);
    ((steps as f64 * scale).round() as u64).max(1)
}

fn fmt_list(values: &[f64], digits: usize) -> String {
    let items: Vec<String> = values.iter().map(|v| format!("{v:.digits$}")).collect();
    format!("[{}]", items.join(", "))
}

// ---------------------------------------------------------------------
// 1. Autodiff soundness

fn autodiff() -> Res<Outcome> {
    let start = Instant::now();
    let errors: Vec<f64> = (0..50).map(|seed| RandomGraph::generate(seed).max_relative_error()).collect();
    let elapsed = start.elapsed();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("50 random graphs, worst relative error {worst:.2e} (< 1e-4), {elapsed:.2?} (< 1 min)"),
    )
}

// ---------------------------------------------------------------------
// 2. Mixer constraints

fn mixer_constraints() -> Res<Outcome> {
    let start = Instant::now();
    let d = MapSpec::pretrain().obs_dim();
    let (mut worst_sum, mut min_slope) = (0.0f64, f64::INFINITY);
    for draw in 0..100u64 {
        let n = [2, 4, 8][(draw % 3) as usize];
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let k = rng.gen_range(1..=16);
        let mut store = ParamStore::<f64>::new();
        let mixer = Mixer::Role(RoleMixer::new(&mut store, "mixer.", d, STATE_DIM, MIXER_HIDDEN, k, &mut rng)?);
        let mut alive: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.8)).collect();
        alive[rng.gen_range(0..n)] = true;
        let q: Vec<f64> = (0..n).map(|i| if alive[i] { rng.gen_range(-5.0..5.0) } else { 0.0 }).collect();
        let obs: Vec<f64> = (0..n * d).map(|_| if rng.gen_bool(0.05) { 1.0 } else { 0.0 }).collect();
        let state: Vec<f64> = (0..STATE_DIM).map(|_| rng.gen_range(0.0..1.0)).collect();
        let eval = |q: &[f64]| -> Res<(f64, Vec<f64>)> {
            let mut g = Graph::new();
            let qn = g.constant(Tensor::new([n], q.to_vec())?);
            let on = g.constant(Tensor::new([n, d], obs.clone())?);
            let sn = g.constant(Tensor::new([1, STATE_DIM], state.clone())?);
            let inputs = MixInputs {
                q: qn,
                obs: on,
                alive: &alive,
                state: sn,
                agents: n,
            };
            let out = mixer.forward(&mut g, &store, &inputs)?;
            Ok((g.value(out.q_tot).data()[0], g.value(out.w1).data().to_vec()))
        };
        let (_, w1) = eval(&q)?;
        for role in 0..k {
            let sum: f64 = (0..n).filter(|&i| alive[i]).map(|i| w1[i * k + role]).sum();
            worst_sum = worst_sum.max((sum - 1.0).abs());
        }
        let h = 1e-5;
        for i in (0..n).filter(|&i| alive[i]) {
            let (mut up, mut down) = (q.clone(), q.clone());
            up[i] += h;
            down[i] -= h;
            min_slope = min_slope.min((eval(&up)?.0 - eval(&down)?.0) / (2.0 * h));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst_sum <= 1e-5 && min_slope >= -1e-6 && elapsed < Duration::from_secs(60),
        format!(
            "100 draws over N in {{2,4,8}}: worst |column sum - 1| {worst_sum:.1e} (<= 1e-5), \
             min dQ_tot/dQ_i {min_slope:.3e} (>= -1e-6), {elapsed:.2?}"
        ),
    )
}

// ---------------------------------------------------------------------
// 3. Transferability

fn one_step_learner(model: ModelConfig, spec: &Arc<MapSpec>) -> Res<(Learner, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut learner = Learner::new(model, TeamLayout::of(spec), RmsPropConfig::default(), 200, &mut rng)?;
    let mut expert = ScriptedExpert::new(spec)?;
    let (record, _) = run_episode(spec, 0, &mut expert, true)?;
    let batch = Batch::from_records(&[Arc::new(record)], &LadderConfig::default().build(model.k)?)?;
    let before = learner.store.clone();
    let weights = LossWeights {
        lambda_sup: 0.0,
        lambda_lstrr: if model.variant.uses_lstrr() { 0.1 } else { 0.0 },
    };
    learner.train_step(&batch, None, weights, TdTarget::Bootstrap)?;
    let moved = learner.store.ids().any(|id| learner.store.value(id) != before.value(id));
    let stepped = moved && learner.grad_steps() == 1;
    Ok((learner, stepped))
}

fn same_bits(a: &Tensor<f32>, b: &Tensor<f32>) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn greedy_q_tot(learner: &Learner, spec: &Arc<MapSpec>) -> Res<f32> {
    let (_, obs, summary) = reset((**spec).clone(), 0)?;
    let n = obs.len();
    let x = stack_observations(&obs);
    let (q, _) = learner.agent.q_values(&learner.store, &x, &HiddenState::zeros(n, learner.model.hidden))?;
    let a = q.shape()[1];
    let chosen: Vec<f32> = (0..n)
        .map(|i| q.data()[i * a..(i + 1) * a].iter().copied().fold(f32::NEG_INFINITY, f32::max))
        .collect();
    let alive = vec![true; n];
    let mut g = Graph::new();
    let inputs = MixInputs {
        q: g.constant(Tensor::new([n], chosen)?),
        obs: g.constant(x),
        alive: &alive,
        state: g.constant(Tensor::new([1, summary.0.len()], summary.0.clone())?),
        agents: n,
    };
    let out = learner.mixer.forward(&mut g, &learner.store, &inputs)?;
    Ok(g.value(out.q_tot).data()[0])
}

fn transferability() -> Res<Outcome> {
    let small = Arc::new(MapSpec::pretrain());
    let big = Arc::new(MapSpec::moderate());
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let model = ModelConfig::default();
    let (trained, stepped) = one_step_learner(model, &small)?;
    let bundle = TransferBundle::from_bytes(&trained.bundle().to_bytes())?;
    let moved = load_transfer(&bundle, model, TeamLayout::of(&big), RmsPropConfig::default(), 200, &mut rng)?;
    let shared_ok = ["mixer.u1", "mixer.u2"]
        .iter()
        .chain(trained.store.ids().map(|id| trained.store.name(id)).filter(|n| n.starts_with("policy.")).collect::<Vec<_>>().iter())
        .all(|name| match (trained.store.find(name), moved.store.find(name)) {
            (Some(a), Some(b)) => same_bits(trained.store.value(a), moved.store.value(b)),
            _ => false,
        });
    let q_tot = greedy_q_tot(&moved, &big)?;

    let qmix = ModelConfig {
        variant: MixerVariant::QmixBaseline,
        ..ModelConfig::default()
    };
    let (qmix_trained, qmix_stepped) = one_step_learner(qmix, &small)?;
    let rejected = matches!(
        load_transfer(&qmix_trained.bundle(), qmix, TeamLayout::of(&big), RmsPropConfig::default(), 200, &mut rng),
        Err(TrainError::Mixer(MixerError::TeamSize { expected: 4, got: 8 }))
    );
    outcome(
        stepped && qmix_stepped && shared_ok && q_tot.is_finite() && rejected,
        format!(
            "one gradient step at N=4: {stepped}; N=8 load keeps U1/U2 and policy bit-identical: {shared_ok}; \
             Q_tot at N=8 = {q_tot:.4} (finite); baseline rejects 4 -> 8: {rejected}"
        ),
    )
}

// ---------------------------------------------------------------------
// 4. LSTRR arithmetic

fn lstrr_arithmetic() -> Res<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst_rel = 0.0f64;
    for _ in 0..1000 {
        let len = rng.gen_range(1..=60);
        let rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..1.0)).collect();
        let k2 = rng.gen_range(1..=8);
        let first = rng.gen_range(0.9..1.0);
        let last = rng.gen_range(0.1..0.8);
        let ladder = DiscountLadder::linear(k2, first, last, 0.99)?;
        let fast = lstrr_role_targets(&rewards, &ladder);
        let rows = lstrr_returns(&rewards, &ladder);
        for (k, &gamma) in ladder.gammas.iter().enumerate() {
            let brute: f64 = rewards.iter().enumerate().map(|(tau, r)| gamma.powi(tau as i32) * r).sum();
            let denom = brute.abs().max(1e-12);
            worst_rel = worst_rel.max((fast[k] - brute).abs() / denom);
            worst_rel = worst_rel.max((rows[0][k] - brute).abs() / denom);
        }
    }

    // Loss: library versions against a direct double loop.
    let mut worst_loss = 0.0f64;
    for _ in 0..100 {
        let (r, k) = (rng.gen_range(1..6), rng.gen_range(2..=16));
        let k2 = lstrr_roles(k);
        let q_star: Vec<f64> = (0..r * k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let targets: Vec<f64> = (0..r * k2).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let row_w: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut direct = 0.0;
        for row in 0..r {
            let mut sq = 0.0;
            for j in 0..k2 {
                let e = q_star[row * k + j] - targets[row * k2 + j];
                sq += e * e;
            }
            direct += row_w[row] * sq / k2 as f64;
            let plain = lstrr_loss(&q_star[row * k..row * k + k2], &targets[row * k2..(row + 1) * k2]);
            worst_loss = worst_loss.max((plain - sq / k2 as f64).abs());
        }
        let mut g = Graph::new();
        let qs = g.constant(Tensor::new([r, k], q_star)?);
        let node = lstrr_loss_node(&mut g, qs, Tensor::new([r, k2], targets)?, Tensor::new([r], row_w)?)?;
        worst_loss = worst_loss.max((g.value(node).data()[0] - direct).abs() / direct.abs().max(1e-12));
    }

    let mut g = Graph::<f64>::new();
    let q_star = g.constant(Tensor::new([1, 16], vec![0.5; 16])?);
    let wired = wire(&mut g, q_star)?;
    let wired_shape = g.value(wired).shape().to_vec();
    let sizes_ok = lstrr_roles(16) == 8 && wired_len(16) == 9 && wired_shape == [1, 9];
    outcome(
        worst_rel <= 1e-6 && worst_loss <= 1e-12 && sizes_ok,
        format!(
            "1000 tails: worst relative error vs brute force {worst_rel:.1e} (<= 1e-6); loss vs direct \
             evaluation {worst_loss:.1e}; K=16 -> K2={} and wired length {} (graph {:?})",
            lstrr_roles(16),
            wired_len(16),
            wired_shape
        ),
    )
}

// ---------------------------------------------------------------------
// 5. Environment fidelity

fn stay_all(state: &EnvState) -> Vec<Option<Action>> {
    state.predators().iter().map(|p| p.alive.then_some(Action::Stay)).collect()
}

fn breach_scenario(spec: MapSpec, seed: u64) -> Res<(usize, f64, bool)> {
    let (mut state, _, _) = reset(spec, seed)?;
    for t in 1.. {
        let out = state.step(&stay_all(&state))?;
        if out.terminal {
            return Ok((t, out.reward, out.info.breach));
        }
    }
    unreachable!()
}

fn environment() -> Res<Outcome> {
    let mut times = Vec::new();
    let mut rewards = Vec::new();
    let mut breached = true;
    for seed in 0..10 {
        let (t, reward, breach) = breach_scenario(MapSpec::pretrain(), seed)?;
        times.push(t);
        rewards.push(reward);
        breached &= breach;
    }
    let mut no_step_cost = MapSpec::pretrain();
    no_step_cost.rewards.step = 0.0;
    let (t0, r0, b0) = breach_scenario(no_step_cost, 0)?;
    let default = MapSpec::pretrain().rewards;
    let breach_ok = breached
        && b0
        && times.iter().all(|&t| t == 3)
        && t0 == 3
        && rewards.iter().all(|&r| r == default.breach + default.step)
        && r0 == -5.0;

    let (mut s, _, _) = reset(MapSpec::from_grid("catch", "Ap.")?, 0)?;
    let out = s.step(&[Some(Action::Catch)])?;
    let catch_ok = out.info.kills == 1 && out.info.removed == [0] && !s.predators()[0].alive;

    let (mut s, _, _) = reset(MapSpec::from_grid("skill", "Aa....\n......\n..ppp.")?, 1)?;
    s.step(&[Some(Action::Right)])?;
    let out = s.step(&[Some(Action::SkillAct)])?;
    let skill_ok = out.info.kills == 3 && out.info.removed.is_empty() && s.predators()[0].alive;

    outcome(
        breach_ok && catch_ok && skill_ok,
        format!(
            "undefended pre-train map, 10 seeds: breach at t={times:?}, terminal reward {:.2} \
             (breach -5.0 plus step cost {}), {r0:.1} with the step cost off; Catch removes catcher: {catch_ok}; \
             Skill-act keeps archer: {skill_ok}",
            rewards[0], default.step
        ),
    )
}

// ---------------------------------------------------------------------
// Shared training: the pre-train phase feeds criteria 6-9.

const K: usize = 8;

fn role_model(variant: MixerVariant) -> ModelConfig {
    ModelConfig {
        k: K,
        variant,
        ..ModelConfig::default()
    }
}

struct Pretrained {
    demos: DemoSet,
    reports: Vec<EvalReport>,
    bundles: Vec<TransferBundle>,
    elapsed: Duration,
}

fn source_phase(seed: u64, variant: MixerVariant, demos: &DemoSet, eval_episodes: usize) -> Res<(EvalReport, TransferBundle)> {
    let steps = scaled(3000);
    let cfg = PhaseConfig {
        phase: Phase::Source,
        map: Arc::new(MapSpec::pretrain()),
        seed,
        model: role_model(variant),
        train: TrainConfig {
            env_steps: steps,
            eval_interval: steps,
            eval_episodes,
            ..TrainConfig::default()
        },
        config_hash: None,
    };
    let out = run_phase(&cfg, None, Some(demos), &mut |_| Ok(()))?;
    Ok((out.final_eval, out.bundle))
}

fn pretrain() -> Res<Pretrained> {
    let start = Instant::now();
    let demos = generate_demos(&MapSpec::pretrain(), 50, 0)?;
    let mut reports = Vec::new();
    let mut bundles = Vec::new();
    for seed in SEEDS {
        let (report, bundle) = source_phase(seed, MixerVariant::RoleMixerLstrr, &demos, 32)?;
        reports.push(report);
        bundles.push(bundle);
    }
    Ok(Pretrained {
        demos,
        reports,
        bundles,
        elapsed: start.elapsed(),
    })
}

// 6. Phase-1 training

fn phase_one(p: &Pretrained) -> Res<Outcome> {
    let breach: Vec<f64> = p.reports.iter().map(|r| r.breach_rate).collect();
    let cleared: Vec<f64> = p.reports.iter().map(|r| r.prey_cleared_rate).collect();
    let (mb, mc) = (median(&breach), median(&cleared));
    outcome(
        mb <= 0.1 && mc >= 0.9,
        format!(
            "pre-train map, 50 demos, {} env steps x 3 seeds (K={K}): median breach {mb:.3} (<= 0.1), \
             median cleared {mc:.3} (>= 0.9); per seed breach {} cleared {}; {:.0?}",
            scaled(3000),
            fmt_list(&breach, 3),
            fmt_list(&cleared, 3),
            p.elapsed
        ),
    )
}

// 7. Transfer advantage

/// First evaluated env-step count with breach rate at or below the
/// threshold, or `None` within the budget. Training stops at the first hit.
fn steps_to_threshold(cfg: &PhaseConfig, init: Option<&TransferBundle>) -> Res<Option<u64>> {
    let mut hit = None;
    let mut sink = |m: &MetricsRecord| {
        if m.eval_breach_rate <= BREACH_THRESHOLD {
            hit = Some(m.env_steps);
            return Err(TrainError::Config("threshold reached".into()));
        }
        Ok(())
    };
    match run_phase(cfg, init, None, &mut sink) {
        Ok(_) => Ok(hit),
        Err(_) if hit.is_some() => Ok(hit),
        Err(e) => Err(e.into()),
    }
}

fn transfer_advantage(p: &Pretrained) -> Res<Outcome> {
    let start = Instant::now();
    let budget = scaled(6000);
    let moderate = Arc::new(MapSpec::moderate());
    let phase = |seed, model| PhaseConfig {
        phase: Phase::Target,
        map: moderate.clone(),
        seed,
        model,
        train: TrainConfig {
            env_steps: budget,
            eval_interval: 500,
            eval_episodes: 16,
            ..TrainConfig::default()
        },
        config_hash: None,
    };
    let censored = |s: Option<u64>| s.map_or(f64::INFINITY, |v| v as f64);
    let (mut transfer, mut scratch) = (Vec::new(), Vec::new());
    for (i, seed) in SEEDS.into_iter().enumerate() {
        let role = phase(seed, role_model(MixerVariant::RoleMixerLstrr));
        transfer.push(censored(steps_to_threshold(&role, Some(&p.bundles[i]))?));
        let qmix = phase(
            seed,
            ModelConfig {
                variant: MixerVariant::QmixBaseline,
                ..ModelConfig::default()
            },
        );
        scratch.push(censored(steps_to_threshold(&qmix, None)?));
    }
    let (mt, ms) = (median(&transfer), median(&scratch));
    outcome(
        mt < ms,
        format!(
            "moderate 8-agent map, env steps to breach <= {BREACH_THRESHOLD} (inf = not within {budget}): \
             transferred role mixer median {mt} {}, baseline from scratch median {ms} {}; {:.0?}",
            fmt_list(&transfer, 0),
            fmt_list(&scratch, 0),
            start.elapsed()
        ),
    )
}

// 8. LSTRR ablation

fn ablation(p: &Pretrained) -> Res<Outcome> {
    let start = Instant::now();
    let hard = Arc::new(MapSpec::hard());
    let steps = scaled(3000);
    let target = |seed, variant, bundle: &TransferBundle| -> Res<f64> {
        let cfg = PhaseConfig {
            phase: Phase::Target,
            map: hard.clone(),
            seed,
            model: role_model(variant),
            train: TrainConfig {
                env_steps: steps,
                eval_interval: steps,
                eval_episodes: 32,
                ..TrainConfig::default()
            },
            config_hash: None,
        };
        Ok(run_phase(&cfg, Some(bundle), None, &mut |_| Ok(()))?.final_eval.mean_return)
    };
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for (i, seed) in SEEDS.into_iter().enumerate() {
        with.push(target(seed, MixerVariant::RoleMixerLstrr, &p.bundles[i])?);
        let (_, plain) = source_phase(seed, MixerVariant::RoleMixer, &p.demos, 8)?;
        without.push(target(seed, MixerVariant::RoleMixer, &plain)?);
    }
    let (mw, mo) = (median(&with), median(&without));
    outcome(
        mw > mo,
        format!(
            "hard 8-agent map, K={K}, {} pre-train + {steps} target env steps x 3 seeds: median final return \
             with LSTRR {mw:.3} {}, without {mo:.3} {}; {:.0?}",
            scaled(3000),
            fmt_list(&with, 3),
            fmt_list(&without, 3),
            start.elapsed()
        ),
    )
}

// 9. Role emergence artifact

fn pca_artifact(bundle: &TransferBundle, seed: u64) -> Res<(String, Option<f64>)> {
    let spec = Arc::new(MapSpec::pretrain());
    let learner = learner_from_bundle(bundle, &spec)?;
    let (records, roles) = analysis_episodes(&learner, &spec, PcaDriver::Expert, 16, seed.wrapping_add(EVAL_SEED_OFFSET))?;
    let samples = role_weight_samples(&learner, &records, roles.as_deref())?;
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.weights.clone()).collect();
    let projection = pca_project(&rows)?;
    let labels: Vec<usize> = samples.iter().map(|s| usize::from(s.role == Some(Role::Attacker))).collect();
    let prov = Provenance {
        config_hash: None,
        seed: Some(seed),
    };
    Ok((pca_csv(&samples, &projection, &prov), silhouette(&projection.points, &labels)))
}

fn role_emergence(p: &Pretrained) -> Res<Outcome> {
    let mut scores = Vec::new();
    let mut deterministic = true;
    let mut well_formed = true;
    for (i, seed) in SEEDS.into_iter().enumerate() {
        let (csv, score) = pca_artifact(&p.bundles[i], seed)?;
        let (again, _) = pca_artifact(&p.bundles[i], seed)?;
        deterministic &= csv == again;
        well_formed &= csv.lines().nth(1) == Some("agent,x,y,role") && csv.lines().count() > 2;
        scores.push(score.unwrap_or(f64::NAN));
    }
    outcome(
        deterministic && well_formed && scores.iter().all(|&s| s > 0.0),
        format!(
            "expert-driven pre-train episodes through each trained mixer: silhouette of defender vs attacker \
             rows {} (> 0); CSV deterministic: {deterministic}",
            fmt_list(&scores, 3)
        ),
    )
}

// ---------------------------------------------------------------------
// 10. Determinism of the command-line runs

const TINY: &str = r#"
name = "determinism"
seeds = [5]

[model]
k = 8

[source]
map = "pretrain"
demos = 4
train = { env_steps = 120, eval_interval = 60, eval_episodes = 3, batch_size = 4, demo_batch_size = 2, min_buffer = 2 }

[target]
map = "moderate"
train = { env_steps = 80, eval_interval = 40, eval_episodes = 3, batch_size = 4, min_buffer = 2 }
"#;

fn rolemix(args: &[&str], root: &Path) -> Res<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_rolemix"))
        .args(args)
        .env("ROLEMIX_OUT", root)
        .env("RUST_LOG", "warn")
        .output()?;
    if !out.status.success() {
        return Err(format!("rolemix {args:?}: {}", String::from_utf8_lossy(&out.stderr)).into());
    }
    Ok(out.stdout)
}

fn determinism() -> Res<Outcome> {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("exp.toml");
    std::fs::write(&config, TINY)?;
    let config = config.to_str().ok_or("non-UTF-8 path")?;
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let root = dir.path().join(name);
        rolemix(&["train", config], &root)?;
        let out = root.join("determinism");
        let arm = std::fs::read_dir(&out)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .find(|p| p.join("seed-5").is_dir())
            .ok_or("no arm directory")?;
        let seed_dir = arm.join("seed-5");
        let bundle = seed_dir.join("source/bundle.rmtb");
        rolemix(&["transfer-train", config, "--bundle", bundle.to_str().ok_or("path")?], &root)?;
        let target_bundle = seed_dir.join("target/bundle.rmtb");
        let eval_stdout = rolemix(&["evaluate", config, "--bundle", target_bundle.to_str().ok_or("path")?], &root)?;
        runs.push((
            std::fs::read(seed_dir.join("source/metrics.jsonl"))?,
            std::fs::read(seed_dir.join("target/metrics.jsonl"))?,
            std::fs::read(out.join("eval.json"))?,
            eval_stdout,
        ));
    }
    let (a, b) = (&runs[0], &runs[1]);
    let files = [(&a.0, &b.0), (&a.1, &b.1), (&a.2, &b.2), (&a.3, &b.3)];
    let identical = files.iter().all(|(x, y)| x == y && !x.is_empty());
    outcome(
        identical,
        format!(
            "train, transfer-train and evaluate repeated in fresh directories: source/target metrics logs and \
             evaluation report byte-identical: {identical} ({} + {} + {} bytes)",
            a.0.len(),
            a.1.len(),
            a.2.len()
        ),
    )
}

// ---------------------------------------------------------------------

fn run(id: usize, f: impl FnOnce() -> Res<Outcome>) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => Outcome {
            pass: false,
            detail: format!("error: {e}"),
        },
        Err(panic) => Outcome {
            pass: false,
            detail: format!(
                "panicked in criterion {id}: {}",
                panic
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| panic.downcast_ref::<&str>().copied())
                    .unwrap_or("?")
            ),
        },
    }
}

fn main() -> ExitCode {
    // Cargo passes harness flags (e.g. `--nocapture`, filters); none apply.
    let only: Option<Vec<usize>> = std::env::var("ROLEMIX_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: usize| only.as_ref().is_none_or(|ids| ids.contains(&id));
    let strict = std::env::var("ROLEMIX_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");

    let names = [
        "autodiff soundness",
        "mixer constraints",
        "transferability",
        "LSTRR arithmetic",
        "environment fidelity",
        "phase-1 training",
        "transfer advantage",
        "LSTRR ablation",
        "role emergence",
        "determinism",
    ];
    let needs_training = (6..=9).any(wanted);
    let pretrained = needs_training.then(|| catch_unwind(pretrain).unwrap_or_else(|_| Err("pre-training panicked".into())));
    let trained = |id: usize, f: fn(&Pretrained) -> Res<Outcome>| -> Outcome {
        match &pretrained {
            Some(Ok(p)) => run(id, || f(p)),
            Some(Err(e)) => Outcome {
                pass: false,
                detail: format!("pre-training failed: {e}"),
            },
            None => unreachable!("training criteria requested without pre-training"),
        }
    };

    let mut failures = 0;
    for (i, name) in names.iter().enumerate() {
        let id = i + 1;
        if !wanted(id) {
            continue;
        }
        let o = match id {
            1 => run(id, autodiff),
            2 => run(id, mixer_constraints),
            3 => run(id, transferability),
            4 => run(id, lstrr_arithmetic),
            5 => run(id, environment),
            6 => trained(id, phase_one),
            7 => trained(id, transfer_advantage),
            8 => trained(id, ablation),
            9 => trained(id, role_emergence),
            _ => run(id, determinism),
        };
        failures += usize::from(!o.pass);
        println!("criterion {id:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failures > 0 && strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
