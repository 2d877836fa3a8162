use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::env::{Cell, MapSpec};
use crate::expert::{Role, ScriptedExpert};
use crate::trainer::{Learner, MixerVariant, ModelConfig, RmsPropConfig, TeamLayout, TrainError};

const EXAMPLE: &str = r#"
name = "transfer"
seeds = [4, 5]

[model]
k = 8
variant = "role-mixer+lstrr"

[source]
map = "pretrain"
demos = 3
train = { env_steps = 60, eval_interval = 60, eval_episodes = 2, batch_size = 4, demo_batch_size = 2, min_buffer = 2 }

[target]
map = "moderate"
train = { env_steps = 40, eval_interval = 40, eval_episodes = 2, batch_size = 4, min_buffer = 2 }

[[arms]]
name = "transfer"

[[arms]]
name = "scratch"
variant = "qmix-baseline"
transfer = false

[analysis]
pca_episodes = 2
"#;

fn example() -> ExperimentConfig {
    ExperimentConfig::from_toml(EXAMPLE).unwrap()
}

// ---------------------------------------------------------------------
// Configuration

#[test]
fn configs_round_trip_through_toml() {
    let cfg = example();
    assert_eq!(cfg.seeds, [4, 5]);
    assert_eq!(cfg.source.as_ref().unwrap().demos, 3);
    assert_eq!(cfg.target.as_ref().unwrap().train.env_steps, 40);
    assert_eq!(cfg.target.as_ref().unwrap().train.batch_size, 4);
    assert_eq!(cfg.target.as_ref().unwrap().train.buffer_capacity, 5000);
    assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
}

#[test]
fn arms_inherit_the_shared_model() {
    let arms = example().arms();
    assert_eq!(arms.len(), 2);
    assert_eq!(arms[0].model.variant, MixerVariant::RoleMixerLstrr);
    assert_eq!((arms[1].model.variant, arms[1].model.k, arms[1].transfer), (MixerVariant::QmixBaseline, 8, false));
    let single = ExperimentConfig::from_toml("name = \"a\"\n[target]\nmap = \"hard\"\n").unwrap();
    assert_eq!(single.arms()[0].name, "role-mixer-lstrr");
    assert_eq!(single.seeds, [1, 2, 3]);
}

#[test]
fn malformed_configs_are_rejected() {
    for text in [
        "name = \"a\"\n",
        "name = \"a\"\nseeds = []\n[target]\nmap = \"hard\"\n",
        "name = \"a\"\nbogus = 1\n[target]\nmap = \"hard\"\n",
        "name = \"a\"\n[target]\nmap = \"hard\"\ntrain = { env_stepz = 3 }\n",
        "name = \"a/b\"\n[target]\nmap = \"hard\"\n",
        "name = \"a\"\n[target]\nmap = \"hard\"\n[[arms]]\nname = \"x\"\n[[arms]]\nname = \"x\"\n",
        "name = \"a\"\n[model]\nk = 0\n[target]\nmap = \"hard\"\n",
    ] {
        let err = ExperimentConfig::from_toml(text).unwrap_err();
        assert!(err.is_config(), "{text}: {err}");
    }
}

#[test]
fn the_hash_tracks_the_setup_but_not_seeds_or_output() {
    let base = Path::new(".");
    let cfg = example();
    let h = cfg.hash(base).unwrap();
    assert_eq!(h.len(), 16);
    assert_eq!(cfg.hash(base).unwrap(), h);
    let mut moved = cfg.clone();
    moved.seeds = vec![9];
    moved.output = Some("elsewhere".into());
    assert_eq!(moved.hash(base).unwrap(), h);
    let mut changed = cfg.clone();
    changed.model.k = 16;
    assert_ne!(changed.hash(base).unwrap(), h);
    let mut other_map = cfg;
    other_map.target.as_mut().unwrap().map = "hard".into();
    assert_ne!(other_map.hash(base).unwrap(), h);
}

#[test]
fn maps_resolve_by_name_or_relative_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("mine.toml"), MapSpec::pretrain().to_toml()).unwrap();
    let spec = resolve_map("mine.toml", dir.path()).unwrap();
    assert_eq!(spec.content_hash(), MapSpec::pretrain().content_hash());
    assert_eq!(resolve_map("hard", dir.path()).unwrap(), MapSpec::hard());
    assert!(resolve_map("missing.toml", dir.path()).unwrap_err().is_config());
}

// ---------------------------------------------------------------------
// Evaluation

fn fresh_bundle(spec: &MapSpec, variant: MixerVariant, seed: u64) -> crate::trainer::TransferBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = ModelConfig {
        variant,
        ..ModelConfig::default()
    };
    Learner::new(model, TeamLayout::of(spec), RmsPropConfig::default(), 200, &mut rng)
        .unwrap()
        .bundle()
}

#[test]
fn the_scripted_expert_defends_and_clears_the_pretrain_map() {
    let spec = Arc::new(MapSpec::pretrain());
    let mut expert = ScriptedExpert::new(&spec).unwrap();
    let (report, traces) = evaluate_actor(&mut expert, &spec, 16, 7).unwrap();
    assert_eq!(report.breach_rate, 0.0);
    assert_eq!(report.prey_cleared_rate, 1.0);
    assert_eq!(report, EvalReport::from_traces(&traces));
}

#[test]
fn an_untrained_team_loses_its_camps() {
    let spec = Arc::new(MapSpec::pretrain());
    let (report, _) = evaluate(&fresh_bundle(&spec, MixerVariant::RoleMixerLstrr, 3), &spec, 16, 11).unwrap();
    assert!(report.breach_rate >= 0.8, "{report:?}");
    assert_eq!(report.prey_cleared_rate, 0.0);
}

#[test]
fn evaluation_is_deterministic_under_its_seed() {
    let spec = Arc::new(MapSpec::pretrain());
    let bundle = fresh_bundle(&spec, MixerVariant::RoleMixer, 4);
    let a = evaluate(&bundle, &spec, 5, 100).unwrap();
    let b = evaluate(&bundle, &spec, 5, 100).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
}

#[test]
fn incompatible_bundles_are_rejected_before_evaluation() {
    let spec = Arc::new(MapSpec::pretrain());
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let narrow = TeamLayout {
        obs_dim: spec.obs_dim() - 1,
        ..TeamLayout::of(&spec)
    };
    let bundle = Learner::new(ModelConfig::default(), narrow, RmsPropConfig::default(), 1, &mut rng)
        .unwrap()
        .bundle();
    let err = evaluate(&bundle, &spec, 1, 0).unwrap_err();
    assert!(matches!(err, HarnessError::Train(TrainError::Incompatible(_))), "{err}");
    assert!(err.is_config());
    let qmix = fresh_bundle(&spec, MixerVariant::QmixBaseline, 1);
    let err = evaluate(&qmix, &Arc::new(MapSpec::moderate()), 1, 0).unwrap_err();
    assert!(err.to_string().contains("4"), "{err}");
}

// ---------------------------------------------------------------------
// Projection

/// Dominant eigenpairs by power iteration with deflation, as an oracle
/// independent of the library's eigen-decomposition.
fn power_eigen(cov: &[Vec<f64>], count: usize) -> Vec<(f64, Vec<f64>)> {
    let k = cov.len();
    let mut m: Vec<Vec<f64>> = cov.to_vec();
    let mut out = Vec::new();
    for c in 0..count {
        let mut v: Vec<f64> = (0..k).map(|i| 1.0 + (i * 7 + c * 3) as f64 % 5.0).collect();
        let mut lambda = 0.0;
        for _ in 0..5000 {
            let w: Vec<f64> = (0..k).map(|i| (0..k).map(|j| m[i][j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            lambda = norm;
            v = w.into_iter().map(|x| x / norm).collect();
        }
        for i in 0..k {
            for j in 0..k {
                m[i][j] -= lambda * v[i] * v[j];
            }
        }
        out.push((lambda, v));
    }
    out
}

fn covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (m, k) = (rows.len(), rows[0].len());
    let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / m as f64).collect();
    (0..k)
        .map(|a| {
            (0..k)
                .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (m - 1) as f64)
                .collect()
        })
        .collect()
}

fn random_rows(rng: &mut ChaCha8Rng, m: usize, k: usize) -> Vec<Vec<f64>> {
    // Anisotropic so the leading directions are well separated.
    (0..m)
        .map(|_| (0..k).map(|j| rng.gen_range(-1.0..1.0) * (k - j) as f64).collect())
        .collect()
}

#[test]
fn identical_rows_project_to_the_origin() {
    let rows = vec![vec![0.2, 0.5, 0.3]; 6];
    let p = pca_project(&rows).unwrap();
    assert!(p.points.iter().all(|&[x, y]| x == 0.0 && y == 0.0));
    assert_eq!(p.variances, [0.0, 0.0]);
}

#[test]
fn rows_along_one_direction_have_no_second_coordinate() {
    let dir = [0.6, -0.8, 0.0];
    let rows: Vec<Vec<f64>> = [-2.0, 0.5, 1.0, 3.5].iter().map(|t| dir.iter().map(|d| 1.0 + t * d).collect()).collect();
    let p = pca_project(&rows).unwrap();
    for (pt, t) in p.points.iter().zip([-2.0, 0.5, 1.0, 3.5]) {
        assert_eq!(pt[1], 0.0);
        // Sign convention makes the largest entry (−0.8) positive.
        assert!((pt[0] - (-(t - 0.75))).abs() < 1e-12, "{pt:?}");
    }
}

#[test]
fn single_column_rows_pad_the_missing_component() {
    let rows = vec![vec![1.0], vec![3.0], vec![5.0]];
    let p = pca_project(&rows).unwrap();
    assert_eq!(p.points.iter().map(|p| p[0]).collect::<Vec<_>>(), [-2.0, 0.0, 2.0]);
    assert_eq!(p.components[1], [0.0]);
}

#[test]
fn fewer_than_two_samples_or_ragged_rows_are_errors() {
    assert!(pca_project(&[vec![1.0, 2.0]]).is_err());
    assert!(pca_project(&[vec![1.0, 2.0], vec![1.0]]).is_err());
}

#[test]
fn top_components_match_an_independent_eigen_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let k = rng.gen_range(3..9);
        let rows = random_rows(&mut rng, 60, k);
        let p = pca_project(&rows).unwrap();
        let oracle = power_eigen(&covariance(&rows), 2);
        for (slot, (lambda, v)) in oracle.iter().enumerate() {
            assert!((p.variances[slot] - lambda).abs() < 1e-8 * lambda.max(1.0));
            let dot: f64 = p.components[slot].iter().zip(v).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6);
        }
        let trace: f64 = (0..k).map(|i| covariance(&rows)[i][i]).sum();
        assert!((p.total_variance - trace).abs() < 1e-9 * trace);
    }
}

fn captured_variance(rows: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    let (pa, pb): (Vec<f64>, Vec<f64>) = {
        let k = rows[0].len();
        let mean: Vec<f64> = (0..k).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
        rows.iter()
            .map(|r| {
                let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
                (c.iter().zip(a).map(|(x, y)| x * y).sum::<f64>(), c.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            })
            .unzip()
    };
    let n = (rows.len() - 1) as f64;
    (pa.iter().map(|x| x * x).sum::<f64>() + pb.iter().map(|x| x * x).sum::<f64>()) / n
}

#[test]
fn the_top_two_components_capture_at_least_any_other_plane() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let rows = random_rows(&mut rng, 80, 6);
    let p = pca_project(&rows).unwrap();
    let best = captured_variance(&rows, &p.components[0], &p.components[1]);
    assert!((best - p.variances[0] - p.variances[1]).abs() < 1e-9 * best);
    for _ in 0..500 {
        // Random orthonormal pair by Gram–Schmidt.
        let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let a: Vec<f64> = a.iter().map(|x| x / na).collect();
        let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let d: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let b: Vec<f64> = b.iter().zip(&a).map(|(y, x)| y - d * x).collect();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let b: Vec<f64> = b.iter().map(|x| x / nb).collect();
        assert!(captured_variance(&rows, &a, &b) <= best + 1e-9);
    }
}

#[test]
fn projections_do_not_depend_on_row_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rows = random_rows(&mut rng, 40, 5);
    let p = pca_project(&rows).unwrap();
    let mut order: Vec<usize> = (0..rows.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let shuffled: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let q = pca_project(&shuffled).unwrap();
    for axis in 0..2 {
        let a: Vec<f64> = order.iter().map(|&i| p.points[i][axis]).collect();
        let b: Vec<f64> = q.points.iter().map(|pt| pt[axis]).collect();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let corr = dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt());
        assert!((corr.abs() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn silhouette_matches_a_hand_computed_line() {
    let points = [[0.0], [1.0], [4.0], [5.0]];
    let s = silhouette(&points, &[0, 0, 1, 1]).unwrap();
    let expected = (2.0 * (3.5 / 4.5) + 2.0 * (2.5 / 3.5)) / 4.0;
    assert!((s - expected).abs() < 1e-12);
    assert!(silhouette(&points, &[0, 1, 0, 1]).unwrap() < 0.0);
    assert_eq!(silhouette(&points, &[2, 2, 2, 2]), None);
    // A singleton cluster contributes zero.
    let s = silhouette(&[[0.0], [1.0], [9.0]], &[0, 0, 1]).unwrap();
    assert!((s - (8.0 / 9.0 + 7.0 / 8.0) / 3.0).abs() < 1e-12);
}

// ---------------------------------------------------------------------
// Role weights and visitation

#[test]
fn role_weight_rows_cover_alive_agents_and_sum_to_one_per_role() {
    let spec = Arc::new(MapSpec::pretrain());
    let bundle = fresh_bundle(&spec, MixerVariant::RoleMixerLstrr, 8);
    let learner = learner_from_bundle(&bundle, &spec).unwrap();
    let (records, roles) = analysis_episodes(&learner, &spec, PcaDriver::Expert, 2, 3).unwrap();
    let roles = roles.unwrap();
    assert_eq!(roles, ScriptedExpert::new(&spec).unwrap().roles());
    let samples = role_weight_samples(&learner, &records, Some(&roles)).unwrap();
    let alive_steps: usize = records
        .iter()
        .map(|r| (0..r.len()).map(|t| (0..r.n_agents).filter(|&i| r.alive(t, i)).count()).sum::<usize>())
        .sum();
    assert_eq!(samples.len(), alive_steps);
    let k = learner.model.k;
    for group in samples.chunk_by(|a, b| a.episode == b.episode && a.t == b.t) {
        for role in 0..k {
            let total: f64 = group.iter().map(|s| s.weights[role]).sum();
            assert!((total - 1.0).abs() < 1e-5);
        }
    }
    assert!(samples.iter().all(|s| s.role == Some(roles[s.agent])));
}

#[test]
fn qmix_bundles_have_no_role_weights() {
    let spec = Arc::new(MapSpec::pretrain());
    let learner = learner_from_bundle(&fresh_bundle(&spec, MixerVariant::QmixBaseline, 9), &spec).unwrap();
    let (records, _) = analysis_episodes(&learner, &spec, PcaDriver::Greedy, 1, 0).unwrap();
    assert!(role_weight_samples(&learner, &records, None).is_err());
}

struct StayActor;

impl crate::env::Actor for StayActor {
    fn begin_episode(&mut self, _: &crate::env::EnvState) {}

    fn act(
        &mut self,
        state: &crate::env::EnvState,
        _: &[crate::env::Observation],
        _: &[Option<crate::env::ActionMask>],
    ) -> Result<Vec<Option<crate::env::Action>>, crate::env::EnvError> {
        Ok(state
            .predators()
            .iter()
            .map(|p| p.alive.then_some(crate::env::Action::Stay))
            .collect())
    }
}

#[test]
fn an_agent_that_only_stays_visits_one_cell() {
    let spec = Arc::new(MapSpec::pretrain());
    let (_, traces) = evaluate_actor(&mut StayActor, &spec, 3, 0).unwrap();
    let map = visitation_map(&traces, &spec);
    for agent in 0..spec.num_agents() {
        assert_eq!(map.counts[agent].iter().filter(|&&c| c > 0).count(), 1);
        let Cell { x, y } = spec.agents[agent];
        assert_eq!(map.get(agent, x, y), map.total(agent));
    }
}

#[test]
fn visit_counts_equal_alive_steps() {
    let spec = Arc::new(MapSpec::moderate());
    let (_, traces) = evaluate(&fresh_bundle(&spec, MixerVariant::RoleMixer, 10), &spec, 4, 2).unwrap();
    let map = visitation_map(&traces, &spec);
    for agent in 0..spec.num_agents() {
        let alive = traces
            .iter()
            .flat_map(|t| &t.steps)
            .filter(|s| s.positions[agent].is_some())
            .count() as u64;
        assert_eq!(map.total(agent), alive);
    }
}

#[test]
fn scripted_defenders_spend_most_time_in_camp() {
    let spec = Arc::new(MapSpec::pretrain());
    let mut expert = ScriptedExpert::new(&spec).unwrap();
    let roles = expert.roles();
    let (_, traces) = evaluate_actor(&mut expert, &spec, 8, 0).unwrap();
    let map = visitation_map(&traces, &spec);
    for (agent, role) in roles.iter().enumerate() {
        let in_camp: u64 = spec.campsites.iter().map(|c| map.get(agent, c.x, c.y)).sum();
        let share = in_camp as f64 / map.total(agent) as f64;
        match role {
            Role::Defender => assert!(share > 0.5, "defender {agent}: {share}"),
            Role::Attacker => assert!(share < 0.5, "attacker {agent}: {share}"),
        }
    }
}

#[test]
fn csv_artifacts_carry_provenance() {
    let prov = Provenance {
        config_hash: Some("abc".into()),
        seed: Some(3),
    };
    let map = VisitationMap {
        width: 2,
        height: 1,
        counts: vec![vec![4, 0]],
    };
    assert_eq!(visits_csv(&map, &prov), "# config_hash=abc seed=3\nagent,x,y,count\n0,0,0,4\n0,1,0,0\n");
}

// ---------------------------------------------------------------------
// Experiments

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn an_experiment_writes_stamped_reproducible_artifacts() {
    let mut cfg = example();
    cfg.seeds = vec![4];
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let manifest = run_experiment(&cfg, Path::new("."), &a, RunOptions::default()).unwrap();
    let hash = cfg.hash(Path::new(".")).unwrap();
    assert_eq!(manifest.config_hash, hash);

    let transfer = manifest.run("transfer", 4).unwrap();
    assert_eq!(transfer.phases.len(), 2);
    let scratch = manifest.run("scratch", 4).unwrap();
    assert_eq!(scratch.phases.len(), 1, "the scratch arm skips pre-training");
    assert_eq!(scratch.phases[0].phase, crate::policy::Phase::Target);

    for rel in [
        "transfer/seed-4/source/metrics.jsonl",
        "transfer/seed-4/target/metrics.jsonl",
        "scratch/seed-4/target/metrics.jsonl",
    ] {
        let text = read(&a.join(rel));
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["config_hash"], hash.as_str());
            assert_eq!(v["seed"], 4);
        }
    }
    for rel in ["transfer/seed-4/pca.csv", "transfer/seed-4/visits.csv", "scratch/seed-4/visits.csv"] {
        assert!(read(&a.join(rel)).starts_with(&format!("# config_hash={hash} seed=4\n")), "{rel}");
    }
    assert!(!a.join("scratch/seed-4/pca.csv").exists());
    let eval: serde_json::Value = serde_json::from_str(&read(&a.join("transfer/seed-4/target/eval.json"))).unwrap();
    assert_eq!(eval["config_hash"], hash.as_str());
    let traces = read_traces(&a.join("transfer/seed-4/target/eval_traces.jsonl")).unwrap();
    assert!(traces.iter().all(|t| t.header.config_hash.as_deref() == Some(hash.as_str())));
    let report: EvalReport = serde_json::from_value(eval["report"].clone()).unwrap();
    assert_eq!(report, EvalReport::from_traces(&traces));
    let bundle = crate::trainer::TransferBundle::load(a.join("transfer/seed-4/target/bundle.rmtb")).unwrap();
    assert_eq!(bundle.header.config_hash.as_deref(), Some(hash.as_str()));
    assert_eq!(bundle.header.seed, Some(4));

    let again = run_experiment(&cfg, Path::new("."), &b, RunOptions::default()).unwrap();
    assert_eq!(again, manifest);
    for rel in [
        "transfer/seed-4/source/metrics.jsonl",
        "transfer/seed-4/target/metrics.jsonl",
        "scratch/seed-4/target/metrics.jsonl",
        "transfer/seed-4/pca.csv",
        "transfer/seed-4/target/eval_traces.jsonl",
    ] {
        assert_eq!(read(&a.join(rel)), read(&b.join(rel)), "{rel}");
    }
    assert_eq!(
        std::fs::read(a.join("transfer/seed-4/target/bundle.rmtb")).unwrap(),
        std::fs::read(b.join("transfer/seed-4/target/bundle.rmtb")).unwrap()
    );
}

#[test]
fn transferring_without_a_source_bundle_is_a_config_error() {
    let cfg = example();
    let dir = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        phases: PhaseSelect::Target,
        ..RunOptions::default()
    };
    let err = run_experiment(&cfg, Path::new("."), dir.path(), opts).unwrap_err();
    assert!(err.is_config(), "{err}");
}

#[test]
fn phase_failures_name_the_phase() {
    let mut cfg = example();
    cfg.seeds = vec![2];
    cfg.source.as_mut().unwrap().demos = 0;
    cfg.arms.truncate(1);
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&cfg, Path::new("."), dir.path(), RunOptions::default()).unwrap_err();
    match &err {
        HarnessError::Phase { arm, seed, phase, source } => {
            assert_eq!((arm.as_str(), *seed, *phase), ("transfer", 2, crate::policy::Phase::Source));
            assert!(matches!(source, TrainError::MissingDemos));
        }
        other => panic!("unexpected {other}"),
    }
    assert!(!err.is_config());
}
