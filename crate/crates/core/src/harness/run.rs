use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::analysis::{analysis_episodes, pca_project, role_weight_samples, silhouette, visitation_map};
use super::config::{resolve_map, Arm, ExperimentConfig};
use super::output::{create_dir, io_err, pca_csv, visits_csv, write_json, write_text, write_traces, Provenance};
use super::HarnessError;
use crate::env::MapSpec;
use crate::expert::{generate_demos, DemoSet, Role};
use crate::policy::Phase;
use crate::trainer::{
    run_phase, EvalReport, MixerVariant, PhaseConfig, PhaseOutput, TrainConfig, TrainError, TransferBundle,
    EVAL_SEED_OFFSET,
};

/// Which phases of an experiment to execute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhaseSelect {
    #[default]
    All,
    Source,
    Target,
}

/// Inputs that replace parts of a full run.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions<'a> {
    pub phases: PhaseSelect,
    /// Start of the target phase for transferring arms when the source
    /// phase is not run here.
    pub init: Option<&'a TransferBundle>,
    /// Demonstrations to use instead of generating them.
    pub demos: Option<&'a DemoSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub phase: Phase,
    pub map: String,
    pub env_steps: u64,
    pub final_eval: EvalReport,
    /// Directory of the phase's artifacts, relative to the output root.
    pub dir: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSeedResult {
    pub arm: String,
    pub seed: u64,
    pub variant: MixerVariant,
    pub k: usize,
    pub phases: Vec<PhaseResult>,
    /// Separation of scripted roles in the role-weight projection, when
    /// the expert drove the analysis episodes.
    pub silhouette: Option<f64>,
}

/// Index of everything a run wrote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub arms: Vec<String>,
    pub runs: Vec<ArmSeedResult>,
}

impl Manifest {
    pub fn run(&self, arm: &str, seed: u64) -> Option<&ArmSeedResult> {
        self.runs.iter().find(|r| r.arm == arm && r.seed == seed)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Executes the experiment into `out`: for every arm and seed the selected
/// phases, each writing `metrics.jsonl`, `eval.json`, `eval_traces.jsonl`
/// and `bundle.rmtb`, then the analyses of the last phase run (`pca.csv`,
/// `pca.json`, `visits.csv`). Finishes with `manifest.json`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base: &Path,
    out: &Path,
    opts: RunOptions<'_>,
) -> Result<Manifest, HarnessError> {
    cfg.validate()?;
    let hash = cfg.hash(base)?;
    create_dir(out)?;
    write_text(
        &out.join("config.toml"),
        &format!("# config_hash = \"{hash}\"\n{}", cfg.to_toml()),
    )?;
    let source = cfg
        .source
        .as_ref()
        .map(|s| resolve_map(&s.map, base).map(|m| (s, Arc::new(m))))
        .transpose()?;
    let target = cfg
        .target
        .as_ref()
        .map(|t| resolve_map(&t.map, base).map(|m| (t, Arc::new(m))))
        .transpose()?;
    let arms = cfg.arms();

    let run_source = |arm: &Arm| {
        source.is_some() && opts.phases != PhaseSelect::Target && (arm.transfer || target.is_none())
    };
    let generated;
    let demos = match (&source, opts.demos) {
        (_, Some(d)) => Some(d),
        (Some((s, spec)), None) if s.demos > 0 && arms.iter().any(run_source) => {
            log::info!("generating {} demonstrations on {}", s.demos, spec.name);
            let mut set = generate_demos(spec, s.demos, s.demo_seed)?;
            for t in &mut set.traces {
                t.header.config_hash = Some(hash.clone());
            }
            set.save(out.join("demos"))?;
            generated = set;
            Some(&generated)
        }
        _ => None,
    };

    let mut runs = Vec::new();
    for arm in &arms {
        for &seed in &cfg.seeds {
            let rel = format!("{}/seed-{seed}", arm.name);
            let dir = out.join(&rel);
            create_dir(&dir)?;
            let mut phases = Vec::new();
            let mut last: Option<(PhaseOutput, Arc<MapSpec>)> = None;
            let phase_err = |phase| {
                let arm = arm.name.clone();
                move |source: TrainError| HarnessError::Phase {
                    arm,
                    seed,
                    phase,
                    source,
                }
            };

            if run_source(arm) {
                let (s, spec) = source.as_ref().expect("source phase configured");
                let output = run_one(
                    &hash,
                    seed,
                    Phase::Source,
                    spec,
                    arm,
                    &s.train,
                    None,
                    demos,
                    &dir.join("source"),
                )
                .map_err(|e| lift(e, phase_err(Phase::Source)))?;
                phases.push(result(Phase::Source, spec, &output, format!("{rel}/source")));
                last = Some((output, spec.clone()));
            }
            if let (Some((t, spec)), true) = (&target, opts.phases != PhaseSelect::Source) {
                let init = if arm.transfer {
                    let bundle = last.as_ref().map(|(o, _)| &o.bundle).or(opts.init);
                    Some(bundle.ok_or_else(|| {
                        HarnessError::Config(format!(
                            "arm {} transfers but no source bundle is available; run the source phase or pass one",
                            arm.name
                        ))
                    })?)
                } else {
                    None
                };
                let output = run_one(&hash, seed, Phase::Target, spec, arm, &t.train, init, None, &dir.join("target"))
                    .map_err(|e| lift(e, phase_err(Phase::Target)))?;
                phases.push(result(Phase::Target, spec, &output, format!("{rel}/target")));
                last = Some((output, spec.clone()));
            }

            let mut sil = None;
            if let Some((output, spec)) = &last {
                let prov = Provenance {
                    config_hash: Some(hash.clone()),
                    seed: Some(seed),
                };
                if cfg.analysis.visits {
                    let map = visitation_map(&output.final_traces, spec);
                    write_text(&dir.join("visits.csv"), &visits_csv(&map, &prov))?;
                }
                if cfg.analysis.pca && arm.model.variant.is_role() {
                    let (records, roles) = analysis_episodes(
                        &output.learner,
                        spec,
                        cfg.analysis.pca_driver,
                        cfg.analysis.pca_episodes,
                        seed.wrapping_add(EVAL_SEED_OFFSET),
                    )?;
                    let samples = role_weight_samples(&output.learner, &records, roles.as_deref())?;
                    let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.weights.clone()).collect();
                    let projection = pca_project(&rows)?;
                    if roles.is_some() {
                        let labels: Vec<usize> = samples
                            .iter()
                            .map(|s| usize::from(s.role == Some(Role::Attacker)))
                            .collect();
                        sil = silhouette(&projection.points, &labels);
                    }
                    write_text(&dir.join("pca.csv"), &pca_csv(&samples, &projection, &prov))?;
                    write_json(
                        &dir.join("pca.json"),
                        &serde_json::json!({
                            "config_hash": hash,
                            "seed": seed,
                            "driver": cfg.analysis.pca_driver,
                            "samples": samples.len(),
                            "variances": projection.variances,
                            "total_variance": projection.total_variance,
                            "components": projection.components,
                            "silhouette": sil,
                        }),
                    )?;
                }
            }
            runs.push(ArmSeedResult {
                arm: arm.name.clone(),
                seed,
                variant: arm.model.variant,
                k: arm.model.k,
                phases,
                silhouette: sil,
            });
        }
    }

    let manifest = Manifest {
        name: cfg.name.clone(),
        config_hash: hash,
        seeds: cfg.seeds.clone(),
        arms: arms.iter().map(|a| a.name.clone()).collect(),
        runs,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// Attaches phase identification to training failures; harness-level
/// failures (I/O, configuration) pass through.
fn lift(e: HarnessError, wrap: impl FnOnce(TrainError) -> HarnessError) -> HarnessError {
    match e {
        HarnessError::Train(t) => wrap(t),
        other => other,
    }
}

fn result(phase: Phase, spec: &MapSpec, output: &PhaseOutput, dir: String) -> PhaseResult {
    PhaseResult {
        phase,
        map: spec.name.clone(),
        env_steps: output.env_steps,
        final_eval: output.final_eval.clone(),
        dir,
    }
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    hash: &str,
    seed: u64,
    phase: Phase,
    spec: &Arc<MapSpec>,
    arm: &Arm,
    train: &TrainConfig,
    init: Option<&TransferBundle>,
    demos: Option<&DemoSet>,
    dir: &Path,
) -> Result<PhaseOutput, HarnessError> {
    create_dir(dir)?;
    let cfg = PhaseConfig {
        phase,
        map: spec.clone(),
        seed,
        model: arm.model,
        train: *train,
        config_hash: Some(hash.to_string()),
    };
    let metrics_path = dir.join("metrics.jsonl");
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io_err(&metrics_path))?);
    let output = run_phase(&cfg, init, demos, &mut |record| {
        let line = serde_json::to_string(record).expect("metrics serialize");
        writeln!(metrics, "{line}")
            .and_then(|()| metrics.flush())
            .map_err(|source| TrainError::Io {
                path: metrics_path.display().to_string(),
                source,
            })
    })?;
    write_json(
        &dir.join("eval.json"),
        &serde_json::json!({
            "config_hash": hash,
            "seed": seed,
            "arm": arm.name,
            "phase": phase,
            "map": spec.name,
            "env_steps": output.env_steps,
            "report": output.final_eval,
        }),
    )?;
    write_traces(&dir.join("eval_traces.jsonl"), &output.final_traces, Some(hash))?;
    output.bundle.save(dir.join("bundle.rmtb"))?;
    Ok(output)
}
