use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rolemix::env::MapSpec;
use rolemix::expert::{generate_demos, DemoSet};
use rolemix::harness::{
    analysis_episodes, evaluate, learner_from_bundle, pca_csv, pca_project, read_traces, resolve_map,
    role_weight_samples, run_experiment, silhouette, visitation_map, visits_csv, write_traces, ExperimentConfig,
    HarnessError, PcaDriver, PhaseSelect, Provenance, RunOptions,
};
use rolemix::expert::Role;
use rolemix::trainer::{TransferBundle, EVAL_SEED_OFFSET};

/// Role-based value mixing for cooperative teams: demonstrations, training,
/// transfer to larger teams, evaluation and analysis.
#[derive(Parser)]
#[command(name = "rolemix", version)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Run this seed only, instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; artifacts go to `<out>/<experiment name>`.
    #[arg(long, env = "ROLEMIX_OUT")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate scripted demonstrations on the source map.
    DemoGen {
        #[command(flatten)]
        common: Common,
    },
    /// Run the source phase.
    Train {
        #[command(flatten)]
        common: Common,
        /// Previously generated demonstrations (a `demo-gen` output directory).
        #[arg(long)]
        demos: Option<PathBuf>,
    },
    /// Run the target phase, starting transferring arms from a bundle.
    TransferTrain {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Greedy evaluation of a bundle.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        /// Map name or file; defaults to the target map, else the source map.
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Project role-selection weights onto two principal components.
    AnalyzePca {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        map: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        /// Who drives the analysed episodes.
        #[arg(long, value_parser = ["greedy", "expert"])]
        driver: Option<String>,
    },
    /// Per-agent visitation counts from saved evaluation traces.
    AnalyzeVisits {
        #[command(flatten)]
        common: Common,
        /// A `eval_traces.jsonl` file.
        #[arg(long)]
        traces: PathBuf,
        #[arg(long)]
        map: Option<String>,
    },
    /// Every phase and analysis of the experiment.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

struct Loaded {
    cfg: ExperimentConfig,
    base: PathBuf,
    out: PathBuf,
    hash: String,
}

fn load(common: &Common) -> Result<Loaded, HarnessError> {
    let (mut cfg, base) = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    let out = match (&common.out, &cfg.output) {
        (Some(root), _) => root.join(&cfg.name),
        (None, Some(dir)) => dir.clone(),
        (None, None) => Path::new("runs").join(&cfg.name),
    };
    let hash = cfg.hash(&base)?;
    Ok(Loaded { cfg, base, out, hash })
}

impl Loaded {
    /// An explicit map, else the target map, else the source map.
    fn map(&self, explicit: Option<&str>) -> Result<Arc<MapSpec>, HarnessError> {
        let name = explicit
            .map(str::to_string)
            .or_else(|| self.cfg.target.as_ref().map(|t| t.map.clone()))
            .or_else(|| self.cfg.source.as_ref().map(|s| s.map.clone()))
            .ok_or_else(|| HarnessError::Config("no map given".into()))?;
        Ok(Arc::new(resolve_map(&name, &self.base)?))
    }

    fn eval_episodes(&self) -> usize {
        self.cfg
            .target
            .as_ref()
            .map(|t| t.train.eval_episodes)
            .or_else(|| self.cfg.source.as_ref().map(|s| s.train.eval_episodes))
            .unwrap_or(32)
    }

    fn seed(&self) -> u64 {
        self.cfg.seeds[0]
    }

    fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: Some(self.hash.clone()),
            seed: Some(self.seed()),
        }
    }

    fn create_out(&self) -> Result<(), HarnessError> {
        std::fs::create_dir_all(&self.out).map_err(|source| io(&self.out, source))
    }
}

fn io(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| io(path, e))
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn execute(verb: Verb) -> Result<(), HarnessError> {
    match verb {
        Verb::DemoGen { common } => {
            let l = load(&common)?;
            let source = l
                .cfg
                .source
                .as_ref()
                .ok_or_else(|| HarnessError::Config("demo-gen needs a [source] section".into()))?;
            let spec = resolve_map(&source.map, &l.base)?;
            let mut set = generate_demos(&spec, source.demos, source.demo_seed)?;
            for t in &mut set.traces {
                t.header.config_hash = Some(l.hash.clone());
            }
            let dir = l.out.join("demos");
            set.save(&dir)?;
            println!("{} demonstrations ({} steps) written to {}", set.len(), set.env_steps(), dir.display());
        }
        Verb::Train { common, demos } => {
            let l = load(&common)?;
            let source = l
                .cfg
                .source
                .as_ref()
                .ok_or_else(|| HarnessError::Config("train needs a [source] section".into()))?;
            let loaded = demos
                .map(|dir| -> Result<DemoSet, HarnessError> {
                    Ok(DemoSet::load(dir, &resolve_map(&source.map, &l.base)?)?)
                })
                .transpose()?;
            let opts = RunOptions {
                phases: PhaseSelect::Source,
                demos: loaded.as_ref(),
                ..RunOptions::default()
            };
            print_json(&run_experiment(&l.cfg, &l.base, &l.out, opts)?);
        }
        Verb::TransferTrain { common, bundle } => {
            let l = load(&common)?;
            let bundle = bundle.map(TransferBundle::load).transpose()?;
            let opts = RunOptions {
                phases: PhaseSelect::Target,
                init: bundle.as_ref(),
                ..RunOptions::default()
            };
            print_json(&run_experiment(&l.cfg, &l.base, &l.out, opts)?);
        }
        Verb::Evaluate {
            common,
            bundle,
            map,
            episodes,
        } => {
            let l = load(&common)?;
            let spec = l.map(map.as_deref())?;
            let bundle = TransferBundle::load(&bundle)?;
            let episodes = episodes.unwrap_or_else(|| l.eval_episodes());
            let (report, traces) = evaluate(&bundle, &spec, episodes, l.seed().wrapping_add(EVAL_SEED_OFFSET))?;
            l.create_out()?;
            let doc = serde_json::json!({
                "config_hash": l.hash,
                "seed": l.seed(),
                "map": spec.name,
                "report": report,
            });
            write(&l.out.join("eval.json"), &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"))?;
            write_traces(&l.out.join("eval_traces.jsonl"), &traces, Some(&l.hash))?;
            print_json(&doc);
        }
        Verb::AnalyzePca {
            common,
            bundle,
            map,
            episodes,
            driver,
        } => {
            let l = load(&common)?;
            let spec = l.map(map.as_deref())?;
            let learner = learner_from_bundle(&TransferBundle::load(&bundle)?, &spec)?;
            let driver = match driver.as_deref() {
                Some("expert") => PcaDriver::Expert,
                Some(_) => PcaDriver::Greedy,
                None => l.cfg.analysis.pca_driver,
            };
            let episodes = episodes.unwrap_or(l.cfg.analysis.pca_episodes);
            let (records, roles) =
                analysis_episodes(&learner, &spec, driver, episodes, l.seed().wrapping_add(EVAL_SEED_OFFSET))?;
            let samples = role_weight_samples(&learner, &records, roles.as_deref())?;
            let rows: Vec<Vec<f64>> = samples.iter().map(|s| s.weights.clone()).collect();
            let projection = pca_project(&rows)?;
            let sil = roles.as_ref().and_then(|_| {
                let labels: Vec<usize> = samples.iter().map(|s| usize::from(s.role == Some(Role::Attacker))).collect();
                silhouette(&projection.points, &labels)
            });
            l.create_out()?;
            write(&l.out.join("pca.csv"), &pca_csv(&samples, &projection, &l.provenance()))?;
            print_json(&serde_json::json!({
                "config_hash": l.hash,
                "seed": l.seed(),
                "samples": samples.len(),
                "variances": projection.variances,
                "total_variance": projection.total_variance,
                "silhouette": sil,
            }));
        }
        Verb::AnalyzeVisits { common, traces, map } => {
            let l = load(&common)?;
            let spec = l.map(map.as_deref())?;
            let traces = read_traces(&traces)?;
            let visits = visitation_map(&traces, &spec);
            l.create_out()?;
            let path = l.out.join("visits.csv");
            write(&path, &visits_csv(&visits, &l.provenance()))?;
            println!("{} episodes, visits written to {}", traces.len(), path.display());
        }
        Verb::Run { common } => {
            let l = load(&common)?;
            print_json(&run_experiment(&l.cfg, &l.base, &l.out, RunOptions::default())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.verb) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
