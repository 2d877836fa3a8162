use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ExpertError, ScriptedExpert};
use crate::env::{run_episode, EpisodeRecord, EpisodeTrace, MapSpec};

pub const DEMO_TRACES: &str = "demos.jsonl";
pub const DEMO_MANIFEST: &str = "demos.json";

/// Below this many attempts a low success rate is not yet conclusive.
const MIN_ATTEMPTS_BEFORE_ABORT: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemoManifest {
    pub map: String,
    pub map_hash: String,
    /// Seeds of the stored episodes, in storage order.
    pub seeds: Vec<u64>,
    /// Seeds the expert failed on and that were skipped.
    pub rejected: Vec<u64>,
}

/// Successful scripted episodes: every one ends with all prey dead and no
/// breach.
#[derive(Clone, Debug)]
pub struct DemoSet {
    pub manifest: DemoManifest,
    pub episodes: Vec<EpisodeRecord>,
    pub traces: Vec<EpisodeTrace>,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn env_steps(&self) -> usize {
        self.episodes.iter().map(EpisodeRecord::len).sum()
    }

    /// Writes the traces as line-delimited records plus a JSON manifest.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), ExpertError> {
        let dir = dir.as_ref();
        let io = |e: std::io::Error| ExpertError::Storage {
            path: dir.display().to_string(),
            reason: e.to_string(),
        };
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut w = BufWriter::new(File::create(dir.join(DEMO_TRACES)).map_err(io)?);
        for t in &self.traces {
            t.write_jsonl(&mut w).map_err(io)?;
        }
        w.flush().map_err(io)?;
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(dir.join(DEMO_MANIFEST), manifest + "\n").map_err(io)?;
        Ok(())
    }

    /// Reads a saved set and rebuilds every episode by replay on `spec`,
    /// which must be the map the demos were recorded on.
    pub fn load(dir: impl AsRef<Path>, spec: &MapSpec) -> Result<Self, ExpertError> {
        let dir = dir.as_ref();
        let err = |reason: String| ExpertError::Storage {
            path: dir.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(dir.join(DEMO_MANIFEST)).map_err(|e| err(e.to_string()))?;
        let manifest: DemoManifest = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if manifest.map_hash != spec.content_hash() {
            return Err(err(format!(
                "recorded on map {} ({}), not {} ({})",
                manifest.map,
                manifest.map_hash,
                spec.name,
                spec.content_hash()
            )));
        }
        let file = File::open(dir.join(DEMO_TRACES)).map_err(|e| err(e.to_string()))?;
        let traces = EpisodeTrace::read_jsonl(BufReader::new(file))?;
        if traces.len() != manifest.seeds.len() {
            return Err(err(format!(
                "{} traces for {} manifest seeds",
                traces.len(),
                manifest.seeds.len()
            )));
        }
        let spec = Arc::new(spec.clone());
        let episodes = traces
            .iter()
            .map(|t| t.to_record(&spec, true))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            manifest,
            episodes,
            traces,
        })
    }
}

/// Plays the scripted expert on seeds `first_seed, first_seed + 1, ...` until
/// `n` episodes succeed. Failed seeds are logged and skipped; generation
/// aborts once at least ten seeds were tried and fewer than half succeeded.
pub fn generate_demos(spec: &MapSpec, n: usize, first_seed: u64) -> Result<DemoSet, ExpertError> {
    let mut expert = ScriptedExpert::new(spec)?;
    let shared = Arc::new(spec.clone());
    let mut set = DemoSet {
        manifest: DemoManifest {
            map: spec.name.clone(),
            map_hash: spec.content_hash(),
            seeds: Vec::new(),
            rejected: Vec::new(),
        },
        episodes: Vec::new(),
        traces: Vec::new(),
    };
    let mut seed = first_seed;
    while set.episodes.len() < n {
        let (rec, trace) = run_episode(&shared, seed, &mut expert, true)?;
        if rec.prey_cleared && !rec.breach {
            set.manifest.seeds.push(seed);
            set.episodes.push(rec);
            set.traces.push(trace);
        } else {
            log::warn!(
                "expert failed on seed {seed} (breach: {}, prey cleared: {})",
                rec.breach,
                rec.prey_cleared
            );
            set.manifest.rejected.push(seed);
            let attempts = set.episodes.len() + set.manifest.rejected.len();
            if attempts >= MIN_ATTEMPTS_BEFORE_ABORT && 2 * set.manifest.rejected.len() > attempts {
                return Err(ExpertError::Aborted {
                    successes: set.episodes.len(),
                    attempts,
                });
            }
        }
        seed = seed.wrapping_add(1);
    }
    Ok(set)
}
