use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::analysis::{Projection, VisitationMap, WeightSample};
use super::HarnessError;
use crate::env::EpisodeTrace;
use crate::expert::Role;

/// Identifies the run an artifact came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
}

impl Provenance {
    fn comment(&self) -> String {
        format!(
            "# config_hash={} seed={}\n",
            self.config_hash.as_deref().unwrap_or("none"),
            self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
        )
    }
}

pub(super) fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(super) fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(io_err(path))
}

pub(super) fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(io_err(path))
}

pub(super) fn write_json(path: &Path, value: &impl Serialize) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    write_text(path, &(text + "\n"))
}

/// Writes concatenated line-delimited traces, stamping each header with
/// the configuration hash.
pub fn write_traces(path: &Path, traces: &[EpisodeTrace], config_hash: Option<&str>) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for t in traces {
        let mut t = t.clone();
        t.header.config_hash = config_hash.map(str::to_string);
        t.write_jsonl(&mut w).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_traces(path: &Path) -> Result<Vec<EpisodeTrace>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(EpisodeTrace::read_jsonl(BufReader::new(file))?)
}

fn role_name(role: Option<Role>) -> &'static str {
    match role {
        Some(Role::Defender) => "defender",
        Some(Role::Attacker) => "attacker",
        None => "",
    }
}

/// `agent,x,y,role` per projected sample, after a provenance comment.
pub fn pca_csv(samples: &[WeightSample], projection: &Projection, prov: &Provenance) -> String {
    let mut out = prov.comment();
    out.push_str("agent,x,y,role\n");
    for (s, [x, y]) in samples.iter().zip(&projection.points) {
        writeln!(out, "{},{x},{y},{}", s.agent, role_name(s.role)).expect("write to string");
    }
    out
}

/// `agent,x,y,count` for every cell of every agent, after a provenance
/// comment.
pub fn visits_csv(map: &VisitationMap, prov: &Provenance) -> String {
    let mut out = prov.comment();
    out.push_str("agent,x,y,count\n");
    for (agent, grid) in map.counts.iter().enumerate() {
        for y in 0..map.height {
            for x in 0..map.width {
                writeln!(out, "{agent},{x},{y},{}", grid[y * map.width + x]).expect("write to string");
            }
        }
    }
    out
}
