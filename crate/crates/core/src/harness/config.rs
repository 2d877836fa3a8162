use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::env::MapSpec;
use crate::trainer::{MixerVariant, ModelConfig, TrainConfig};

/// A complete, serialisable experiment: which maps each phase runs on, the
/// model and schedules, the seeds, optional comparison arms and analyses.
///
/// ```toml
/// name = "transfer"
/// seeds = [1, 2, 3]
///
/// [model]
/// k = 16
/// variant = "role-mixer+lstrr"
///
/// [source]
/// map = "pretrain"
/// demos = 50
/// train = { env_steps = 20000 }
///
/// [target]
/// map = "moderate"
/// train = { env_steps = 100000 }
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Output directory; the command line and `ROLEMIX_OUT` take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    /// Small-team pre-training with demonstrations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceConfig>,
    /// Larger-team training, transferred from the source phase when there
    /// is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetConfig>,
    /// Variants compared under identical schedules. Empty means a single
    /// arm with `model` as given.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arms: Vec<ArmConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

/// A map given either by built-in name (`pretrain`, `moderate`, `hard`) or
/// by path to a map file, relative to the configuration file.
pub type MapRef = String;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub map: MapRef,
    /// Scripted demonstrations generated before training.
    #[serde(default = "default_demos")]
    pub demos: usize,
    /// First environment seed tried by the demonstration generator.
    #[serde(default)]
    pub demo_seed: u64,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_demos() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub map: MapRef,
    #[serde(default)]
    pub train: TrainConfig,
}

/// One variant of a comparison. Unset fields fall back to `model`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<MixerVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Run the source phase and start the target phase from its bundle.
    /// When false the target phase trains from scratch.
    #[serde(default = "yes")]
    pub transfer: bool,
}

fn yes() -> bool {
    true
}

/// Which team drives the episodes whose role weights are projected.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaDriver {
    /// The trained team acting greedily.
    Greedy,
    /// The scripted expert, so each agent carries a known role label.
    Expert,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub pca: bool,
    pub visits: bool,
    pub pca_driver: PcaDriver,
    pub pca_episodes: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            pca: true,
            visits: true,
            pca_driver: PcaDriver::Greedy,
            pca_episodes: 32,
        }
    }
}

/// An arm with its settings resolved against the shared model.
#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub name: String,
    pub model: ModelConfig,
    pub transfer: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf), HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name {:?} must be a non-empty file name", self.name));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.source.is_none() && self.target.is_none() {
            return bad("nothing to run: neither [source] nor [target] is set".into());
        }
        let mut names: Vec<&str> = self.arms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) || names.iter().any(|n| n.is_empty() || n.contains(['/', '\\'])) {
            return bad("arm names must be distinct file names".into());
        }
        for arm in self.arms() {
            if arm.model.k == 0 || arm.model.hidden == 0 || arm.model.mixer_hidden == 0 {
                return bad(format!("arm {}: network sizes must be positive", arm.name));
            }
        }
        Ok(())
    }

    /// The arms to run; a single arm named after the variant when none are
    /// listed.
    pub fn arms(&self) -> Vec<Arm> {
        if self.arms.is_empty() {
            return vec![Arm {
                name: self.model.variant.name().replace('+', "-"),
                model: self.model,
                transfer: true,
            }];
        }
        self.arms
            .iter()
            .map(|a| Arm {
                name: a.name.clone(),
                model: ModelConfig {
                    variant: a.variant.unwrap_or(self.model.variant),
                    k: a.k.unwrap_or(self.model.k),
                    ..self.model
                },
                transfer: a.transfer,
            })
            .collect()
    }

    /// Stable identity of the experimental setup: the canonical form of
    /// everything that influences results plus the content of each map.
    /// Seeds and the output location are recorded separately and do not
    /// enter the hash.
    pub fn hash(&self, base: &Path) -> Result<String, HarnessError> {
        let mut canonical = self.clone();
        canonical.output = None;
        canonical.seeds.clear();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&canonical).expect("config serializes"));
        for map in [self.source.as_ref().map(|s| &s.map), self.target.as_ref().map(|t| &t.map)]
            .into_iter()
            .flatten()
        {
            h.update(resolve_map(map, base)?.content_hash().as_bytes());
        }
        Ok(h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}

/// A built-in map by name, otherwise a map file relative to `base`.
pub fn resolve_map(map: &str, base: &Path) -> Result<MapSpec, HarnessError> {
    if let Some(spec) = MapSpec::builtin(map) {
        return Ok(spec);
    }
    let path = base.join(map);
    MapSpec::load(&path).map_err(|e| HarnessError::Config(format!("map {map:?}: {e}")))
}
