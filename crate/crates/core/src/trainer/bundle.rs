use std::fmt;
use std::path::Path;

use rand::Rng;
use rolemix_tensor::Checkpoint;
use serde::{Deserialize, Serialize};

use super::config::{MixerVariant, ModelConfig};
use super::optim::RmsPropConfig;
use super::{Learner, TeamLayout, TrainError, MIXER_PREFIX, POLICY_PREFIX};
use crate::mixer::MixerError;

pub const BUNDLE_MAGIC: &[u8; 4] = b"RMTB";
pub const BUNDLE_FORMAT: u32 = 1;

/// Compatibility header written in front of the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHeader {
    pub format_version: u32,
    pub obs_dim: usize,
    pub hidden: usize,
    pub mixer_hidden: usize,
    pub k: usize,
    pub state_dim: usize,
    pub variant: MixerVariant,
    /// Team size the weights were trained with.
    pub agents: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl BundleHeader {
    /// Network sizes the weights were trained with.
    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden,
            mixer_hidden: self.mixer_hidden,
            k: self.k,
            variant: self.variant,
        }
    }
}

/// One header field that disagrees with the receiving configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldDiff {
    pub field: &'static str,
    pub bundle: String,
    pub expected: String,
}

impl FieldDiff {
    pub fn describe(diffs: &[FieldDiff]) -> String {
        diffs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for FieldDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} is {} in the bundle but {} here", self.field, self.bundle, self.expected)
    }
}

/// Policy and mixer weights plus the header needed to check that they fit
/// a new team.
///
/// File layout: `b"RMTB"`, header length (`u32` little-endian), JSON
/// header, then a tensor checkpoint with `policy.*` and `mixer.*` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferBundle {
    pub header: BundleHeader,
    pub weights: Checkpoint<f32>,
}

impl TransferBundle {
    pub fn from_learner(learner: &Learner) -> Self {
        Self {
            header: BundleHeader {
                format_version: BUNDLE_FORMAT,
                obs_dim: learner.layout.obs_dim,
                hidden: learner.model.hidden,
                mixer_hidden: learner.model.mixer_hidden,
                k: learner.model.k,
                state_dim: learner.layout.state_dim,
                variant: learner.model.variant,
                agents: learner.layout.agents,
                config_hash: None,
                seed: None,
            },
            weights: Checkpoint::from_store(&learner.store, ""),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let mut out = Vec::with_capacity(8 + header.len());
        out.extend_from_slice(BUNDLE_MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&self.weights.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        let bad = |m: &str| TrainError::Bundle(m.to_string());
        if bytes.len() < 8 || &bytes[..4] != BUNDLE_MAGIC {
            return Err(bad("bad magic"));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().expect("four bytes")) as usize;
        let header_bytes = bytes.get(8..8 + len).ok_or_else(|| bad("truncated header"))?;
        let header: BundleHeader =
            serde_json::from_slice(header_bytes).map_err(|e| TrainError::Bundle(format!("header: {e}")))?;
        if header.format_version != BUNDLE_FORMAT {
            return Err(TrainError::Incompatible(vec![FieldDiff {
                field: "format_version",
                bundle: header.format_version.to_string(),
                expected: BUNDLE_FORMAT.to_string(),
            }]));
        }
        let weights = Checkpoint::from_bytes(&bytes[8 + len..])?;
        Ok(Self { header, weights })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// Header fields that disagree with a receiving model and layout.
    pub fn diff(&self, model: &ModelConfig, layout: &TeamLayout) -> Vec<FieldDiff> {
        let h = &self.header;
        let mut diffs = Vec::new();
        let mut check = |field, bundle: usize, expected: usize| {
            if bundle != expected {
                diffs.push(FieldDiff {
                    field,
                    bundle: bundle.to_string(),
                    expected: expected.to_string(),
                });
            }
        };
        check("obs_dim", h.obs_dim, layout.obs_dim);
        check("hidden", h.hidden, model.hidden);
        check("mixer_hidden", h.mixer_hidden, model.mixer_hidden);
        check("k", h.k, model.k);
        if h.variant.is_role() != model.variant.is_role() {
            diffs.push(FieldDiff {
                field: "variant",
                bundle: h.variant.name().into(),
                expected: model.variant.name().into(),
            });
        }
        diffs
    }
}

/// Builds a learner for a (possibly larger) team from a bundle.
///
/// The agent network and the observation hyper-network `U1`, `U2` are
/// copied verbatim. State heads are copied when the summary width matches
/// and freshly initialised otherwise. The state-conditioned baseline has
/// team-sized weights and only loads into the team size it was built for.
/// Optimiser state starts fresh and the target networks start equal to the
/// loaded weights.
pub fn load_transfer<R: Rng + ?Sized>(
    bundle: &TransferBundle,
    model: ModelConfig,
    layout: TeamLayout,
    optimizer: RmsPropConfig,
    target_refresh: u64,
    rng: &mut R,
) -> Result<Learner, TrainError> {
    let diffs = bundle.diff(&model, &layout);
    if !diffs.is_empty() {
        return Err(TrainError::Incompatible(diffs));
    }
    if !model.variant.is_role() && bundle.header.agents != layout.agents {
        return Err(MixerError::TeamSize {
            expected: bundle.header.agents,
            got: layout.agents,
        }
        .into());
    }
    let mut learner = Learner::new(model, layout, optimizer, target_refresh, rng)?;
    bundle.weights.filter_prefix(POLICY_PREFIX).load_into(&mut learner.store)?;
    if model.variant.is_role() {
        let mut hyper = Checkpoint::new();
        for name in ["u1", "u2"] {
            let full = format!("{MIXER_PREFIX}{name}");
            let t = bundle
                .weights
                .get(&full)
                .ok_or_else(|| TrainError::Bundle(format!("missing {full}")))?;
            hyper.insert(full, t.clone());
        }
        hyper.load_into(&mut learner.store)?;
        if bundle.header.state_dim == layout.state_dim {
            bundle
                .weights
                .filter_prefix(&format!("{MIXER_PREFIX}head."))
                .load_into(&mut learner.store)?;
        } else {
            log::info!(
                "state summary width changed ({} -> {}); mixer state heads freshly initialised",
                bundle.header.state_dim,
                layout.state_dim
            );
        }
    } else {
        bundle.weights.filter_prefix(MIXER_PREFIX).load_into(&mut learner.store)?;
    }
    learner.refresh_target();
    Ok(learner)
}
