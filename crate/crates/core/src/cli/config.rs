use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partitions::PartitionSpec;
use crate::sensitivity::{Notion, TargetSpec};
use crate::systems::SystemSpec;

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSpec>,
    #[serde(default)]
    pub params: Params,
    /// Explicit target sets; the adversarial family is used when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    /// Observation window `N` of sensitivity trials.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notion: Option<Notion>,
    /// Size of the adversarial target family.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Largest word length of the partition family sweep in `hstar`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<usize>,
    /// Pattern whose joint law `entropy` reports.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<usize>>,
    /// Sequence for the sequence-entropy profile in `entropy`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<usize>>,
    /// Also run the pattern-based witness construction in `sensitivity`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_budget: Option<usize>,
    /// Node budget of pattern searches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    Smoke,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub scale: Scale,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn system(&self) -> Result<&SystemSpec> {
        self.system
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [system] table".into()))
    }

    pub fn partition(&self) -> Result<&PartitionSpec> {
        self.partition
            .as_ref()
            .ok_or_else(|| Error::Config("config has no [partition] table".into()))
    }
}

/// Reads a required parameter.
pub(crate) fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing parameter `params.{name}`")))
}
