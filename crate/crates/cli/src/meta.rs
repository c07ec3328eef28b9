//! Generator metadata written next to the realization files: global
//! constants plus per-realization seeds and Lipschitz constants.

use serde::{Deserialize, Serialize};
use std::path::Path;

/// Seeds are full-range u64 values; the file format only has signed
/// integers, so they travel as decimal strings.
mod u64_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    pub generator: MetaGenerator,
    #[serde(default)]
    pub realizations: Vec<MetaRealization>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetaGenerator {
    pub kind: String,
    #[serde(with = "u64_string")]
    pub master_seed: u64,
    /// Outcome scale C (news generator).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub outcome_scale: Option<f64>,
    /// Assignment-bias strength kappa (news generator).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetaRealization {
    pub index: usize,
    #[serde(with = "u64_string")]
    pub seed: u64,
    /// Lipschitz constant of the control outcome function.
    pub k0: f64,
    /// Lipschitz constant of the treated outcome function.
    pub k1: f64,
}

impl Meta {
    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let text = toml::to_string_pretty(self)?;
        std::fs::write(dir.join("meta.toml"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> anyhow::Result<Meta> {
        let path = dir.join("meta.toml");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(toml::from_str(&text)?)
    }

    pub fn constants_for(&self, index: usize) -> anyhow::Result<(f64, f64)> {
        self.realizations
            .iter()
            .find(|r| r.index == index)
            .map(|r| (r.k0, r.k1))
            .ok_or_else(|| {
                anyhow::anyhow!("meta.toml has no Lipschitz constants for realization {index}")
            })
    }
}
