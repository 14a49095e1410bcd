//! Versioned TOML run configuration. Command-line flags override it.

use crate::audio::SpectrogramKind;
use crate::augment::AugmentPolicy;
use crate::codec::write_atomic;
use crate::compress::{CompressionConfig, Variant};
use crate::error::{invalid_config, Error, Result};
use crate::report::DEFAULT_THRESHOLD;
use crate::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    /// Audio root; defaults to the manifest's directory.
    pub audio_root: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kind: SpectrogramKind,
    pub variant: Variant,
    /// Width overrides applied on top of the variant, keyed by block name.
    pub channels: BTreeMap<String, usize>,
    pub threshold: f64,
    pub train: TrainConfig,
    pub augment: AugmentPolicy,
    pub compression: Option<CompressionConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 0,
            manifest: None,
            audio_root: None,
            features: None,
            weights: None,
            out: None,
            kind: SpectrogramKind::Mel,
            variant: Variant::Baseline,
            channels: BTreeMap::new(),
            threshold: DEFAULT_THRESHOLD,
            train: TrainConfig::default(),
            augment: AugmentPolicy::default(),
            compression: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1).unwrap_or(0);
            Error::Parse { line, msg: e.message().to_string() }
        })?;
        if c.version != CONFIG_VERSION {
            return invalid_config(format!("config version {} unsupported (expected {CONFIG_VERSION})", c.version));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg } => Error::InvalidConfig(format!("{}:{line}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// SHA-256 of the effective configuration, output location excluded.
    pub fn digest_hex(&self) -> String {
        let json = serde_json::to_vec(&RunConfig { out: None, ..self.clone() }).unwrap_or_default();
        hex::encode(Sha256::digest(json))
    }

    pub fn provenance(&self, command: &str) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("tool".to_string(), format!("lowasc {}", env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), command.to_string()),
            ("config_digest".to_string(), self.digest_hex()),
            ("seed".to_string(), self.seed.to_string()),
        ])
    }
}

/// Sidecar `<file>.provenance.json` for outputs with no metadata slot.
pub fn write_provenance(output: &Path, prov: &BTreeMap<String, String>) -> Result<PathBuf> {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".provenance.json");
    let p = output.with_file_name(name);
    let body = serde_json::to_string_pretty(prov).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(&p, (body + "\n").as_bytes())?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let c = RunConfig::parse("version = 1\nseed = 4\nvariant = \"rd64\"\n[train]\nepochs_total = 3\nepochs_phase1 = 2\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.variant, Variant::Rd64);
        assert_eq!(c.train.epochs_total, 3);
        assert_eq!(c.train.batch_size, 64);
        assert_eq!(c.threshold, 0.3);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        match RunConfig::parse("version = 1\n\nbogus = 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::parse("version = 2\n"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn toml_round_trip_and_digest() {
        let c = RunConfig { seed: 9, ..Default::default() };
        let back = RunConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest_hex(), c.digest_hex());
        assert_ne!(RunConfig::default().digest_hex(), c.digest_hex());
    }
}
