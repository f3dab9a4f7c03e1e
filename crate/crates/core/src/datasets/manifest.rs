use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::io::{parse_csv_with, parse_libsvm, CsvOptions, TargetColumn};
use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub format: DataFormat,
    /// CSV target column (name or zero-based index). Ignored for LIBSVM.
    #[serde(default)]
    pub target: Option<String>,
    /// LIBSVM feature dimension, when the file may not mention the last one.
    #[serde(default)]
    pub dim: Option<usize>,
    /// Lower-case hex SHA-256 of the file; verified on load when present.
    #[serde(default)]
    pub sha256: Option<String>,
    #[serde(default)]
    pub url: Option<String>,
}

/// Dataset manifest: `[datasets.<name>]` tables in TOML.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub datasets: BTreeMap<String, ManifestEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| Error::Format(format!("manifest: {e}")))?;
        m.base_dir = base_dir.into();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn resolve_path(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn entry(&self, name: &str) -> Option<&ManifestEntry> {
        self.datasets.get(name)
    }

    /// Reads and parses the named dataset, checking the pinned checksum.
    pub fn load_dataset(&self, name: &str) -> Result<Dataset> {
        let entry = self
            .entry(name)
            .ok_or_else(|| Error::invalid(format!("dataset {name:?} is not in the manifest")))?;
        let path = self.resolve_path(entry);
        let bytes = fs::read(&path)?;
        if let Some(expected) = &entry.sha256 {
            let actual = sha256_hex(&bytes);
            if !actual.eq_ignore_ascii_case(expected) {
                return Err(Error::invalid(format!(
                    "checksum mismatch for {}: expected {expected}, got {actual}",
                    path.display()
                )));
            }
        }
        let mut ds = match entry.format {
            DataFormat::Libsvm => parse_libsvm(BufReader::new(bytes.as_slice()), entry.dim)?,
            DataFormat::Csv => {
                let target = entry
                    .target
                    .as_deref()
                    .ok_or_else(|| Error::invalid(format!("CSV dataset {name:?} needs a target column")))?;
                let target: TargetColumn = target.parse().expect("infallible");
                parse_csv_with(bytes.as_slice(), &CsvOptions::new(target))?
            }
        };
        if let Some(dim) = entry.dim {
            if ds.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "manifest feature dimension",
                    expected: dim,
                    actual: ds.dim(),
                });
            }
        }
        ds.meta.name = name.to_string();
        ds.meta.source = path.display().to_string();
        Ok(ds)
    }
}
