//! Run manifests: input file digests and run parameters, hashed so that every
//! output file can point back at the exact run that produced it.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Result, ThinlabError};
use crate::io::write_string;
use crate::optimizer::SearchConfig;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    pub inputs: BTreeMap<String, FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<SearchConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: "thinlab".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            mode: None,
            inputs: BTreeMap::new(),
            search: None,
            seed: None,
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|e| ThinlabError::io(path, e))?;
        self.inputs.insert(
            name.to_string(),
            FileDigest {
                path: path.display().to_string(),
                sha256: sha256_hex(&bytes),
            },
        );
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization cannot fail")
    }

    /// Short content hash recorded in the header of every output file.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("manifest serialization cannot fail");
        sha256_hex(canonical.as_bytes())[..16].to_string()
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        write_string(&out_dir.join("manifest.json"), &self.to_json())
    }

    /// Prefix a CSV body with the manifest reference line.
    pub fn stamp_csv(&self, body: &str) -> String {
        format!("# manifest={}\n{}", self.digest(), body)
    }
}
