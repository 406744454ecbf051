//! Run manifests: every artifact-producing subcommand records its resolved
//! configuration, input digests and seed next to the output, so a run can be
//! reproduced from the manifest alone.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::File;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    /// Input path → SHA-256 of its content.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
            seed: None,
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: String::new(),
        }
    }

    pub fn config_kv(&mut self, key: &str, value: impl Display) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn add_input(&mut self, path: &Path) -> io::Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Serializes the manifest with the finish timestamp filled in.
    pub fn finish_json(&mut self) -> String {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Manifest location for an output artifact: `<output>.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".to_string());
    name.push_str(".manifest.json");
    output.with_file_name(name)
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path_for(Path::new("/tmp/model.sk2v")),
            PathBuf::from("/tmp/model.sk2v.manifest.json")
        );
    }

    #[test]
    fn file_digest_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x");
        std::fs::write(&path, b"abc").unwrap();
        assert_eq!(
            sha256_file(&path).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_serializes_round_trip() {
        let mut m = RunManifest::new("train");
        m.config_kv("dim", 16);
        m.seed = Some(42);
        let json = m.finish_json();
        let back: RunManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.subcommand, "train");
        assert_eq!(back.config["dim"], "16");
        assert_eq!(back.seed, Some(42));
    }
}
