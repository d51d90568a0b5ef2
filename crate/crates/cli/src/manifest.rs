//! Run manifests: what went in, with which settings, and what came out.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use toda_spectrum::config::Tolerances;
use toda_spectrum::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Settings shared by every subcommand, recorded verbatim in the manifest.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub window: i64,
    pub mean_window: i64,
    pub step: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct InputRecord {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    inputs: &'a [InputRecord],
    inputs_sha256: String,
    config: &'a RunConfig,
    versions: Versions,
    artifacts: &'a [String],
}

#[derive(Debug, Serialize)]
struct Versions {
    toda_spectrum: &'static str,
    format: u32,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects inputs and artifacts during a run, then writes the manifest.
pub struct Run {
    command: String,
    out: PathBuf,
    config: RunConfig,
    inputs: Vec<InputRecord>,
    artifacts: Vec<String>,
}

impl Run {
    pub fn new(command: &str, out: &Path, config: RunConfig) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
        Ok(Self {
            command: command.to_string(),
            out: out.to_path_buf(),
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// Read an input file and record its hash. Only the file name is kept,
    /// so the manifest does not depend on where the run was started.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.push(InputRecord {
            name,
            sha256: hex(&Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn write_artifact(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Serialize `value` as pretty JSON with a top-level `manifest` field.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut v = serde_json::to_value(value).map_err(|e| Error::Io(e.to_string()))?;
        match v.as_object_mut() {
            Some(obj) => {
                obj.insert("manifest".into(), MANIFEST_NAME.into());
            }
            None => v = serde_json::json!({ "manifest": MANIFEST_NAME, "value": v }),
        }
        let mut text = serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write_artifact(name, text.as_bytes())
    }

    pub fn finish(self) -> Result<()> {
        let mut all = Sha256::new();
        for r in &self.inputs {
            all.update(r.name.as_bytes());
            all.update([0]);
            all.update(r.sha256.as_bytes());
        }
        let m = Manifest {
            command: &self.command,
            inputs: &self.inputs,
            inputs_sha256: hex(&all.finalize()),
            config: &self.config,
            versions: Versions {
                toda_spectrum: env!("CARGO_PKG_VERSION"),
                format: 1,
            },
            artifacts: &self.artifacts,
        };
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        let path = self.out.join(MANIFEST_NAME);
        fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Comment line placed at the top of CSV artifacts.
pub fn csv_comment() -> String {
    format!("manifest: {MANIFEST_NAME}")
}
