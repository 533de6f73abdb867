use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageRecord {
    /// Digest of everything the stage's outputs depend on.
    pub key: String,
    pub wall_seconds: f64,
    pub inputs: Vec<String>,
    pub outputs: Vec<FileRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    pub tool_version: String,
    pub config: RunConfig,
    pub lambda: f64,
    pub seed: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = fs::read(path)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

pub fn digest_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let text = serde_json::to_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

impl Manifest {
    /// The manifest in `out`, or a fresh one for `config`. A manifest written
    /// by a different format version is discarded with a warning.
    pub fn open(out: &Path, config: &RunConfig) -> Result<Self, CliError> {
        let path = out.join(MANIFEST);
        let fresh = || -> Result<Manifest, CliError> {
            Ok(Manifest {
                format: FORMAT_VERSION,
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config: config.clone(),
                lambda: config.lambda()?,
                seed: config.seed,
                stages: BTreeMap::new(),
            })
        };
        if !path.exists() {
            return fresh();
        }
        let mut m: Manifest = match serde_json::from_slice(&fs::read(&path)?) {
            Ok(m) => m,
            Err(e) => {
                log::warn!("unreadable manifest ({e}); starting a new one");
                return fresh();
            }
        };
        if m.format != FORMAT_VERSION {
            log::warn!("manifest format {} differs from {FORMAT_VERSION}; starting a new one", m.format);
            return fresh();
        }
        m.config = config.clone();
        m.lambda = config.lambda()?;
        m.seed = config.seed;
        m.tool_version = env!("CARGO_PKG_VERSION").into();
        Ok(m)
    }

    pub fn save(&self, out: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(out.join(MANIFEST), text)?;
        Ok(())
    }

    /// Checks that `stage` ran with the expected key and that its outputs are
    /// unchanged on disk.
    pub fn require(&self, out: &Path, stage: &str, key: &str, needed_by: &str) -> Result<(), CliError> {
        let rec = self
            .stages
            .get(stage)
            .ok_or_else(|| CliError::Dependency(format!("{needed_by} needs the outputs of `{stage}`, which has not been run")))?;
        if rec.key != key {
            return Err(CliError::Dependency(format!(
                "outputs of `{stage}` are stale for the current configuration; rerun `{stage}` before `{needed_by}`"
            )));
        }
        for f in &rec.outputs {
            let p = out.join(&f.path);
            if !p.exists() {
                return Err(CliError::Dependency(format!("`{stage}` output {} is missing", f.path)));
            }
            let (sum, _) = sha256_file(&p)?;
            if sum != f.sha256 {
                return Err(CliError::Dependency(format!("`{stage}` output {} changed since it was written", f.path)));
            }
        }
        Ok(())
    }

    pub fn record(&mut self, out: &Path, stage: &str, key: String, wall_seconds: f64, inputs: Vec<String>, outputs: &[PathBuf]) -> Result<(), CliError> {
        let mut files = Vec::with_capacity(outputs.len());
        for p in outputs {
            let (sha256, bytes) = sha256_file(&out.join(p))?;
            files.push(FileRecord { path: p.to_string_lossy().replace('\\', "/"), sha256, bytes });
        }
        self.stages.insert(stage.into(), StageRecord { key, wall_seconds, inputs, outputs: files });
        Ok(())
    }
}
