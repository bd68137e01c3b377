//! Output directory layout, manifests and the configuration hash chain.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST_FORMAT: &str = "vmsr-manifest v1";
pub const MANIFEST_FILE: &str = "manifest.json";

/// A stage of the pipeline: the command producing it and its directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Envs,
    Collect,
    Inverse,
    Labels,
    Subroutines,
    Explore,
    Iou,
    Ablate,
    Report,
}

impl Stage {
    pub fn command(self) -> &'static str {
        match self {
            Stage::Envs => "gen-envs",
            Stage::Collect => "collect",
            Stage::Inverse => "train-inverse",
            Stage::Labels => "label",
            Stage::Subroutines => "train-subroutines",
            Stage::Explore => "explore",
            Stage::Iou => "iou",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }

    pub fn dir(self) -> &'static str {
        match self {
            Stage::Envs => "envs",
            Stage::Collect => "collect",
            Stage::Inverse => "inverse",
            Stage::Labels => "labels",
            Stage::Subroutines => "subroutines",
            Stage::Explore => "explore",
            Stage::Iou => "iou",
            Stage::Ablate => "ablate",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRef {
    pub command: String,
    pub manifest: String,
    pub manifest_sha256: String,
    pub stage_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Hash of the configuration this stage depends on, chained with the
    /// hashes of its inputs.
    pub stage_hash: String,
    pub inputs: Vec<InputRef>,
    pub outputs: Vec<OutputFile>,
    pub wall_time_s: f64,
    #[serde(default)]
    pub extra: serde_json::Value,
}

pub fn version() -> String {
    let describe = env!("VMSR_GIT_DESCRIBE");
    if describe.is_empty() {
        format!("v{}", env!("CARGO_PKG_VERSION"))
    } else {
        format!("v{}-{describe}", env!("CARGO_PKG_VERSION"))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| vmsr_core::Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

/// Hash of a serializable value together with upstream hashes.
pub fn chain_hash<T: Serialize>(label: &str, value: &T, upstream: &[&str]) -> String {
    let mut h = Sha256::new();
    h.update(label.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(value).expect("config serializes"));
    for u in upstream {
        h.update([0]);
        h.update(u.as_bytes());
    }
    hex(&h.finalize())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| vmsr_core::Error::io(path, e).into())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| vmsr_core::Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| vmsr_core::Error::format(path.display().to_string(), e.to_string()).into())
}

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn dir(&self, stage: Stage) -> PathBuf {
        self.root.join(stage.dir())
    }

    /// Creates the directory of `stage` (or of a sub-run below it).
    pub fn create(&self, rel: &Path) -> Result<PathBuf, CliError> {
        let dir = self.root.join(rel);
        std::fs::create_dir_all(&dir).map_err(|e| vmsr_core::Error::io(&dir, e))?;
        Ok(dir)
    }

    pub fn read_manifest(&self, rel: &Path, run_first: &'static str) -> Result<(Manifest, InputRef), CliError> {
        let path = self.root.join(rel).join(MANIFEST_FILE);
        if !path.is_file() {
            return Err(CliError::Missing {
                artifact: path.display().to_string(),
                run_first,
            });
        }
        let m: Manifest = read_json(&path)?;
        if m.format != MANIFEST_FORMAT {
            return Err(vmsr_core::Error::format(path.display().to_string(), format!("unexpected format {:?}", m.format)).into());
        }
        let r = InputRef {
            command: m.command.clone(),
            manifest: rel.join(MANIFEST_FILE).display().to_string(),
            manifest_sha256: sha256_file(&path)?,
            stage_hash: m.stage_hash.clone(),
        };
        Ok((m, r))
    }

    /// Reads the manifest of `stage` and checks it was produced by the
    /// current configuration.
    pub fn require(&self, stage: Stage, expected_hash: &str) -> Result<(Manifest, InputRef), CliError> {
        self.require_at(Path::new(stage.dir()), stage.command(), expected_hash)
    }

    pub fn require_at(&self, rel: &Path, run_first: &'static str, expected_hash: &str) -> Result<(Manifest, InputRef), CliError> {
        let (m, r) = self.read_manifest(rel, run_first)?;
        if m.stage_hash != expected_hash {
            return Err(CliError::Stale {
                artifact: self.root.join(rel).display().to_string(),
                run_first,
            });
        }
        Ok((m, r))
    }
}

/// Collects outputs of a running command and writes its manifest.
pub struct Recorder {
    started: Instant,
    dir: PathBuf,
    pub outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(dir: PathBuf) -> Self {
        Recorder {
            started: Instant::now(),
            dir,
            outputs: Vec::new(),
        }
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.outputs.push(p.clone());
        p
    }

    pub fn finish(
        self,
        command: &str,
        seed: u64,
        stage_hash: String,
        inputs: Vec<InputRef>,
        extra: serde_json::Value,
    ) -> Result<Manifest, CliError> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for p in &self.outputs {
            let rel = p.strip_prefix(&self.dir).unwrap_or(p);
            outputs.push(OutputFile {
                path: rel.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
        let m = Manifest {
            format: MANIFEST_FORMAT.into(),
            command: command.into(),
            version: version(),
            seed,
            stage_hash,
            inputs,
            outputs,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            extra,
        };
        write_json(&self.dir.join(MANIFEST_FILE), &m)?;
        Ok(m)
    }
}
