//! The artifact directory: file layout, manifests and staleness checks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MARKET: &str = "market.json";
pub const EMBEDDINGS: &str = "embeddings.bin";
pub const SESSIONS: &str = "sessions.ndjson";
pub const CAROUSEL_SESSIONS: &str = "carousel.ndjson";
pub const TRAIN_DIR: &str = "dataset/train";
pub const TEST_DIR: &str = "dataset/test";
pub const MODELS_DIR: &str = "models";
pub const EVAL_REPORT: &str = "eval.json";
pub const AB_REPORT: &str = "abtest.json";
pub const LADDER_REPORT: &str = "ladder.json";
pub const LADDER_POINTS: &str = "ladder.tsv";
const MANIFEST_DIR: &str = "manifests";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Generate,
    BuildDataset,
    Train,
    Eval,
    AbTest,
    Ladder,
}

impl Stage {
    /// The subcommand that produces this stage's artifacts.
    pub fn command(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::BuildDataset => "build-dataset",
            Stage::Train => "train",
            Stage::Eval => "eval",
            Stage::AbTest => "abtest",
            Stage::Ladder => "ladder",
        }
    }

    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Generate | Stage::Ladder => &[],
            Stage::BuildDataset => &[Stage::Generate],
            Stage::Train => &[Stage::BuildDataset],
            Stage::Eval => &[Stage::Generate, Stage::BuildDataset, Stage::Train],
            Stage::AbTest => &[Stage::Generate, Stage::Train],
        }
    }
}

/// Everything needed to re-derive a stage's outputs: the configuration
/// hash, the tool version and the hashes of what was read and written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// Artifact path (relative to the artifact directory) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Artifacts {
    root: PathBuf,
    config_hash: String,
    seed: u64,
    force: bool,
}

impl Artifacts {
    pub fn new(root: PathBuf, config_hash: String, seed: u64, force: bool) -> Self {
        Artifacts {
            root,
            config_hash,
            seed,
            force,
        }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn manifest_path(&self, stage: Stage) -> PathBuf {
        self.root.join(MANIFEST_DIR).join(format!("{}.json", stage.command()))
    }

    fn read_manifest(&self, stage: Stage) -> Result<Option<Manifest>, CliError> {
        let path = self.manifest_path(stage);
        match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map(Some)
                .map_err(|e| CliError::Stale(format!("{} is unreadable ({e}); rerun `collrec {}`", path.display(), stage.command()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    /// Checks that every upstream stage of `stage` has current artifacts and
    /// returns their hashes, keyed by path, as this stage's inputs.
    pub fn require_upstream(&self, stage: Stage) -> Result<BTreeMap<String, String>, CliError> {
        let mut inputs = BTreeMap::new();
        for &up in stage.upstream() {
            let manifest = self.read_manifest(up)?.ok_or_else(|| CliError::MissingArtifact {
                path: self.manifest_path(up),
                producer: up.command(),
            })?;
            if manifest.config_hash != self.config_hash && !self.force {
                return Err(CliError::Stale(format!(
                    "artifacts of `collrec {}` in {} were built from a different configuration; rerun it or pass --force",
                    up.command(),
                    self.root.display()
                )));
            }
            for (rel, hash) in &manifest.outputs {
                let path = self.path(rel);
                let bytes = match fs::read(&path) {
                    Ok(b) => b,
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                        return Err(CliError::MissingArtifact {
                            path,
                            producer: up.command(),
                        })
                    }
                    Err(e) => return Err(CliError::io(path, e)),
                };
                if &sha256_hex(&bytes) != hash && !self.force {
                    return Err(CliError::Stale(format!(
                        "{} changed after `collrec {}` wrote it; rerun that command",
                        path.display(),
                        up.command()
                    )));
                }
                inputs.insert(rel.clone(), sha256_hex(&bytes));
            }
        }
        Ok(inputs)
    }

    /// Refuses to overwrite outputs of `stage` written under another
    /// configuration, unless forced.
    pub fn check_overwrite(&self, stage: Stage) -> Result<(), CliError> {
        match self.read_manifest(stage)? {
            Some(m) if m.config_hash != self.config_hash && !self.force => Err(CliError::Stale(format!(
                "{} holds `collrec {}` output from a different configuration; pass --force to overwrite",
                self.root.display(),
                stage.command()
            ))),
            _ => Ok(()),
        }
    }

    pub fn write(&self, rel: &str, bytes: &[u8]) -> Result<String, CliError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(rel.to_string())
    }

    /// `path` relative to the artifact root, with `/` separators.
    pub fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    }

    pub fn read(&self, rel: &str, producer: Stage) -> Result<Vec<u8>, CliError> {
        let path = self.path(rel);
        fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingArtifact {
                path,
                producer: producer.command(),
            },
            _ => CliError::io(&path, e),
        })
    }

    /// Records `stage`'s manifest once its outputs are written.
    pub fn commit(&self, stage: Stage, inputs: BTreeMap<String, String>, outputs: &[String]) -> Result<(), CliError> {
        let mut hashes = BTreeMap::new();
        for rel in outputs {
            let bytes = self.read(rel, stage)?;
            hashes.insert(rel.clone(), sha256_hex(&bytes));
        }
        let manifest = Manifest {
            command: stage.command().to_string(),
            tool_version: format!("collrec {}", env!("CARGO_PKG_VERSION")),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            inputs,
            outputs: hashes,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let rel = format!("{MANIFEST_DIR}/{}.json", stage.command());
        self.write(&rel, text.as_bytes())?;
        Ok(())
    }
}
