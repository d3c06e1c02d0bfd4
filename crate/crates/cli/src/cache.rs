//! Content-hash stage cache. A stage is skipped when its key (a hash of its
//! inputs, settings and version) matches the manifest and every recorded
//! output still has the recorded hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pacte::io::{sha256_hex, write_atomic};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Cached,
    Computed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct StageRecord {
    key: String,
    /// Workdir-relative path → sha256 of its content.
    outputs: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Manifest {
    stages: BTreeMap<String, StageRecord>,
}

/// The working directory and its manifest.
pub struct Workdir {
    root: PathBuf,
    manifest: Manifest,
}

/// Collects the files a stage produces.
pub struct StageOutputs<'a> {
    root: &'a Path,
    written: BTreeMap<String, String>,
}

impl StageOutputs<'_> {
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        write_atomic(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Fills the directory `rel` through `fill`, which writes into a scratch
    /// directory that replaces `rel` only once it succeeds.
    pub fn write_dir(&mut self, rel: &str, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let target = self.root.join(rel);
        let scratch = self.root.join(format!("{rel}.partial"));
        if scratch.exists() {
            fs::remove_dir_all(&scratch)?;
        }
        fs::create_dir_all(&scratch)?;
        if let Err(e) = fill(&scratch) {
            let _ = fs::remove_dir_all(&scratch);
            return Err(e);
        }
        if target.exists() {
            fs::remove_dir_all(&target)?;
        }
        fs::rename(&scratch, &target)
            .with_context(|| format!("moving output into {}", target.display()))?;
        let mut files: Vec<PathBuf> = fs::read_dir(&target)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        files.sort();
        for file in files {
            let name = file
                .file_name()
                .expect("directory entry")
                .to_string_lossy()
                .into_owned();
            let bytes = fs::read(&file)?;
            self.written
                .insert(format!("{rel}/{name}"), sha256_hex(&bytes));
        }
        Ok(())
    }
}

impl Workdir {
    pub fn open(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating workdir {}", root.display()))?;
        let path = root.join(MANIFEST_FILE);
        let manifest = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_else(|e| {
                log::warn!("ignoring unreadable manifest {}: {e}", path.display());
                Manifest::default()
            }),
            Err(_) => Manifest::default(),
        };
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// A hash of a stage's recorded outputs, for keying downstream stages.
    pub fn digest(&self, stage: &str) -> Option<String> {
        self.manifest
            .stages
            .get(stage)
            .map(|r| sha256_hex(&serde_json::to_vec(&r.outputs).expect("string map")))
    }

    pub fn outputs(&self, stage: &str) -> Vec<String> {
        self.manifest
            .stages
            .get(stage)
            .map(|r| r.outputs.keys().cloned().collect())
            .unwrap_or_default()
    }

    fn is_fresh(&self, stage: &str, key: &str) -> bool {
        let Some(record) = self.manifest.stages.get(stage) else {
            return false;
        };
        record.key == key
            && record.outputs.iter().all(|(rel, hash)| {
                fs::read(self.root.join(rel)).is_ok_and(|bytes| sha256_hex(&bytes) == *hash)
            })
    }

    /// Runs `compute` unless the stage is cached under `key`.
    pub fn run_stage(
        &mut self,
        stage: &str,
        key: &str,
        compute: impl FnOnce(&mut StageOutputs) -> Result<()>,
    ) -> Result<StageStatus> {
        if self.is_fresh(stage, key) {
            log::info!("stage {stage}: cached");
            return Ok(StageStatus::Cached);
        }
        log::info!("stage {stage}: running");
        let mut outputs = StageOutputs {
            root: &self.root,
            written: BTreeMap::new(),
        };
        compute(&mut outputs).with_context(|| format!("stage {stage} failed"))?;
        let written = outputs.written;
        self.manifest.stages.insert(
            stage.to_string(),
            StageRecord {
                key: key.to_string(),
                outputs: written,
            },
        );
        self.save()?;
        Ok(StageStatus::Computed)
    }

    fn save(&self) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(&self.manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.root.join(MANIFEST_FILE), &bytes).context("writing manifest")
    }
}

/// The cache key of a stage: its name, version and a JSON description of
/// every input.
pub fn stage_key(stage: &str, version: u32, inputs: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(&serde_json::json!({
        "stage": stage,
        "version": version,
        "inputs": inputs,
    }))
    .expect("json value");
    sha256_hex(&bytes)
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reruns_are_cached_until_inputs_or_outputs_change() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Workdir::open(dir.path()).unwrap();
        let mut runs = 0;
        let mut stage = |w: &mut Workdir, key: &str| {
            w.run_stage("s", key, |out| {
                runs += 1;
                out.write("s/a.txt", b"hello")
            })
            .unwrap()
        };
        assert_eq!(stage(&mut w, "k1"), StageStatus::Computed);
        assert_eq!(stage(&mut w, "k1"), StageStatus::Cached);
        let mut reopened = Workdir::open(dir.path()).unwrap();
        assert_eq!(stage(&mut reopened, "k1"), StageStatus::Cached);
        assert_eq!(stage(&mut reopened, "k2"), StageStatus::Computed);
        fs::write(dir.path().join("s/a.txt"), b"tampered").unwrap();
        assert_eq!(stage(&mut reopened, "k2"), StageStatus::Computed);
        assert_eq!(fs::read(dir.path().join("s/a.txt")).unwrap(), b"hello");
        assert_eq!(runs, 3);
    }

    #[test]
    fn failed_stage_leaves_no_output_and_no_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = Workdir::open(dir.path()).unwrap();
        let err = w.run_stage("s", "k", |out| {
            out.write_dir("d", |p| {
                fs::write(p.join("x"), b"1")?;
                anyhow::bail!("boom")
            })
        });
        assert!(format!("{:#}", err.unwrap_err()).contains("stage s failed: boom"));
        assert!(!dir.path().join("d").exists());
        assert!(!dir.path().join("d.partial").exists());
        assert!(w.digest("s").is_none());
    }
}
