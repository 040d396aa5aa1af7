//! Content-addressed, append-only artifact store.
//!
//! Layout under the dataset root:
//!
//! ```text
//! artifacts/<kind>/<first2-of-digest>/<digest>   immutable artifact bytes
//! raw-logs/<schema-filename>                      hard links for browsing
//! manifest.jsonl                                  one row version per line
//! dataset.json                                    format/digest header
//! DATASET.md                                      layout documentation
//! ```
//!
//! Artifacts are written once via temp-file + rename and never rewritten:
//! identical bytes hash to the same id. The manifest is an append-only
//! sequence of row versions; a later version for the same key may only
//! extend the earlier one (fill in the reconstruction record or verdict,
//! grow the artifact map). Loading folds to the latest version per key and
//! recovers from a torn trailing line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use phantomrun_core::model::{CIRun, FidelityVerdict, ReconstructionRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("artifact {digest} ({kind}) not found")]
    NotFound { digest: String, kind: ArtifactKind },
    #[error("artifact {digest} is corrupt on disk: content hashes to {actual}")]
    DigestMismatch { digest: String, actual: String },
    #[error("manifest already has row ({slug}, {run_id}, {target:?}) and the new row does not extend it")]
    DuplicateKey {
        slug: String,
        run_id: String,
        target: String,
    },
    #[error("manifest corrupt at line {line_no}: {message}")]
    Corrupt { line_no: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Storage class of an artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    RawLog,
    NormalizedLog,
    Dockerfile,
    BuildScript,
    ManifestRow,
}

impl ArtifactKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            ArtifactKind::RawLog => "raw_log",
            ArtifactKind::NormalizedLog => "normalized_log",
            ArtifactKind::Dockerfile => "dockerfile",
            ArtifactKind::BuildScript => "build_script",
            ArtifactKind::ManifestRow => "manifest_row",
        }
    }
}

impl std::fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.dir_name())
    }
}

/// What an artifact is to its manifest row. A row can hold two raw logs
/// (original and replay) and two normalized logs, so the map is keyed by
/// role, not by storage kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactRole {
    OriginalLog,
    ReplayLog,
    OriginalNormalized,
    ReplayNormalized,
    Dockerfile,
    BuildScript,
}

/// Content address of a stored artifact: same bytes, same id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArtifactId {
    pub digest: String,
    pub kind: ArtifactKind,
}

pub fn sha256_hex(content: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(content);
    let out = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Debug, Clone)]
pub struct ArtifactStore {
    root: PathBuf,
}

impl ArtifactStore {
    /// Opens (creating if needed) a store at `root`, writing the dataset
    /// header and layout documentation on first use.
    pub fn open(root: impl Into<PathBuf>) -> Result<ArtifactStore, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let store = ArtifactStore { root };
        let header = store.root.join("dataset.json");
        if !header.exists() {
            let meta = serde_json::json!({
                "format_version": DATASET_VERSION,
                "digest_algorithm": "sha256",
            });
            atomic_write(&header, meta.to_string().as_bytes())?;
        }
        let readme = store.root.join("DATASET.md");
        if !readme.exists() {
            atomic_write(&readme, DATASET_DOC.as_bytes())?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn artifact_path(&self, id: &ArtifactId) -> PathBuf {
        let (prefix, _) = id.digest.split_at(2);
        self.root
            .join("artifacts")
            .join(id.kind.dir_name())
            .join(prefix)
            .join(&id.digest)
    }

    /// Persists content under its digest. Re-putting identical bytes
    /// returns the same id without touching the existing file.
    pub fn put(&self, content: &[u8], kind: ArtifactKind) -> Result<ArtifactId, StoreError> {
        let id = ArtifactId {
            digest: sha256_hex(content),
            kind,
        };
        let path = self.artifact_path(&id);
        if path.exists() {
            return Ok(id);
        }
        let parent = path.parent().expect("artifact path has a parent");
        fs::create_dir_all(parent).map_err(io_err(parent))?;
        atomic_write(&path, content)?;
        Ok(id)
    }

    /// Returns the exact original bytes, verifying the digest on read.
    pub fn get(&self, id: &ArtifactId) -> Result<Vec<u8>, StoreError> {
        let path = self.artifact_path(id);
        let content = fs::read(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                StoreError::NotFound {
                    digest: id.digest.clone(),
                    kind: id.kind,
                }
            } else {
                StoreError::Io {
                    path: path.clone(),
                    source: e,
                }
            }
        })?;
        let actual = sha256_hex(&content);
        if actual != id.digest {
            return Err(StoreError::DigestMismatch {
                digest: id.digest.clone(),
                actual,
            });
        }
        Ok(content)
    }

    /// Hard-links a raw-log artifact under `raw-logs/` with its schema
    /// filename for human browsing. Name collisions with different
    /// content get a digest suffix.
    pub fn link_raw_log(&self, id: &ArtifactId, filename: &str) -> Result<PathBuf, StoreError> {
        let dir = self.root.join("raw-logs");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let src = self.artifact_path(id);
        let mut dst = dir.join(filename);
        if dst.exists() {
            let existing = fs::read(&dst).map_err(io_err(&dst))?;
            if sha256_hex(&existing) == id.digest {
                return Ok(dst);
            }
            let (stem, ext) = match filename.rsplit_once('.') {
                Some((s, e)) => (s.to_string(), format!(".{e}")),
                None => (filename.to_string(), String::new()),
            };
            dst = dir.join(format!("{stem}-{}{ext}", &id.digest[..8]));
            if dst.exists() {
                return Ok(dst);
            }
        }
        fs::hard_link(&src, &dst)
            .or_else(|_| fs::copy(&src, &dst).map(|_| ()))
            .map_err(io_err(&dst))?;
        Ok(dst)
    }
}

fn atomic_write(path: &Path, content: &[u8]) -> Result<(), StoreError> {
    let parent = path.parent().expect("path has a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(io_err(parent))?;
    tmp.write_all(content).map_err(io_err(path))?;
    tmp.flush().map_err(io_err(path))?;
    // a rename race means someone else wrote the same content first
    match tmp.persist(path) {
        Ok(_) => Ok(()),
        Err(e) if path.exists() => {
            drop(e);
            Ok(())
        }
        Err(e) => Err(StoreError::Io {
            path: path.to_path_buf(),
            source: e.error,
        }),
    }
}

/// One manifest row version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub run: CIRun,
    /// Matrix target (joined axis values); empty for non-matrix jobs.
    #[serde(default)]
    pub target: String,
    #[serde(default)]
    pub artifacts: BTreeMap<ArtifactRole, ArtifactId>,
    #[serde(default)]
    pub record: Option<ReconstructionRecord>,
    #[serde(default)]
    pub verdict: Option<FidelityVerdict>,
}

pub type RowKey = (String, String, String);

impl ManifestRow {
    pub fn new(run: CIRun, target: impl Into<String>) -> ManifestRow {
        ManifestRow {
            run,
            target: target.into(),
            artifacts: BTreeMap::new(),
            record: None,
            verdict: None,
        }
    }

    /// (repo slug, run id, target) — one logical row per key.
    pub fn key(&self) -> RowKey {
        (
            self.run.repo.slug(),
            self.run.run_id.clone(),
            self.target.clone(),
        )
    }

    /// True when `self` strictly extends `prev`: same identity, every
    /// existing artifact/record/verdict preserved, something new added.
    pub fn extends(&self, prev: &ManifestRow) -> bool {
        if self == prev || self.run != prev.run || self.target != prev.target {
            return false;
        }
        let artifacts_ok = prev
            .artifacts
            .iter()
            .all(|(role, id)| self.artifacts.get(role) == Some(id));
        let record_ok = match (&prev.record, &self.record) {
            (Some(a), Some(b)) => a == b,
            (Some(_), None) => false,
            (None, _) => true,
        };
        let verdict_ok = match (&prev.verdict, &self.verdict) {
            (Some(a), Some(b)) => a == b,
            (Some(_), None) => false,
            (None, _) => true,
        };
        artifacts_ok && record_ok && verdict_ok
    }
}

/// In-memory view of a manifest file: the full version sequence plus the
/// folded latest-per-key view.
#[derive(Debug, Default)]
pub struct Manifest {
    rows: Vec<ManifestRow>,
}

impl Manifest {
    /// Loads a manifest, recovering from a torn trailing line (the only
    /// kind of damage an interrupted append can cause). A missing file is
    /// an empty manifest.
    pub fn load(path: &Path) -> Result<Manifest, StoreError> {
        let bytes = match fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Manifest::default()),
            Err(e) => {
                return Err(StoreError::Io {
                    path: path.to_path_buf(),
                    source: e,
                })
            }
        };
        let text = String::from_utf8_lossy(&bytes);
        let mut rows = Vec::new();
        let lines: Vec<&str> = text.split('\n').collect();
        for (i, line) in lines.iter().enumerate() {
            if line.is_empty() {
                continue;
            }
            match serde_json::from_str::<ManifestRow>(line) {
                Ok(row) => rows.push(row),
                Err(e) => {
                    let is_tail = lines[i + 1..].iter().all(|l| l.is_empty());
                    if is_tail {
                        break; // torn tail from an interrupted append
                    }
                    return Err(StoreError::Corrupt {
                        line_no: i + 1,
                        message: e.to_string(),
                    });
                }
            }
        }
        Ok(Manifest { rows })
    }

    /// All row versions, in file order.
    pub fn rows(&self) -> &[ManifestRow] {
        &self.rows
    }

    /// Latest version of each logical row, in first-seen order.
    pub fn latest(&self) -> Vec<&ManifestRow> {
        let mut order: Vec<RowKey> = Vec::new();
        let mut map: BTreeMap<RowKey, &ManifestRow> = BTreeMap::new();
        for row in &self.rows {
            let key = row.key();
            if map.insert(key.clone(), row).is_none() {
                order.push(key);
            }
        }
        order.into_iter().map(|k| map[&k]).collect()
    }

    pub fn find_latest(&self, key: &RowKey) -> Option<&ManifestRow> {
        self.rows.iter().rev().find(|r| &r.key() == key)
    }

    /// Serializes all row versions; loading this back yields an equal
    /// manifest, byte for byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for row in &self.rows {
            serde_json::to_writer(&mut out, row).expect("rows serialize");
            out.push(b'\n');
        }
        out
    }
}

/// Append handle over a manifest file.
#[derive(Debug)]
pub struct ManifestWriter {
    path: PathBuf,
    latest: BTreeMap<RowKey, ManifestRow>,
}

impl ManifestWriter {
    pub fn open(path: impl Into<PathBuf>) -> Result<ManifestWriter, StoreError> {
        let path = path.into();
        let manifest = Manifest::load(&path)?;
        let mut latest = BTreeMap::new();
        for row in manifest.rows {
            latest.insert(row.key(), row);
        }
        Ok(ManifestWriter { path, latest })
    }

    pub fn contains(&self, key: &RowKey) -> bool {
        self.latest.contains_key(key)
    }

    pub fn latest_for(&self, key: &RowKey) -> Option<&ManifestRow> {
        self.latest.get(key)
    }

    pub fn latest_rows(&self) -> impl Iterator<Item = &ManifestRow> {
        self.latest.values()
    }

    /// Appends a row version. New keys are always accepted; an existing
    /// key is accepted only when the row strictly extends the latest
    /// version (prior rows are never mutated or deleted).
    pub fn append(&mut self, row: ManifestRow) -> Result<(), StoreError> {
        let key = row.key();
        if let Some(prev) = self.latest.get(&key) {
            if !row.extends(prev) {
                return Err(StoreError::DuplicateKey {
                    slug: key.0,
                    run_id: key.1,
                    target: key.2,
                });
            }
        }
        let mut line = serde_json::to_vec(&row).expect("row serializes");
        line.push(b'\n');
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(io_err(&self.path))?;
        file.write_all(&line).map_err(io_err(&self.path))?;
        file.sync_data().map_err(io_err(&self.path))?;
        self.latest.insert(key, row);
        Ok(())
    }
}

const DATASET_DOC: &str = "\
# Dataset layout

Content-addressed, append-only storage for harvested CI logs and their
replay artifacts.

- `artifacts/<kind>/<first-2-hex>/<sha256>` — immutable artifact bytes,
  named by the sha256 of their content. Kinds: `raw_log`,
  `normalized_log`, `dockerfile`, `build_script`, `manifest_row`.
- `raw-logs/<filename>` — hard links to raw-log artifacts under their
  original schema filenames (`pr-<id>.log`, `pr-<id>__<target>.log`,
  `proj<project>_mr<mr>_sha<commit>.log`, `*_Firmware(<hw>).log`).
- `manifest.jsonl` — one JSON row version per line, append-only. A later
  line for the same (repo, run, target) key only ever extends the earlier
  one; readers use the last version per key.
- `dataset.json` — format version and digest algorithm.

Nothing in this tree is ever overwritten or deleted.
";
