//! Filesystem persistence: one directory per blueprint and per job under the data
//! directory, JSON metadata next to the binary payloads.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use orthorecon::blueprint::ViewSetDescriptor;
use orthorecon::reconstruct::ReconstructConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Review state of an uploaded blueprint. Every upload starts in review, even when
/// automatic cutting found all four views.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlueprintStatus {
    NeedsReview,
    Finalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlueprintRecord {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub status: BlueprintStatus,
    /// Incremented on every accepted change of the finalized views.
    pub revision: u64,
    /// Boxes proposed by automatic cutting; empty when it gave up.
    pub auto: ViewSetDescriptor,
    /// Why automatic cutting needs manual help, when it does.
    pub auto_message: Option<String>,
    pub views: Option<ViewSetDescriptor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    /// Creation order; listings sort by it.
    pub seq: u64,
    pub blueprint_id: String,
    /// Revision of the finalized views the job was created against.
    pub revision: u64,
    pub checkpoint: String,
    pub config: ReconstructConfig,
    pub state: JobState,
    pub error: Option<String>,
}

pub struct Store {
    root: PathBuf,
    next_blueprint: AtomicU64,
    next_job: AtomicU64,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

/// Writes through a temporary file so readers never see a partial document.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(value).expect("records serialize"))
}

/// Largest numeric suffix among `prefix`-named entries of `dir`.
fn max_seq(dir: &Path, prefix: &str) -> io::Result<u64> {
    let mut max = 0;
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        if let Some(n) = name.to_str().and_then(|s| s.strip_prefix(prefix)).and_then(|s| s.parse::<u64>().ok()) {
            max = max.max(n);
        }
    }
    Ok(max)
}

/// Accepts the ids this store hands out and nothing that could escape its directory.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl Store {
    pub fn open(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root.join("blueprints"))?;
        fs::create_dir_all(root.join("jobs"))?;
        Ok(Self {
            next_blueprint: AtomicU64::new(max_seq(&root.join("blueprints"), "bp")? + 1),
            next_job: AtomicU64::new(max_seq(&root.join("jobs"), "job")? + 1),
            root: root.to_path_buf(),
            locks: Mutex::new(HashMap::new()),
        })
    }

    /// Lock serializing writers of one record.
    pub fn lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks.lock().expect("lock table").entry(id.to_string()).or_default().clone()
    }

    fn blueprint_dir(&self, id: &str) -> PathBuf {
        self.root.join("blueprints").join(id)
    }

    fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(id)
    }

    pub fn create_blueprint(
        &self,
        png: &[u8],
        width: usize,
        height: usize,
        auto: ViewSetDescriptor,
        auto_message: Option<String>,
    ) -> io::Result<BlueprintRecord> {
        let id = format!("bp{:06}", self.next_blueprint.fetch_add(1, Ordering::SeqCst));
        let dir = self.blueprint_dir(&id);
        fs::create_dir_all(dir.join("revisions"))?;
        fs::write(dir.join("original.png"), png)?;
        let record = BlueprintRecord {
            id,
            width,
            height,
            status: BlueprintStatus::NeedsReview,
            revision: 0,
            auto,
            auto_message,
            views: None,
        };
        write_json(&dir.join("record.json"), &record)?;
        Ok(record)
    }

    pub fn blueprint(&self, id: &str) -> io::Result<Option<BlueprintRecord>> {
        if !valid_id(id) {
            return Ok(None);
        }
        match read_json(&self.blueprint_dir(id).join("record.json")) {
            Ok(r) => Ok(Some(r)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn original_png(&self, id: &str) -> io::Result<Vec<u8>> {
        fs::read(self.blueprint_dir(id).join("original.png"))
    }

    /// Stores finalized views. An identical payload leaves the record untouched;
    /// anything else bumps the revision and keeps a copy under `revisions/`.
    /// Callers hold the record lock.
    pub fn finalize(&self, mut record: BlueprintRecord, views: ViewSetDescriptor) -> io::Result<BlueprintRecord> {
        if record.views.as_ref() == Some(&views) {
            return Ok(record);
        }
        record.revision += 1;
        record.status = BlueprintStatus::Finalized;
        record.views = Some(views);
        let dir = self.blueprint_dir(&record.id);
        write_json(&dir.join("revisions").join(format!("{:06}.json", record.revision)), &record.views)?;
        write_json(&dir.join("views.json"), &record.views)?;
        write_json(&dir.join("record.json"), &record)?;
        Ok(record)
    }

    /// Finalized views as accepted at `revision`.
    pub fn views_at(&self, id: &str, revision: u64) -> io::Result<ViewSetDescriptor> {
        read_json(&self.blueprint_dir(id).join("revisions").join(format!("{revision:06}.json")))
    }

    pub fn create_job(
        &self,
        blueprint: &BlueprintRecord,
        checkpoint: &str,
        config: ReconstructConfig,
    ) -> io::Result<JobRecord> {
        let seq = self.next_job.fetch_add(1, Ordering::SeqCst);
        let job = JobRecord {
            id: format!("job{seq:06}"),
            seq,
            blueprint_id: blueprint.id.clone(),
            revision: blueprint.revision,
            checkpoint: checkpoint.to_string(),
            config,
            state: JobState::Queued,
            error: None,
        };
        fs::create_dir_all(self.job_dir(&job.id))?;
        self.save_job(&job)?;
        Ok(job)
    }

    pub fn save_job(&self, job: &JobRecord) -> io::Result<()> {
        write_json(&self.job_dir(&job.id).join("job.json"), job)
    }

    pub fn job(&self, id: &str) -> io::Result<Option<JobRecord>> {
        if !valid_id(id) {
            return Ok(None);
        }
        match read_json(&self.job_dir(id).join("job.json")) {
            Ok(r) => Ok(Some(r)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// All jobs in creation order.
    pub fn jobs(&self) -> io::Result<Vec<JobRecord>> {
        let mut jobs = Vec::new();
        for entry in fs::read_dir(self.root.join("jobs"))? {
            let path = entry?.path().join("job.json");
            if path.exists() {
                jobs.push(read_json::<JobRecord>(&path)?);
            }
        }
        jobs.sort_by_key(|j| j.seq);
        Ok(jobs)
    }

    pub fn save_mesh(&self, job: &str, obj: &[u8]) -> io::Result<()> {
        write_atomic(&self.job_dir(job).join("mesh.obj"), obj)
    }

    pub fn mesh(&self, job: &str) -> io::Result<Vec<u8>> {
        fs::read(self.job_dir(job).join("mesh.obj"))
    }
}
