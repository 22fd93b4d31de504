//! HTTP service for the supervised reconstruction workflow: upload a blueprint,
//! review the automatically cut views, finalize them, run reconstruction jobs and
//! download the resulting meshes.
//!
//! | Method | Path | Purpose |
//! |---|---|---|
//! | `POST` | `/blueprints` | upload a PNG sheet; returns the record with auto-cut boxes |
//! | `GET` | `/blueprints/{id}` | record with status, revision and views |
//! | `PUT` | `/blueprints/{id}/views` | store user-finalized views (last writer wins) |
//! | `POST` | `/blueprints/{id}/reconstruct` | queue a job `{checkpoint, iso, resolution}` |
//! | `GET` | `/jobs`, `/jobs/{id}` | job listing and status |
//! | `GET` | `/jobs/{id}/mesh.obj` | result mesh of a finished job |
//! | `GET` | `/checkpoints` | available weights with their architecture |

mod routes;
pub mod store;
mod worker;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::AtomicUsize;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::mpsc;

use routes::router;
pub use store::{BlueprintRecord, BlueprintStatus, JobRecord, JobState, Store};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Address to listen on, e.g. `127.0.0.1:8080`.
    pub bind: String,
    /// Root of the blueprint and job directories.
    pub data_dir: PathBuf,
    /// Directory scanned for `*.pafw` checkpoints; the file stem is the checkpoint id.
    pub checkpoints_dir: PathBuf,
    /// Largest accepted upload in bytes.
    pub max_upload_bytes: usize,
    /// Jobs waiting or running before new submissions are refused.
    pub queue_depth: usize,
    /// Origin allowed by CORS; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data/service"),
            checkpoints_dir: PathBuf::from("checkpoints"),
            max_upload_bytes: 20 << 20,
            queue_depth: 64,
            cors_origin: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid service setting: {0}")]
    Config(String),
}

pub(crate) struct AppState {
    pub config: ServiceConfig,
    pub store: Store,
    pub queue: mpsc::UnboundedSender<String>,
    /// Jobs queued or running.
    pub pending: AtomicUsize,
}

/// A running service instance.
pub struct Server {
    pub addr: SocketAddr,
    pub handle: tokio::task::JoinHandle<()>,
}

/// Opens the store, requeues jobs interrupted by a previous shutdown, starts the
/// worker and binds the listener. Must be called inside a Tokio runtime.
pub async fn start(config: ServiceConfig) -> Result<Server, ServiceError> {
    if config.queue_depth == 0 || config.max_upload_bytes == 0 {
        return Err(ServiceError::Config("queue_depth and max_upload_bytes must be positive".into()));
    }
    let store = Store::open(&config.data_dir)?;
    let (tx, rx) = mpsc::unbounded_channel();
    let mut requeue = Vec::new();
    for mut job in store.jobs()? {
        if matches!(job.state, JobState::Queued | JobState::Running) {
            job.state = JobState::Queued;
            store.save_job(&job)?;
            requeue.push(job.id);
        }
    }
    let state = Arc::new(AppState { pending: AtomicUsize::new(requeue.len()), config, store, queue: tx });
    for id in requeue {
        state.queue.send(id).expect("worker receiver is alive");
    }
    tokio::spawn(worker::run(state.clone(), rx));
    let listener = TcpListener::bind(&state.config.bind).await?;
    let addr = listener.local_addr()?;
    let app = router(state);
    let handle = tokio::spawn(async move {
        axum::serve(listener, app).await.expect("server loop");
    });
    Ok(Server { addr, handle })
}

/// Runs the service until the process is stopped.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let server = start(config).await?;
    eprintln!("listening on http://{}", server.addr);
    server.handle.await.map_err(|e| ServiceError::Config(e.to_string()))
}
