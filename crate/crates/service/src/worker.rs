use std::sync::atomic::Ordering;
use std::sync::Arc;

use orthorecon::blueprint::ViewSet;
use orthorecon::field::read_checkpoint;
use orthorecon::geometry::{save_mesh, MeshFormat};
use orthorecon::image::read_png;
use orthorecon::reconstruct::reconstruct;
use tokio::sync::mpsc;

use crate::store::{JobRecord, JobState};
use crate::AppState;

fn execute(state: &AppState, job: &JobRecord) -> Result<Vec<u8>, String> {
    let store = &state.store;
    let png = store.original_png(&job.blueprint_id).map_err(|e| format!("blueprint image: {e}"))?;
    let sheet = read_png(&png).map_err(|e| e.to_string())?.into_gray();
    let desc = store.views_at(&job.blueprint_id, job.revision).map_err(|e| format!("finalized views: {e}"))?;
    let views = ViewSet::from_descriptor(&sheet, &desc).map_err(|e| e.to_string())?;
    let path = crate::routes::checkpoint_path(&state.config, &job.checkpoint);
    let bytes = std::fs::read(&path).map_err(|e| format!("checkpoint {}: {e}", job.checkpoint))?;
    let net = read_checkpoint(&bytes).and_then(|c| c.network()).map_err(|e| e.to_string())?;
    let result = reconstruct(&views, &net, &job.config).map_err(|e| e.to_string())?;
    Ok(save_mesh(&result.mesh, MeshFormat::Obj))
}

/// Single consumer of the job queue: jobs run one at a time in submission order.
pub(crate) async fn run(state: Arc<AppState>, mut rx: mpsc::UnboundedReceiver<String>) {
    while let Some(id) = rx.recv().await {
        let job = match state.store.job(&id) {
            Ok(Some(job)) if job.state == JobState::Queued => job,
            _ => {
                state.pending.fetch_sub(1, Ordering::SeqCst);
                continue;
            }
        };
        let mut running = JobRecord { state: JobState::Running, ..job };
        let _ = state.store.save_job(&running);
        let task_state = state.clone();
        let task_job = running.clone();
        let outcome = tokio::task::spawn_blocking(move || execute(&task_state, &task_job))
            .await
            .unwrap_or_else(|e| Err(format!("job panicked: {e}")));
        let outcome = outcome.and_then(|obj| state.store.save_mesh(&running.id, &obj).map_err(|e| e.to_string()));
        match outcome {
            Ok(()) => running.state = JobState::Done,
            Err(e) => {
                running.state = JobState::Failed;
                running.error = Some(e);
            }
        }
        let _ = state.store.save_job(&running);
        state.pending.fetch_sub(1, Ordering::SeqCst);
    }
}
