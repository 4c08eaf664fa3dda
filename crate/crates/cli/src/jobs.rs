//! In-process job table with a bounded number of concurrent workers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use tokio::sync::Semaphore;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Progress {
    pub step: usize,
    pub total_steps: usize,
    /// Best fast estimate so far; never decreases within a job.
    pub best_v_hat: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobView {
    pub id: Uuid,
    pub kind: String,
    pub status: JobStatus,
    pub progress: Progress,
    pub result: Option<serde_json::Value>,
    /// HTTP status the failure maps to, with its message.
    pub error: Option<JobError>,
}

#[derive(Debug, Clone, Serialize)]
pub struct JobError {
    pub status: u16,
    pub message: String,
}

/// Handle given to a running job for progress updates.
#[derive(Clone)]
pub struct Reporter {
    table: Arc<Mutex<HashMap<Uuid, JobView>>>,
    id: Uuid,
}

impl Reporter {
    pub fn progress(&self, step: usize, best: f64) {
        let mut t = self.table.lock().expect("job table lock");
        if let Some(j) = t.get_mut(&self.id) {
            j.progress.step = step;
            j.progress.best_v_hat = Some(j.progress.best_v_hat.map_or(best, |b| b.max(best)));
        }
    }
}

pub type JobResult = Result<serde_json::Value, JobError>;

#[derive(Clone)]
pub struct Jobs {
    table: Arc<Mutex<HashMap<Uuid, JobView>>>,
    permits: Arc<Semaphore>,
}

impl Jobs {
    pub fn new(workers: usize) -> Self {
        Jobs { table: Arc::default(), permits: Arc::new(Semaphore::new(workers.max(1))) }
    }

    pub fn get(&self, id: &Uuid) -> Option<JobView> {
        self.table.lock().expect("job table lock").get(id).cloned()
    }

    /// Queues blocking work; it starts once a worker slot frees up.
    pub fn submit<F>(&self, kind: &str, total_steps: usize, work: F) -> Uuid
    where
        F: FnOnce(Reporter) -> JobResult + Send + 'static,
    {
        let id = Uuid::new_v4();
        let view = JobView {
            id,
            kind: kind.to_string(),
            status: JobStatus::Queued,
            progress: Progress { step: 0, total_steps, best_v_hat: None },
            result: None,
            error: None,
        };
        self.table.lock().expect("job table lock").insert(id, view);
        let table = self.table.clone();
        let permits = self.permits.clone();
        tokio::spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore is never closed");
            set(&table, id, |j| j.status = JobStatus::Running);
            let reporter = Reporter { table: table.clone(), id };
            let outcome = tokio::task::spawn_blocking(move || work(reporter)).await;
            set(&table, id, |j| match outcome {
                Ok(Ok(v)) => {
                    j.status = JobStatus::Done;
                    j.progress.step = j.progress.total_steps;
                    j.result = Some(v);
                }
                Ok(Err(e)) => {
                    j.status = JobStatus::Failed;
                    j.error = Some(e);
                }
                Err(join) => {
                    j.status = JobStatus::Failed;
                    j.error = Some(JobError { status: 500, message: format!("job panicked: {join}") });
                }
            });
        });
        id
    }
}

fn set(table: &Mutex<HashMap<Uuid, JobView>>, id: Uuid, f: impl FnOnce(&mut JobView)) {
    if let Some(j) = table.lock().expect("job table lock").get_mut(&id) {
        f(j);
    }
}
