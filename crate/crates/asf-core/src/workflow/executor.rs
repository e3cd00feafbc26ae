//! Job executors.
//!
//! `local` runs the command through the shell, `remote-sim` stages the
//! job's working directory into a scratch area first (simulating a remote
//! host) and cleans it afterwards, and `noop` does nothing.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use super::{Job, JobKind, WorkflowError};

/// Passed to executors so long-running work can observe cancellation.
pub struct ExecutionContext {
    pub run_id: String,
    cancelled: Arc<AtomicBool>,
}

impl ExecutionContext {
    pub(crate) fn new(run_id: String, cancelled: Arc<AtomicBool>) -> Self {
        ExecutionContext { run_id, cancelled }
    }

    pub fn is_cancelled(&self) -> bool {
        self.cancelled.load(Ordering::SeqCst)
    }
}

pub trait JobExecutor: Send + Sync {
    fn execute(&self, job: &Job, ctx: &ExecutionContext) -> Result<(), String>;
}

/// Executors keyed by job kind.
#[derive(Clone, Default)]
pub struct ExecutorRegistry {
    executors: BTreeMap<JobKind, Arc<dyn JobExecutor>>,
}

impl ExecutorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(mut self, kind: JobKind, executor: Arc<dyn JobExecutor>) -> Self {
        self.executors.insert(kind, executor);
        self
    }

    pub fn get(&self, kind: JobKind) -> Option<Arc<dyn JobExecutor>> {
        self.executors.get(&kind).cloned()
    }

    /// Error unless every kind used by the workflow has an executor.
    pub fn check_covers(&self, workflow: &super::Workflow) -> Result<(), WorkflowError> {
        for job in &workflow.jobs {
            if !self.executors.contains_key(&job.kind) {
                return Err(WorkflowError::MissingExecutor(job.kind.as_str().into()));
            }
        }
        Ok(())
    }
}

/// The stock registry: local shell, simulated remote, noop.
pub fn default_executors() -> ExecutorRegistry {
    ExecutorRegistry::new()
        .register(JobKind::Local, Arc::new(LocalExecutor))
        .register(JobKind::RemoteSim, Arc::new(RemoteSimExecutor))
        .register(JobKind::Noop, Arc::new(NoopExecutor))
}

pub struct NoopExecutor;

impl JobExecutor for NoopExecutor {
    fn execute(&self, _job: &Job, _ctx: &ExecutionContext) -> Result<(), String> {
        Ok(())
    }
}

/// Runs the job command through `sh -c`, polling for cancellation.
pub struct LocalExecutor;

impl LocalExecutor {
    fn run_command(
        command: &str,
        workdir: Option<&PathBuf>,
        env: Option<&BTreeMap<String, String>>,
        ctx: &ExecutionContext,
    ) -> Result<(), String> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c")
            .arg(command)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null());
        if let Some(dir) = workdir {
            cmd.current_dir(dir);
        }
        if let Some(env) = env {
            cmd.envs(env);
        }
        let mut child = cmd.spawn().map_err(|e| format!("spawn failed: {e}"))?;
        loop {
            if ctx.is_cancelled() {
                let _ = child.kill();
                let _ = child.wait();
                return Err("killed".into());
            }
            match child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => return Err(format!("exit status {status}")),
                Ok(None) => std::thread::sleep(Duration::from_millis(10)),
                Err(e) => return Err(format!("wait failed: {e}")),
            }
        }
    }
}

impl JobExecutor for LocalExecutor {
    fn execute(&self, job: &Job, ctx: &ExecutionContext) -> Result<(), String> {
        let command = job.command.as_deref().ok_or("job has no command")?;
        Self::run_command(command, job.workdir.as_ref(), job.env.as_ref(), ctx)
    }
}

/// Simulates a remote host: stages the job's workdir into a scratch
/// directory, runs the command there, and deletes the scratch afterwards
/// so no staged data outlives the job.
pub struct RemoteSimExecutor;

impl JobExecutor for RemoteSimExecutor {
    fn execute(&self, job: &Job, ctx: &ExecutionContext) -> Result<(), String> {
        let command = job.command.as_deref().ok_or("job has no command")?;
        let scratch = tempfile::Builder::new()
            .prefix("asf-remote-sim-")
            .tempdir()
            .map_err(|e| format!("scratch dir: {e}"))?;
        let exec_dir = match &job.workdir {
            Some(workdir) => {
                let staged = scratch.path().join("payload");
                crate::staging::stage(workdir, &staged)
                    .map_err(|e| format!("staging to simulated remote: {e}"))?;
                staged
            }
            None => scratch.path().to_path_buf(),
        };
        // Scratch (the TempDir) is removed when this returns.
        LocalExecutor::run_command(command, Some(&exec_dir), job.env.as_ref(), ctx)
    }
}
