//! YAML-defined workflows executed as job DAGs over queues.
//!
//! A workflow is a set of named jobs with `depends_on` edges. Jobs run on
//! registered executors (local shell, simulated-remote, noop) with bounded
//! parallelism, observable state, an append-only event log, and eager
//! failure propagation to dependents.

mod executor;
mod run;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use executor::{
    default_executors, ExecutionContext, ExecutorRegistry, JobExecutor, LocalExecutor,
    NoopExecutor, RemoteSimExecutor,
};
pub use run::{
    run, EventRecord, JobState, JobStateValue, RunHandle, RunOptions, RunStatus,
    DEFAULT_MAX_PARALLEL,
};

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("workflow YAML: {0}")]
    Yaml(String),
    #[error("duplicate job name '{0}'")]
    DuplicateJob(String),
    #[error("job '{job}' depends on unknown job '{dependency}'")]
    UnknownDependency { job: String, dependency: String },
    #[error("dependency cycle involving '{0}'")]
    Cycle(String),
    #[error("noop job '{0}' must not carry a command")]
    NoopWithCommand(String),
    #[error("job '{0}' needs a command")]
    MissingCommand(String),
    #[error("no executor registered for kind '{0}'")]
    MissingExecutor(String),
    #[error("unknown run id {0}")]
    UnknownRun(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Local,
    RemoteSim,
    Noop,
}

impl JobKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            JobKind::Local => "local",
            JobKind::RemoteSim => "remote-sim",
            JobKind::Noop => "noop",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub name: String,
    pub kind: JobKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub depends_on: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workdir: Option<PathBuf>,
}

/// A validated job DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workflow {
    pub name: String,
    pub jobs: Vec<Job>,
}

#[derive(Debug, Clone, Deserialize)]
struct WorkflowDoc {
    name: String,
    #[serde(default)]
    jobs: Vec<Job>,
}

impl Workflow {
    /// Validate job names, dependencies, commands, and acyclicity.
    pub fn new(name: impl Into<String>, jobs: Vec<Job>) -> Result<Workflow, WorkflowError> {
        let workflow = Workflow {
            name: name.into(),
            jobs,
        };
        workflow.validate()?;
        Ok(workflow)
    }

    fn validate(&self) -> Result<(), WorkflowError> {
        let mut names = BTreeSet::new();
        for job in &self.jobs {
            if !names.insert(job.name.clone()) {
                return Err(WorkflowError::DuplicateJob(job.name.clone()));
            }
            match job.kind {
                JobKind::Noop => {
                    if job.command.is_some() {
                        return Err(WorkflowError::NoopWithCommand(job.name.clone()));
                    }
                }
                JobKind::Local | JobKind::RemoteSim => {
                    if job.command.is_none() {
                        return Err(WorkflowError::MissingCommand(job.name.clone()));
                    }
                }
            }
        }
        for job in &self.jobs {
            for dependency in &job.depends_on {
                if !names.contains(dependency) {
                    return Err(WorkflowError::UnknownDependency {
                        job: job.name.clone(),
                        dependency: dependency.clone(),
                    });
                }
            }
        }
        self.check_acyclic()?;
        Ok(())
    }

    /// Kahn's algorithm; any leftover job sits on a cycle.
    fn check_acyclic(&self) -> Result<(), WorkflowError> {
        let mut pending: BTreeMap<&str, usize> = self
            .jobs
            .iter()
            .map(|j| (j.name.as_str(), j.depends_on.len()))
            .collect();
        let children = self.children();
        let mut queue: VecDeque<&str> = pending
            .iter()
            .filter(|(_, &n)| n == 0)
            .map(|(&name, _)| name)
            .collect();
        let mut visited = 0;
        while let Some(name) = queue.pop_front() {
            visited += 1;
            if let Some(next) = children.get(name) {
                for child in next {
                    let n = pending.get_mut(child.as_str()).expect("child exists");
                    *n -= 1;
                    if *n == 0 {
                        queue.push_back(child);
                    }
                }
            }
        }
        if visited != self.jobs.len() {
            let stuck = pending
                .iter()
                .find(|(name, _)| {
                    self.jobs
                        .iter()
                        .find(|j| j.name == **name)
                        .map(|j| !j.depends_on.is_empty())
                        .unwrap_or(false)
                })
                .map(|(name, _)| name.to_string())
                .unwrap_or_default();
            return Err(WorkflowError::Cycle(stuck));
        }
        Ok(())
    }

    /// Dependency pairs (dependency, dependent) derived from depends_on.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.jobs
            .iter()
            .flat_map(|job| {
                job.depends_on
                    .iter()
                    .map(|dep| (dep.clone(), job.name.clone()))
            })
            .collect()
    }

    /// Map from job name to the names that depend on it.
    pub(crate) fn children(&self) -> BTreeMap<String, Vec<String>> {
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for job in &self.jobs {
            for dep in &job.depends_on {
                children.entry(dep.clone()).or_default().push(job.name.clone());
            }
        }
        children
    }

    /// All transitive dependents of `name`.
    pub fn descendants(&self, name: &str) -> BTreeSet<String> {
        let children = self.children();
        let mut out = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(current) = stack.pop() {
            if let Some(next) = children.get(&current) {
                for child in next {
                    if out.insert(child.clone()) {
                        stack.push(child.clone());
                    }
                }
            }
        }
        out
    }
}

/// Parse and validate the workflow YAML format.
pub fn parse_workflow(text: &str) -> Result<Workflow, WorkflowError> {
    let doc: WorkflowDoc =
        serde_yaml::from_str(text).map_err(|e| WorkflowError::Yaml(e.to_string()))?;
    Workflow::new(doc.name, doc.jobs)
}
