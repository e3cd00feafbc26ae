//! Workflow execution: bounded-parallel scheduling over the job DAG with
//! observable state, cancellation, and an append-only event log.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};

use super::{ExecutionContext, ExecutorRegistry, Workflow, WorkflowError};

pub const DEFAULT_MAX_PARALLEL: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStateValue {
    Undefined,
    Ready,
    Submitted,
    Running,
    Done,
    Failed,
    Killed,
}

impl JobStateValue {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobStateValue::Done | JobStateValue::Failed | JobStateValue::Killed
        )
    }

    fn rank(self) -> u8 {
        match self {
            JobStateValue::Undefined => 0,
            JobStateValue::Ready => 1,
            JobStateValue::Submitted => 2,
            JobStateValue::Running => 3,
            JobStateValue::Done | JobStateValue::Failed | JobStateValue::Killed => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JobState {
    pub value: JobStateValue,
    #[serde(with = "crate::timefmt::entry_time")]
    pub updated_at: DateTime<Utc>,
}

mod event_time {
    use chrono::{DateTime, Utc};
    use serde::{self, Deserialize, Deserializer, Serializer};

    const FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3fZ";

    pub fn serialize<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ts.format(FORMAT).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        let naive = chrono::NaiveDateTime::parse_from_str(&text, FORMAT)
            .map_err(serde::de::Error::custom)?;
        Ok(DateTime::from_naive_utc_and_offset(naive, Utc))
    }
}

/// One line of the newline-delimited JSON event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub run_id: String,
    pub job: String,
    pub event: JobStateValue,
    #[serde(with = "event_time")]
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_parallel: usize,
    /// Optional ndjson event log destination.
    pub event_log: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            max_parallel: DEFAULT_MAX_PARALLEL,
            event_log: None,
        }
    }
}

/// Consistent snapshot of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStatus {
    pub run_id: String,
    pub states: BTreeMap<String, JobState>,
    /// Names currently waiting in the ready queue.
    pub queued: Vec<String>,
    /// Fraction of jobs done; 1.0 for an empty workflow.
    pub progress: f64,
    pub finished: bool,
}

struct SharedState {
    states: BTreeMap<String, JobState>,
    completions: Vec<(String, JobStateValue)>,
    finished: bool,
}

struct EventSink {
    records: Vec<EventRecord>,
    file: Option<File>,
}

struct Shared {
    run_id: String,
    workflow: Workflow,
    max_parallel: usize,
    state: Mutex<SharedState>,
    cv: Condvar,
    cancelled: Arc<AtomicBool>,
    started: AtomicBool,
    events: Mutex<EventSink>,
}

impl Shared {
    fn record_event(&self, job: &str, event: JobStateValue) {
        let record = EventRecord {
            run_id: self.run_id.clone(),
            job: job.to_string(),
            event,
            ts: Utc::now().trunc_subsecs(3),
        };
        let mut sink = self.events.lock().expect("event lock");
        if let Some(file) = sink.file.as_mut() {
            let line = serde_json::to_string(&record).expect("event serializes");
            let _ = writeln!(file, "{line}");
            let _ = file.flush();
        }
        sink.records.push(record);
    }

    /// Event first, then the state map, so log order never lags behind
    /// observable state. Terminal states absorb later transitions.
    fn transition(&self, job: &str, value: JobStateValue) {
        {
            let state = self.state.lock().expect("state lock");
            let current = state.states.get(job).map(|s| s.value);
            match current {
                Some(current) if current.is_terminal() || current.rank() >= value.rank() => return,
                None => return,
                _ => {}
            }
        }
        self.record_event(job, value);
        let mut state = self.state.lock().expect("state lock");
        if let Some(slot) = state.states.get_mut(job) {
            if !slot.value.is_terminal() && slot.value.rank() < value.rank() {
                slot.value = value;
                slot.updated_at = crate::timefmt::now_utc();
            }
        }
        self.cv.notify_all();
    }

    fn complete(&self, job: &str, value: JobStateValue) {
        self.transition(job, value);
        let mut state = self.state.lock().expect("state lock");
        state.completions.push((job.to_string(), value));
        self.cv.notify_all();
    }
}

/// A live (or finished) workflow run.
#[derive(Clone)]
pub struct RunHandle {
    shared: Arc<Shared>,
}

impl RunHandle {
    /// Build a run with every job in the ready state; nothing executes
    /// until `start`.
    pub fn prepare(workflow: Workflow, options: RunOptions) -> Result<RunHandle, WorkflowError> {
        let run_id = uuid::Uuid::new_v4().to_string();
        let now = crate::timefmt::now_utc();
        let states: BTreeMap<String, JobState> = workflow
            .jobs
            .iter()
            .map(|job| {
                (
                    job.name.clone(),
                    JobState {
                        value: JobStateValue::Ready,
                        updated_at: now,
                    },
                )
            })
            .collect();
        let file = match &options.event_log {
            Some(path) => {
                if let Some(parent) = path.parent() {
                    if !parent.as_os_str().is_empty() {
                        std::fs::create_dir_all(parent)?;
                    }
                }
                Some(OpenOptions::new().create(true).append(true).open(path)?)
            }
            None => None,
        };
        let shared = Arc::new(Shared {
            run_id,
            workflow,
            max_parallel: options.max_parallel.max(1),
            state: Mutex::new(SharedState {
                states,
                completions: Vec::new(),
                finished: false,
            }),
            cv: Condvar::new(),
            cancelled: Arc::new(AtomicBool::new(false)),
            started: AtomicBool::new(false),
            events: Mutex::new(EventSink {
                records: Vec::new(),
                file,
            }),
        });
        for job in &shared.workflow.jobs {
            shared.record_event(&job.name, JobStateValue::Ready);
        }
        Ok(RunHandle { shared })
    }

    /// Launch the scheduler. Jobs execute respecting dependencies with at
    /// most `max_parallel` running concurrently.
    pub fn start(&self, executors: &ExecutorRegistry) -> Result<(), WorkflowError> {
        executors.check_covers(&self.shared.workflow)?;
        if self.shared.started.swap(true, Ordering::SeqCst) {
            return Ok(());
        }
        let shared = self.shared.clone();
        let executors = executors.clone();
        std::thread::spawn(move || schedule(shared, executors));
        Ok(())
    }

    pub fn run_id(&self) -> &str {
        &self.shared.run_id
    }

    pub fn workflow(&self) -> &Workflow {
        &self.shared.workflow
    }

    /// Snapshot of per-job states and progress, consistent at one instant.
    pub fn status(&self) -> RunStatus {
        let state = self.shared.state.lock().expect("state lock");
        let total = self.shared.workflow.jobs.len();
        let done = state
            .states
            .values()
            .filter(|s| s.value == JobStateValue::Done)
            .count();
        let progress = if total == 0 {
            1.0
        } else {
            done as f64 / total as f64
        };
        let queued = state
            .states
            .iter()
            .filter(|(_, s)| s.value == JobStateValue::Ready)
            .map(|(name, _)| name.clone())
            .collect();
        RunStatus {
            run_id: self.shared.run_id.clone(),
            states: state.states.clone(),
            queued,
            progress,
            finished: state.finished,
        }
    }

    /// Signal running jobs and kill everything that has not started.
    /// Idempotent; a finished run is left untouched.
    pub fn cancel(&self) {
        self.shared.cancelled.store(true, Ordering::SeqCst);
        self.shared.cv.notify_all();
    }

    /// Block until the run reaches its final state.
    pub fn wait(&self) -> RunStatus {
        let mut state = self.shared.state.lock().expect("state lock");
        while !state.finished {
            state = self.shared.cv.wait(state).expect("state lock");
        }
        drop(state);
        self.status()
    }

    pub fn is_finished(&self) -> bool {
        self.shared.state.lock().expect("state lock").finished
    }

    /// The event log so far, in append order.
    pub fn events(&self) -> Vec<EventRecord> {
        self.shared.events.lock().expect("event lock").records.clone()
    }
}

/// Prepare and start in one step.
pub fn run(
    workflow: Workflow,
    executors: &ExecutorRegistry,
    options: RunOptions,
) -> Result<RunHandle, WorkflowError> {
    let handle = RunHandle::prepare(workflow, options)?;
    handle.start(executors)?;
    Ok(handle)
}

fn schedule(shared: Arc<Shared>, executors: ExecutorRegistry) {
    let workflow = shared.workflow.clone();
    let total = workflow.jobs.len();
    let children = workflow.children();
    let job_order: Vec<String> = workflow.jobs.iter().map(|j| j.name.clone()).collect();

    let mut pending: BTreeMap<String, usize> = workflow
        .jobs
        .iter()
        .map(|j| (j.name.clone(), j.depends_on.len()))
        .collect();
    let mut ready: VecDeque<String> = job_order
        .iter()
        .filter(|name| pending[*name] == 0)
        .cloned()
        .collect();
    let mut running: BTreeSet<String> = BTreeSet::new();
    let mut settled: BTreeSet<String> = BTreeSet::new();
    let mut cancel_handled = false;

    loop {
        if shared.cancelled.load(Ordering::SeqCst) {
            if !cancel_handled {
                // Kill everything that has not been handed to a worker;
                // workers observe the flag and report in on their own.
                for name in &job_order {
                    if !running.contains(name) && !settled.contains(name) {
                        shared.transition(name, JobStateValue::Killed);
                        settled.insert(name.clone());
                    }
                }
                ready.clear();
                cancel_handled = true;
            }
        } else {
            while running.len() < shared.max_parallel {
                let Some(name) = ready.pop_front() else { break };
                if settled.contains(&name) {
                    continue;
                }
                shared.transition(&name, JobStateValue::Submitted);
                running.insert(name.clone());
                spawn_worker(&shared, &executors, &name);
            }
        }

        if settled.len() >= total && running.is_empty() {
            break;
        }

        // Wait for a completion (or the first cancellation poke).
        let drained: Vec<(String, JobStateValue)> = {
            let mut state = shared.state.lock().expect("state lock");
            while state.completions.is_empty()
                && (cancel_handled || !shared.cancelled.load(Ordering::SeqCst))
            {
                state = shared.cv.wait(state).expect("state lock");
            }
            state.completions.drain(..).collect()
        };

        for (name, outcome) in drained {
            running.remove(&name);
            settled.insert(name.clone());
            match outcome {
                JobStateValue::Done => {
                    if let Some(next) = children.get(&name) {
                        for child in next {
                            let slot = pending.get_mut(child).expect("child tracked");
                            *slot -= 1;
                            if *slot == 0 && !settled.contains(child) {
                                ready.push_back(child.clone());
                            }
                        }
                    }
                }
                JobStateValue::Failed => {
                    // Dependents of a failed job fail eagerly, transitively,
                    // without ever starting.
                    for descendant in workflow.descendants(&name) {
                        if !settled.contains(&descendant) && !running.contains(&descendant) {
                            shared.transition(&descendant, JobStateValue::Failed);
                            settled.insert(descendant);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let mut state = shared.state.lock().expect("state lock");
    state.finished = true;
    shared.cv.notify_all();
}

fn spawn_worker(shared: &Arc<Shared>, executors: &ExecutorRegistry, name: &str) {
    let shared = shared.clone();
    let name = name.to_string();
    let job = shared
        .workflow
        .jobs
        .iter()
        .find(|j| j.name == name)
        .expect("job exists")
        .clone();
    let executor = executors.get(job.kind).expect("executor checked at start");
    std::thread::spawn(move || {
        if shared.cancelled.load(Ordering::SeqCst) {
            shared.complete(&name, JobStateValue::Killed);
            return;
        }
        shared.transition(&name, JobStateValue::Running);
        let ctx = ExecutionContext::new(shared.run_id.clone(), shared.cancelled.clone());
        let outcome = match executor.execute(&job, &ctx) {
            Ok(()) => JobStateValue::Done,
            Err(_) if shared.cancelled.load(Ordering::SeqCst) => JobStateValue::Killed,
            Err(_) => JobStateValue::Failed,
        };
        shared.complete(&name, outcome);
    });
}
