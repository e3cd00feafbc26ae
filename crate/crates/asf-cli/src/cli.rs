//! The `asf` command line interface. Subcommands are thin wrappers over
//! the core module operations; structured output is JSON on stdout.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use asf_core::catalog::{merge_catalogs, parse_catalog, project_to_catalog};
use asf_core::config::{ServiceConfig, CONFIG_ENV};
use asf_core::experiment::{
    expand, generate, submit, Assignment, ExperimentConfig, GeneratedRun, GeneratedRunSet,
    INDEX_FILE, MANIFEST_FILE, SCRIPT_FILE,
};
use asf_core::fair::{audit as fair_audit, AuditContext};
use asf_core::federation::{
    federate_entries, federated_search, DuplicatePolicy, Enrichment, FederatedView,
};
use asf_core::nlp::{
    benchmark, compete, cooperate, find_provider, translate, CompetePolicy, SystemClock,
    TranslationRequest,
};
use asf_core::registry::{
    validate_entry, ProviderRole, SearchQuery, ServiceEntry,
};
use asf_core::security::{
    apply_masking, Decision, LevelOfAssurance, Principal, Role, TokenEntry, TokenStore,
};
use asf_core::staging::stage;
use asf_core::timefmt;
use asf_core::workflow::{
    default_executors, parse_workflow, RunHandle, RunOptions, RunStatus, Workflow,
};
use clap::{Args, Parser, Subcommand};

use crate::state::{write_token_file, ServiceState, StateError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Message(String),
    #[error("access denied: {0}")]
    Denied(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Config(#[from] asf_core::config::ConfigError),
    #[error(transparent)]
    Registry(#[from] asf_core::registry::RegistryError),
    #[error(transparent)]
    Federation(#[from] asf_core::federation::FederationError),
    #[error(transparent)]
    Catalog(#[from] asf_core::catalog::CatalogError),
    #[error(transparent)]
    Workflow(#[from] asf_core::workflow::WorkflowError),
    #[error(transparent)]
    Experiment(#[from] asf_core::experiment::ExperimentError),
    #[error(transparent)]
    Nlp(#[from] asf_core::nlp::NlpError),
    #[error(transparent)]
    Staging(#[from] asf_core::staging::StagingError),
    #[error(transparent)]
    Security(#[from] asf_core::security::SecurityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "asf",
    version,
    about = "Hybrid multi-cloud analytics service framework"
)]
pub struct Cli {
    /// Config file; falls back to $ASF_CONFIG, then ./asf.yaml defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Bearer token; falls back to $ASF_TOKEN, then the local admin.
    #[arg(long, global = true)]
    pub token: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Manage registry entries.
    Registry {
        #[command(subcommand)]
        command: RegistryCommand,
    },
    /// Export and merge service catalogs.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
    /// Federate registries behind a single search view.
    Fed {
        #[command(subcommand)]
        command: FedCommand,
    },
    /// FAIR-style compliance auditing.
    Fair {
        #[command(subcommand)]
        command: FairCommand,
    },
    /// Run and observe workflows.
    Workflow {
        #[command(subcommand)]
        command: WorkflowCommand,
    },
    /// Expand and run parameter-study experiments.
    Ee {
        #[command(subcommand)]
        command: EeCommand,
    },
    /// Translation providers: invoke, benchmark, combine.
    Nlp {
        #[command(subcommand)]
        command: NlpCommand,
    },
    /// Stage a directory to a destination through one archive transfer.
    Stage {
        source: PathBuf,
        destination: PathBuf,
    },
    /// Token provisioning and the audit trail.
    Admin {
        #[command(subcommand)]
        command: AdminCommand,
    },
    /// Start the REST service.
    Serve,
}

#[derive(Subcommand, Debug)]
pub enum RegistryCommand {
    /// Validate and store an entry document.
    Add { entry: PathBuf },
    Get { id: String },
    /// Replace a stored entry (the document must carry its id).
    Update { entry: PathBuf },
    Remove { id: String },
    /// Faceted search over visible entries.
    Search(SearchArgs),
    /// Check an entry document against a provider role profile.
    Validate {
        entry: PathBuf,
        #[arg(long, value_parser = parse_provider_role)]
        role: ProviderRole,
    },
    /// Probe an entry's endpoint and record the result.
    Heartbeat { id: String },
}

#[derive(Args, Debug, Default)]
pub struct SearchArgs {
    #[arg(long = "keyword")]
    pub keywords: Vec<String>,
    #[arg(long = "tag")]
    pub tags: Vec<String>,
    #[arg(long = "category")]
    pub categories: Vec<String>,
}

impl SearchArgs {
    fn query(&self) -> SearchQuery {
        SearchQuery {
            keywords: self.keywords.clone(),
            tags: self.tags.clone(),
            categories: self.categories.clone(),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum CatalogCommand {
    /// Project the store's visible entries into a catalog document.
    Export,
    /// Merge catalog documents into one.
    Merge { files: Vec<PathBuf> },
}

#[derive(Subcommand, Debug)]
pub enum FedCommand {
    /// Build a federated view from registry dump files.
    Build {
        /// Member registries as label=dump.json, in federation order.
        #[arg(long = "member", required = true)]
        members: Vec<String>,
        #[arg(long, default_value = "latest-modified-wins")]
        policy: String,
        /// Where to write the view document.
        #[arg(long)]
        out: PathBuf,
    },
    /// Search a view (or ad-hoc members) with registry semantics.
    Search {
        #[arg(long)]
        view: Option<PathBuf>,
        #[arg(long = "member")]
        members: Vec<String>,
        #[command(flatten)]
        query: SearchArgs,
    },
    /// Attach enrichment to a federated id inside a view file.
    Enrich {
        #[arg(long)]
        view: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        rating: Option<f64>,
        #[arg(long)]
        cost_comparison: Option<String>,
        #[arg(long)]
        benchmark_note: Option<String>,
        #[arg(long)]
        sla_note: Option<String>,
        #[arg(long)]
        carbon_cost: Option<f64>,
    },
}

#[derive(Subcommand, Debug)]
pub enum FairCommand {
    Audit {
        entry: PathBuf,
        /// The entry is not indexed in any searchable resource.
        #[arg(long)]
        not_indexed: bool,
        /// The access protocol is not open.
        #[arg(long)]
        protocol_closed: bool,
        /// Metadata is not retained beyond the service lifetime.
        #[arg(long)]
        metadata_dropped: bool,
        /// No authentication/authorization layer is enabled.
        #[arg(long)]
        security_disabled: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum WorkflowCommand {
    /// Execute a workflow YAML file to completion.
    Run {
        file: PathBuf,
        #[arg(long)]
        max_parallel: Option<usize>,
    },
    /// Status of a recorded run.
    Status { run_id: String },
    /// Cancel a run (a finished run is acknowledged unchanged).
    Cancel { run_id: String },
}

#[derive(Subcommand, Debug)]
pub enum EeCommand {
    /// Expand a config into its assignments.
    Expand { config_file: PathBuf },
    /// Generate one run directory per assignment.
    Generate {
        config_file: PathBuf,
        template: PathBuf,
        outdir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Run a generated run set as independent local jobs.
    Submit {
        outdir: PathBuf,
        #[arg(long)]
        max_parallel: Option<usize>,
    },
}

#[derive(Args, Debug)]
pub struct TranslateArgs {
    #[arg(long)]
    pub provider: String,
    #[arg(long = "from")]
    pub from: String,
    #[arg(long = "to")]
    pub to: String,
    #[arg(required = true, trailing_var_arg = true)]
    pub text: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum NlpCommand {
    /// Translate through one provider; prints the uniform record.
    Translate(TranslateArgs),
    /// Invoke a provider repeatedly and print timing statistics.
    Benchmark {
        #[arg(long)]
        provider: String,
        #[arg(short = 'n', long, default_value_t = 100)]
        count: usize,
        #[arg(long = "from")]
        from: String,
        #[arg(long = "to")]
        to: String,
        #[arg(required = true, trailing_var_arg = true)]
        text: Vec<String>,
    },
    /// Choose exactly one provider under a policy and invoke it.
    Compete {
        /// min-mean-latency, min-cost, or preference.
        #[arg(long)]
        policy: String,
        /// Label->mean-seconds JSON file for min-mean-latency.
        #[arg(long)]
        stats: Option<PathBuf>,
        /// Comma-separated provider preference for the preference policy.
        #[arg(long)]
        prefer: Option<String>,
        #[arg(long = "from")]
        from: String,
        #[arg(long = "to")]
        to: String,
        #[arg(required = true, trailing_var_arg = true)]
        text: Vec<String>,
    },
    /// Fan the request out to several providers.
    Cooperate {
        /// Comma-separated provider labels (default: all).
        #[arg(long)]
        providers: Option<String>,
        #[arg(long = "from")]
        from: String,
        #[arg(long = "to")]
        to: String,
        #[arg(required = true, trailing_var_arg = true)]
        text: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum AdminCommand {
    Tokens {
        #[command(subcommand)]
        command: TokenCommand,
    },
    /// Print the audit trail.
    Audit,
}

#[derive(Subcommand, Debug)]
pub enum TokenCommand {
    List,
    Add {
        #[arg(long)]
        token: String,
        #[arg(long)]
        subject: String,
        #[arg(long = "role", required = true, value_parser = parse_role)]
        roles: Vec<Role>,
        #[arg(long, default_value = "low", value_parser = parse_loa)]
        loa: LevelOfAssurance,
    },
    /// Remove every token of a subject (inactive-account deletion).
    Remove { subject: String },
}

fn parse_provider_role(s: &str) -> Result<ProviderRole, String> {
    s.parse()
}

fn parse_role(s: &str) -> Result<Role, String> {
    s.parse()
}

fn parse_loa(s: &str) -> Result<LevelOfAssurance, String> {
    s.parse()
}

/// Resolve the service config: --config, then $ASF_CONFIG, then defaults
/// rooted in ./.asf.
pub fn resolve_config(flag: Option<&Path>) -> Result<ServiceConfig, CliError> {
    if let Some(path) = flag {
        return Ok(ServiceConfig::load(path)?);
    }
    if let Ok(path) = std::env::var(CONFIG_ENV) {
        return Ok(ServiceConfig::load(Path::new(&path))?);
    }
    Ok(ServiceConfig::at_dir(Path::new(".asf")))
}

fn resolve_token(flag: Option<String>) -> Option<String> {
    flag.or_else(|| std::env::var("ASF_TOKEN").ok())
}

fn read_entry(path: &Path) -> Result<ServiceEntry, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Message(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Message(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, value: &serde_json::Value) -> Result<(), CliError> {
    writeln!(out, "{}", serde_json::to_string_pretty(value).expect("json"))?;
    Ok(())
}

fn to_value<T: serde::Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("serializes")
}

/// Authorize one guarded operation for the resolved principal.
fn guard(
    state: &ServiceState,
    principal: &Principal,
    action: &str,
    resource: &str,
) -> Result<(), CliError> {
    match state.check(principal, action, resource)? {
        Decision::Allow => Ok(()),
        Decision::Deny { reason } => Err(CliError::Denied(reason)),
    }
}

/// Parse `label=path` member specs into labeled entry dumps.
fn load_members(specs: &[String]) -> Result<Vec<(String, Vec<ServiceEntry>)>, CliError> {
    specs
        .iter()
        .map(|spec| {
            let (label, path) = spec.split_once('=').ok_or_else(|| {
                CliError::Message(format!("member '{spec}' must be label=dump.json"))
            })?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Message(format!("{path}: {e}")))?;
            let entries: Vec<ServiceEntry> = serde_json::from_str(&text)
                .map_err(|e| CliError::Message(format!("{path}: {e}")))?;
            Ok((label.to_string(), entries))
        })
        .collect()
}

fn parse_policy(name: &str) -> Result<DuplicatePolicy, CliError> {
    match name {
        "latest-modified-wins" => Ok(DuplicatePolicy::LatestModifiedWins),
        "first-member-wins" => Ok(DuplicatePolicy::FirstMemberWins),
        other => Err(CliError::Message(format!("unknown duplicate policy {other}"))),
    }
}

/// Execute one parsed command; structured results go to `out` as JSON.
/// Returns the process exit code.
pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = resolve_config(cli.config.as_deref())?;
    let token = resolve_token(cli.token);

    if let Command::Serve = cli.command {
        let state = Arc::new(ServiceState::open(config)?);
        crate::rest::serve_blocking(state)?;
        return Ok(0);
    }

    let state = ServiceState::open(config)?;
    match cli.command {
        Command::Registry { command } => registry_command(command, &state, token, out),
        Command::Catalog { command } => catalog_command(command, &state, token, out),
        Command::Fed { command } => fed_command(command, &state, token, out),
        Command::Fair { command } => fair_command(command, &state, token, out),
        Command::Workflow { command } => workflow_command(command, &state, token, out),
        Command::Ee { command } => ee_command(command, &state, token, out),
        Command::Nlp { command } => nlp_command(command, &state, token, out),
        Command::Stage {
            source,
            destination,
        } => {
            let principal = state.authenticate(token.as_deref(), "stage.write", "data")?;
            guard(&state, &principal, "stage.write", "data")?;
            let report = stage(&source, &destination)?;
            emit(out, &to_value(&report))?;
            Ok(0)
        }
        Command::Admin { command } => admin_command(command, &state, token, out),
        Command::Serve => unreachable!("handled above"),
    }
}

fn registry_command(
    command: RegistryCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let resource = state.registry_resource();
    match command {
        RegistryCommand::Add { entry } => {
            let principal = state.authenticate(token.as_deref(), "entries.write", resource)?;
            guard(state, &principal, "entries.write", resource)?;
            let entry = read_entry(&entry)?;
            let id = state.store.register(entry, timefmt::now_utc())?;
            state.persist_store()?;
            emit(out, &serde_json::json!({ "id": id }))?;
            Ok(0)
        }
        RegistryCommand::Get { id } => {
            let principal = state.authenticate(token.as_deref(), "entries.read", resource)?;
            guard(state, &principal, "entries.read", resource)?;
            let entry = state.store.get(&id)?;
            let mut doc = to_value(&entry);
            apply_masking(&state.config.masking, &principal, &mut doc);
            emit(out, &doc)?;
            Ok(0)
        }
        RegistryCommand::Update { entry } => {
            let principal = state.authenticate(token.as_deref(), "entries.write", resource)?;
            guard(state, &principal, "entries.write", resource)?;
            let entry = read_entry(&entry)?;
            let updated = state.store.update(entry, timefmt::now_utc())?;
            state.persist_store()?;
            emit(out, &to_value(&updated))?;
            Ok(0)
        }
        RegistryCommand::Remove { id } => {
            let principal = state.authenticate(token.as_deref(), "entries.delete", resource)?;
            guard(state, &principal, "entries.delete", resource)?;
            state.store.remove(&id)?;
            state.persist_store()?;
            emit(out, &serde_json::json!({ "removed": id }))?;
            Ok(0)
        }
        RegistryCommand::Search(args) => {
            let principal = state.authenticate(token.as_deref(), "entries.read", resource)?;
            guard(state, &principal, "entries.read", resource)?;
            let hits = state.store.search(&args.query(), &principal);
            let mut doc = to_value(&hits);
            apply_masking(&state.config.masking, &principal, &mut doc);
            emit(out, &doc)?;
            Ok(0)
        }
        RegistryCommand::Validate { entry, role } => {
            let entry = read_entry(&entry)?;
            let report = validate_entry(
                &entry,
                &asf_core::registry::RoleProfile::builtin(role),
            );
            emit(out, &to_value(&report))?;
            Ok(if report.valid { 0 } else { 1 })
        }
        RegistryCommand::Heartbeat { id } => {
            let principal =
                state.authenticate(token.as_deref(), "entries.heartbeat", resource)?;
            guard(state, &principal, "entries.heartbeat", resource)?;
            let status = state.store.check_heartbeat(&id, state.prober.as_ref())?;
            state.persist_store()?;
            emit(out, &to_value(&status))?;
            Ok(0)
        }
    }
}

fn catalog_command(
    command: CatalogCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        CatalogCommand::Export => {
            let resource = state.registry_resource();
            let principal = state.authenticate(token.as_deref(), "catalog.read", resource)?;
            guard(state, &principal, "catalog.read", resource)?;
            let catalog: Vec<_> = state
                .store
                .list(&principal)
                .iter()
                .map(project_to_catalog)
                .collect();
            emit(out, &to_value(&catalog))?;
            Ok(0)
        }
        CatalogCommand::Merge { files } => {
            let mut catalogs = Vec::new();
            for file in &files {
                let text = std::fs::read_to_string(file)
                    .map_err(|e| CliError::Message(format!("{}: {e}", file.display())))?;
                catalogs.push(parse_catalog(&text)?);
            }
            let merged = merge_catalogs(&catalogs);
            emit(out, &to_value(&merged))?;
            Ok(0)
        }
    }
}

fn fed_command(
    command: FedCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        FedCommand::Build {
            members,
            policy,
            out: out_path,
        } => {
            let members = load_members(&members)?;
            let view = federate_entries(members, parse_policy(&policy)?)?;
            std::fs::write(
                &out_path,
                serde_json::to_string_pretty(&view).expect("view serializes"),
            )?;
            emit(
                out,
                &serde_json::json!({
                    "members": view.member_labels(),
                    "size": view.len(),
                    "view": out_path,
                }),
            )?;
            Ok(0)
        }
        FedCommand::Search {
            view,
            members,
            query,
        } => {
            let principal =
                state.authenticate(token.as_deref(), "federation.read", "federation")?;
            guard(state, &principal, "federation.read", "federation")?;
            let view: FederatedView = match view {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Message(format!("{}: {e}", path.display())))?;
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Message(format!("{}: {e}", path.display())))?
                }
                None => federate_entries(
                    load_members(&members)?,
                    DuplicatePolicy::LatestModifiedWins,
                )?,
            };
            let hits = federated_search(&view, &query.query(), &principal);
            emit(out, &to_value(&hits))?;
            Ok(0)
        }
        FedCommand::Enrich {
            view: view_path,
            id,
            rating,
            cost_comparison,
            benchmark_note,
            sla_note,
            carbon_cost,
        } => {
            let text = std::fs::read_to_string(&view_path)
                .map_err(|e| CliError::Message(format!("{}: {e}", view_path.display())))?;
            let view: FederatedView = serde_json::from_str(&text)
                .map_err(|e| CliError::Message(format!("{}: {e}", view_path.display())))?;
            let enriched = view.enrich(
                &id,
                Enrichment {
                    cost_comparison,
                    rating,
                    benchmark_note,
                    sla_note,
                    carbon_cost,
                },
            )?;
            std::fs::write(
                &view_path,
                serde_json::to_string_pretty(&enriched).expect("view serializes"),
            )?;
            emit(out, &to_value(&enriched.lookup(&id)?))?;
            Ok(0)
        }
    }
}

fn fair_command(
    command: FairCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let FairCommand::Audit {
        entry,
        not_indexed,
        protocol_closed,
        metadata_dropped,
        security_disabled,
    } = command;
    let principal = state.authenticate(token.as_deref(), "fair.audit", "registry/public")?;
    guard(state, &principal, "fair.audit", "registry/public")?;
    let entry = read_entry(&entry)?;
    let context = AuditContext {
        indexed_in_search: !not_indexed,
        protocol_open: !protocol_closed,
        metadata_retained: !metadata_dropped,
        security_enabled: !security_disabled,
    };
    let report = fair_audit(&entry, &context);
    emit(out, &to_value(&report))?;
    Ok(0)
}

fn workflow_command(
    command: WorkflowCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        WorkflowCommand::Run { file, max_parallel } => {
            let principal = state.authenticate(token.as_deref(), "workflow.write", "workflows")?;
            guard(state, &principal, "workflow.write", "workflows")?;
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::Message(format!("{}: {e}", file.display())))?;
            let workflow = parse_workflow(&text)?;
            let status = run_workflow_to_completion(
                state,
                workflow,
                max_parallel.unwrap_or(state.config.max_parallel),
            )?;
            emit(out, &to_value(&status))?;
            Ok(0)
        }
        WorkflowCommand::Status { run_id } => {
            let principal = state.authenticate(token.as_deref(), "workflow.read", "workflows")?;
            guard(state, &principal, "workflow.read", "workflows")?;
            let status_file = state.runs_dir().join(&run_id).join("status.json");
            let text = std::fs::read_to_string(&status_file).map_err(|_| {
                CliError::Message(format!("unknown run id {run_id}"))
            })?;
            let status: RunStatus = serde_json::from_str(&text)
                .map_err(|e| CliError::Message(format!("{}: {e}", status_file.display())))?;
            emit(out, &to_value(&status))?;
            Ok(0)
        }
        WorkflowCommand::Cancel { run_id } => {
            let principal = state.authenticate(token.as_deref(), "workflow.delete", "workflows")?;
            guard(state, &principal, "workflow.delete", "workflows")?;
            let status_file = state.runs_dir().join(&run_id).join("status.json");
            if !status_file.exists() {
                return Err(CliError::Message(format!("unknown run id {run_id}")));
            }
            // CLI runs execute synchronously, so a recorded run is already
            // finished; cancellation acknowledges without changes.
            emit(
                out,
                &serde_json::json!({
                    "run_id": run_id,
                    "cancelled": false,
                    "note": "run already finished; states unchanged",
                }),
            )?;
            Ok(0)
        }
    }
}

/// Run a workflow synchronously, recording the event log and final status
/// under the runs directory.
fn run_workflow_to_completion(
    state: &ServiceState,
    workflow: Workflow,
    max_parallel: usize,
) -> Result<RunStatus, CliError> {
    let handle = RunHandle::prepare(
        workflow,
        RunOptions {
            max_parallel,
            event_log: None,
        },
    )?;
    handle.start(&default_executors())?;
    let status = handle.wait();

    let run_dir = state.runs_dir().join(handle.run_id());
    std::fs::create_dir_all(&run_dir)?;
    let mut log = String::new();
    for event in handle.events() {
        log.push_str(&serde_json::to_string(&event).expect("event serializes"));
        log.push('\n');
    }
    std::fs::write(run_dir.join("events.ndjson"), log)?;
    std::fs::write(
        run_dir.join("status.json"),
        serde_json::to_string_pretty(&status).expect("status serializes"),
    )?;
    Ok(status)
}

fn ee_command(
    command: EeCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        EeCommand::Expand { config_file } => {
            let text = std::fs::read_to_string(&config_file)
                .map_err(|e| CliError::Message(format!("{}: {e}", config_file.display())))?;
            let config = ExperimentConfig::from_yaml(&text)?;
            let assignments = expand(&config)?;
            emit(out, &to_value(&assignments))?;
            Ok(0)
        }
        EeCommand::Generate {
            config_file,
            template,
            outdir,
            force,
        } => {
            let principal = state.authenticate(token.as_deref(), "ee.write", "experiments")?;
            guard(state, &principal, "ee.write", "experiments")?;
            let config_text = std::fs::read_to_string(&config_file)
                .map_err(|e| CliError::Message(format!("{}: {e}", config_file.display())))?;
            let template_text = std::fs::read_to_string(&template)
                .map_err(|e| CliError::Message(format!("{}: {e}", template.display())))?;
            let config = ExperimentConfig::from_yaml(&config_text)?;
            let runset = generate(&config, &template_text, &outdir, force)?;
            writeln!(out, "{} experiments generated", runset.runs.len())?;
            Ok(0)
        }
        EeCommand::Submit {
            outdir,
            max_parallel,
        } => {
            let principal = state.authenticate(token.as_deref(), "workflow.write", "workflows")?;
            guard(state, &principal, "workflow.write", "workflows")?;
            let runset = load_runset(&outdir)?;
            let name = outdir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "runset".into());
            let workflow = submit(&runset, &name);
            let status = run_workflow_to_completion(
                state,
                workflow,
                max_parallel.unwrap_or(state.config.max_parallel),
            )?;
            emit(out, &to_value(&status))?;
            Ok(0)
        }
    }
}

/// Rebuild a generated run set from its directory layout.
fn load_runset(outdir: &Path) -> Result<GeneratedRunSet, CliError> {
    let index = std::fs::read_to_string(outdir.join(INDEX_FILE))
        .map_err(|e| CliError::Message(format!("{}: {e}", outdir.display())))?;
    let mut runs = Vec::new();
    for slug in index.lines().filter(|l| !l.is_empty()) {
        let dir = outdir.join(slug);
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest_text = std::fs::read_to_string(&manifest_path)
            .map_err(|e| CliError::Message(format!("{}: {e}", manifest_path.display())))?;
        let values = serde_json::from_str(&manifest_text)
            .map_err(|e| CliError::Message(format!("{}: {e}", manifest_path.display())))?;
        runs.push(GeneratedRun {
            assignment: Assignment {
                values,
                slug: slug.to_string(),
            },
            script_path: dir.join(SCRIPT_FILE),
            manifest_path,
        });
    }
    Ok(GeneratedRunSet {
        root: outdir.to_path_buf(),
        runs,
    })
}

fn nlp_command(
    command: NlpCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let principal = state.authenticate(token.as_deref(), "nlp.translate", "providers")?;
    guard(state, &principal, "nlp.translate", "providers")?;
    let clock = SystemClock;
    match command {
        NlpCommand::Translate(args) => {
            let request = TranslationRequest::new(args.text.join(" "), args.from, args.to)?;
            let binding = find_provider(&state.providers, &args.provider)?;
            let record = translate(binding, &request, &clock)?;
            writeln!(out, "{}", record.to_json_string())?;
            Ok(0)
        }
        NlpCommand::Benchmark {
            provider,
            count,
            from,
            to,
            text,
        } => {
            let request = TranslationRequest::new(text.join(" "), from, to)?;
            let binding = find_provider(&state.providers, &provider)?;
            let sample = benchmark(binding, &request, count, &clock)?;
            emit(out, &to_value(&sample))?;
            Ok(0)
        }
        NlpCommand::Compete {
            policy,
            stats: stats_file,
            prefer,
            from,
            to,
            text,
        } => {
            let request = TranslationRequest::new(text.join(" "), from, to)?;
            let policy = match policy.as_str() {
                "min-cost" => CompetePolicy::MinCost,
                "min-mean-latency" => {
                    let path = stats_file.ok_or_else(|| {
                        CliError::Message("min-mean-latency needs --stats <file.json>".into())
                    })?;
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Message(format!("{}: {e}", path.display())))?;
                    let means = serde_json::from_str(&text)
                        .map_err(|e| CliError::Message(format!("{}: {e}", path.display())))?;
                    CompetePolicy::MinMeanLatency { means }
                }
                "preference" => {
                    let list = prefer.ok_or_else(|| {
                        CliError::Message("preference needs --prefer a,b,c".into())
                    })?;
                    CompetePolicy::PreferenceList {
                        prefer: list.split(',').map(str::to_string).collect(),
                    }
                }
                other => {
                    return Err(CliError::Message(format!("unknown compete policy {other}")))
                }
            };
            let (chosen, record) = compete(&state.providers, &request, &policy, &clock)?;
            emit(
                out,
                &serde_json::json!({
                    "chosen": chosen,
                    "record": serde_json::from_str::<serde_json::Value>(&record.to_json_string())
                        .expect("record json"),
                }),
            )?;
            Ok(0)
        }
        NlpCommand::Cooperate {
            providers,
            from,
            to,
            text,
        } => {
            let request = TranslationRequest::new(text.join(" "), from, to)?;
            let bindings: Vec<_> = match providers {
                None => state.providers.clone(),
                Some(labels) => labels
                    .split(',')
                    .map(|label| find_provider(&state.providers, label).cloned())
                    .collect::<Result<_, _>>()?,
            };
            let outcomes = cooperate(&bindings, &request, &clock)?;
            emit(out, &to_value(&outcomes))?;
            Ok(0)
        }
    }
}

fn admin_command(
    command: AdminCommand,
    state: &ServiceState,
    token: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    match command {
        AdminCommand::Tokens { command } => {
            let principal = state.authenticate(token.as_deref(), "admin.tokens", "tokens")?;
            guard(state, &principal, "admin.tokens", "tokens")?;
            match command {
                TokenCommand::List => {
                    emit(out, &to_value(&state.tokens.entries()))?;
                }
                TokenCommand::Add {
                    token: new_token,
                    subject,
                    roles,
                    loa,
                } => {
                    let mut entries = state.tokens.entries().to_vec();
                    entries.push(TokenEntry {
                        token: new_token,
                        subject: subject.clone(),
                        roles: roles.into_iter().collect(),
                        loa,
                    });
                    let updated = TokenStore::new(
                        entries,
                        state.tokens.mfa_secret().map(str::to_string),
                    );
                    write_token_file(&state.config.token_file, &updated)?;
                    emit(out, &serde_json::json!({ "added": subject }))?;
                }
                TokenCommand::Remove { subject } => {
                    let entries: Vec<TokenEntry> = state
                        .tokens
                        .entries()
                        .iter()
                        .filter(|t| t.subject != subject)
                        .cloned()
                        .collect();
                    let removed = state.tokens.entries().len() - entries.len();
                    let updated = TokenStore::new(
                        entries,
                        state.tokens.mfa_secret().map(str::to_string),
                    );
                    write_token_file(&state.config.token_file, &updated)?;
                    emit(
                        out,
                        &serde_json::json!({ "subject": subject, "removed": removed }),
                    )?;
                }
            }
            Ok(0)
        }
        AdminCommand::Audit => {
            let principal = state.authenticate(token.as_deref(), "audit.read", "audit")?;
            guard(state, &principal, "audit.read", "audit")?;
            let records = state.audit.read_all()?;
            emit(out, &to_value(&records))?;
            Ok(0)
        }
    }
}
