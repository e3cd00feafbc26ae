//! Service state shared by the CLI and the REST service: the registry
//! store with its file persistence, tokens, policy, audit log, provider
//! bindings, and live workflow runs.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use asf_core::config::ServiceConfig;
use asf_core::nlp::{default_providers, ProviderBinding};
use asf_core::registry::{
    HeartbeatProber, RegistryStore, ServiceEntry, TcpProber, Visibility,
};
use asf_core::security::{
    default_policy, AccessPolicy, AuditLog, AuditOutcome, Decision, Guard, LevelOfAssurance,
    Principal, Role, SecurityError, TokenEntry, TokenStore,
};
use asf_core::timefmt;
use asf_core::workflow::RunHandle;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("store file {0}: {1}")]
    StoreFile(PathBuf, String),
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error(transparent)]
    Registry(#[from] asf_core::registry::RegistryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Subject used when the CLI operates directly on local files without a
/// bearer token.
pub const LOCAL_ADMIN_SUBJECT: &str = "local-admin";

pub struct ServiceState {
    pub config: ServiceConfig,
    pub store: RegistryStore,
    pub tokens: TokenStore,
    pub policy: AccessPolicy,
    pub audit: AuditLog,
    pub providers: Vec<Arc<ProviderBinding>>,
    pub prober: Box<dyn HeartbeatProber>,
    pub runs: Mutex<BTreeMap<String, RunHandle>>,
}

impl ServiceState {
    /// Open (or initialize) all state named by the config.
    pub fn open(config: ServiceConfig) -> Result<Self, StateError> {
        let entries = load_store_file(&config.store_file)?;
        let store = RegistryStore::new(config.registry_visibility, config.base_url());
        let now = timefmt::now_utc();
        for entry in entries {
            store.register(entry, now)?;
        }

        let tokens = if config.token_file.exists() {
            TokenStore::load(&config.token_file)?
        } else {
            let tokens = bootstrap_tokens();
            write_token_file(&config.token_file, &tokens)?;
            tokens
        };

        let audit = AuditLog::open(&config.audit_log)?;

        Ok(ServiceState {
            config,
            store,
            tokens,
            policy: default_policy(),
            audit,
            providers: default_providers(),
            prober: Box::new(TcpProber),
            runs: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn guard(&self) -> Guard<'_> {
        Guard {
            policy: &self.policy,
            audit: &self.audit,
        }
    }

    /// Resolve a bearer token; a missing token on the CLI path maps to the
    /// local admin. Failed authentication is audited.
    pub fn authenticate(
        &self,
        token: Option<&str>,
        action: &str,
        resource: &str,
    ) -> Result<Principal, StateError> {
        match token {
            None => Ok(local_admin()),
            Some(token) => match self.tokens.authenticate(token) {
                Ok(principal) => Ok(principal),
                Err(e) => {
                    self.audit
                        .append("anonymous", action, resource, AuditOutcome::Deny)?;
                    Err(e.into())
                }
            },
        }
    }

    /// Authorize and audit one guarded operation.
    pub fn check(
        &self,
        principal: &Principal,
        action: &str,
        resource: &str,
    ) -> Result<Decision, StateError> {
        Ok(self.guard().check(principal, action, resource)?)
    }

    /// The resource label for registry operations under the configured
    /// visibility.
    pub fn registry_resource(&self) -> &'static str {
        match self.config.registry_visibility {
            Visibility::Public => "registry/public",
            Visibility::Private => "registry/private",
        }
    }

    /// Write the store file atomically (temp + rename).
    pub fn persist_store(&self) -> Result<(), StateError> {
        let dump = self.store.dump();
        let json = serde_json::to_string_pretty(&dump).expect("entries serialize");
        atomic_write(&self.config.store_file, json.as_bytes())?;
        Ok(())
    }

    /// Directory where CLI-run workflow artifacts (event logs, final
    /// status) are recorded.
    pub fn runs_dir(&self) -> PathBuf {
        self.config
            .store_file
            .parent()
            .unwrap_or(Path::new("."))
            .join("runs")
    }
}

pub fn local_admin() -> Principal {
    Principal {
        subject: LOCAL_ADMIN_SUBJECT.into(),
        roles: [Role::Admin, Role::Member].into_iter().collect(),
        loa: LevelOfAssurance::High,
        token_id: "local".into(),
    }
}

fn load_store_file(path: &Path) -> Result<Vec<ServiceEntry>, StateError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| StateError::StoreFile(path.to_path_buf(), e.to_string()))?;
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    serde_json::from_str(&text).map_err(|e| StateError::StoreFile(path.to_path_buf(), e.to_string()))
}

fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.flush()?;
    }
    std::fs::rename(&tmp, path)
}

/// Demo tokens written on first start so the service is usable out of the
/// box; replace the file for real deployments.
fn bootstrap_tokens() -> TokenStore {
    TokenStore::new(
        vec![
            TokenEntry {
                token: "demo-admin-token".into(),
                subject: "admin".into(),
                roles: [Role::Admin, Role::Member].into_iter().collect(),
                loa: LevelOfAssurance::High,
            },
            TokenEntry {
                token: "demo-member-token".into(),
                subject: "member".into(),
                roles: [Role::Member].into_iter().collect(),
                loa: LevelOfAssurance::Substantial,
            },
            TokenEntry {
                token: "demo-guest-token".into(),
                subject: "guest".into(),
                roles: [Role::Guest].into_iter().collect(),
                loa: LevelOfAssurance::Low,
            },
        ],
        Some("demo-otp".into()),
    )
}

pub fn write_token_file(path: &Path, tokens: &TokenStore) -> Result<(), StateError> {
    #[derive(serde::Serialize)]
    struct FileShape<'a> {
        tokens: &'a [TokenEntry],
        #[serde(skip_serializing_if = "Option::is_none")]
        mfa_secret: Option<&'a str>,
    }
    let shape = FileShape {
        tokens: tokens.entries(),
        mfa_secret: tokens.mfa_secret(),
    };
    let json = serde_json::to_string_pretty(&shape).expect("tokens serialize");
    atomic_write(path, json.as_bytes())?;
    Ok(())
}
