//! Token authentication, role/LoA authorization, and the audit trail.
//!
//! Tokens are opaque bearer strings provisioned in a config file; protocol
//! flows (OAuth, SAML, ...) are deliberately out of scope. Authorization is
//! an ordered first-match rule list with default deny. Every guarded
//! operation appends exactly one record to an append-only audit log.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timefmt;

#[derive(Debug, Error)]
pub enum SecurityError {
    #[error("unknown or expired token")]
    UnknownToken,
    #[error("second factor rejected")]
    BadSecondFactor,
    #[error("token config: {0}")]
    TokenConfig(String),
    #[error("audit log: {0}")]
    AuditLog(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Guest,
    Member,
    Admin,
}

impl Role {
    fn rank(self) -> u8 {
        match self {
            Role::Guest => 0,
            Role::Member => 1,
            Role::Admin => 2,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "guest" => Ok(Role::Guest),
            "member" => Ok(Role::Member),
            "admin" => Ok(Role::Admin),
            other => Err(format!("unknown role: {other}")),
        }
    }
}

/// Level of assurance of an authenticated identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelOfAssurance {
    Low,
    Substantial,
    High,
}

impl LevelOfAssurance {
    fn raised(self) -> LevelOfAssurance {
        match self {
            LevelOfAssurance::Low => LevelOfAssurance::Substantial,
            _ => LevelOfAssurance::High,
        }
    }
}

impl std::str::FromStr for LevelOfAssurance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "low" => Ok(LevelOfAssurance::Low),
            "substantial" => Ok(LevelOfAssurance::Substantial),
            "high" => Ok(LevelOfAssurance::High),
            other => Err(format!("unknown level of assurance: {other}")),
        }
    }
}

/// An authenticated identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub subject: String,
    pub roles: BTreeSet<Role>,
    pub loa: LevelOfAssurance,
    pub token_id: String,
}

impl Principal {
    /// Highest role carried by this principal.
    pub fn max_role(&self) -> Role {
        self.roles.iter().copied().max().unwrap_or(Role::Guest)
    }

    /// True when the principal carries no role above guest.
    pub fn is_guest(&self) -> bool {
        self.max_role() == Role::Guest
    }
}

/// One provisioned token in the token config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub subject: String,
    pub roles: BTreeSet<Role>,
    pub loa: LevelOfAssurance,
}

/// Token config: a JSON list of token entries plus an optional shared
/// secret used as the second factor for LoA elevation.
#[derive(Debug, Clone, Default)]
pub struct TokenStore {
    tokens: Vec<TokenEntry>,
    mfa_secret: Option<String>,
}

impl TokenStore {
    pub fn new(tokens: Vec<TokenEntry>, mfa_secret: Option<String>) -> Self {
        TokenStore { tokens, mfa_secret }
    }

    /// Load from a JSON file: either a bare list of token entries or an
    /// object `{"tokens": [...], "mfa_secret": "..."}`.
    pub fn load(path: &Path) -> Result<Self, SecurityError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum FileShape {
            List(Vec<TokenEntry>),
            Object {
                tokens: Vec<TokenEntry>,
                #[serde(default)]
                mfa_secret: Option<String>,
            },
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| SecurityError::TokenConfig(format!("{}: {e}", path.display())))?;
        let shape: FileShape = serde_json::from_str(&text)
            .map_err(|e| SecurityError::TokenConfig(e.to_string()))?;
        Ok(match shape {
            FileShape::List(tokens) => TokenStore::new(tokens, None),
            FileShape::Object { tokens, mfa_secret } => TokenStore::new(tokens, mfa_secret),
        })
    }

    pub fn entries(&self) -> &[TokenEntry] {
        &self.tokens
    }

    pub fn mfa_secret(&self) -> Option<&str> {
        self.mfa_secret.as_deref()
    }

    /// Resolve a bearer token to a principal.
    pub fn authenticate(&self, token: &str) -> Result<Principal, SecurityError> {
        let entry = self
            .tokens
            .iter()
            .find(|t| t.token == token)
            .ok_or(SecurityError::UnknownToken)?;
        let mut roles = entry.roles.clone();
        if roles.is_empty() {
            roles.insert(Role::Guest);
        }
        Ok(Principal {
            subject: entry.subject.clone(),
            roles,
            loa: entry.loa,
            token_id: entry.token.clone(),
        })
    }

    /// Raise the principal's level of assurance by one step, capped at
    /// high, after verifying the configured second factor.
    pub fn elevate_loa(
        &self,
        principal: &Principal,
        second_factor: &str,
    ) -> Result<Principal, SecurityError> {
        match &self.mfa_secret {
            Some(secret) if secret == second_factor => Ok(Principal {
                loa: principal.loa.raised(),
                ..principal.clone()
            }),
            _ => Err(SecurityError::BadSecondFactor),
        }
    }
}

/// One authorization rule: patterns over (action, resource) plus the
/// minimum role and LoA needed once the patterns match.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyRule {
    pub action: String,
    pub resource: String,
    pub required_role: Role,
    pub minimum_loa: LevelOfAssurance,
}

/// Ordered rule list; the first rule whose patterns match decides, and no
/// match means deny.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AccessPolicy {
    pub rules: Vec<PolicyRule>,
}

/// Outcome of an authorization check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "lowercase")]
pub enum Decision {
    Allow,
    Deny { reason: String },
}

impl Decision {
    pub fn is_allow(&self) -> bool {
        matches!(self, Decision::Allow)
    }
}

/// Glob-lite matcher: `*` alone matches anything, a trailing `*` matches a
/// prefix, otherwise the match is exact.
fn pattern_matches(pattern: &str, value: &str) -> bool {
    if pattern == "*" {
        return true;
    }
    match pattern.strip_suffix('*') {
        Some(prefix) => value.starts_with(prefix),
        None => {
            if let Some(suffix) = pattern.strip_prefix('*') {
                value.ends_with(suffix)
            } else {
                pattern == value
            }
        }
    }
}

/// First-match-wins authorization with default deny.
pub fn authorize(
    principal: &Principal,
    action: &str,
    resource: &str,
    policy: &AccessPolicy,
) -> Decision {
    for rule in &policy.rules {
        if !pattern_matches(&rule.action, action) || !pattern_matches(&rule.resource, resource) {
            continue;
        }
        if principal.max_role().rank() < rule.required_role.rank() {
            return Decision::Deny {
                reason: format!(
                    "role {:?} required for {action} on {resource}",
                    rule.required_role
                ),
            };
        }
        if principal.loa < rule.minimum_loa {
            return Decision::Deny {
                reason: format!(
                    "level of assurance {:?} required for {action} on {resource}",
                    rule.minimum_loa
                ),
            };
        }
        return Decision::Allow;
    }
    Decision::Deny {
        reason: format!("no rule permits {action} on {resource}"),
    }
}

/// The policy the service ships with: admins can do anything, members can
/// read everything and write with substantial assurance, guests can read
/// public registry resources.
pub fn default_policy() -> AccessPolicy {
    fn rule(action: &str, resource: &str, role: Role, loa: LevelOfAssurance) -> PolicyRule {
        PolicyRule {
            action: action.into(),
            resource: resource.into(),
            required_role: role,
            minimum_loa: loa,
        }
    }
    AccessPolicy {
        rules: vec![
            rule("admin.*", "*", Role::Admin, LevelOfAssurance::High),
            rule("audit.read", "*", Role::Admin, LevelOfAssurance::High),
            rule(
                "*.read",
                "registry/public*",
                Role::Guest,
                LevelOfAssurance::Low,
            ),
            rule("*.read", "*", Role::Member, LevelOfAssurance::Low),
            rule("*.write", "*", Role::Member, LevelOfAssurance::Substantial),
            rule("*.delete", "*", Role::Member, LevelOfAssurance::Substantial),
            rule("*", "*", Role::Member, LevelOfAssurance::Low),
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditOutcome {
    Allow,
    Deny,
    Error,
}

impl fmt::Display for AuditOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AuditOutcome::Allow => "allow",
            AuditOutcome::Deny => "deny",
            AuditOutcome::Error => "error",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub sequence: u64,
    #[serde(with = "timefmt::entry_time")]
    pub timestamp: DateTime<Utc>,
    pub subject: String,
    pub action: String,
    pub resource: String,
    pub outcome: AuditOutcome,
}

/// Append-only audit trail persisted as newline-delimited JSON.
///
/// A single writer discipline serializes appends; records are flushed
/// before `append` returns.
pub struct AuditLog {
    inner: Mutex<AuditLogInner>,
    path: PathBuf,
}

struct AuditLogInner {
    file: File,
    next_sequence: u64,
}

impl AuditLog {
    /// Open (or create) the log at `path`, continuing the sequence from
    /// any existing records.
    pub fn open(path: &Path) -> Result<Self, SecurityError> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let next_sequence = match File::open(path) {
            Ok(file) => {
                let mut last = 0;
                for line in BufReader::new(file).lines() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    if let Ok(record) = serde_json::from_str::<AuditRecord>(&line) {
                        last = last.max(record.sequence);
                    }
                }
                last + 1
            }
            Err(_) => 1,
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog {
            inner: Mutex::new(AuditLogInner {
                file,
                next_sequence,
            }),
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append one record, assigning the next sequence number. The record
    /// is persisted before this returns.
    pub fn append(
        &self,
        subject: &str,
        action: &str,
        resource: &str,
        outcome: AuditOutcome,
    ) -> Result<AuditRecord, SecurityError> {
        let mut inner = self.inner.lock().expect("audit log lock");
        let record = AuditRecord {
            sequence: inner.next_sequence,
            timestamp: timefmt::now_utc(),
            subject: subject.to_string(),
            action: action.to_string(),
            resource: resource.to_string(),
            outcome,
        };
        let line = serde_json::to_string(&record).expect("audit record serializes");
        writeln!(inner.file, "{line}")?;
        inner.file.flush()?;
        inner.next_sequence += 1;
        Ok(record)
    }

    /// Read the whole log back in order.
    pub fn read_all(&self) -> Result<Vec<AuditRecord>, SecurityError> {
        // Take the lock so a concurrent append cannot interleave.
        let _inner = self.inner.lock().expect("audit log lock");
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(_) => return Ok(Vec::new()),
        };
        let mut records = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: AuditRecord = serde_json::from_str(&line)
                .map_err(|e| SecurityError::TokenConfig(format!("corrupt audit record: {e}")))?;
            records.push(record);
        }
        Ok(records)
    }
}

/// Policy plus audit log: checks a principal and records the outcome, one
/// audit record per guarded operation.
pub struct Guard<'a> {
    pub policy: &'a AccessPolicy,
    pub audit: &'a AuditLog,
}

impl Guard<'_> {
    pub fn check(
        &self,
        principal: &Principal,
        action: &str,
        resource: &str,
    ) -> Result<Decision, SecurityError> {
        let decision = authorize(principal, action, resource, self.policy);
        let outcome = if decision.is_allow() {
            AuditOutcome::Allow
        } else {
            AuditOutcome::Deny
        };
        self.audit
            .append(&principal.subject, action, resource, outcome)?;
        Ok(decision)
    }
}

/// Field-masking rules: per role, the entry fields to replace with `***`
/// in rendered documents.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MaskingRules {
    #[serde(default)]
    pub rules: Vec<MaskingRule>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskingRule {
    pub role: Role,
    pub fields: Vec<String>,
}

pub const MASKED_VALUE: &str = "***";

/// Apply masking for the principal's highest role to a JSON document
/// (object or array of objects). Fields named in a matching rule are
/// replaced with `***`.
pub fn apply_masking(
    rules: &MaskingRules,
    principal: &Principal,
    value: &mut serde_json::Value,
) {
    let role = principal.max_role();
    let fields: Vec<&str> = rules
        .rules
        .iter()
        .filter(|r| r.role == role)
        .flat_map(|r| r.fields.iter().map(String::as_str))
        .collect();
    if fields.is_empty() {
        return;
    }
    mask_value(value, &fields);
}

fn mask_value(value: &mut serde_json::Value, fields: &[&str]) {
    match value {
        serde_json::Value::Object(map) => {
            for (key, val) in map.iter_mut() {
                if fields.contains(&key.as_str()) {
                    *val = serde_json::Value::String(MASKED_VALUE.into());
                } else {
                    mask_value(val, fields);
                }
            }
        }
        serde_json::Value::Array(items) => {
            for item in items {
                mask_value(item, fields);
            }
        }
        _ => {}
    }
}
