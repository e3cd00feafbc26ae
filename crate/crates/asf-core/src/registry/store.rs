//! The registry store: persistence-shaped CRUD, faceted search, namespace
//! resolution, and heartbeat monitoring.
//!
//! The store supports concurrent readers with serialized writers; every
//! operation observes a consistent snapshot and entries are returned as
//! immutable values.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::{Mutex, RwLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use super::cache::{InvokeOutcome, ResponseCache, ServiceInvoker};
use super::entry::{EntryClass, HeartbeatState, HeartbeatStatus, ServiceEntry};
use super::profile::{validate_for_class, ValidationReport};
use crate::security::Principal;
use crate::timefmt;

pub const DEFAULT_CACHE_CAPACITY: usize = 1024;
pub const HEARTBEAT_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("entry {0} already exists")]
    DuplicateId(String),
    #[error("id {0} was removed and cannot be reused")]
    RetiredId(String),
    #[error("no entry with id {0}")]
    UnknownId(String),
    #[error("validation failed: {}", violations.join("; "))]
    Invalid { violations: Vec<String> },
    #[error("{0}")]
    NotApplicable(String),
    #[error("no entry references {0}")]
    UnknownUrl(String),
    #[error("entry {0} has no caching_interval")]
    CachingNotConfigured(String),
    #[error("invocation failed: {0}")]
    Invocation(String),
}

impl RegistryError {
    fn from_report(report: ValidationReport) -> Self {
        RegistryError::Invalid {
            violations: report.violations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Private,
}

/// Faceted search query. Entries must satisfy every provided facet:
/// each keyword as a case-insensitive substring of name, title, or
/// description, and each tag/category by exact membership.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl SearchQuery {
    pub fn matches(&self, entry: &ServiceEntry) -> bool {
        let haystack = format!(
            "{}\n{}\n{}",
            entry.name.as_deref().unwrap_or(""),
            entry.title.as_deref().unwrap_or(""),
            entry.description.as_deref().unwrap_or("")
        )
        .to_lowercase();
        if !self
            .keywords
            .iter()
            .all(|k| haystack.contains(&k.to_lowercase()))
        {
            return false;
        }
        let empty = Vec::new();
        let tags = entry.tags.as_ref().unwrap_or(&empty);
        if !self.tags.iter().all(|t| tags.contains(t)) {
            return false;
        }
        let categories = entry.categories.as_ref().unwrap_or(&empty);
        self.categories.iter().all(|c| categories.contains(c))
    }
}

/// What a namespace URL denotes after registry lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamespaceKind {
    CodeBase,
    ServiceEndpoint,
}

/// Issues one liveness probe against a service endpoint.
pub trait HeartbeatProber: Send + Sync {
    fn probe(&self, endpoint: &str) -> bool;
}

/// Default prober: one TCP request to the endpoint host with a 2-second
/// timeout; any response bytes count as alive.
pub struct TcpProber;

impl HeartbeatProber for TcpProber {
    fn probe(&self, endpoint: &str) -> bool {
        let Ok(url) = url::Url::parse(endpoint) else {
            return false;
        };
        let Some(host) = url.host_str() else {
            return false;
        };
        let port = url.port_or_known_default().unwrap_or(80);
        let Ok(addrs) = std::net::ToSocketAddrs::to_socket_addrs(&(host, port)) else {
            return false;
        };
        for addr in addrs {
            let Ok(mut stream) = TcpStream::connect_timeout(&addr, HEARTBEAT_TIMEOUT) else {
                continue;
            };
            let _ = stream.set_read_timeout(Some(HEARTBEAT_TIMEOUT));
            let _ = stream.set_write_timeout(Some(HEARTBEAT_TIMEOUT));
            let request = format!(
                "GET {} HTTP/1.0\r\nHost: {}\r\n\r\n",
                url.path(),
                host
            );
            if stream.write_all(request.as_bytes()).is_err() {
                continue;
            }
            let mut buf = [0u8; 1];
            if matches!(stream.read(&mut buf), Ok(n) if n > 0) {
                return true;
            }
        }
        false
    }
}

struct StoreInner {
    entries: BTreeMap<String, ServiceEntry>,
    /// Ids of removed entries; never handed out again.
    retired: BTreeSet<String>,
}

/// An id-keyed collection of service entries under one URL namespace.
pub struct RegistryStore {
    visibility: Visibility,
    base_url: String,
    inner: RwLock<StoreInner>,
    cache: Mutex<ResponseCache>,
}

impl RegistryStore {
    pub fn new(visibility: Visibility, base_url: impl Into<String>) -> Self {
        RegistryStore {
            visibility,
            base_url: base_url.into(),
            inner: RwLock::new(StoreInner {
                entries: BTreeMap::new(),
                retired: BTreeSet::new(),
            }),
            cache: Mutex::new(ResponseCache::new(DEFAULT_CACHE_CAPACITY)),
        }
    }

    /// Rebuild a store from a dump (a list of entry documents).
    pub fn from_entries(
        visibility: Visibility,
        base_url: impl Into<String>,
        entries: Vec<ServiceEntry>,
        now: DateTime<Utc>,
    ) -> Result<Self, RegistryError> {
        let store = RegistryStore::new(visibility, base_url);
        for entry in entries {
            store.register(entry, now)?;
        }
        Ok(store)
    }

    pub fn visibility(&self) -> Visibility {
        self.visibility
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("store lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shrink or grow the response cache (test hook; default 1024).
    pub fn set_cache_capacity(&self, capacity: usize) {
        self.cache.lock().expect("cache lock").set_capacity(capacity);
    }

    /// Validate and persist an entry, assigning a fresh UUID and creation
    /// timestamps where absent.
    pub fn register(
        &self,
        mut entry: ServiceEntry,
        now: DateTime<Utc>,
    ) -> Result<String, RegistryError> {
        if entry.created.is_none() {
            entry.created = Some(now);
        }
        if entry.modified.is_none() {
            entry.modified = Some(entry.created.unwrap_or(now).max(now));
        }

        let mut inner = self.inner.write().expect("store lock");
        let id = match entry.id.clone() {
            Some(id) => {
                if inner.entries.contains_key(&id) {
                    return Err(RegistryError::DuplicateId(id));
                }
                if inner.retired.contains(&id) {
                    return Err(RegistryError::RetiredId(id));
                }
                id
            }
            None => loop {
                let candidate = Uuid::new_v4().to_string();
                if !inner.entries.contains_key(&candidate) && !inner.retired.contains(&candidate) {
                    break candidate;
                }
            },
        };
        entry.id = Some(id.clone());

        check_class_consistency(&entry)?;
        let report = validate_for_class(&entry)
            .map_err(|v| RegistryError::Invalid { violations: vec![v] })?;
        if !report.valid {
            return Err(RegistryError::from_report(report));
        }

        inner.entries.insert(id.clone(), entry);
        Ok(id)
    }

    /// Replace a stored entry. The new modified timestamp is strictly
    /// greater than the previous one.
    pub fn update(
        &self,
        mut entry: ServiceEntry,
        now: DateTime<Utc>,
    ) -> Result<ServiceEntry, RegistryError> {
        let id = entry
            .id
            .clone()
            .ok_or_else(|| RegistryError::UnknownId("<missing id>".into()))?;

        let mut inner = self.inner.write().expect("store lock");
        let previous = inner
            .entries
            .get(&id)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownId(id.clone()))?;

        if entry.created.is_none() {
            entry.created = previous.created;
        }
        let floor = previous
            .modified
            .map(|m| m + chrono::Duration::seconds(1))
            .unwrap_or(now);
        entry.modified = Some(now.max(floor));

        check_class_consistency(&entry)?;
        let report = validate_for_class(&entry)
            .map_err(|v| RegistryError::Invalid { violations: vec![v] })?;
        if !report.valid {
            return Err(RegistryError::from_report(report));
        }

        inner.entries.insert(id, entry.clone());
        Ok(entry)
    }

    pub fn get(&self, id: &str) -> Result<ServiceEntry, RegistryError> {
        self.inner
            .read()
            .expect("store lock")
            .entries
            .get(id)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownId(id.to_string()))
    }

    /// Remove an entry and retire its id.
    pub fn remove(&self, id: &str) -> Result<ServiceEntry, RegistryError> {
        let mut inner = self.inner.write().expect("store lock");
        let entry = inner
            .entries
            .remove(id)
            .ok_or_else(|| RegistryError::UnknownId(id.to_string()))?;
        inner.retired.insert(id.to_string());
        Ok(entry)
    }

    /// All entries visible to the principal, ordered by (name, id).
    pub fn list(&self, principal: &Principal) -> Vec<ServiceEntry> {
        self.search(&SearchQuery::default(), principal)
    }

    /// Faceted search over visible entries; deterministic (name, id) order.
    ///
    /// Guest-level principals only ever see entries with `public: true`.
    pub fn search(&self, query: &SearchQuery, principal: &Principal) -> Vec<ServiceEntry> {
        let inner = self.inner.read().expect("store lock");
        let mut hits: Vec<ServiceEntry> = inner
            .entries
            .values()
            .filter(|e| visible_to(e, principal))
            .filter(|e| query.matches(e))
            .cloned()
            .collect();
        drop(inner);
        hits.sort_by(entry_order);
        hits
    }

    /// A dump of every entry ordered by (name, id); the registry file
    /// format is the JSON array of these documents.
    pub fn dump(&self) -> Vec<ServiceEntry> {
        let inner = self.inner.read().expect("store lock");
        let mut all: Vec<ServiceEntry> = inner.entries.values().cloned().collect();
        drop(inner);
        all.sort_by(entry_order);
        all
    }

    /// Probe an entry's endpoint and record the outcome.
    pub fn check_heartbeat(
        &self,
        id: &str,
        prober: &dyn HeartbeatProber,
    ) -> Result<HeartbeatStatus, RegistryError> {
        let entry = self.get(id)?;
        if entry.entry_class == Some(EntryClass::Library) {
            return Err(RegistryError::NotApplicable(
                "heartbeat is not applicable to library entries".into(),
            ));
        }
        let endpoint = entry.endpoint.clone().ok_or_else(|| {
            RegistryError::NotApplicable("entry has no endpoint to probe".into())
        })?;

        // Probe outside the lock so slow endpoints do not block the store.
        let alive = prober.probe(&endpoint);
        let status = HeartbeatStatus {
            state: if alive {
                HeartbeatState::Alive
            } else {
                HeartbeatState::Dead
            },
            checked_at: Some(timefmt::now_utc()),
        };

        let mut inner = self.inner.write().expect("store lock");
        if let Some(stored) = inner.entries.get_mut(id) {
            stored.heartbeat = Some(status);
        }
        Ok(status)
    }

    /// Classify a namespace URL by registry lookup: an instantiated
    /// endpoint beats a code-base match when both occur.
    pub fn resolve_namespace(&self, url: &str) -> Result<NamespaceKind, RegistryError> {
        let inner = self.inner.read().expect("store lock");
        if inner
            .entries
            .values()
            .any(|e| e.endpoint.as_deref() == Some(url))
        {
            return Ok(NamespaceKind::ServiceEndpoint);
        }
        if inner
            .entries
            .values()
            .any(|e| e.source.as_deref() == Some(url))
        {
            return Ok(NamespaceKind::CodeBase);
        }
        Err(RegistryError::UnknownUrl(url.to_string()))
    }

    /// Invoke a service through the LRU response cache.
    ///
    /// An identical request answered within the entry's caching interval
    /// is served from the cache without re-invoking. Failed invocations
    /// are never cached.
    pub fn cached_invoke(
        &self,
        id: &str,
        request: &str,
        now: DateTime<Utc>,
        invoker: &dyn ServiceInvoker,
    ) -> Result<InvokeOutcome, RegistryError> {
        let entry = self.get(id)?;
        let interval = entry
            .caching_interval
            .ok_or_else(|| RegistryError::CachingNotConfigured(id.to_string()))?;

        let mut cache = self.cache.lock().expect("cache lock");
        if let Some(response) = cache.lookup(id, request, now, interval) {
            return Ok(InvokeOutcome {
                response,
                cache_hit: true,
            });
        }
        // Hold the lock across the invocation so concurrent identical
        // requests cannot stampede the backend.
        let response = invoker
            .invoke(&entry, request)
            .map_err(RegistryError::Invocation)?;
        cache.store(id, request, response.clone(), now);
        Ok(InvokeOutcome {
            response,
            cache_hit: false,
        })
    }
}

fn entry_order(a: &ServiceEntry, b: &ServiceEntry) -> std::cmp::Ordering {
    (a.name.as_deref().unwrap_or(""), a.id.as_deref().unwrap_or("")).cmp(&(
        b.name.as_deref().unwrap_or(""),
        b.id.as_deref().unwrap_or(""),
    ))
}

fn visible_to(entry: &ServiceEntry, principal: &Principal) -> bool {
    if principal.is_guest() {
        entry.public == Some(true)
    } else {
        true
    }
}

fn check_class_consistency(entry: &ServiceEntry) -> Result<(), RegistryError> {
    match entry.entry_class {
        Some(EntryClass::Library) if entry.endpoint.is_some() => Err(RegistryError::Invalid {
            violations: vec!["library entries must not carry an endpoint".into()],
        }),
        _ => Ok(()),
    }
}
