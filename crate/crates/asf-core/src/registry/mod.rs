//! Analytics-service metadata registry: entry documents, role-profile
//! validation, a concurrent store with faceted search, heartbeat
//! monitoring, and a TTL'd LRU response cache.

mod cache;
mod entry;
pub mod fixtures;
mod profile;
mod store;

pub use cache::{InvokeOutcome, ResponseCache, ServiceInvoker};
pub use entry::{
    is_lowercase_tag, is_token, is_uuid_shaped, AccessKind, DataIntegration, EntryClass,
    HeartbeatState, HeartbeatStatus, ParameterSpec, ResponseSpec, ServiceEntry, ATTRIBUTE_NAMES,
};
pub use profile::{
    validate_entry, validate_for_class, ProviderRole, Requirement, RoleProfile, ValidationReport,
};
pub use store::{
    HeartbeatProber, NamespaceKind, RegistryError, RegistryStore, SearchQuery, TcpProber,
    Visibility, DEFAULT_CACHE_CAPACITY, HEARTBEAT_TIMEOUT,
};
