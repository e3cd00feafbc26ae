//! Service entry documents.
//!
//! An entry describes one analytics service offering. Every attribute is
//! optional at the type level so that presence/absence can be validated
//! against a provider role profile; which attributes are mandatory depends
//! on the role, not on the type. Entries serialize as flat JSON documents
//! with snake_case keys and `YYYY-MM-DDTHH:MM:SSZ` timestamps.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::timefmt;

/// How a parameter or response is exchanged with the service.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccessKind {
    Stream,
    Database,
    Value,
    Event,
}

/// One input parameter accepted by a service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    /// Target function on the service this parameter belongs to.
    pub function: String,
    /// Data-type label, e.g. "string" or "float".
    #[serde(rename = "type")]
    pub type_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub access: AccessKind,
}

/// One response emitted by a service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSpec {
    pub function: String,
    pub name: String,
    #[serde(rename = "type")]
    pub type_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    pub access: AccessKind,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "timefmt::entry_time_opt"
    )]
    pub timestamp: Option<DateTime<Utc>>,
}

/// Liveness of a running service instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeartbeatState {
    Alive,
    Dead,
    Unknown,
}

/// State and timestamp of the last liveness check.
///
/// `checked_at` is absent only before the first probe, which is also the
/// only situation in which `state` may be `unknown`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeartbeatStatus {
    pub state: HeartbeatState,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "timefmt::entry_time_opt"
    )]
    pub checked_at: Option<DateTime<Utc>>,
}

impl HeartbeatStatus {
    pub fn unknown() -> Self {
        HeartbeatStatus {
            state: HeartbeatState::Unknown,
            checked_at: None,
        }
    }
}

/// Upload/download endpoints for data too large to pass as a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataIntegration {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upload_endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub download_endpoint: Option<String>,
    pub protocol: String,
}

/// Whether the entry describes a running service or a deployable library.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryClass {
    #[serde(rename = "instantiated-service")]
    InstantiatedService,
    #[serde(rename = "library")]
    Library,
}

/// A registry/catalog record for one analytics service.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceEntry {
    /// Globally unique identifier in UUID textual form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    /// Machine name, a nonempty token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    /// Entry-level visibility: public entries are visible to any
    /// authenticated principal including guests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub public: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// URL of a running instance; absent for library entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_parameters: Option<Vec<ParameterSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_parameters: Option<Vec<ResponseSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub license: Option<String>,
    /// Protocol label, e.g. "REST".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub microservice: Option<bool>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "timefmt::entry_time_opt"
    )]
    pub modified: Option<DateTime<Utc>>,
    /// Name of the distributing entity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    /// Contact details of the party responsible for the service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    /// Lowercase tokens, unique within the list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        with = "timefmt::entry_time_opt"
    )]
    pub created: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heartbeat: Option<HeartbeatStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documentation: Option<String>,
    /// Link to the source code if available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specification_schema: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additional_metadata: Option<String>,
    /// Service level agreement text, including cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla: Option<String>,
    /// Response cache interval in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caching_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_integration: Option<DataIntegration>,
    /// Freeform contact string.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_class: Option<EntryClass>,
}

/// Attribute names of a service entry, in document order. The role
/// profiles key their requirement levels by these names.
pub const ATTRIBUTE_NAMES: &[&str] = &[
    "id",
    "name",
    "title",
    "public",
    "description",
    "endpoint",
    "input_parameters",
    "output_parameters",
    "version",
    "license",
    "protocol",
    "microservice",
    "modified",
    "owner",
    "author",
    "tags",
    "categories",
    "created",
    "heartbeat",
    "documentation",
    "source",
    "specification_schema",
    "additional_metadata",
    "sla",
    "caching_interval",
    "data_integration",
    "authors",
    "entry_class",
];

impl ServiceEntry {
    /// True when the named attribute carries a value.
    pub fn has_attribute(&self, attribute: &str) -> bool {
        match attribute {
            "id" => self.id.is_some(),
            "name" => self.name.is_some(),
            "title" => self.title.is_some(),
            "public" => self.public.is_some(),
            "description" => self.description.is_some(),
            "endpoint" => self.endpoint.is_some(),
            "input_parameters" => self.input_parameters.is_some(),
            "output_parameters" => self.output_parameters.is_some(),
            "version" => self.version.is_some(),
            "license" => self.license.is_some(),
            "protocol" => self.protocol.is_some(),
            "microservice" => self.microservice.is_some(),
            "modified" => self.modified.is_some(),
            "owner" => self.owner.is_some(),
            "author" => self.author.is_some(),
            "tags" => self.tags.is_some(),
            "categories" => self.categories.is_some(),
            "created" => self.created.is_some(),
            "heartbeat" => self.heartbeat.is_some(),
            "documentation" => self.documentation.is_some(),
            "source" => self.source.is_some(),
            "specification_schema" => self.specification_schema.is_some(),
            "additional_metadata" => self.additional_metadata.is_some(),
            "sla" => self.sla.is_some(),
            "caching_interval" => self.caching_interval.is_some(),
            "data_integration" => self.data_integration.is_some(),
            "authors" => self.authors.is_some(),
            "entry_class" => self.entry_class.is_some(),
            _ => false,
        }
    }

    /// Remove the named attribute, if the name is known.
    pub fn clear_attribute(&mut self, attribute: &str) {
        match attribute {
            "id" => self.id = None,
            "name" => self.name = None,
            "title" => self.title = None,
            "public" => self.public = None,
            "description" => self.description = None,
            "endpoint" => self.endpoint = None,
            "input_parameters" => self.input_parameters = None,
            "output_parameters" => self.output_parameters = None,
            "version" => self.version = None,
            "license" => self.license = None,
            "protocol" => self.protocol = None,
            "microservice" => self.microservice = None,
            "modified" => self.modified = None,
            "owner" => self.owner = None,
            "author" => self.author = None,
            "tags" => self.tags = None,
            "categories" => self.categories = None,
            "created" => self.created = None,
            "heartbeat" => self.heartbeat = None,
            "documentation" => self.documentation = None,
            "source" => self.source = None,
            "specification_schema" => self.specification_schema = None,
            "additional_metadata" => self.additional_metadata = None,
            "sla" => self.sla = None,
            "caching_interval" => self.caching_interval = None,
            "data_integration" => self.data_integration = None,
            "authors" => self.authors = None,
            "entry_class" => self.entry_class = None,
            _ => {}
        }
    }
}

/// True if `text` parses as a UUID.
pub fn is_uuid_shaped(text: &str) -> bool {
    uuid::Uuid::parse_str(text).is_ok()
}

/// True for a nonempty string without whitespace.
pub fn is_token(text: &str) -> bool {
    !text.is_empty() && !text.chars().any(char::is_whitespace)
}

/// True for a lowercase tag token: `[a-z][a-z0-9_-]*`.
pub fn is_lowercase_tag(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}
