//! Sample entry documents used by tests and demos.

use chrono::{DateTime, Utc};

use super::entry::{
    AccessKind, DataIntegration, EntryClass, HeartbeatState, HeartbeatStatus, ParameterSpec,
    ResponseSpec, ServiceEntry,
};
use crate::timefmt::parse_entry_time;

fn ts(text: &str) -> DateTime<Utc> {
    parse_entry_time(text).expect("fixture timestamp")
}

/// A well-formed entry with every attribute present.
///
/// The id is fixed so documents derived from the fixture are reproducible,
/// and the specification schema URL references it.
pub fn populated_entry(class: EntryClass) -> ServiceEntry {
    let id = "6b7f1d7a-9a1c-4c3a-8f0e-2d5a3f9b1c44";
    ServiceEntry {
        id: Some(id.into()),
        name: Some("translate".into()),
        title: Some("Text translation".into()),
        public: Some(true),
        description: Some("Translates text between natural languages".into()),
        endpoint: Some("http://localhost:8700/translate".into()),
        input_parameters: Some(vec![ParameterSpec {
            name: "text".into(),
            function: "translate".into(),
            type_label: "string".into(),
            value: Some("hello world".into()),
            access: AccessKind::Value,
        }]),
        output_parameters: Some(vec![ResponseSpec {
            function: "translate".into(),
            name: "translation".into(),
            type_label: "string".into(),
            value: None,
            access: AccessKind::Value,
            timestamp: Some(ts("2023-01-02T03:04:05Z")),
        }]),
        version: Some("1.0.0".into()),
        license: Some("Apache-2.0".into()),
        protocol: Some("REST".into()),
        microservice: Some(true),
        modified: Some(ts("2023-01-05T12:00:00Z")),
        owner: Some("Example Org".into()),
        author: Some("ops@example.org".into()),
        tags: Some(vec!["nlp".into(), "translation".into()]),
        categories: Some(vec!["NLP".into()]),
        created: Some(ts("2023-01-02T03:04:05Z")),
        heartbeat: Some(HeartbeatStatus {
            state: HeartbeatState::Alive,
            checked_at: Some(ts("2023-01-05T12:00:00Z")),
        }),
        documentation: Some("https://example.org/docs/translate".into()),
        source: Some("https://example.org/git/translate".into()),
        specification_schema: Some(format!("https://example.org/schemas/{id}.json")),
        additional_metadata: Some("https://example.org/meta/translate".into()),
        sla: Some("99.9% availability, 0.01 USD per call".into()),
        caching_interval: Some(60),
        data_integration: Some(DataIntegration {
            upload_endpoint: Some("http://localhost:8700/upload".into()),
            download_endpoint: Some("http://localhost:8700/download".into()),
            protocol: "REST".into(),
        }),
        authors: Some("Example Org service team".into()),
        entry_class: Some(class),
    }
}

/// A minimal valid instantiated-service entry named `name`.
pub fn minimal_service_entry(name: &str) -> ServiceEntry {
    ServiceEntry {
        id: Some(uuid::Uuid::new_v4().to_string()),
        name: Some(name.into()),
        title: Some(format!("{name} service")),
        public: Some(true),
        description: Some(format!("The {name} service")),
        endpoint: Some(format!("http://localhost:8700/{name}")),
        input_parameters: Some(vec![]),
        output_parameters: Some(vec![]),
        version: Some("0.1.0".into()),
        license: Some("Apache-2.0".into()),
        protocol: Some("REST".into()),
        microservice: Some(false),
        modified: Some(ts("2023-01-01T00:00:00Z")),
        owner: Some("Example Org".into()),
        created: Some(ts("2023-01-01T00:00:00Z")),
        specification_schema: Some(format!("https://example.org/schemas/{name}.json")),
        authors: Some("Example Org".into()),
        entry_class: Some(EntryClass::InstantiatedService),
        ..ServiceEntry::default()
    }
}
