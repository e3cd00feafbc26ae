//! Catalog projection and catalog merging.
//!
//! A catalog lists services at overview level: enough to locate and
//! evaluate them, without the technical detail a registry carries. A
//! catalog document is a JSON array of catalog entries; catalogs from
//! several organizations merge into one by id, latest modification wins.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{DataIntegration, ServiceEntry};
use crate::timefmt;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(String),
}

/// Overview-level subset of a service entry.
///
/// Heartbeat, parameter lists, source, and the entry class are registry
/// detail and are never projected into a catalog.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub public: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub license: Option<String>,
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
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
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
    pub documentation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specification_schema: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additional_metadata: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caching_interval: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_integration: Option<DataIntegration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<String>,
}

/// Project a registry entry to its catalog form.
pub fn project_to_catalog(entry: &ServiceEntry) -> CatalogEntry {
    CatalogEntry {
        id: entry.id.clone(),
        name: entry.name.clone(),
        title: entry.title.clone(),
        public: entry.public,
        description: entry.description.clone(),
        endpoint: entry.endpoint.clone(),
        version: entry.version.clone(),
        license: entry.license.clone(),
        protocol: entry.protocol.clone(),
        microservice: entry.microservice,
        modified: entry.modified,
        owner: entry.owner.clone(),
        author: entry.author.clone(),
        tags: entry.tags.clone(),
        categories: entry.categories.clone(),
        created: entry.created,
        documentation: entry.documentation.clone(),
        specification_schema: entry.specification_schema.clone(),
        additional_metadata: entry.additional_metadata.clone(),
        sla: entry.sla.clone(),
        caching_interval: entry.caching_interval,
        data_integration: entry.data_integration.clone(),
        authors: entry.authors.clone(),
    }
}

/// Parse a catalog document (a JSON array of catalog entries).
pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>, CatalogError> {
    serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))
}

/// Merge catalog documents into one.
///
/// Entries sharing an id collapse to the latest-modified version; on equal
/// timestamps the entry with the greater canonical JSON form wins, which
/// keeps the merge independent of input order. Output is sorted by
/// (name, id).
pub fn merge_catalogs(catalogs: &[Vec<CatalogEntry>]) -> Vec<CatalogEntry> {
    let mut by_id: std::collections::BTreeMap<String, CatalogEntry> =
        std::collections::BTreeMap::new();
    let mut anonymous: Vec<CatalogEntry> = Vec::new();

    for catalog in catalogs {
        for entry in catalog {
            match &entry.id {
                None => anonymous.push(entry.clone()),
                Some(id) => match by_id.get(id) {
                    None => {
                        by_id.insert(id.clone(), entry.clone());
                    }
                    Some(existing) if prefer_over(entry, existing) => {
                        by_id.insert(id.clone(), entry.clone());
                    }
                    Some(_) => {}
                },
            }
        }
    }

    let mut merged: Vec<CatalogEntry> = by_id.into_values().chain(anonymous).collect();
    merged.sort_by_key(catalog_order);
    merged.dedup();
    merged
}

fn catalog_order(entry: &CatalogEntry) -> (String, String) {
    (
        entry.name.clone().unwrap_or_default(),
        entry.id.clone().unwrap_or_default(),
    )
}

fn prefer_over(candidate: &CatalogEntry, existing: &CatalogEntry) -> bool {
    match (candidate.modified, existing.modified) {
        (Some(a), Some(b)) if a != b => a > b,
        (Some(_), None) => true,
        (None, Some(_)) => false,
        // Equal or both missing: order-insensitive content tiebreak.
        _ => canonical_json(candidate) > canonical_json(existing),
    }
}

fn canonical_json(entry: &CatalogEntry) -> String {
    // serde_json object serialization is key-sorted via BTreeMap below.
    let value = serde_json::to_value(entry).expect("catalog entry serializes");
    let sorted: std::collections::BTreeMap<String, serde_json::Value> = match value {
        serde_json::Value::Object(map) => map.into_iter().collect(),
        _ => Default::default(),
    };
    serde_json::to_string(&sorted).expect("catalog entry serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::fixtures::{minimal_service_entry, populated_entry};
    use crate::registry::EntryClass;
    use crate::timefmt::parse_entry_time;

    #[test]
    fn projection_drops_heartbeat_and_registry_detail() {
        let entry = populated_entry(EntryClass::InstantiatedService);
        assert!(entry.heartbeat.is_some());
        let catalog = project_to_catalog(&entry);
        let doc = serde_json::to_value(&catalog).unwrap();
        let obj = doc.as_object().unwrap();
        for dropped in ["heartbeat", "input_parameters", "output_parameters", "source", "entry_class"] {
            assert!(!obj.contains_key(dropped), "{dropped} must not be projected");
        }
        assert_eq!(doc["name"], "translate");
        assert_eq!(doc["sla"], entry.sla.clone().unwrap());
    }

    #[test]
    fn projection_of_minimal_entry_keeps_its_field_set() {
        let entry = minimal_service_entry("alpha");
        let catalog = project_to_catalog(&entry);
        let entry_doc = serde_json::to_value(&entry).unwrap();
        let catalog_doc = serde_json::to_value(&catalog).unwrap();
        let entry_keys: std::collections::BTreeSet<_> =
            entry_doc.as_object().unwrap().keys().cloned().collect();
        let catalog_keys: std::collections::BTreeSet<_> =
            catalog_doc.as_object().unwrap().keys().cloned().collect();
        let mut expected = entry_keys.clone();
        expected.remove("entry_class");
        expected.remove("input_parameters");
        expected.remove("output_parameters");
        assert_eq!(catalog_keys, expected);
    }

    #[test]
    fn projection_is_idempotent() {
        let entry = populated_entry(EntryClass::InstantiatedService);
        let once = project_to_catalog(&entry);
        // Reading a catalog document back as an entry and projecting again
        // must change nothing.
        let doc = serde_json::to_string(&once).unwrap();
        let reread: ServiceEntry = serde_json::from_str(&doc).unwrap();
        let twice = project_to_catalog(&reread);
        assert_eq!(once, twice);
    }

    #[test]
    fn disjoint_catalogs_merge_to_union() {
        let a: Vec<CatalogEntry> = (0..2)
            .map(|i| project_to_catalog(&minimal_service_entry(&format!("a{i}"))))
            .collect();
        let b: Vec<CatalogEntry> = (0..3)
            .map(|i| project_to_catalog(&minimal_service_entry(&format!("b{i}"))))
            .collect();
        let merged = merge_catalogs(&[a, b]);
        assert_eq!(merged.len(), 5);
    }

    #[test]
    fn latest_modified_wins_on_shared_id() {
        let mut older = project_to_catalog(&minimal_service_entry("svc"));
        older.id = Some("00000000-0000-0000-0000-000000000001".into());
        older.modified = Some(parse_entry_time("2023-01-01T00:00:00Z").unwrap());
        older.title = Some("old".into());
        let mut newer = older.clone();
        newer.modified = Some(parse_entry_time("2023-06-01T00:00:00Z").unwrap());
        newer.title = Some("new".into());

        let merged = merge_catalogs(&[vec![older.clone()], vec![newer.clone()]]);
        assert_eq!(merged, vec![newer.clone()]);
        // Input order must not matter.
        let merged = merge_catalogs(&[vec![newer.clone()], vec![older]]);
        assert_eq!(merged, vec![newer]);
    }

    #[test]
    fn merging_a_catalog_with_itself_is_identity() {
        let catalog: Vec<CatalogEntry> = vec![
            project_to_catalog(&minimal_service_entry("alpha")),
            project_to_catalog(&minimal_service_entry("beta")),
        ];
        let merged = merge_catalogs(&[catalog.clone(), catalog.clone()]);
        let mut expected = catalog;
        expected.sort_by(|a, b| catalog_order(a).cmp(&catalog_order(b)));
        assert_eq!(merged, expected);
    }

    #[test]
    fn malformed_document_is_an_error() {
        assert!(parse_catalog("{not json").is_err());
        assert!(parse_catalog("[{\"unknown_key\": 1}]").is_err());
    }
}
