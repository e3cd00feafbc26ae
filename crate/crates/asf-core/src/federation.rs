//! Registry federation: a single lookup and search view over several
//! member registries, with optional per-id enrichment.
//!
//! A federated view is an immutable snapshot. Duplicate ids across members
//! are resolved by policy when the view is built; enrichments live in the
//! view only and never touch the member registries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::{RegistryStore, SearchQuery, ServiceEntry};
use crate::security::Principal;

#[derive(Debug, Error)]
pub enum FederationError {
    #[error("duplicate registry label {0}")]
    DuplicateLabel(String),
    #[error("no federated entry with id {0}")]
    UnknownId(String),
    #[error("rating {0} outside [0, 5]")]
    RatingOutOfRange(f64),
    #[error("carbon cost {0} must be nonnegative")]
    NegativeCarbonCost(f64),
}

/// How to resolve the same id appearing in several members.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuplicatePolicy {
    /// Keep the copy with the latest modified timestamp; ties go to the
    /// lexicographically smallest origin label.
    #[default]
    LatestModifiedWins,
    /// Keep the copy from the first member (in federation order) that
    /// carries the id.
    FirstMemberWins,
}

/// Broker-side extra information attached to a federated entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Enrichment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_comparison: Option<String>,
    /// Community rating in [0, 5].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark_note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sla_note: Option<String>,
    /// Carbon cost measure, nonnegative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carbon_cost: Option<f64>,
}

impl Enrichment {
    fn validate(&self) -> Result<(), FederationError> {
        if let Some(rating) = self.rating {
            if !(0.0..=5.0).contains(&rating) {
                return Err(FederationError::RatingOutOfRange(rating));
            }
        }
        if let Some(cost) = self.carbon_cost {
            if cost < 0.0 {
                return Err(FederationError::NegativeCarbonCost(cost));
            }
        }
        Ok(())
    }
}

/// A search hit tagged with the member registry it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedHit {
    pub origin: String,
    pub entry: ServiceEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<Enrichment>,
}

/// Immutable single-interface view over several member registries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FederatedView {
    /// Per-member entry snapshots, in federation order.
    members: Vec<(String, Vec<ServiceEntry>)>,
    policy: DuplicatePolicy,
    index: BTreeMap<String, (String, ServiceEntry)>,
    enrichments: BTreeMap<String, Enrichment>,
}

impl FederatedView {
    pub fn member_labels(&self) -> Vec<String> {
        self.members.iter().map(|(label, _)| label.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Look an id up across all members.
    pub fn lookup(&self, id: &str) -> Result<FederatedHit, FederationError> {
        let (origin, entry) = self
            .index
            .get(id)
            .ok_or_else(|| FederationError::UnknownId(id.to_string()))?;
        Ok(FederatedHit {
            origin: origin.clone(),
            entry: entry.clone(),
            enrichment: self.enrichments.get(id).cloned(),
        })
    }

    /// Attach broker-side enrichment to a federated id, returning the new
    /// view. Member registries are never modified.
    pub fn enrich(&self, id: &str, enrichment: Enrichment) -> Result<FederatedView, FederationError> {
        if !self.index.contains_key(id) {
            return Err(FederationError::UnknownId(id.to_string()));
        }
        enrichment.validate()?;
        let mut next = self.clone();
        next.enrichments.insert(id.to_string(), enrichment);
        Ok(next)
    }
}

/// Resolve duplicate ids among (label, entry) candidates; candidates must
/// arrive in member order.
fn resolve_duplicates(
    candidates: impl Iterator<Item = (String, ServiceEntry)>,
    policy: DuplicatePolicy,
) -> BTreeMap<String, (String, ServiceEntry)> {
    let mut index: BTreeMap<String, (String, ServiceEntry)> = BTreeMap::new();
    for (label, entry) in candidates {
        let Some(id) = entry.id.clone() else { continue };
        match index.get(&id) {
            None => {
                index.insert(id, (label, entry));
            }
            Some((held_label, held)) => {
                let replace = match policy {
                    DuplicatePolicy::FirstMemberWins => false,
                    DuplicatePolicy::LatestModifiedWins => match (entry.modified, held.modified) {
                        (Some(a), Some(b)) if a != b => a > b,
                        (Some(_), None) => true,
                        (None, Some(_)) => false,
                        _ => label < *held_label,
                    },
                };
                if replace {
                    index.insert(id, (label, entry));
                }
            }
        }
    }
    index
}

/// Build a federated view over labeled registries.
pub fn federate(
    registries: &[(String, &RegistryStore)],
    policy: DuplicatePolicy,
) -> Result<FederatedView, FederationError> {
    federate_entries(
        registries
            .iter()
            .map(|(label, store)| (label.clone(), store.dump()))
            .collect(),
        policy,
    )
}

/// Build a federated view from member entry dumps (for members that are
/// files or request payloads rather than live stores).
pub fn federate_entries(
    members: Vec<(String, Vec<ServiceEntry>)>,
    policy: DuplicatePolicy,
) -> Result<FederatedView, FederationError> {
    for (i, (label, _)) in members.iter().enumerate() {
        if members[..i].iter().any(|(held, _)| held == label) {
            return Err(FederationError::DuplicateLabel(label.clone()));
        }
    }

    let index = resolve_duplicates(
        members
            .iter()
            .flat_map(|(label, entries)| entries.iter().map(|e| (label.clone(), e.clone()))),
        policy,
    );

    Ok(FederatedView {
        members,
        policy,
        index,
        enrichments: BTreeMap::new(),
    })
}

/// Search every member with registry search semantics and resolve
/// duplicate ids among the matching, visible copies; each hit is tagged
/// with its origin. Results are ordered by (name, id) like a
/// single-registry search.
pub fn federated_search(
    view: &FederatedView,
    query: &SearchQuery,
    principal: &Principal,
) -> Vec<FederatedHit> {
    let matching = view.members.iter().flat_map(|(label, entries)| {
        entries
            .iter()
            .filter(|entry| {
                if principal.is_guest() {
                    entry.public == Some(true)
                } else {
                    true
                }
            })
            .filter(|entry| query.matches(entry))
            .map(|entry| (label.clone(), entry.clone()))
    });
    let mut hits: Vec<FederatedHit> = resolve_duplicates(matching, view.policy)
        .into_iter()
        .map(|(id, (origin, entry))| FederatedHit {
            origin,
            entry,
            enrichment: view.enrichments.get(&id).cloned(),
        })
        .collect();
    hits.sort_by(|a, b| {
        (
            a.entry.name.as_deref().unwrap_or(""),
            a.entry.id.as_deref().unwrap_or(""),
        )
            .cmp(&(
                b.entry.name.as_deref().unwrap_or(""),
                b.entry.id.as_deref().unwrap_or(""),
            ))
    });
    hits
}
