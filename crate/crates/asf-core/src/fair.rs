//! FAIR-style compliance auditing of service entries.
//!
//! The audit evaluates the findable/accessible/interoperable/reusable
//! principles plus deployable and operational, each operationalized as a
//! decidable predicate over entry fields. Facts that only the runtime can
//! know (search indexing, protocol openness, metadata retention, an
//! enabled security layer) are supplied as explicit context flags so the
//! audit stays a pure function.

use serde::{Deserialize, Serialize};

use crate::registry::{
    is_lowercase_tag, is_uuid_shaped, validate_entry, EntryClass, ProviderRole, RoleProfile,
    ServiceEntry,
};

/// The 17 principle codes, in report order.
pub const PRINCIPLE_CODES: [&str; 17] = [
    "F1", "F2", "F3", "F4", "A1", "A1.1", "A1.2", "A2", "I1", "I2", "I3", "R1", "R1.1", "R1.2",
    "R1.3", "D1", "O1",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotEvaluable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipleCheck {
    pub code: String,
    pub status: CheckStatus,
    pub reason: String,
}

/// Runtime facts the entry itself cannot witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditContext {
    /// The entry is registered or indexed in a searchable resource.
    pub indexed_in_search: bool,
    /// The access protocol is open, free, and universally implementable.
    pub protocol_open: bool,
    /// Metadata stays accessible after the service itself is gone.
    pub metadata_retained: bool,
    /// The protocol layer offers authentication and authorization.
    pub security_enabled: bool,
}

impl Default for AuditContext {
    fn default() -> Self {
        AuditContext {
            indexed_in_search: true,
            protocol_open: true,
            metadata_retained: true,
            security_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub checks: Vec<PrincipleCheck>,
    /// Pass exactly when no check failed.
    pub overall: CheckStatus,
}

impl ComplianceReport {
    pub fn check(&self, code: &str) -> Option<&PrincipleCheck> {
        self.checks.iter().find(|c| c.code == code)
    }

    pub fn failed_codes(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.code.as_str())
            .collect()
    }
}

/// Audit one entry against all 17 principles. Pure: identical inputs
/// yield identical reports.
pub fn audit(entry: &ServiceEntry, context: &AuditContext) -> ComplianceReport {
    let mut checks = Vec::with_capacity(PRINCIPLE_CODES.len());
    for code in PRINCIPLE_CODES {
        checks.push(evaluate(code, entry, context));
    }
    let overall = if checks.iter().any(|c| c.status == CheckStatus::Fail) {
        CheckStatus::Fail
    } else {
        CheckStatus::Pass
    };
    ComplianceReport { checks, overall }
}

fn evaluate(code: &str, entry: &ServiceEntry, context: &AuditContext) -> PrincipleCheck {
    let (status, reason) = match code {
        "F1" => check_f1(entry),
        "F2" | "R1" => rich_metadata(entry),
        "F3" => check_f3(entry),
        "F4" => flag(
            context.indexed_in_search,
            "entry is indexed in a searchable resource",
            "entry is not indexed in any searchable resource",
        ),
        "A1" => flag(
            entry.endpoint.is_some() || entry.source.is_some(),
            "entry is retrievable through its endpoint or source",
            "neither endpoint nor source is present",
        ),
        "A1.1" => flag(
            context.protocol_open,
            "access protocol is open and universally implementable",
            "access protocol is not open",
        ),
        "A1.2" => flag(
            context.security_enabled,
            "protocol layer supports authentication and authorization",
            "no authentication/authorization layer is enabled",
        ),
        "A2" => flag(
            context.metadata_retained,
            "metadata remains accessible when the service is gone",
            "metadata is not retained beyond the service lifetime",
        ),
        "I1" => check_i1(entry),
        "I2" => check_i2(entry),
        "I3" => flag(
            entry.additional_metadata.is_some(),
            "entry references additional metadata",
            "additional_metadata is absent",
        ),
        "R1.1" => flag(
            entry.license.is_some(),
            "a usage license is attached",
            "license is absent",
        ),
        "R1.2" => flag(
            entry.owner.is_some() && entry.created.is_some() && entry.modified.is_some(),
            "provenance (owner, created, modified) is recorded",
            "provenance requires owner, created, and modified",
        ),
        "R1.3" => return check_r1_3(entry),
        "D1" => return check_d1(entry),
        "O1" => return check_o1(entry),
        other => unreachable!("unknown principle code {other}"),
    };
    PrincipleCheck {
        code: code.to_string(),
        status,
        reason,
    }
}

fn flag(ok: bool, pass: &str, fail: &str) -> (CheckStatus, String) {
    if ok {
        (CheckStatus::Pass, pass.to_string())
    } else {
        (CheckStatus::Fail, fail.to_string())
    }
}

fn check_f1(entry: &ServiceEntry) -> (CheckStatus, String) {
    match &entry.id {
        Some(id) if is_uuid_shaped(id) => (
            CheckStatus::Pass,
            "entry carries a globally unique persistent identifier".into(),
        ),
        Some(_) => (CheckStatus::Fail, "id is not UUID-shaped".into()),
        None => (CheckStatus::Fail, "id is absent".into()),
    }
}

fn rich_metadata(entry: &ServiceEntry) -> (CheckStatus, String) {
    let mut missing = Vec::new();
    for (name, present) in [
        ("description", entry.description.is_some()),
        ("tags", entry.tags.is_some()),
        ("categories", entry.categories.is_some()),
        ("version", entry.version.is_some()),
        ("license", entry.license.is_some()),
        ("authors", entry.authors.is_some()),
    ] {
        if !present {
            missing.push(name);
        }
    }
    if missing.is_empty() {
        (
            CheckStatus::Pass,
            "entry is described with rich metadata".into(),
        )
    } else {
        (
            CheckStatus::Fail,
            format!("rich metadata incomplete: missing {}", missing.join(", ")),
        )
    }
}

fn check_f3(entry: &ServiceEntry) -> (CheckStatus, String) {
    let has_pointer = entry.specification_schema.is_some() || entry.data_integration.is_some();
    if !has_pointer {
        return (
            CheckStatus::Fail,
            "neither specification_schema nor data_integration is present".into(),
        );
    }
    // The identifier linkage is only checkable when an id exists; F1 owns
    // the id itself.
    if let Some(id) = &entry.id {
        let references_id = entry
            .specification_schema
            .as_deref()
            .is_some_and(|s| s.contains(id.as_str()))
            || entry.data_integration.as_ref().is_some_and(|d| {
                d.upload_endpoint
                    .as_deref()
                    .is_some_and(|u| u.contains(id.as_str()))
                    || d.download_endpoint
                        .as_deref()
                        .is_some_and(|u| u.contains(id.as_str()))
            });
        if !references_id {
            return (
                CheckStatus::Fail,
                "schema/data pointers do not reference the entry id".into(),
            );
        }
    }
    (
        CheckStatus::Pass,
        "metadata explicitly references the described identifier".into(),
    )
}

fn check_i1(entry: &ServiceEntry) -> (CheckStatus, String) {
    let round_trip = serde_json::to_string(entry)
        .ok()
        .and_then(|doc| serde_json::from_str::<ServiceEntry>(&doc).ok());
    match round_trip {
        Some(back) if back == *entry => (
            CheckStatus::Pass,
            "entry round-trips through the published document schema".into(),
        ),
        _ => (
            CheckStatus::Fail,
            "entry does not parse under the published schema".into(),
        ),
    }
}

fn check_i2(entry: &ServiceEntry) -> (CheckStatus, String) {
    match &entry.tags {
        None => (CheckStatus::Fail, "no tags from the controlled vocabulary".into()),
        Some(tags) => {
            let offenders: Vec<&str> = tags
                .iter()
                .filter(|t| !is_lowercase_tag(t))
                .map(String::as_str)
                .collect();
            if offenders.is_empty() {
                (
                    CheckStatus::Pass,
                    "tags follow the controlled lowercase vocabulary".into(),
                )
            } else {
                (
                    CheckStatus::Fail,
                    format!("tags outside the vocabulary: {}", offenders.join(", ")),
                )
            }
        }
    }
}

fn check_r1_3(entry: &ServiceEntry) -> PrincipleCheck {
    let code = "R1.3".to_string();
    let Some(class) = entry.entry_class else {
        return PrincipleCheck {
            code,
            status: CheckStatus::NotEvaluable,
            reason: "entry class unknown; no community profile applies".into(),
        };
    };
    let profile = RoleProfile::builtin(ProviderRole::for_class(class));
    let report = validate_entry(entry, &profile);
    // The identifier is F1's concern; profile violations about it do not
    // count against community-standard conformance.
    let violations: Vec<&String> = report
        .violations
        .iter()
        .filter(|v| !v.starts_with("id "))
        .collect();
    if violations.is_empty() {
        PrincipleCheck {
            code,
            status: CheckStatus::Pass,
            reason: format!("entry meets the {} profile", profile.role.as_str()),
        }
    } else {
        PrincipleCheck {
            code,
            status: CheckStatus::Fail,
            reason: format!(
                "profile violations: {}",
                violations
                    .iter()
                    .map(|v| v.as_str())
                    .collect::<Vec<_>>()
                    .join("; ")
            ),
        }
    }
}

fn check_d1(entry: &ServiceEntry) -> PrincipleCheck {
    let code = "D1".to_string();
    match entry.entry_class {
        None => PrincipleCheck {
            code,
            status: CheckStatus::NotEvaluable,
            reason: "entry class unknown; deployability cannot be judged".into(),
        },
        Some(EntryClass::Library) => {
            if entry.source.is_some() {
                PrincipleCheck {
                    code,
                    status: CheckStatus::Pass,
                    reason: "library entry points at deployable source".into(),
                }
            } else {
                PrincipleCheck {
                    code,
                    status: CheckStatus::Fail,
                    reason: "library entry lacks a source link".into(),
                }
            }
        }
        Some(EntryClass::InstantiatedService) => {
            if entry.additional_metadata.is_some() {
                PrincipleCheck {
                    code,
                    status: CheckStatus::Pass,
                    reason: "deployment aspects are described in additional metadata".into(),
                }
            } else {
                PrincipleCheck {
                    code,
                    status: CheckStatus::Fail,
                    reason: "no additional metadata describing deployability".into(),
                }
            }
        }
    }
}

fn check_o1(entry: &ServiceEntry) -> PrincipleCheck {
    let code = "O1".to_string();
    match entry.entry_class {
        None => PrincipleCheck {
            code,
            status: CheckStatus::NotEvaluable,
            reason: "entry class unknown; operational state cannot be judged".into(),
        },
        Some(EntryClass::Library) => PrincipleCheck {
            code,
            status: CheckStatus::NotEvaluable,
            reason: "operational monitoring does not apply to library entries".into(),
        },
        Some(EntryClass::InstantiatedService) => {
            if entry.heartbeat.is_some() {
                PrincipleCheck {
                    code,
                    status: CheckStatus::Pass,
                    reason: "operational state is recorded via heartbeat".into(),
                }
            } else {
                PrincipleCheck {
                    code,
                    status: CheckStatus::Fail,
                    reason: "no heartbeat records the operational state".into(),
                }
            }
        }
    }
}
