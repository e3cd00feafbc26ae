//! FAIR audit properties: check independence (mutating fields outside a
//! check's dependency set never flips it), purity, and the overall
//! aggregation rule.

use asf_core::fair::{audit, AuditContext, CheckStatus, PRINCIPLE_CODES};
use asf_core::registry::{fixtures::populated_entry, EntryClass, ServiceEntry, ATTRIBUTE_NAMES};

/// Documented field dependencies per principle. `None` means the check may
/// read the whole entry (schema/profile conformance).
fn dependencies(code: &str) -> Option<&'static [&'static str]> {
    match code {
        "F1" => Some(&["id"]),
        "F2" | "R1" => Some(&[
            "description",
            "tags",
            "categories",
            "version",
            "license",
            "authors",
        ]),
        "F3" => Some(&["specification_schema", "data_integration", "id"]),
        "F4" | "A1.1" | "A1.2" | "A2" => Some(&[]),
        "A1" => Some(&["endpoint", "source"]),
        "I1" | "R1.3" => None,
        "I2" => Some(&["tags"]),
        "I3" => Some(&["additional_metadata"]),
        "R1.1" => Some(&["license"]),
        "R1.2" => Some(&["owner", "created", "modified"]),
        "D1" => Some(&["entry_class", "source", "additional_metadata"]),
        "O1" => Some(&["entry_class", "heartbeat"]),
        _ => unreachable!("unknown code {code}"),
    }
}

fn mutations(entry: &ServiceEntry) -> Vec<(String, ServiceEntry)> {
    let mut out = Vec::new();
    for attribute in ATTRIBUTE_NAMES {
        let mut mutated = entry.clone();
        mutated.clear_attribute(attribute);
        out.push((attribute.to_string(), mutated));
    }
    // Value-level mutations beyond removal.
    let mut bad_id = entry.clone();
    bad_id.id = Some("not-a-uuid".into());
    out.push(("id".into(), bad_id));
    let mut bad_tags = entry.clone();
    bad_tags.tags = Some(vec!["NLP".into()]);
    out.push(("tags".into(), bad_tags));
    let mut other_schema = entry.clone();
    other_schema.specification_schema = Some("https://example.org/schema.json".into());
    out.push(("specification_schema".into(), other_schema));
    out
}

#[test]
fn checks_depend_only_on_their_documented_fields() {
    for class in [EntryClass::InstantiatedService, EntryClass::Library] {
        let baseline_entry = populated_entry(class);
        let context = AuditContext::default();
        let baseline = audit(&baseline_entry, &context);
        for (field, mutated) in mutations(&baseline_entry) {
            let report = audit(&mutated, &context);
            for (code, (before, after)) in PRINCIPLE_CODES
                .iter()
                .zip(baseline.checks.iter().zip(report.checks.iter()))
            {
                let Some(deps) = dependencies(code) else {
                    continue;
                };
                if !deps.contains(&field.as_str()) {
                    assert_eq!(
                        before.status, after.status,
                        "{class:?}: mutating {field} flipped {code}"
                    );
                }
            }
        }
    }
}

#[test]
fn context_flags_flip_only_their_checks() {
    let entry = populated_entry(EntryClass::InstantiatedService);
    let baseline = audit(&entry, &AuditContext::default());
    let cases = [
        (
            AuditContext {
                indexed_in_search: false,
                ..AuditContext::default()
            },
            "F4",
        ),
        (
            AuditContext {
                protocol_open: false,
                ..AuditContext::default()
            },
            "A1.1",
        ),
        (
            AuditContext {
                metadata_retained: false,
                ..AuditContext::default()
            },
            "A2",
        ),
        (
            AuditContext {
                security_enabled: false,
                ..AuditContext::default()
            },
            "A1.2",
        ),
    ];
    for (context, flipped) in cases {
        let report = audit(&entry, &context);
        for (before, after) in baseline.checks.iter().zip(report.checks.iter()) {
            if before.code == flipped {
                assert_eq!(after.status, CheckStatus::Fail);
            } else {
                assert_eq!(before.status, after.status, "{} moved", before.code);
            }
        }
    }
}

#[test]
fn overall_is_conjunction_over_evaluable_checks() {
    let entries = [
        populated_entry(EntryClass::InstantiatedService),
        populated_entry(EntryClass::Library),
        {
            let mut e = populated_entry(EntryClass::InstantiatedService);
            e.license = None;
            e
        },
        {
            let mut e = populated_entry(EntryClass::Library);
            e.entry_class = None;
            e
        },
    ];
    for entry in entries {
        let report = audit(&entry, &AuditContext::default());
        let any_fail = report.checks.iter().any(|c| c.status == CheckStatus::Fail);
        assert_eq!(
            report.overall,
            if any_fail {
                CheckStatus::Fail
            } else {
                CheckStatus::Pass
            }
        );
    }
}

#[test]
fn report_always_has_the_17_codes_in_order() {
    let mut entry = populated_entry(EntryClass::InstantiatedService);
    entry.id = None;
    entry.tags = None;
    entry.entry_class = None;
    let report = audit(&entry, &AuditContext::default());
    let codes: Vec<&str> = report.checks.iter().map(|c| c.code.as_str()).collect();
    assert_eq!(codes, PRINCIPLE_CODES);
}
