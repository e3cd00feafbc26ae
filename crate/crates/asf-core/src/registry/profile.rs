//! Provider role profiles and entry validation.
//!
//! Each provider role (catalog, service, library) assigns every entry
//! attribute one of three requirement levels. Validation applies the
//! matrix: a missing or malformed required attribute is a violation, a
//! present not-applicable attribute is a warning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::entry::{
    is_lowercase_tag, is_token, is_uuid_shaped, EntryClass, HeartbeatState, ServiceEntry,
    ATTRIBUTE_NAMES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Requirement {
    Required,
    Optional,
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderRole {
    CatalogProvider,
    ServiceProvider,
    LibraryProvider,
}

impl ProviderRole {
    pub const ALL: [ProviderRole; 3] = [
        ProviderRole::CatalogProvider,
        ProviderRole::ServiceProvider,
        ProviderRole::LibraryProvider,
    ];

    /// The role an entry class registers under.
    pub fn for_class(class: EntryClass) -> ProviderRole {
        match class {
            EntryClass::InstantiatedService => ProviderRole::ServiceProvider,
            EntryClass::Library => ProviderRole::LibraryProvider,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ProviderRole::CatalogProvider => "catalog-provider",
            ProviderRole::ServiceProvider => "service-provider",
            ProviderRole::LibraryProvider => "library-provider",
        }
    }
}

impl std::str::FromStr for ProviderRole {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "catalog-provider" | "catalog" => Ok(ProviderRole::CatalogProvider),
            "service-provider" | "service" => Ok(ProviderRole::ServiceProvider),
            "library-provider" | "library" => Ok(ProviderRole::LibraryProvider),
            other => Err(format!("unknown provider role: {other}")),
        }
    }
}

/// Requirement level of every entry attribute for one provider role.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoleProfile {
    pub role: ProviderRole,
    pub requirements: BTreeMap<String, Requirement>,
}

/// Per-attribute requirement triple (catalog, service, library).
///
/// `source` is split out of the documentation attribute and treated as
/// optional for every role; `entry_class` is the artifact's class
/// discriminator and always required.
const MATRIX: &[(&str, [Requirement; 3])] = {
    use Requirement::{NotApplicable as N, Optional as O, Required as R};
    &[
        ("id", [R, R, R]),
        ("name", [R, R, R]),
        ("title", [R, R, R]),
        ("public", [R, R, R]),
        ("description", [R, R, R]),
        ("endpoint", [R, R, N]),
        ("input_parameters", [O, R, R]),
        ("output_parameters", [O, R, R]),
        ("version", [R, R, R]),
        ("license", [R, R, R]),
        ("protocol", [R, R, R]),
        ("microservice", [R, R, R]),
        ("modified", [R, R, R]),
        ("owner", [R, R, O]),
        ("author", [R, O, R]),
        ("tags", [R, O, O]),
        ("categories", [R, O, O]),
        ("created", [R, R, R]),
        ("heartbeat", [N, O, N]),
        ("documentation", [R, O, O]),
        ("source", [O, O, O]),
        ("specification_schema", [O, R, R]),
        ("additional_metadata", [O, O, O]),
        ("sla", [O, O, O]),
        ("caching_interval", [R, O, N]),
        ("data_integration", [O, O, O]),
        ("authors", [R, R, R]),
        ("entry_class", [R, R, R]),
    ]
};

impl RoleProfile {
    /// The built-in profile for a role.
    pub fn builtin(role: ProviderRole) -> RoleProfile {
        let column = match role {
            ProviderRole::CatalogProvider => 0,
            ProviderRole::ServiceProvider => 1,
            ProviderRole::LibraryProvider => 2,
        };
        let requirements = MATRIX
            .iter()
            .map(|(name, levels)| (name.to_string(), levels[column]))
            .collect();
        RoleProfile { role, requirements }
    }

    pub fn requirement(&self, attribute: &str) -> Requirement {
        self.requirements
            .get(attribute)
            .copied()
            .unwrap_or(Requirement::Optional)
    }
}

/// Outcome of validating one entry against one role profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

/// Validate an entry against a role profile.
///
/// `valid` is true exactly when every required attribute is present and
/// well-formed. Present not-applicable attributes yield warnings only.
pub fn validate_entry(entry: &ServiceEntry, profile: &RoleProfile) -> ValidationReport {
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    for attribute in ATTRIBUTE_NAMES {
        let present = entry.has_attribute(attribute);
        match profile.requirement(attribute) {
            Requirement::Required if !present => {
                violations.push(format!("{attribute} required"));
            }
            Requirement::NotApplicable if present => {
                warnings.push(format!(
                    "{attribute} is not applicable for {}",
                    profile.role.as_str()
                ));
            }
            _ => {}
        }
    }

    check_well_formed(entry, &mut violations);

    ValidationReport {
        valid: violations.is_empty(),
        violations,
        warnings,
    }
}

/// Validate an entry against the built-in profile implied by its class.
pub fn validate_for_class(entry: &ServiceEntry) -> Result<ValidationReport, String> {
    let class = entry
        .entry_class
        .ok_or_else(|| "entry_class required to derive the provider role".to_string())?;
    Ok(validate_entry(
        entry,
        &RoleProfile::builtin(ProviderRole::for_class(class)),
    ))
}

fn check_well_formed(entry: &ServiceEntry, violations: &mut Vec<String>) {
    if let Some(id) = &entry.id {
        if !is_uuid_shaped(id) {
            violations.push("id must be a UUID".into());
        }
    }
    if let Some(name) = &entry.name {
        if !is_token(name) {
            violations.push("name must be a nonempty token".into());
        }
    }
    if let Some(tags) = &entry.tags {
        for tag in tags {
            if !is_lowercase_tag(tag) {
                violations.push(format!("tag '{tag}' must be a lowercase token"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for tag in tags {
            if !seen.insert(tag) {
                violations.push(format!("tag '{tag}' is duplicated"));
            }
        }
    }
    for (field, value) in [
        ("endpoint", &entry.endpoint),
        ("documentation", &entry.documentation),
        ("source", &entry.source),
    ] {
        if let Some(value) = value {
            if url::Url::parse(value).is_err() {
                violations.push(format!("{field} must be a valid URL"));
            }
        }
    }
    if let (Some(created), Some(modified)) = (entry.created, entry.modified) {
        if created > modified {
            violations.push("created must not be later than modified".into());
        }
    }
    if let Some(heartbeat) = &entry.heartbeat {
        if heartbeat.state == HeartbeatState::Unknown && heartbeat.checked_at.is_some() {
            violations.push("heartbeat state 'unknown' is only permitted before the first check".into());
        }
    }
    if let Some(integration) = &entry.data_integration {
        if integration.upload_endpoint.is_none() && integration.download_endpoint.is_none() {
            violations.push("data_integration needs an upload or download endpoint".into());
        }
    }
}
