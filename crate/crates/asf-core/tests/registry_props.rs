//! Registry properties: the full validation matrix sweep, search facet
//! monotonicity, guest visibility, round-trip identity, id retirement,
//! and the LRU-with-TTL trace oracle.

use asf_core::registry::{
    fixtures::{minimal_service_entry, populated_entry},
    validate_entry, EntryClass, ProviderRole, RegistryStore, Requirement, RoleProfile,
    SearchQuery, ServiceEntry, ServiceInvoker, Visibility, ATTRIBUTE_NAMES,
};
use asf_core::security::{LevelOfAssurance, Principal, Role};
use asf_core::timefmt::parse_entry_time;
use chrono::{DateTime, Duration, Utc};
use proptest::prelude::*;
use std::sync::atomic::{AtomicUsize, Ordering};

fn principal(role: Role) -> Principal {
    Principal {
        subject: "p".into(),
        roles: [role].into_iter().collect(),
        loa: LevelOfAssurance::Low,
        token_id: "t".into(),
    }
}

fn now() -> DateTime<Utc> {
    parse_entry_time("2024-06-01T10:00:00Z").unwrap()
}

fn canonical_for(role: ProviderRole) -> ServiceEntry {
    match role {
        ProviderRole::LibraryProvider => populated_entry(EntryClass::Library),
        _ => populated_entry(EntryClass::InstantiatedService),
    }
}

/// For every role and every attribute: removing a required attribute flips
/// validity, removing an optional or not-applicable one does not.
#[test]
fn validation_matrix_presence_sweep() {
    for role in ProviderRole::ALL {
        let profile = RoleProfile::builtin(role);
        let canonical = canonical_for(role);
        assert!(
            validate_entry(&canonical, &profile).valid,
            "canonical entry must validate for {role:?}"
        );
        for attribute in ATTRIBUTE_NAMES {
            let mut entry = canonical.clone();
            entry.clear_attribute(attribute);
            let report = validate_entry(&entry, &profile);
            let expect_valid = profile.requirement(attribute) != Requirement::Required;
            assert_eq!(
                report.valid, expect_valid,
                "{role:?}/{attribute}: expected valid={expect_valid}, violations {:?}",
                report.violations
            );
        }
    }
}

#[test]
fn register_then_get_is_field_for_field_identical() {
    let store = RegistryStore::new(Visibility::Public, "http://localhost/entries");
    let entry = populated_entry(EntryClass::InstantiatedService);
    let id = store.register(entry.clone(), now()).unwrap();
    let stored = store.get(&id).unwrap();
    assert_eq!(stored, entry);
    // Byte-level: the dumped document equals the document of the input.
    assert_eq!(
        serde_json::to_string(&stored).unwrap(),
        serde_json::to_string(&entry).unwrap()
    );
}

#[test]
fn removed_ids_never_come_back() {
    let store = RegistryStore::new(Visibility::Public, "http://localhost/entries");
    let mut retired = Vec::new();
    for i in 0..20 {
        let id = store
            .register(minimal_service_entry(&format!("svc{i}")), now())
            .unwrap();
        store.remove(&id).unwrap();
        retired.push(id);
    }
    for i in 0..50 {
        let id = store
            .register(minimal_service_entry(&format!("new{i}")), now())
            .unwrap();
        assert!(!retired.contains(&id));
    }
}

fn seeded_store() -> RegistryStore {
    let store = RegistryStore::new(Visibility::Public, "http://localhost/entries");
    let specs = [
        ("translate", true, vec!["nlp", "translation"], vec!["NLP"]),
        ("forecast", false, vec!["weather"], vec!["Science"]),
        ("summarize", true, vec!["nlp"], vec!["NLP", "Finance"]),
        ("classify", false, vec!["nlp", "vision"], vec!["Finance"]),
        ("cluster", true, vec![], vec![]),
    ];
    for (name, public, tags, categories) in specs {
        let mut entry = minimal_service_entry(name);
        entry.public = Some(public);
        entry.tags = Some(tags.into_iter().map(String::from).collect());
        entry.categories = Some(categories.into_iter().map(String::from).collect());
        entry.description = Some(format!("The {name} analytics service"));
        store.register(entry, now()).unwrap();
    }
    store
}

proptest! {
    /// Adding a facet never enlarges the result set.
    #[test]
    fn search_is_monotone_in_facets(
        keywords in proptest::collection::vec("[a-z]{1,6}", 0..2),
        tags in proptest::collection::vec(prop_oneof!["nlp".prop_map(String::from), "weather".prop_map(String::from), "vision".prop_map(String::from)], 0..2),
        categories in proptest::collection::vec(prop_oneof!["NLP".prop_map(String::from), "Finance".prop_map(String::from)], 0..2),
        extra_tag in prop_oneof!["nlp".prop_map(String::from), "vision".prop_map(String::from), "translation".prop_map(String::from)],
    ) {
        let store = seeded_store();
        let member = principal(Role::Member);
        let base = SearchQuery { keywords, tags, categories };
        let base_hits = store.search(&base, &member);

        let mut narrowed = base.clone();
        narrowed.tags.push(extra_tag);
        let narrowed_hits = store.search(&narrowed, &member);

        prop_assert!(narrowed_hits.len() <= base_hits.len());
        let base_ids: Vec<_> = base_hits.iter().map(|e| e.id.clone()).collect();
        for hit in &narrowed_hits {
            prop_assert!(base_ids.contains(&hit.id));
        }
    }

    /// A guest-level principal never receives a non-public entry.
    #[test]
    fn guest_never_sees_private_entries(
        keywords in proptest::collection::vec("[a-z]{1,8}", 0..3),
    ) {
        let store = seeded_store();
        let query = SearchQuery { keywords, ..SearchQuery::default() };
        for hit in store.search(&query, &principal(Role::Guest)) {
            prop_assert_eq!(hit.public, Some(true));
        }
    }
}

// ---------------------------------------------------------------------
// LRU-with-TTL trace oracle
// ---------------------------------------------------------------------

/// Reference simulation: exact LRU with TTL, replayed step by step.
struct CacheSim {
    capacity: usize,
    ttl: i64,
    // (key, stored_at, last_used)
    slots: Vec<(String, i64, u64)>,
    tick: u64,
    misses: usize,
}

impl CacheSim {
    fn new(capacity: usize, ttl: i64) -> Self {
        CacheSim {
            capacity,
            ttl,
            slots: Vec::new(),
            tick: 0,
            misses: 0,
        }
    }

    fn request(&mut self, key: &str, at: i64) {
        self.tick += 1;
        let tick = self.tick;
        if let Some(pos) = self.slots.iter().position(|(k, _, _)| k == key) {
            let (_, stored_at, _) = self.slots[pos];
            if at - stored_at <= self.ttl {
                self.slots[pos].2 = tick;
                return;
            }
            self.slots.remove(pos);
        }
        self.misses += 1;
        self.slots.push((key.to_string(), at, tick));
        while self.slots.len() > self.capacity {
            let lru = self
                .slots
                .iter()
                .enumerate()
                .min_by_key(|(_, (_, _, used))| *used)
                .map(|(i, _)| i)
                .unwrap();
            self.slots.remove(lru);
        }
    }
}

struct CountingInvoker(AtomicUsize);

impl ServiceInvoker for CountingInvoker {
    fn invoke(&self, _entry: &ServiceEntry, request: &str) -> Result<String, String> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(format!("answer:{request}"))
    }
}

proptest! {
    /// Backend invocations along any trace equal the misses of the
    /// reference LRU-with-TTL simulation.
    #[test]
    fn cached_invoke_matches_reference_simulation(
        trace in proptest::collection::vec(("[a-e]", 0i64..30), 1..60),
        capacity in 1usize..4,
    ) {
        let ttl = 10u64;
        let store = RegistryStore::new(Visibility::Public, "http://localhost/entries");
        store.set_cache_capacity(capacity);
        let mut entry = minimal_service_entry("cached");
        entry.caching_interval = Some(ttl);
        let id = store.register(entry, now()).unwrap();

        // Requests must replay in nondecreasing time order.
        let mut trace = trace;
        trace.sort_by_key(|(_, at)| *at);

        let invoker = CountingInvoker(AtomicUsize::new(0));
        let mut sim = CacheSim::new(capacity, ttl as i64);
        let epoch = now();
        for (key, at) in &trace {
            sim.request(key, *at);
            store
                .cached_invoke(&id, key, epoch + Duration::seconds(*at), &invoker)
                .unwrap();
        }
        prop_assert_eq!(invoker.0.load(Ordering::SeqCst), sim.misses);
    }
}
