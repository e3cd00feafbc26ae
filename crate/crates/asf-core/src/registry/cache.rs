//! LRU response cache with per-entry TTL.
//!
//! Responses are keyed by (entry id, request text). A cached response is
//! fresh while no more than the entry's caching interval has elapsed since
//! it was stored; stale or missing keys are misses. Insertion beyond
//! capacity evicts the least-recently-used key.

use std::collections::HashMap;

use chrono::{DateTime, Utc};

use super::entry::ServiceEntry;

/// Invokes the backing service once per cache miss.
pub trait ServiceInvoker: Send + Sync {
    fn invoke(&self, entry: &ServiceEntry, request: &str) -> Result<String, String>;
}

/// Response plus whether it came from the cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvokeOutcome {
    pub response: String,
    pub cache_hit: bool,
}

struct Slot {
    response: String,
    stored_at: DateTime<Utc>,
    last_used: u64,
}

pub struct ResponseCache {
    capacity: usize,
    slots: HashMap<(String, String), Slot>,
    tick: u64,
}

impl ResponseCache {
    pub fn new(capacity: usize) -> Self {
        ResponseCache {
            capacity: capacity.max(1),
            slots: HashMap::new(),
            tick: 0,
        }
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity.max(1);
        while self.slots.len() > self.capacity {
            self.evict_lru();
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// A hit refreshes the key's recency. Responses older than
    /// `ttl_seconds` are stale and count as misses.
    pub fn lookup(
        &mut self,
        id: &str,
        request: &str,
        now: DateTime<Utc>,
        ttl_seconds: u64,
    ) -> Option<String> {
        self.tick += 1;
        let tick = self.tick;
        let key = (id.to_string(), request.to_string());
        let slot = self.slots.get_mut(&key)?;
        let age = now.signed_duration_since(slot.stored_at).num_seconds();
        if age < 0 || age as u64 > ttl_seconds {
            self.slots.remove(&key);
            return None;
        }
        slot.last_used = tick;
        Some(slot.response.clone())
    }

    pub fn store(&mut self, id: &str, request: &str, response: String, now: DateTime<Utc>) {
        self.tick += 1;
        self.slots.insert(
            (id.to_string(), request.to_string()),
            Slot {
                response,
                stored_at: now,
                last_used: self.tick,
            },
        );
        while self.slots.len() > self.capacity {
            self.evict_lru();
        }
    }

    fn evict_lru(&mut self) {
        if let Some(key) = self
            .slots
            .iter()
            .min_by_key(|(_, slot)| slot.last_used)
            .map(|(key, _)| key.clone())
        {
            self.slots.remove(&key);
        }
    }
}
