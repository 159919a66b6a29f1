use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;
use prefpcp_core::{Dataset, EmbedOptions};
use prefpcp_core::pipeline::Analysis;
use sha2::{Digest, Sha256};

/// Bounded map from dataset id to its analysis. Entries are immutable and
/// shared; only the map itself is locked.
pub struct SessionStore {
    sessions: Mutex<LruCache<String, Arc<Analysis>>>,
}

impl SessionStore {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        Self { sessions: Mutex::new(LruCache::new(cap)) }
    }

    pub fn get(&self, id: &str) -> Option<Arc<Analysis>> {
        self.lock().get(id).cloned()
    }

    pub fn insert(&self, id: String, analysis: Arc<Analysis>) {
        self.lock().put(id, analysis);
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, LruCache<String, Arc<Analysis>>> {
        self.sessions.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }
}

/// Hash of the parsed dataset and the embedding settings, so the same data
/// uploaded as CSV or JSON maps to the same session.
pub fn dataset_id(dataset: &Dataset, options: &EmbedOptions) -> String {
    let mut hasher = Sha256::new();
    hasher.update(dataset.to_json().as_bytes());
    hasher.update(format!("\n{}/{}/{}", options.method, options.seed, options.grid).as_bytes());
    hex::encode(&hasher.finalize()[..16])
}

#[cfg(test)]
mod tests {
    use super::*;
    use prefpcp_core::ingest::parse_csv;

    #[test]
    fn id_ignores_input_format() {
        let ds = parse_csv("param:x,metric:a,metric:b\n0.5,1,2\n0.25,2,1\n").unwrap();
        let again = prefpcp_core::ingest::parse_json(&ds.to_json()).unwrap();
        let opts = EmbedOptions::default();
        assert_eq!(dataset_id(&ds, &opts), dataset_id(&again, &opts));
        assert_eq!(dataset_id(&ds, &opts).len(), 32);
        let other = EmbedOptions { grid: 4, ..opts };
        assert_ne!(dataset_id(&ds, &opts), dataset_id(&ds, &other));
    }
}
