use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::gateway::{cosine, Embedder};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.85;

/// Decides whether two category labels mean the same thing: the cosine
/// similarity of their embeddings must strictly exceed the threshold.
///
/// Labels are trimmed and lower-cased first. Decisions are memoized per
/// unordered pair, which makes them symmetric by construction.
pub struct SemanticMatcher {
    embedder: Arc<dyn Embedder>,
    threshold: f64,
    cache: RwLock<HashMap<(String, String), bool>>,
}

impl SemanticMatcher {
    pub fn new(embedder: Arc<dyn Embedder>, threshold: f64) -> Self {
        Self { embedder, threshold, cache: RwLock::new(HashMap::new()) }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let (a, b) = (normalize(a)?, normalize(b)?);
        cosine(&self.embedder.embed(&a)?, &self.embedder.embed(&b)?)
    }

    pub fn matches(&self, a: &str, b: &str) -> Result<bool> {
        let (a, b) = (normalize(a)?, normalize(b)?);
        if a == b {
            return Ok(true);
        }
        let key = if a <= b { (a, b) } else { (b, a) };
        if let Some(&hit) = self.cache.read().expect("matcher cache poisoned").get(&key) {
            return Ok(hit);
        }
        let sim = cosine(&self.embedder.embed(&key.0)?, &self.embedder.embed(&key.1)?)?;
        let decision = sim > self.threshold;
        self.cache.write().expect("matcher cache poisoned").insert(key, decision);
        Ok(decision)
    }

    pub fn cached_pairs(&self) -> usize {
        self.cache.read().expect("matcher cache poisoned").len()
    }
}

fn normalize(label: &str) -> Result<String> {
    let s = label.trim().to_lowercase();
    if s.is_empty() {
        Err(Error::Domain("empty category label".into()))
    } else {
        Ok(s)
    }
}
