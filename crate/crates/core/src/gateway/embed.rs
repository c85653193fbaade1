use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::http::{self, RetryPolicy};
use super::replay::{ReplayKey, ReplayStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub model_tag: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_tag: impl Into<String>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Protocol("embedding contains non-finite entries".into()));
        }
        Ok(Self { values, model_tag: model_tag.into() })
    }
}

/// Cosine similarity `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]`.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.model_tag != b.model_tag || a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            left: format!("{}[{}]", a.model_tag, a.values.len()),
            right: format!("{}[{}]", b.model_tag, b.values.len()),
        });
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

fn require_text(text: &str) -> Result<()> {
    if text.trim().is_empty() {
        Err(Error::Domain("cannot embed empty text".into()))
    } else {
        Ok(())
    }
}

/// Mock embedder: unit vectors drawn from a generator seeded by the text's
/// SHA-256. Identical strings embed identically; distinct strings are nearly
/// orthogonal in high dimension.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    tag: String,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim, tag: format!("hash-{dim}") }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self::new(256)
    }
}

impl Embedder for HashEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        require_text(text)?;
        let digest = Sha256::digest(text.as_bytes());
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<f64> = (0..self.dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        EmbeddingVector::new(values, self.tag.clone())
    }
}

/// Fixed vectors for chosen strings; everything else falls back to a
/// [`HashEmbedder`] of the same dimension.
#[derive(Debug, Clone)]
pub struct TableEmbedder {
    table: HashMap<String, Vec<f64>>,
    fallback: HashEmbedder,
}

impl TableEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { table: HashMap::new(), fallback: HashEmbedder { dim, tag: format!("table-{dim}") } }
    }

    pub fn with(mut self, text: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.fallback.dim, "table vector has the wrong dimension");
        self.table.insert(text.to_string(), values);
        self
    }
}

impl Embedder for TableEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        match self.table.get(text) {
            Some(v) => EmbeddingVector::new(v.clone(), self.fallback.tag.clone()),
            None => self.fallback.embed(text),
        }
    }
}

/// OpenAI-compatible `/embeddings` client.
pub struct RemoteEmbedder {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
    model: String,
    retry: RetryPolicy,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, api_key: Option<String>, model: &str) -> Result<Self> {
        Ok(Self {
            client: http::client(Duration::from_secs(60))?,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
            model: model.to_string(),
            retry: RetryPolicy::default(),
        })
    }

    /// Reads `IGE_EMBED_BASE_URL`, `IGE_EMBED_API_KEY` and `IGE_EMBED_MODEL`.
    pub fn from_env() -> Result<Self> {
        let base = std::env::var("IGE_EMBED_BASE_URL")
            .unwrap_or_else(|_| "https://open.bigmodel.cn/api/paas/v4".into());
        let key = std::env::var("IGE_EMBED_API_KEY")
            .map_err(|_| Error::Config("IGE_EMBED_API_KEY is not set".into()))?;
        let model = std::env::var("IGE_EMBED_MODEL").unwrap_or_else(|_| "embedding-3".into());
        Self::new(&base, Some(key), &model)
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        require_text(text)?;
        let url = format!("{}/embeddings", self.base_url);
        let body = json!({"model": self.model, "input": text});
        let reply = self.retry.run(|| http::post_json(&self.client, &url, self.api_key.as_deref(), &body))?;
        let values: Vec<f64> = serde_json::from_value(reply["data"][0]["embedding"].clone())
            .map_err(|e| Error::Protocol(format!("embedding reply: {e}")))?;
        EmbeddingVector::new(values, self.model.clone())
    }
}

fn embed_key(text: &str) -> (ReplayKey, serde_json::Value) {
    let req = json!({ "text": text });
    (ReplayKey::for_request("embed", &req), req)
}

pub struct ReplayEmbedder {
    store: Arc<ReplayStore>,
}

impl ReplayEmbedder {
    pub fn new(store: Arc<ReplayStore>) -> Self {
        Self { store }
    }
}

impl Embedder for ReplayEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let (key, _) = embed_key(text);
        serde_json::from_value(self.store.require(&key)?)
            .map_err(|e| Error::Protocol(format!("embedding record: {e}")))
    }
}

pub struct RecordingEmbedder {
    inner: Arc<dyn Embedder>,
    store: Arc<ReplayStore>,
}

impl RecordingEmbedder {
    pub fn new(inner: Arc<dyn Embedder>, store: Arc<ReplayStore>) -> Self {
        Self { inner, store }
    }
}

impl Embedder for RecordingEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let v = self.inner.embed(text)?;
        let (key, req) = embed_key(text);
        self.store.put(&key, &req, &serde_json::to_value(&v)?)?;
        Ok(v)
    }
}

/// Memoizes an embedder by exact input string. A cached vector is never
/// replaced within the lifetime of the cache.
pub struct CachedEmbedder {
    inner: Arc<dyn Embedder>,
    cache: RwLock<HashMap<String, EmbeddingVector>>,
}

impl CachedEmbedder {
    pub fn new(inner: Arc<dyn Embedder>) -> Self {
        Self { inner, cache: RwLock::new(HashMap::new()) }
    }

    pub fn cached(&self) -> usize {
        self.cache.read().expect("embed cache poisoned").len()
    }
}

impl Embedder for CachedEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if let Some(v) = self.cache.read().expect("embed cache poisoned").get(text) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        let mut cache = self.cache.write().expect("embed cache poisoned");
        Ok(cache.entry(text.to_string()).or_insert(v).clone())
    }
}
