//! Description grounding: locating image regions that match free-text
//! descriptions.
//!
//! The HTTP wire protocol served by grounding adapters:
//!
//! ```text
//! POST /ground
//!   {"image_b64": "<base64>", "descriptions": ["...", "..."]}
//! 200
//!   {"results": [{"boxes": [{"x": f, "y": f, "w": f, "h": f, "score": f}]}, ...]}
//! 4xx/5xx
//!   {"error": "<message>"}
//! ```
//!
//! `results` is aligned with `descriptions`. Boxes are absolute top-left
//! `x, y, w, h` pixels.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::http::{self, RetryPolicy};
use super::limiter::ConcurrencyLimit;
use super::payload::ImagePayload;
use super::replay::{ReplayKey, ReplayStore};
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ScoredBox};

#[derive(Debug, Clone)]
pub struct GroundRequest {
    pub image: ImagePayload,
    /// Image size used to clamp returned boxes.
    pub width: f64,
    pub height: f64,
    pub descriptions: Vec<String>,
}

impl GroundRequest {
    pub fn canonical(&self) -> Value {
        json!({ "image": self.image.digest(), "descriptions": self.descriptions })
    }

    pub fn replay_key(&self) -> ReplayKey {
        ReplayKey::for_request("ground", &self.canonical())
    }
}

/// One box list per description, in request order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundResponse {
    pub results: Vec<Vec<ScoredBox>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub image_b64: String,
    pub descriptions: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResult {
    pub boxes: Vec<WireBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub results: Vec<WireResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub error: String,
}

impl From<&GroundResponse> for WireResponse {
    fn from(r: &GroundResponse) -> Self {
        WireResponse {
            results: r
                .results
                .iter()
                .map(|boxes| WireResult {
                    boxes: boxes
                        .iter()
                        .map(|b| WireBox { x: b.bbox.x, y: b.bbox.y, w: b.bbox.w, h: b.bbox.h, score: b.score })
                        .collect(),
                })
                .collect(),
        }
    }
}

impl WireResponse {
    /// Validates alignment with `n_descriptions` and converts to typed boxes.
    pub fn into_response(self, n_descriptions: usize) -> Result<GroundResponse> {
        if self.results.len() != n_descriptions {
            return Err(Error::Protocol(format!(
                "adapter returned {} results for {} descriptions",
                self.results.len(),
                n_descriptions
            )));
        }
        let results = self
            .results
            .into_iter()
            .map(|r| {
                r.boxes
                    .into_iter()
                    .map(|b| {
                        let bbox = BoundingBox::new(b.x, b.y, b.w, b.h)
                            .map_err(|e| Error::Protocol(format!("adapter box: {e}")))?;
                        ScoredBox::new(bbox, b.score).map_err(|e| Error::Protocol(format!("adapter box: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GroundResponse { results })
    }
}

pub trait Grounder: Send + Sync {
    fn ground(&self, req: &GroundRequest) -> Result<GroundResponse>;
}

/// Boxes returned for every description containing `contains`
/// (case-insensitive). The first matching rule wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundRule {
    pub contains: String,
    pub boxes: Vec<ScoredBox>,
}

/// Model-free grounding backend driven by substring rules.
#[derive(Debug, Clone, Default)]
pub struct SyntheticGrounder {
    rules: Vec<GroundRule>,
}

impl SyntheticGrounder {
    pub fn new(rules: Vec<GroundRule>) -> Self {
        Self { rules }
    }

    pub fn rule(mut self, contains: &str, boxes: Vec<ScoredBox>) -> Self {
        self.rules.push(GroundRule { contains: contains.to_string(), boxes });
        self
    }
}

impl Grounder for SyntheticGrounder {
    fn ground(&self, req: &GroundRequest) -> Result<GroundResponse> {
        let results = req
            .descriptions
            .iter()
            .map(|d| {
                let d = d.to_lowercase();
                self.rules
                    .iter()
                    .find(|r| d.contains(&r.contains.to_lowercase()))
                    .map(|r| r.boxes.clone())
                    .unwrap_or_default()
            })
            .collect();
        Ok(GroundResponse { results })
    }
}

/// Client for an adapter speaking the `/ground` protocol.
pub struct HttpGrounder {
    client: reqwest::blocking::Client,
    base_url: String,
    retry: RetryPolicy,
}

impl HttpGrounder {
    pub fn new(base_url: &str) -> Result<Self> {
        Ok(Self {
            client: http::client(Duration::from_secs(120))?,
            base_url: base_url.trim_end_matches('/').to_string(),
            retry: RetryPolicy::default(),
        })
    }

    /// Reads `IGE_GROUND_URL`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var("IGE_GROUND_URL")
            .map_err(|_| Error::Config("IGE_GROUND_URL is not set".into()))?;
        Self::new(&url)
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl Grounder for HttpGrounder {
    fn ground(&self, req: &GroundRequest) -> Result<GroundResponse> {
        let url = format!("{}/ground", self.base_url);
        let body = serde_json::to_value(WireRequest {
            image_b64: req.image.to_base64(),
            descriptions: req.descriptions.clone(),
        })?;
        let reply = self.retry.run(|| http::post_json(&self.client, &url, None, &body))?;
        let wire: WireResponse =
            serde_json::from_value(reply).map_err(|e| Error::Protocol(format!("malformed /ground reply: {e}")))?;
        wire.into_response(req.descriptions.len())
    }
}

pub struct ReplayGrounder {
    store: Arc<ReplayStore>,
}

impl ReplayGrounder {
    pub fn new(store: Arc<ReplayStore>) -> Self {
        Self { store }
    }
}

impl Grounder for ReplayGrounder {
    fn ground(&self, req: &GroundRequest) -> Result<GroundResponse> {
        serde_json::from_value(self.store.require(&req.replay_key())?)
            .map_err(|e| Error::Protocol(format!("ground record: {e}")))
    }
}

pub struct RecordingGrounder {
    inner: Arc<dyn Grounder>,
    store: Arc<ReplayStore>,
}

impl RecordingGrounder {
    pub fn new(inner: Arc<dyn Grounder>, store: Arc<ReplayStore>) -> Self {
        Self { inner, store }
    }
}

impl Grounder for RecordingGrounder {
    fn ground(&self, req: &GroundRequest) -> Result<GroundResponse> {
        let resp = self.inner.ground(req)?;
        self.store.put(&req.replay_key(), &req.canonical(), &serde_json::to_value(&resp)?)?;
        Ok(resp)
    }
}

/// Bounded-concurrency front for a grounding backend that enforces the
/// response contract: one result per description and boxes clamped to the
/// image.
pub struct GroundClient {
    backend: Arc<dyn Grounder>,
    limit: Arc<ConcurrencyLimit>,
}

impl GroundClient {
    pub fn new(backend: Arc<dyn Grounder>) -> Self {
        Self { backend, limit: Arc::new(ConcurrencyLimit::default()) }
    }

    pub fn with_limit(mut self, limit: Arc<ConcurrencyLimit>) -> Self {
        self.limit = limit;
        self
    }

    pub fn ground(&self, req: &GroundRequest) -> Result<GroundResponse> {
        let resp = {
            let _permit = self.limit.acquire();
            self.backend.ground(req)?
        };
        if resp.results.len() != req.descriptions.len() {
            return Err(Error::Protocol(format!(
                "grounding returned {} results for {} descriptions",
                resp.results.len(),
                req.descriptions.len()
            )));
        }
        let results = resp
            .results
            .into_iter()
            .map(|boxes| {
                boxes
                    .into_iter()
                    .filter_map(|b| {
                        b.bbox.clamp_to(req.width, req.height).map(|bbox| ScoredBox { bbox, score: b.score })
                    })
                    .collect()
            })
            .collect();
        Ok(GroundResponse { results })
    }
}
