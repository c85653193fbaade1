//! Content-addressed record/replay store.
//!
//! Layout: one JSON record per request at `<root>/<endpoint>/<digest>.json`,
//! where `endpoint` is a template id (`PII.5`), `ground` or `embed`, and
//! `digest` is the SHA-256 of the canonical request JSON (sorted keys, compact,
//! images replaced by their digests). Each record holds
//! `{"endpoint", "digest", "request", "response"}`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplayKey {
    pub endpoint: String,
    pub digest: String,
}

impl ReplayKey {
    pub fn for_request(endpoint: &str, request: &Value) -> Self {
        let digest = hex::encode(Sha256::digest(canonical_json(request).as_bytes()));
        Self { endpoint: endpoint.to_string(), digest }
    }
}

/// Compact JSON with object keys sorted recursively.
pub fn canonical_json(v: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(map) => {
                let mut entries: Vec<(&String, &Value)> = map.iter().collect();
                entries.sort_by(|a, b| a.0.cmp(b.0));
                Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), sort(v))).collect())
            }
            Value::Array(items) => Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(v).to_string()
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    endpoint: String,
    digest: String,
    request: Value,
    response: Value,
}

/// Directory of recorded responses. Reads are concurrent; writes are
/// serialized and atomic per record.
#[derive(Debug)]
pub struct ReplayStore {
    root: PathBuf,
    cache: RwLock<HashMap<ReplayKey, Value>>,
    write_lock: Mutex<()>,
}

fn endpoint_dir(endpoint: &str) -> String {
    endpoint.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

impl ReplayStore {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into(), cache: RwLock::new(HashMap::new()), write_lock: Mutex::new(()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, key: &ReplayKey) -> PathBuf {
        self.root.join(endpoint_dir(&key.endpoint)).join(format!("{}.json", key.digest))
    }

    pub fn get(&self, key: &ReplayKey) -> Result<Option<Value>> {
        if let Some(v) = self.cache.read().expect("replay cache poisoned").get(key) {
            return Ok(Some(v.clone()));
        }
        let path = self.path(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let record: Record = serde_json::from_str(&text)
            .map_err(|e| Error::Protocol(format!("corrupt replay record {}: {e}", path.display())))?;
        self.cache.write().expect("replay cache poisoned").insert(key.clone(), record.response.clone());
        Ok(Some(record.response))
    }

    /// Like [`get`](Self::get) but a miss is an error.
    pub fn require(&self, key: &ReplayKey) -> Result<Value> {
        self.get(key)?.ok_or_else(|| Error::ReplayMiss {
            endpoint: key.endpoint.clone(),
            digest: key.digest.clone(),
        })
    }

    pub fn put(&self, key: &ReplayKey, request: &Value, response: &Value) -> Result<()> {
        let _guard = self.write_lock.lock().expect("replay write lock poisoned");
        let path = self.path(key);
        let dir = path.parent().expect("record path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let record = Record {
            endpoint: key.endpoint.clone(),
            digest: key.digest.clone(),
            request: request.clone(),
            response: response.clone(),
        };
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string_pretty(&record)? + "\n").map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        self.cache.write().expect("replay cache poisoned").insert(key.clone(), response.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        walk_records(&self.root).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn walk_records(root: &Path) -> Vec<PathBuf> {
    let mut out = vec![];
    let Ok(dirs) = std::fs::read_dir(root) else { return out };
    for d in dirs.flatten() {
        if let Ok(files) = std::fs::read_dir(d.path()) {
            out.extend(
                files.flatten().map(|f| f.path()).filter(|p| p.extension().is_some_and(|e| e == "json")),
            );
        }
    }
    out
}
