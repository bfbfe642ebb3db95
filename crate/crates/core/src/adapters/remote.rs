//! HTTP adapters. Each endpoint takes `{"texts": [...]}` and answers with
//! one result per text under a fixed key:
//!
//! ```text
//! POST /predict           -> {"probs":    [[p_0, ..], ..]}
//! POST /predict_concepts  -> {"concepts": [{"<concept>": [p_0, ..], ..}, ..]}
//! POST /embed             -> {"vectors":  [[x_0, ..], ..]}
//! ```
//!
//! Results are cached per text digest, in memory and optionally on disk.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    check_simplex, ConceptPrediction, ConceptPredictor, DimensionGuard, Embedder, ExplainedModel,
    PredictionVector,
};
use crate::digest::{sha256_hex, text_digest};
use crate::error::{Error, Result};
use crate::http::{JsonClient, RetryPolicy};
use crate::render::{CacheManifest, TextCache};
use crate::scm::ScmGraph;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub base_url: String,
    /// Identifies the remote model in ids and cache keys.
    pub model_id: String,
    pub token_env: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl RemoteConfig {
    pub fn new(base_url: &str, model_id: &str) -> Self {
        RemoteConfig {
            base_url: base_url.trim_end_matches('/').to_string(),
            model_id: model_id.to_string(),
            token_env: None,
            timeout_secs: 60,
            batch_size: 32,
            cache_dir: None,
            retry: RetryPolicy::default(),
        }
    }
}

struct RemoteStore {
    url: String,
    field: &'static str,
    client: JsonClient,
    batch: usize,
    disk: Option<TextCache>,
    mem: Mutex<HashMap<String, Value>>,
}

impl RemoteStore {
    fn new(cfg: &RemoteConfig, route: &'static str, field: &'static str) -> Result<Self> {
        let disk = match &cfg.cache_dir {
            Some(root) => Some(TextCache::open(
                root,
                &format!("{route}-{}", &sha256_hex(&cfg.model_id)[..12]),
                &CacheManifest {
                    renderer_id: format!("{route}:{}", cfg.model_id),
                    prompt_version: "-".into(),
                },
            )?),
            None => None,
        };
        Ok(RemoteStore {
            url: format!("{}/{route}", cfg.base_url),
            field,
            client: JsonClient::new(
                Duration::from_secs(cfg.timeout_secs),
                cfg.token_env.as_deref(),
                cfg.retry,
            ),
            batch: cfg.batch_size.max(1),
            disk,
            mem: Mutex::new(HashMap::new()),
        })
    }

    fn cached(&self, digest: &str) -> Result<Option<Value>> {
        if let Some(v) = self.mem.lock().unwrap().get(digest) {
            return Ok(Some(v.clone()));
        }
        if let Some(disk) = &self.disk {
            if let Some(s) = disk.get(digest)? {
                let v: Value = serde_json::from_str(&s)?;
                self.mem.lock().unwrap().insert(digest.to_string(), v.clone());
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn store(&self, digest: &str, v: &Value) -> Result<()> {
        if let Some(disk) = &self.disk {
            disk.put(digest, &serde_json::to_string(v)?)?;
        }
        self.mem.lock().unwrap().insert(digest.to_string(), v.clone());
        Ok(())
    }

    /// Raw per-text results, fetching only the uncached texts.
    fn fetch(&self, texts: &[&str]) -> Result<Vec<Value>> {
        let digests: Vec<String> = texts.iter().map(|t| text_digest(t)).collect();
        let mut out: Vec<Option<Value>> = digests
            .iter()
            .map(|d| self.cached(d))
            .collect::<Result<_>>()?;
        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        for chunk in missing.chunks(self.batch) {
            let body = json!({ "texts": chunk.iter().map(|&i| texts[i]).collect::<Vec<_>>() });
            let reply = self.client.post(&self.url, &body)?;
            let items = reply
                .get(self.field)
                .and_then(Value::as_array)
                .ok_or_else(|| {
                    Error::MalformedResponse(format!("{}: missing `{}` array", self.url, self.field))
                })?;
            if items.len() != chunk.len() {
                return Err(Error::MalformedResponse(format!(
                    "{}: {} results for {} texts",
                    self.url,
                    items.len(),
                    chunk.len()
                )));
            }
            for (&i, v) in chunk.iter().zip(items) {
                self.store(&digests[i], v)?;
                out[i] = Some(v.clone());
            }
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}

fn floats(v: Value, what: &str) -> Result<Vec<f64>> {
    serde_json::from_value(v).map_err(|e| Error::MalformedResponse(format!("{what}: {e}")))
}

pub struct RemoteModel {
    id: String,
    store: RemoteStore,
}

impl RemoteModel {
    pub fn new(cfg: &RemoteConfig) -> Result<Self> {
        Ok(RemoteModel {
            id: format!("remote:{}", cfg.model_id),
            store: RemoteStore::new(cfg, "predict", "probs")?,
        })
    }
}

impl ExplainedModel for RemoteModel {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn predict(&self, text: &str) -> Result<PredictionVector> {
        Ok(self.predict_batch(&[text])?.remove(0))
    }

    fn predict_batch(&self, texts: &[&str]) -> Result<Vec<PredictionVector>> {
        self.store
            .fetch(texts)?
            .into_iter()
            .map(|v| {
                Ok(PredictionVector {
                    probs: check_simplex(floats(v, &self.id)?, &self.id)?,
                    model_id: self.id.clone(),
                })
            })
            .collect()
    }
}

pub struct RemoteConceptPredictor {
    id: String,
    graph: ScmGraph,
    store: RemoteStore,
}

impl RemoteConceptPredictor {
    pub fn new(cfg: &RemoteConfig, graph: &ScmGraph) -> Result<Self> {
        Ok(RemoteConceptPredictor {
            id: format!("remote:{}", cfg.model_id),
            graph: graph.clone(),
            store: RemoteStore::new(cfg, "predict_concepts", "concepts")?,
        })
    }
}

impl ConceptPredictor for RemoteConceptPredictor {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn predict_concepts(&self, text: &str) -> Result<ConceptPrediction> {
        let v = self.store.fetch(&[text])?.remove(0);
        let concepts = serde_json::from_value(v)
            .map_err(|e| Error::MalformedResponse(format!("{}: {e}", self.id)))?;
        ConceptPrediction { concepts }.validated(&self.graph)
    }
}

pub struct RemoteEmbedder {
    id: String,
    store: RemoteStore,
    dim: DimensionGuard,
}

impl RemoteEmbedder {
    pub fn new(cfg: &RemoteConfig) -> Result<Self> {
        Ok(RemoteEmbedder {
            id: format!("remote:{}", cfg.model_id),
            store: RemoteStore::new(cfg, "embed", "vectors")?,
            dim: DimensionGuard::default(),
        })
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let v = floats(self.store.fetch(&[text])?.remove(0), &self.id)?;
        self.dim.check(&v, &self.id)?;
        Ok(v)
    }
}
