//! Text and image embeddings behind one cached gateway, with a remote HTTP
//! provider and a deterministic synthetic one.

mod augment;
mod remote;
mod synthetic;

pub use augment::{apply as apply_augmentation, square_resize, AugParams, AugmentationPolicy};
pub use remote::{RemoteProvider, DEFAULT_INPUT_SIZE};
pub use synthetic::{hashed_unit_vector, AnchorSpec, SyntheticPlan, SyntheticProvider};

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{FindrError, Result};
use crate::limits::{with_retries, AttemptError, Limiter, RetryPolicy};
use crate::manifest::ImageRecord;
use crate::store::{canonical_key, ContentStore};
use crate::vector::{l2_normalize, Embedding};

const TEXT_BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub model_id: String,
    pub dim: usize,
    pub modalities: BTreeSet<Modality>,
}

/// Provider-ready pixels plus what the synthetic provider needs to know about them.
#[derive(Debug, Clone)]
pub struct ImageInput {
    pub pixels: RgbImage,
    /// Digest of the source file.
    pub digest: [u8; 32],
    pub synthetic_class: Option<String>,
    /// `None` for the plain (unaugmented) view.
    pub augmentation: Option<AugParams>,
}

/// One embedding provider. Returned vectors are checked and normalized by the gateway.
pub trait EmbeddingBackend: Send + Sync {
    fn info(&self) -> &ProviderInfo;
    /// Side length of the square inputs the provider expects.
    fn input_size(&self) -> u32;
    fn embed_texts(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f32>>, AttemptError>;
    fn embed_images(&self, images: &[ImageInput]) -> std::result::Result<Vec<Vec<f32>>, AttemptError>;
    fn network_calls(&self) -> u64;
}

/// Cached, rate-limited access to an [`EmbeddingBackend`].
///
/// Every embedding handed out has the provider's dimension and unit L2
/// norm. Results are cached in memory and, when a store is given, on disk
/// keyed by model id and text or image content digest.
pub struct EmbeddingGateway {
    backend: Arc<dyn EmbeddingBackend>,
    memory: Mutex<HashMap<String, Embedding>>,
    disk: Option<ContentStore>,
    policy: RetryPolicy,
    limiter: Limiter,
    hits: AtomicU64,
}

impl EmbeddingGateway {
    pub fn new(backend: Arc<dyn EmbeddingBackend>, disk: Option<ContentStore>, policy: RetryPolicy, limiter: Limiter) -> Self {
        EmbeddingGateway {
            backend,
            memory: Mutex::new(HashMap::new()),
            disk,
            policy,
            limiter,
            hits: AtomicU64::new(0),
        }
    }

    /// No disk cache, default retries, four requests in flight.
    pub fn in_memory(backend: Arc<dyn EmbeddingBackend>) -> Self {
        EmbeddingGateway::new(backend, None, RetryPolicy::default(), Limiter::new(4, None))
    }

    pub fn info(&self) -> &ProviderInfo {
        self.backend.info()
    }

    pub fn model_id(&self) -> &str {
        &self.backend.info().model_id
    }

    pub fn dim(&self) -> usize {
        self.backend.info().dim
    }

    pub fn network_calls(&self) -> u64 {
        self.backend.network_calls()
    }

    pub fn cache_hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }

    fn require(&self, m: Modality) -> Result<()> {
        if self.info().modalities.contains(&m) {
            Ok(())
        } else {
            Err(FindrError::Config(format!("provider {} does not embed {m:?}", self.model_id())))
        }
    }

    fn lookup(&self, key: &str) -> Result<Option<Embedding>> {
        if let Some(e) = self.memory.lock().unwrap_or_else(|p| p.into_inner()).get(key) {
            self.hits.fetch_add(1, Ordering::SeqCst);
            return Ok(Some(e.clone()));
        }
        let Some(disk) = &self.disk else { return Ok(None) };
        let Some(entry) = disk.get(key)? else { return Ok(None) };
        let values: Vec<f32> = serde_json::from_value(entry.get("embedding").cloned().unwrap_or(Value::Null))
            .map_err(|e| FindrError::Parse(format!("embedding cache entry {key}: {e}")))?;
        let e = self.finish(values)?;
        self.hits.fetch_add(1, Ordering::SeqCst);
        self.memory
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(key.to_string(), e.clone());
        Ok(Some(e))
    }

    /// Reads an entry that this call has just made sure is in memory.
    fn cached(&self, key: &str) -> Result<Embedding> {
        self.memory
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .get(key)
            .cloned()
            .ok_or_else(|| FindrError::Contract("embedding vanished from cache".into()))
    }

    fn remember(&self, key: &str, e: &Embedding, descr: Value) -> Result<()> {
        if let Some(disk) = &self.disk {
            disk.put(key, &json!({"key": descr, "embedding": e.values()}))?;
        }
        self.memory
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .insert(key.to_string(), e.clone());
        Ok(())
    }

    fn finish(&self, values: Vec<f32>) -> Result<Embedding> {
        let dim = self.dim();
        if values.len() != dim {
            return Err(FindrError::ProviderContract(format!(
                "embedding has {} components, provider dim is {dim}",
                values.len()
            )));
        }
        let e = Embedding::new(values).map_err(|e| FindrError::ProviderContract(e.to_string()))?;
        l2_normalize(&e).map_err(|_| FindrError::ProviderContract("provider returned a zero vector".into()))
    }

    fn call<T>(&self, op: impl Fn() -> std::result::Result<T, AttemptError>) -> Result<T> {
        with_retries(&self.policy, || {
            let _permit = self.limiter.acquire();
            op()
        })
    }

    fn text_key(&self, text: &str) -> Value {
        json!({"kind": "text", "model_id": self.model_id(), "text": text})
    }

    fn image_key(&self, digest: &[u8; 32], aug: Option<&AugParams>) -> Value {
        let mut key = json!({
            "kind": "image",
            "model_id": self.model_id(),
            "digest": hex::encode(digest),
            "input_size": self.backend.input_size(),
        });
        if let Some(p) = aug {
            key["augmentation"] = json!(p);
        }
        key
    }

    /// One unit embedding per text, order-aligned with the input.
    pub fn embed_texts(&self, texts: &[String]) -> Result<Vec<Embedding>> {
        if texts.is_empty() {
            return Err(FindrError::EmptyInput("texts"));
        }
        self.require(Modality::Text)?;
        let keys: Vec<(String, Value)> = texts
            .iter()
            .map(|t| {
                let d = self.text_key(t);
                (canonical_key(&d), d)
            })
            .collect();
        let mut missing: Vec<usize> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, (k, _)) in keys.iter().enumerate() {
            if self.lookup(k)?.is_none() && seen.insert(k.clone()) {
                missing.push(i);
            }
        }
        for chunk in missing.chunks(TEXT_BATCH) {
            let batch: Vec<String> = chunk.iter().map(|&i| texts[i].clone()).collect();
            let raw = self.call(|| self.backend.embed_texts(&batch))?;
            if raw.len() != batch.len() {
                return Err(FindrError::ProviderContract(format!(
                    "{} embeddings for {} texts",
                    raw.len(),
                    batch.len()
                )));
            }
            for (&i, values) in chunk.iter().zip(raw) {
                let e = self.finish(values)?;
                self.remember(&keys[i].0, &e, keys[i].1.clone())?;
            }
        }
        keys.iter().map(|(k, _)| self.cached(k)).collect()
    }

    pub fn embed_text(&self, text: &str) -> Result<Embedding> {
        Ok(self.embed_texts(&[text.to_string()])?.remove(0))
    }

    pub fn embed_image(&self, record: &ImageRecord) -> Result<Embedding> {
        self.require(Modality::Image)?;
        let loaded = record.load()?;
        let descr = self.image_key(&loaded.digest, None);
        let key = canonical_key(&descr);
        if let Some(e) = self.lookup(&key)? {
            return Ok(e);
        }
        let (_, img) = record.decode()?;
        let input = ImageInput {
            pixels: square_resize(&img.to_rgb8(), self.backend.input_size()),
            digest: loaded.digest,
            synthetic_class: record.synthetic_class.clone(),
            augmentation: None,
        };
        let raw = self.call(|| self.backend.embed_images(std::slice::from_ref(&input)))?;
        let values = raw
            .into_iter()
            .next()
            .ok_or_else(|| FindrError::ProviderContract("no embedding returned for image".into()))?;
        let e = self.finish(values)?;
        self.remember(&key, &e, descr)?;
        Ok(e)
    }

    /// Plain embeddings for many images, in input order.
    pub fn embed_images(&self, records: &[ImageRecord]) -> Result<Vec<Embedding>> {
        records.par_iter().map(|r| self.embed_image(r)).collect()
    }

    /// The policy's `count` augmented views of the image, embedded in draw order.
    /// An augmentation that draws the full frame unflipped is the plain view.
    pub fn embed_image_augmented(&self, record: &ImageRecord, policy: &AugmentationPolicy) -> Result<Vec<Embedding>> {
        policy.validate()?;
        self.require(Modality::Image)?;
        let (loaded, img) = record.decode()?;
        let (w, h) = (img.width(), img.height());
        let draws = policy.draw(w, h, &loaded.digest);
        let views: Vec<(Option<AugParams>, Value)> = draws
            .iter()
            .map(|p| {
                let aug = (!p.is_identity_for(w, h)).then_some(*p);
                let descr = self.image_key(&loaded.digest, aug.as_ref());
                (aug, descr)
            })
            .collect();
        let keys: Vec<String> = views.iter().map(|(_, d)| canonical_key(d)).collect();

        let mut missing = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, k) in keys.iter().enumerate() {
            if self.lookup(k)?.is_none() && seen.insert(k.clone()) {
                missing.push(i);
            }
        }
        if !missing.is_empty() {
            let side = self.backend.input_size();
            let inputs: Vec<ImageInput> = missing
                .iter()
                .map(|&i| ImageInput {
                    pixels: apply_augmentation(&img, &draws[i], side),
                    digest: loaded.digest,
                    synthetic_class: record.synthetic_class.clone(),
                    augmentation: views[i].0,
                })
                .collect();
            let raw = self.call(|| self.backend.embed_images(&inputs))?;
            if raw.len() != inputs.len() {
                return Err(FindrError::ProviderContract(format!(
                    "{} embeddings for {} images",
                    raw.len(),
                    inputs.len()
                )));
            }
            for (&i, values) in missing.iter().zip(raw) {
                let e = self.finish(values)?;
                self.remember(&keys[i], &e, views[i].1.clone())?;
            }
        }
        keys.iter().map(|k| self.cached(k)).collect()
    }
}
