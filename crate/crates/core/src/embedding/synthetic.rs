//! Deterministic offline embedding provider.
//!
//! Text embeddings are hash-seeded unit vectors except for names listed in
//! the class plan, which map to fixed anchors. Images carrying a synthetic
//! class embed near that class's anchor.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbeddingBackend, ImageInput, Modality, ProviderInfo};
use crate::error::{FindrError, Result};
use crate::limits::AttemptError;
use crate::store::{canonical_key, sha256};

fn default_aug_jitter() -> f64 {
    0.02
}

fn default_input_size() -> u32 {
    32
}

/// A class anchor: either a standard basis vector or an explicit unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnchorSpec {
    Axis { axis: usize },
    Vector(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPlan {
    pub dim: usize,
    #[serde(default)]
    pub anchors: BTreeMap<String, AnchorSpec>,
    /// Magnitude of the per-image offset from the class anchor.
    #[serde(default)]
    pub noise: f64,
    /// Magnitude of the extra offset added to each non-identity augmentation.
    #[serde(default = "default_aug_jitter")]
    pub aug_jitter: f64,
    #[serde(default = "default_input_size")]
    pub input_size: u32,
}

impl SyntheticPlan {
    pub fn new(dim: usize) -> Self {
        SyntheticPlan {
            dim,
            anchors: BTreeMap::new(),
            noise: 0.0,
            aug_jitter: default_aug_jitter(),
            input_size: default_input_size(),
        }
    }

    pub fn with_anchor(mut self, name: impl Into<String>, anchor: AnchorSpec) -> Self {
        self.anchors.insert(name.into(), anchor);
        self
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }
}

pub struct SyntheticProvider {
    plan: SyntheticPlan,
    anchors: BTreeMap<String, Vec<f64>>,
    info: ProviderInfo,
    calls: AtomicU64,
}

/// Unit vector drawn from a generator seeded by the hash of `tag`.
pub fn hashed_unit_vector(dim: usize, tag: &[u8]) -> Vec<f64> {
    let mut rng = ChaCha8Rng::from_seed(sha256(tag));
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn normalized(v: Vec<f64>) -> Vec<f32> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x / n) as f32).collect()
}

fn tagged(prefix: &str, parts: &[&[u8]]) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(prefix.as_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().to_vec()
}

impl SyntheticProvider {
    pub fn new(plan: SyntheticPlan) -> Result<Self> {
        if plan.dim < 2 {
            return Err(FindrError::Config(format!("synthetic provider needs dim >= 2, got {}", plan.dim)));
        }
        if !(plan.noise >= 0.0 && plan.aug_jitter >= 0.0) {
            return Err(FindrError::Config("synthetic noise magnitudes must be non-negative".into()));
        }
        if plan.input_size == 0 {
            return Err(FindrError::Config("synthetic input_size must be positive".into()));
        }
        let mut anchors = BTreeMap::new();
        for (name, spec) in &plan.anchors {
            let v = match spec {
                AnchorSpec::Axis { axis } if *axis < plan.dim => {
                    let mut v = vec![0.0; plan.dim];
                    v[*axis] = 1.0;
                    v
                }
                AnchorSpec::Axis { axis } => {
                    return Err(FindrError::Config(format!("anchor {name:?}: axis {axis} out of range")))
                }
                AnchorSpec::Vector(values) => {
                    if values.len() != plan.dim {
                        return Err(FindrError::Config(format!(
                            "anchor {name:?} has {} components, expected {}",
                            values.len(),
                            plan.dim
                        )));
                    }
                    let v: Vec<f64> = values.iter().map(|&x| x as f64).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if (n - 1.0).abs() > 1e-4 {
                        return Err(FindrError::Config(format!("anchor {name:?} is not unit-norm (norm {n})")));
                    }
                    v
                }
            };
            anchors.insert(name.clone(), v);
        }
        let plan_value = serde_json::to_value(&plan)?;
        let info = ProviderInfo {
            model_id: format!("synthetic-{}", &canonical_key(&plan_value)[..12]),
            dim: plan.dim,
            modalities: BTreeSet::from([Modality::Text, Modality::Image]),
        };
        Ok(SyntheticProvider {
            plan,
            anchors,
            info,
            calls: AtomicU64::new(0),
        })
    }

    pub fn plan(&self) -> &SyntheticPlan {
        &self.plan
    }

    fn text_vector(&self, text: &str) -> Vec<f64> {
        match self.anchors.get(text) {
            Some(a) => a.clone(),
            None => hashed_unit_vector(self.plan.dim, &tagged("text", &[text.as_bytes()])),
        }
    }

    fn image_vector(&self, input: &ImageInput) -> Vec<f32> {
        let dim = self.plan.dim;
        let offset = hashed_unit_vector(dim, &tagged("image", &[&input.digest]));
        let base: Vec<f64> = match &input.synthetic_class {
            Some(class) => {
                let anchor = self.text_vector(class);
                anchor.iter().zip(&offset).map(|(a, o)| a + self.plan.noise * o).collect()
            }
            None => offset,
        };
        let Some(aug) = &input.augmentation else {
            return normalized(base);
        };
        let params = serde_json::to_vec(aug).unwrap_or_default();
        let jitter = hashed_unit_vector(dim, &tagged("augment", &[&input.digest, &params]));
        let base = normalized(base);
        normalized(
            base.iter()
                .zip(&jitter)
                .map(|(b, j)| *b as f64 + self.plan.aug_jitter * j)
                .collect(),
        )
    }
}

impl EmbeddingBackend for SyntheticProvider {
    fn info(&self) -> &ProviderInfo {
        &self.info
    }

    fn input_size(&self) -> u32 {
        self.plan.input_size
    }

    fn embed_texts(&self, texts: &[String]) -> std::result::Result<Vec<Vec<f32>>, AttemptError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(texts.iter().map(|t| normalized(self.text_vector(t))).collect())
    }

    fn embed_images(&self, images: &[ImageInput]) -> std::result::Result<Vec<Vec<f32>>, AttemptError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(images.iter().map(|i| self.image_vector(i)).collect())
    }

    fn network_calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}
