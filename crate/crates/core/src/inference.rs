//! Cosine-argmax classification of test images against coupled weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{rank_by_cosine, CoupledClassifier};
use crate::embedding::EmbeddingGateway;
use crate::error::{FindrError, Result};
use crate::manifest::ImageRecord;
use crate::vector::Embedding;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunnerUp {
    pub name: String,
    pub score: f64,
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    pub name: String,
    pub score: f64,
    pub runner_up: Option<RunnerUp>,
}

/// A prediction together with the index of the winning class slot.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub class_index: usize,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestionMode {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedImage {
    pub image_id: String,
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchOutcome {
    pub classified: Vec<Classified>,
    pub skipped: Vec<SkippedImage>,
}

impl BatchOutcome {
    pub fn predictions(&self) -> Vec<Prediction> {
        self.classified.iter().map(|c| c.prediction.clone()).collect()
    }
}

pub fn classify_embedding(image_id: &str, query: &Embedding, clf: &CoupledClassifier) -> Result<Classified> {
    if query.dim() != clf.dim() {
        return Err(FindrError::ProviderContract(format!(
            "image embedding has dim {}, classifier expects {}",
            query.dim(),
            clf.dim()
        )));
    }
    let ranked = rank_by_cosine(query, &clf.coupled_weights)?;
    let (idx, score) = ranked.best;
    Ok(Classified {
        class_index: idx,
        prediction: Prediction {
            image_id: image_id.to_string(),
            name: clf.names[idx].clone(),
            score,
            runner_up: ranked.runner_up.map(|(i, s)| RunnerUp {
                name: clf.names[i].clone(),
                score: s,
            }),
        },
    })
}

pub fn classify(image: &ImageRecord, clf: &CoupledClassifier, gateway: &EmbeddingGateway) -> Result<Prediction> {
    let v = gateway.embed_image(image)?;
    Ok(classify_embedding(&image.id, &v, clf)?.prediction)
}

/// Classifies precomputed embeddings, aligned with `ids`.
pub fn classify_embeddings(ids: &[String], embeddings: &[Embedding], clf: &CoupledClassifier) -> Result<Vec<Classified>> {
    ids.par_iter()
        .zip(embeddings)
        .map(|(id, v)| classify_embedding(id, v, clf))
        .collect()
}

/// One prediction per record, in record order. In lenient mode images that
/// fail ingestion are reported as skipped instead of aborting the batch.
pub fn classify_batch(
    records: &[ImageRecord],
    clf: &CoupledClassifier,
    gateway: &EmbeddingGateway,
    mode: IngestionMode,
) -> Result<BatchOutcome> {
    let results: Vec<Result<Classified>> = records
        .par_iter()
        .map(|r| {
            let v = gateway.embed_image(r)?;
            classify_embedding(&r.id, &v, clf)
        })
        .collect();
    let mut out = BatchOutcome::default();
    for (r, res) in records.iter().zip(results) {
        match res {
            Ok(c) => out.classified.push(c),
            Err(FindrError::Ingestion { path, reason }) if mode == IngestionMode::Lenient => {
                log::warn!("skipping {}: {reason}", path.display());
                out.skipped.push(SkippedImage {
                    image_id: r.id.clone(),
                    path: path.display().to_string(),
                    reason,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
