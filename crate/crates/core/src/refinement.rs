//! Visual-relevance scoring of candidate names and retention of the best.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::CandidateVocabulary;
use crate::embedding::EmbeddingGateway;
use crate::error::{FindrError, Result};
use crate::manifest::ImageRecord;
use crate::vector::{cosine, Embedding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredName {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RetentionRule {
    #[default]
    KeepAll,
    TopM { m: usize },
    MinScore { tau: f64 },
}

impl RetentionRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            RetentionRule::TopM { m: 0 } => Err(FindrError::Config("top_m needs m >= 1".into())),
            RetentionRule::MinScore { tau } if !(-1.0..=1.0).contains(tau) => {
                Err(FindrError::Config(format!("min_score threshold {tau} is outside [-1, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Contents of `refined.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedVocabulary {
    pub names: Vec<String>,
    pub scores: Vec<f64>,
    pub retention: RetentionRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_model_id: Option<String>,
}

impl RefinedVocabulary {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// `score(c) = (1/N) Σ_j cos(t_c, v_j)` for every name, aligned with `names`.
pub fn score_names(names: &[String], text: &[Embedding], images: &[Embedding]) -> Result<Vec<ScoredName>> {
    if images.is_empty() {
        return Err(FindrError::EmptyInput("discovery image embeddings"));
    }
    if names.len() != text.len() {
        return Err(FindrError::Contract(format!(
            "{} names but {} text embeddings",
            names.len(),
            text.len()
        )));
    }
    names
        .par_iter()
        .zip(text)
        .map(|(name, t)| {
            let mut sum = 0.0;
            for v in images {
                sum += cosine(t, v)?;
            }
            Ok(ScoredName {
                name: name.clone(),
                score: sum / images.len() as f64,
            })
        })
        .collect()
}

/// Scores the candidate names with the gateway's text embeddings.
pub fn score_candidates(
    candidates: &CandidateVocabulary,
    gateway: &EmbeddingGateway,
    disc_embeddings: &[Embedding],
) -> Result<Vec<ScoredName>> {
    if disc_embeddings.is_empty() {
        return Err(FindrError::EmptyInput("discovery image embeddings"));
    }
    let text = gateway.embed_texts(&candidates.names)?;
    score_names(&candidates.names, &text, disc_embeddings)
}

fn ranking(a: &ScoredName, b: &ScoredName) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name))
}

/// Sorts by descending score (ties by name) and keeps a prefix according to `rule`.
pub fn retain(scored: &[ScoredName], rule: &RetentionRule) -> Result<RefinedVocabulary> {
    rule.validate()?;
    if scored.is_empty() {
        return Err(FindrError::EmptyInput("scored names"));
    }
    let mut sorted = scored.to_vec();
    sorted.sort_by(ranking);
    let keep = match rule {
        RetentionRule::KeepAll => sorted.len(),
        RetentionRule::TopM { m } => (*m).min(sorted.len()),
        RetentionRule::MinScore { tau } => sorted.iter().take_while(|s| s.score >= *tau).count().max(1),
    };
    sorted.truncate(keep);
    Ok(RefinedVocabulary {
        names: sorted.iter().map(|s| s.name.clone()).collect(),
        scores: sorted.iter().map(|s| s.score).collect(),
        retention: rule.clone(),
        provider_model_id: None,
    })
}

/// Embeds the discovery images, scores every candidate and applies `rule`.
pub fn refine(
    candidates: &CandidateVocabulary,
    disc: &[ImageRecord],
    gateway: &EmbeddingGateway,
    rule: &RetentionRule,
) -> Result<RefinedVocabulary> {
    rule.validate()?;
    let images = gateway.embed_images(disc)?;
    let scored = score_candidates(candidates, gateway, &images)?;
    let mut refined = retain(&scored, rule)?;
    refined.provider_model_id = Some(gateway.model_id().to_string());
    Ok(refined)
}
