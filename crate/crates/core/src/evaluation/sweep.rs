use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{corrupt_vocabulary, evaluate, evaluate_grouped, CorruptionMode};
use crate::classifier::{build_classifier, BuildSettings, CoupledClassifier};
use crate::embedding::EmbeddingGateway;
use crate::error::{FindrError, Result};
use crate::inference::{classify_embeddings, Classified, Prediction};
use crate::manifest::ImageRecord;
use crate::refinement::RefinedVocabulary;
use crate::vector::Embedding;

pub const DEFAULT_ROBUSTNESS_FRACTIONS: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

fn tidy(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// `from, from+step, ...` up to and including `to` (within rounding).
pub fn alpha_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    let ok = (0.0..=1.0).contains(&from) && (0.0..=1.0).contains(&to) && from <= to;
    if !ok {
        return Err(FindrError::Config(format!("alpha range [{from}, {to}] must lie within [0, 1]")));
    }
    if !(step > 0.0) {
        return Err(FindrError::Config(format!("alpha step must be positive, got {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| tidy(from + i as f64 * step).min(to)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaPoint {
    pub alpha: f64,
    pub cacc: f64,
    pub sacc: f64,
    /// Winning class index per test image.
    pub predicted: Vec<usize>,
}

/// Recouples the classifier at each alpha and evaluates on precomputed test embeddings.
pub fn alpha_sweep(
    clf: &CoupledClassifier,
    ids: &[String],
    test_embeddings: &[Embedding],
    gt: &BTreeMap<String, String>,
    judge: &EmbeddingGateway,
    grid: &[f64],
) -> Result<Vec<AlphaPoint>> {
    grid.iter()
        .map(|&alpha| {
            let recoupled = clf.with_alpha(alpha)?;
            let classified = classify_embeddings(ids, test_embeddings, &recoupled)?;
            let preds: Vec<Prediction> = classified.iter().map(|c| c.prediction.clone()).collect();
            let report = evaluate(&preds, gt, judge)?;
            Ok(AlphaPoint {
                alpha,
                cacc: report.cacc,
                sacc: report.sacc,
                predicted: classified.iter().map(|c| c.class_index).collect(),
            })
        })
        .collect()
}

pub fn alpha_csv(points: &[AlphaPoint]) -> String {
    let mut out = String::from("alpha,cacc,sacc\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.alpha, p.cacc, p.sacc);
    }
    out
}

/// How a corrupted vocabulary reaches the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessFlow {
    /// Corrupted names replace the text prototypes only; pseudo-labels and
    /// visual prototypes come from the clean vocabulary.
    #[default]
    TextOnly,
    /// The corrupted vocabulary goes through pseudo-labelling and prototype
    /// construction from scratch.
    FullRebuild,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub mode: CorruptionMode,
    pub fraction: f64,
    pub cacc: f64,
    pub sacc: f64,
}

pub struct RobustnessSetup<'a> {
    pub vocab: &'a RefinedVocabulary,
    pub clean: &'a CoupledClassifier,
    pub disc: &'a [ImageRecord],
    pub test_ids: &'a [String],
    pub test_embeddings: &'a [Embedding],
    pub gt: &'a BTreeMap<String, String>,
    pub gateway: &'a EmbeddingGateway,
    pub judge: &'a EmbeddingGateway,
    pub settings: &'a BuildSettings,
    pub generic_name: &'a str,
    pub seed: u64,
    pub flow: RobustnessFlow,
}

impl RobustnessSetup<'_> {
    fn classifier_for(&self, corrupted: &RefinedVocabulary) -> Result<CoupledClassifier> {
        match self.flow {
            RobustnessFlow::TextOnly => {
                let text = self.gateway.embed_texts(&corrupted.names)?;
                self.clean.with_text(corrupted.names.clone(), text)
            }
            RobustnessFlow::FullRebuild => {
                Ok(build_classifier(corrupted, self.disc, self.gateway, self.settings)?.0)
            }
        }
    }

    pub fn run_one(&self, mode: CorruptionMode, fraction: f64) -> Result<RobustnessRow> {
        let corrupted = corrupt_vocabulary(self.vocab, mode, fraction, self.seed, self.generic_name)?;
        let clf = self.classifier_for(&corrupted)?;
        let classified = classify_embeddings(self.test_ids, self.test_embeddings, &clf)?;
        // Corruption can give two slots the same name; cluster by slot.
        let keys: Vec<String> = classified.iter().map(slot_key).collect();
        let preds: Vec<Prediction> = classified.into_iter().map(|c| c.prediction).collect();
        let report = evaluate_grouped(&keys, &preds, self.gt, self.judge)?;
        Ok(RobustnessRow {
            mode,
            fraction,
            cacc: report.cacc,
            sacc: report.sacc,
        })
    }
}

fn slot_key(c: &Classified) -> String {
    format!("{}:{}", c.class_index, c.prediction.name)
}

/// One row per (mode, fraction), modes outermost, in the given order.
pub fn robustness_sweep(
    setup: &RobustnessSetup<'_>,
    modes: &[CorruptionMode],
    fractions: &[f64],
) -> Result<Vec<RobustnessRow>> {
    let mut rows = Vec::with_capacity(modes.len() * fractions.len());
    for &mode in modes {
        for &fraction in fractions {
            rows.push(setup.run_one(mode, fraction)?);
        }
    }
    Ok(rows)
}

pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    let mut out = String::from("mode,fraction,cacc,sacc\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.mode.as_str(), r.fraction, r.cacc, r.sacc);
    }
    out
}
