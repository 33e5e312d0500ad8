//! Clustering and semantic accuracy, vocabulary corruption and ablation sweeps.

mod assignment;
mod corrupt;
mod sweep;

pub use assignment::max_weight_assignment;
pub use corrupt::{corrupt_vocabulary, CorruptionMode};
pub use sweep::{
    alpha_csv, alpha_grid, alpha_sweep, robustness_csv, robustness_sweep, AlphaPoint, RobustnessFlow, RobustnessRow,
    RobustnessSetup, DEFAULT_ROBUSTNESS_FRACTIONS,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::discovery::normalize_name;
use crate::embedding::EmbeddingGateway;
use crate::error::{FindrError, Result};
use crate::inference::Prediction;
use crate::vector::cosine;

/// Counts of images per (predicted, ground-truth) pair. Rows and columns are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn from_labels(predicted: &[String], truth: &[String]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(FindrError::Contract("predicted and ground-truth labels differ in length".into()));
        }
        let rows: Vec<String> = predicted.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let cols: Vec<String> = truth.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let ri: HashMap<&str, usize> = rows.iter().enumerate().map(|(i, r)| (r.as_str(), i)).collect();
        let ci: HashMap<&str, usize> = cols.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let mut counts = vec![vec![0u64; cols.len()]; rows.len()];
        for (p, t) in predicted.iter().zip(truth) {
            counts[ri[p.as_str()]][ci[t.as_str()]] += 1;
        }
        Ok(ContingencyTable { rows, cols, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub cacc: f64,
    pub matched: u64,
    /// (row, column) pairs of the optimal assignment.
    pub mapping: Vec<(usize, usize)>,
}

pub fn clustering_accuracy(table: &ContingencyTable) -> Result<Clustering> {
    let total = table.total();
    if total == 0 {
        return Err(FindrError::EmptyInput("contingency table has no images"));
    }
    let (matched, assignment) = max_weight_assignment(&table.counts);
    let mapping = assignment
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| (r, c)))
        .collect();
    Ok(Clustering {
        cacc: matched as f64 / total as f64,
        matched,
        mapping,
    })
}

fn judge_form(name: &str) -> String {
    normalize_name(name).unwrap_or_else(|| name.trim().to_string())
}

/// Fails listing every prediction without a ground-truth entry.
pub fn check_ground_truth(preds: &[Prediction], gt: &BTreeMap<String, String>) -> Result<()> {
    let missing: Vec<&str> = preds
        .iter()
        .filter(|p| !gt.contains_key(&p.image_id))
        .map(|p| p.image_id.as_str())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(FindrError::Evaluation(format!("no ground truth for: {}", missing.join(", "))))
    }
}

/// Judge cosine between each (predicted, true) name pair, after normalization.
/// Each distinct name is embedded once.
pub fn name_similarities(pairs: &[(&str, &str)], judge: &EmbeddingGateway) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    let distinct: Vec<String> = pairs
        .iter()
        .flat_map(|(p, t)| [judge_form(p), judge_form(t)])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let embs = judge.embed_texts(&distinct)?;
    let lookup: HashMap<&str, usize> = distinct.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    pairs
        .iter()
        .map(|(p, t)| cosine(&embs[lookup[judge_form(p).as_str()]], &embs[lookup[judge_form(t).as_str()]]))
        .collect()
}

pub fn semantic_accuracy(preds: &[Prediction], gt: &BTreeMap<String, String>, judge: &EmbeddingGateway) -> Result<f64> {
    check_ground_truth(preds, gt)?;
    if preds.is_empty() {
        return Err(FindrError::EmptyInput("predictions"));
    }
    let pairs: Vec<(&str, &str)> = preds.iter().map(|p| (p.name.as_str(), gt[&p.image_id].as_str())).collect();
    let sims = name_similarities(&pairs, judge)?;
    Ok(sims.iter().sum::<f64>() / sims.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub predicted: String,
    pub ground_truth: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassRow {
    pub ground_truth: String,
    pub n_images: u64,
    pub matched_prediction: Option<String>,
    pub correct: u64,
    pub accuracy: f64,
    pub mean_similarity: f64,
}

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub cacc: f64,
    pub sacc: f64,
    pub n_images: usize,
    pub n_pred_classes: usize,
    pub n_gt_classes: usize,
    pub mapping: Vec<MappingEntry>,
    pub per_class: Vec<PerClassRow>,
    pub contingency: ContingencyTable,
    pub judge_model_id: String,
}

/// Full report with predictions grouped by their names.
pub fn evaluate(preds: &[Prediction], gt: &BTreeMap<String, String>, judge: &EmbeddingGateway) -> Result<EvaluationReport> {
    let keys: Vec<String> = preds.iter().map(|p| p.name.clone()).collect();
    evaluate_grouped(&keys, preds, gt, judge)
}

/// Like [`evaluate`], but clusters are given by `cluster_keys` (aligned with
/// `preds`) rather than by predicted name. Used when several class slots may
/// share a name.
pub fn evaluate_grouped(
    cluster_keys: &[String],
    preds: &[Prediction],
    gt: &BTreeMap<String, String>,
    judge: &EmbeddingGateway,
) -> Result<EvaluationReport> {
    check_ground_truth(preds, gt)?;
    if preds.is_empty() {
        return Err(FindrError::EmptyInput("predictions"));
    }
    let truth: Vec<String> = preds.iter().map(|p| gt[&p.image_id].clone()).collect();
    let table = ContingencyTable::from_labels(cluster_keys, &truth)?;
    let clustering = clustering_accuracy(&table)?;

    let pairs: Vec<(&str, &str)> = preds.iter().zip(&truth).map(|(p, t)| (p.name.as_str(), t.as_str())).collect();
    let sims = name_similarities(&pairs, judge)?;
    let sacc = sims.iter().sum::<f64>() / sims.len() as f64;

    let mapping: Vec<MappingEntry> = clustering
        .mapping
        .iter()
        .map(|&(r, c)| MappingEntry {
            predicted: table.rows[r].clone(),
            ground_truth: table.cols[c].clone(),
            count: table.counts[r][c],
        })
        .collect();
    let per_class = table
        .cols
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let n_images: u64 = table.counts.iter().map(|row| row[c]).sum();
            let matched = clustering.mapping.iter().find(|&&(_, mc)| mc == c).map(|&(r, _)| r);
            let correct = matched.map_or(0, |r| table.counts[r][c]);
            let class_sims: Vec<f64> = truth
                .iter()
                .zip(&sims)
                .filter(|(t, _)| *t == name)
                .map(|(_, s)| *s)
                .collect();
            PerClassRow {
                ground_truth: name.clone(),
                n_images,
                matched_prediction: matched.map(|r| table.rows[r].clone()),
                correct,
                accuracy: correct as f64 / n_images as f64,
                mean_similarity: class_sims.iter().sum::<f64>() / class_sims.len() as f64,
            }
        })
        .collect();
    Ok(EvaluationReport {
        cacc: clustering.cacc,
        sacc,
        n_images: preds.len(),
        n_pred_classes: table.rows.len(),
        n_gt_classes: table.cols.len(),
        mapping,
        per_class,
        contingency: table,
        judge_model_id: judge.model_id().to_string(),
    })
}
