//! Pseudo-labelling, augmented visual prototypes and text/vision coupling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{AugmentationPolicy, EmbeddingGateway};
use crate::error::{FindrError, Result};
use crate::manifest::ImageRecord;
use crate::refinement::RefinedVocabulary;
use crate::vector::{cosine, l2_normalize, mean, Embedding};

pub const DEFAULT_ALPHA: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoLabelGroup {
    pub name: String,
    pub image_ids: Vec<String>,
}

/// Best and second-best class by cosine. Ties go to the lower index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ranked {
    pub best: (usize, f64),
    pub runner_up: Option<(usize, f64)>,
}

pub fn rank_by_cosine(query: &Embedding, weights: &[Embedding]) -> Result<Ranked> {
    let mut best: Option<(usize, f64)> = None;
    let mut second: Option<(usize, f64)> = None;
    for (i, w) in weights.iter().enumerate() {
        let s = cosine(query, w)?;
        match best {
            Some((_, b)) if s <= b => {
                if second.is_none_or(|(_, r)| s > r) {
                    second = Some((i, s));
                }
            }
            _ => {
                second = best;
                best = Some((i, s));
            }
        }
    }
    let best = best.ok_or(FindrError::EmptyInput("classifier has no classes"))?;
    Ok(Ranked { best, runner_up: second })
}

/// Assigns each image embedding to the nearest text prototype.
pub fn assign(image_embeddings: &[Embedding], text: &[Embedding]) -> Result<Vec<usize>> {
    image_embeddings
        .iter()
        .map(|v| rank_by_cosine(v, text).map(|r| r.best.0))
        .collect()
}

fn groups_from(names: &[String], records: &[ImageRecord], labels: &[usize]) -> Vec<PseudoLabelGroup> {
    let mut groups: Vec<PseudoLabelGroup> = names
        .iter()
        .map(|n| PseudoLabelGroup { name: n.clone(), image_ids: Vec::new() })
        .collect();
    for (r, &c) in records.iter().zip(labels) {
        groups[c].image_ids.push(r.id.clone());
    }
    groups
}

/// Pseudo-labels the discovery images against the vocabulary's text prototypes.
pub fn pseudo_label(
    disc: &[ImageRecord],
    vocab: &RefinedVocabulary,
    gateway: &EmbeddingGateway,
) -> Result<Vec<PseudoLabelGroup>> {
    if vocab.is_empty() {
        return Err(FindrError::EmptyInput("refined vocabulary"));
    }
    let text = gateway.embed_texts(&vocab.names)?;
    let images = gateway.embed_images(disc)?;
    Ok(groups_from(&vocab.names, disc, &assign(&images, &text)?))
}

/// Mean of the augmented view embeddings; `None` when there are none.
/// With `renormalize` the mean is scaled back to unit length.
pub fn prototype_from_views(views: &[Embedding], renormalize: bool) -> Result<Option<Embedding>> {
    if views.is_empty() {
        return Ok(None);
    }
    let m = mean(views)?;
    if !renormalize {
        return Ok(Some(m));
    }
    match l2_normalize(&m) {
        Ok(v) => Ok(Some(v)),
        Err(FindrError::DegenerateVector) => {
            log::warn!("augmented views cancel out; class falls back to its text prototype");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

pub fn build_visual_prototype(
    members: &[ImageRecord],
    policy: &AugmentationPolicy,
    gateway: &EmbeddingGateway,
    renormalize: bool,
) -> Result<Option<Embedding>> {
    let mut views = Vec::with_capacity(members.len() * policy.count);
    for r in members {
        views.extend(gateway.embed_image_augmented(r, policy)?);
    }
    prototype_from_views(&views, renormalize)
}

/// `alpha * t + (1 - alpha) * v`, or `t` when there is no visual prototype.
pub fn couple(t: &Embedding, v: Option<&Embedding>, alpha: f64) -> Result<Embedding> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FindrError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    match v {
        None => Ok(t.clone()),
        Some(v) => Embedding::weighted_sum(t, alpha, v, 1.0 - alpha),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSettings {
    pub alpha: f64,
    pub policy: AugmentationPolicy,
    pub renormalize: bool,
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            alpha: DEFAULT_ALPHA,
            policy: AugmentationPolicy::default(),
            renormalize: true,
        }
    }
}

/// Contents of `classifier.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledClassifier {
    pub names: Vec<String>,
    pub alpha: f64,
    pub policy: AugmentationPolicy,
    pub renormalize: bool,
    pub provider_model_id: String,
    pub group_sizes: Vec<usize>,
    pub text_prototypes: Vec<Embedding>,
    pub visual_prototypes: Vec<Option<Embedding>>,
    pub coupled_weights: Vec<Embedding>,
}

impl CoupledClassifier {
    pub fn from_prototypes(
        names: Vec<String>,
        text_prototypes: Vec<Embedding>,
        visual_prototypes: Vec<Option<Embedding>>,
        settings: &BuildSettings,
        provider_model_id: impl Into<String>,
    ) -> Result<Self> {
        if names.is_empty() {
            return Err(FindrError::EmptyInput("classifier classes"));
        }
        if names.len() != text_prototypes.len() || names.len() != visual_prototypes.len() {
            return Err(FindrError::Contract("names and prototypes are not aligned".into()));
        }
        let coupled_weights = text_prototypes
            .iter()
            .zip(&visual_prototypes)
            .map(|(t, v)| couple(t, v.as_ref(), settings.alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoupledClassifier {
            group_sizes: vec![0; names.len()],
            names,
            alpha: settings.alpha,
            policy: settings.policy.clone(),
            renormalize: settings.renormalize,
            provider_model_id: provider_model_id.into(),
            text_prototypes,
            visual_prototypes,
            coupled_weights,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.text_prototypes.first().map_or(0, Embedding::dim)
    }

    /// The same prototypes recoupled at another alpha.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let coupled_weights = self
            .text_prototypes
            .iter()
            .zip(&self.visual_prototypes)
            .map(|(t, v)| couple(t, v.as_ref(), alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(CoupledClassifier {
            alpha,
            coupled_weights,
            ..self.clone()
        })
    }

    /// The same visual prototypes with new text prototypes for `names`.
    pub fn with_text(&self, names: Vec<String>, text_prototypes: Vec<Embedding>) -> Result<Self> {
        let settings = BuildSettings {
            alpha: self.alpha,
            policy: self.policy.clone(),
            renormalize: self.renormalize,
        };
        let mut clf = CoupledClassifier::from_prototypes(
            names,
            text_prototypes,
            self.visual_prototypes.clone(),
            &settings,
            self.provider_model_id.clone(),
        )?;
        clf.group_sizes = self.group_sizes.clone();
        Ok(clf)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if n == 0 {
            return Err(FindrError::EmptyInput("classifier classes"));
        }
        if self.text_prototypes.len() != n || self.visual_prototypes.len() != n || self.coupled_weights.len() != n {
            return Err(FindrError::Validation("classifier arrays are not aligned with its names".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FindrError::Validation(format!("classifier alpha {} outside [0, 1]", self.alpha)));
        }
        let dim = self.dim();
        let dims_ok = self.text_prototypes.iter().all(|e| e.dim() == dim)
            && self.coupled_weights.iter().all(|e| e.dim() == dim)
            && self.visual_prototypes.iter().flatten().all(|e| e.dim() == dim);
        if !dims_ok {
            return Err(FindrError::Validation("classifier embeddings differ in dimension".into()));
        }
        Ok(())
    }
}

/// Pseudo-labels the discovery set, builds visual prototypes and couples them.
pub fn build_classifier(
    vocab: &RefinedVocabulary,
    disc: &[ImageRecord],
    gateway: &EmbeddingGateway,
    settings: &BuildSettings,
) -> Result<(CoupledClassifier, Vec<PseudoLabelGroup>)> {
    settings.policy.validate()?;
    couple_check(settings.alpha)?;
    let groups = pseudo_label(disc, vocab, gateway)?;
    let text = gateway.embed_texts(&vocab.names)?;
    let visual = groups
        .par_iter()
        .map(|g| {
            let members: Vec<ImageRecord> = disc
                .iter()
                .filter(|r| g.image_ids.contains(&r.id))
                .cloned()
                .collect();
            build_visual_prototype(&members, &settings.policy, gateway, settings.renormalize)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut clf = CoupledClassifier::from_prototypes(vocab.names.clone(), text, visual, settings, gateway.model_id())?;
    clf.group_sizes = groups.iter().map(|g| g.image_ids.len()).collect();
    Ok((clf, groups))
}

fn couple_check(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(FindrError::Config(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}
