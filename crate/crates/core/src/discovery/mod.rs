//! Vocabulary discovery: dataset-level meta information from a small
//! context set, one fine-grained name per image, and standardization of
//! the raw answers into a candidate vocabulary.

mod normalize;
mod prompts;

pub use normalize::{default_blocklist, filter_generic, normalize_name, CandidateEntry, CandidateVocabulary, DEFAULT_BLOCKLIST};
pub use prompts::{
    build_main_prompt, build_meta_prompt, build_service_prompt, extract_json_object, main_prompt_text, parse_meta,
    parse_service, primary_suggestion, service_prompt_text, ChatSettings, PromptOptions, BASE_QUESTION, META_PROMPT,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chat::{ChatGateway, ChatRequest, ChatResponse};
use crate::error::{FindrError, Result};
use crate::manifest::{ImageRecord, Manifest};
use crate::store::sha256_hex;

pub const DEFAULT_CONTEXT_SIZE: usize = 3;
pub const DEFAULT_PARSE_ATTEMPTS: u32 = 3;

/// Dataset-level meta information: broad category, granularity unit and expert persona.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaInfo {
    pub category_singular: String,
    pub category_plural: String,
    pub unit_singular: String,
    pub unit_plural: String,
    pub expert_name: String,
}

/// Unstandardized answer to the main prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPrediction {
    pub image_id: String,
    pub text: String,
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub meta: MetaInfo,
    pub context_image_ids: Vec<String>,
    pub seed: u64,
    pub context_size: usize,
}

/// One line of `candidates.jsonl`. `name` is absent when the image yielded no usable name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLine {
    pub image_id: String,
    pub raw_text_sha256: Option<String>,
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverySettings {
    pub chat: ChatSettings,
    pub prompt: PromptOptions,
    pub context_size: usize,
    pub context_seed: u64,
    pub parse_attempts: u32,
    pub blocklist: Vec<String>,
}

impl DiscoverySettings {
    pub fn new(chat: ChatSettings) -> Self {
        DiscoverySettings {
            chat,
            prompt: PromptOptions::default(),
            context_size: DEFAULT_CONTEXT_SIZE,
            context_seed: 0,
            parse_attempts: DEFAULT_PARSE_ATTEMPTS,
            blocklist: default_blocklist(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscoveryOutcome {
    pub meta: MetaRecord,
    pub candidates: Vec<CandidateLine>,
    pub vocabulary: CandidateVocabulary,
}

/// Seeded choice of `size` context images, returned in manifest order.
pub fn select_context(records: &[ImageRecord], size: usize, seed: u64) -> Result<Vec<ImageRecord>> {
    if size == 0 || records.len() < size {
        return Err(FindrError::Contract(format!(
            "context set of {size} images needs at least that many discovery images, have {}",
            records.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, records.len(), size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| records[i].clone()).collect())
}

/// Calls the gateway and parses the answer, re-asking (bypassing the
/// cache) when the answer does not parse.
fn ask_parsed<T>(
    gateway: &ChatGateway,
    req: &ChatRequest,
    attempts: u32,
    parse: impl Fn(&ChatResponse) -> Result<T>,
) -> Result<T> {
    let mut resp = gateway.complete(req)?;
    let mut attempt = 1;
    loop {
        match parse(&resp) {
            Ok(v) => return Ok(v),
            Err(e) if attempt >= attempts.max(1) => return Err(e),
            Err(e) => {
                log::warn!("unparseable answer (attempt {attempt}): {e}");
                attempt += 1;
                resp = gateway.refresh(req)?;
            }
        }
    }
}

pub fn extract_meta(
    context: &[ImageRecord],
    gateway: &ChatGateway,
    settings: &DiscoverySettings,
) -> Result<MetaInfo> {
    let req = build_meta_prompt(context, settings.context_size, &settings.chat)?;
    ask_parsed(gateway, &req, settings.parse_attempts, |r| parse_meta(&r.text))
}

/// Main prompt then service prompt for one image. `Ok(None)` means the
/// image produced no usable name.
pub fn discover_image(
    image: &ImageRecord,
    meta: &MetaInfo,
    gateway: &ChatGateway,
    settings: &DiscoverySettings,
) -> Result<CandidateLine> {
    let req = build_main_prompt(image, meta, &settings.prompt, &settings.chat)?;
    let raw = gateway.complete(&req)?;
    if raw.text.trim().is_empty() {
        log::warn!("image {}: empty answer to the main prompt", image.id);
        return Ok(CandidateLine {
            image_id: image.id.clone(),
            raw_text_sha256: None,
            name: None,
        });
    }
    let raw = RawPrediction {
        image_id: image.id.clone(),
        text: raw.text,
    };
    let digest = sha256_hex(raw.text.as_bytes());
    let service = build_service_prompt(&raw.text, meta, &settings.chat)?;
    let items = match ask_parsed(gateway, &service, settings.parse_attempts, |r| parse_service(&r.text)) {
        Ok(items) => items,
        Err(FindrError::Parse(e)) => {
            log::warn!("image {}: discarding unparseable service answer: {e}", image.id);
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    let name = primary_suggestion(&items).and_then(normalize_name);
    Ok(CandidateLine {
        image_id: raw.image_id,
        raw_text_sha256: Some(digest),
        name,
    })
}

/// Meta extraction and per-image naming over a manifest. Per-image work
/// runs concurrently up to the gateway's in-flight cap; results keep
/// manifest order.
pub fn discover_candidates(
    manifest: &Manifest,
    gateway: &ChatGateway,
    settings: &DiscoverySettings,
) -> Result<(MetaRecord, Vec<CandidateLine>)> {
    let context = select_context(manifest.records(), settings.context_size, settings.context_seed)?;
    let meta = extract_meta(&context, gateway, settings)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(gateway.max_in_flight())
        .build()
        .map_err(|e| FindrError::Config(e.to_string()))?;
    let candidates: Vec<CandidateLine> = pool.install(|| {
        manifest
            .records()
            .par_iter()
            .map(|img| discover_image(img, &meta, gateway, settings))
            .collect::<Result<Vec<_>>>()
    })?;
    let record = MetaRecord {
        meta,
        context_image_ids: context.into_iter().map(|r| r.id).collect(),
        seed: settings.context_seed,
        context_size: settings.context_size,
    };
    Ok((record, candidates))
}

/// Generic-name filtering and deduplication of the per-image names.
pub fn vocabulary_from(candidates: &[CandidateLine], meta: &MetaInfo, blocklist: &[String]) -> Result<CandidateVocabulary> {
    let entries = candidates
        .iter()
        .filter_map(|c| {
            c.name.as_ref().map(|n| CandidateEntry {
                image_id: c.image_id.clone(),
                name: n.clone(),
            })
        })
        .collect();
    filter_generic(entries, meta, blocklist)
}

pub fn discover(manifest: &Manifest, gateway: &ChatGateway, settings: &DiscoverySettings) -> Result<DiscoveryOutcome> {
    let (meta, candidates) = discover_candidates(manifest, gateway, settings)?;
    let vocabulary = vocabulary_from(&candidates, &meta.meta, &settings.blocklist)?;
    Ok(DiscoveryOutcome {
        meta,
        candidates,
        vocabulary,
    })
}
