//! Stage commands over a run directory. Each returns a one-line JSON summary.

use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::chat::{ChatGateway, ChatProvider, HttpChatProvider, MockChatProvider};
use crate::classifier::{build_classifier, CoupledClassifier};
use crate::config::{ProviderConfig, RunConfig};
use crate::discovery::{discover_candidates, normalize_name, vocabulary_from, CandidateVocabulary, MetaRecord};
use crate::embedding::{EmbeddingBackend, EmbeddingGateway, RemoteProvider, SyntheticProvider};
use crate::error::{FindrError, Result};
use crate::evaluation::{
    alpha_csv, alpha_sweep, evaluate, robustness_csv, robustness_sweep, RobustnessSetup,
};
use crate::inference::{classify_batch, IngestionMode, Prediction};
use crate::limits::Limiter;
use crate::manifest::Manifest;
use crate::refinement::{refine, RefinedVocabulary};
use crate::run::{self, RunDir};

/// A locked run directory and the configuration it runs under.
pub struct Session {
    pub run: RunDir,
    pub config: RunConfig,
}

impl Session {
    /// Opens `run_dir`. With a config file, `adjust` is applied to it and the
    /// result is recorded (or checked against the recorded one); without,
    /// the recorded configuration is used.
    pub fn open(run_dir: &Path, config: Option<&Path>, adjust: impl FnOnce(&mut RunConfig)) -> Result<Self> {
        let run = RunDir::open(run_dir)?;
        let config = match config {
            Some(p) => {
                let mut cfg = RunConfig::load(p)?;
                adjust(&mut cfg);
                cfg.validate()?;
                run.snapshot_config(&cfg)?;
                cfg
            }
            None => {
                let mut cfg = run.locked_config().map_err(|e| match e {
                    FindrError::MissingArtifact(p) => FindrError::Config(format!(
                        "no --config given and {} does not exist",
                        p.display()
                    )),
                    other => other,
                })?;
                let before = cfg.clone();
                adjust(&mut cfg);
                if cfg != before {
                    return Err(FindrError::Validation(
                        "command-line overrides differ from the recorded configuration".into(),
                    ));
                }
                cfg
            }
        };
        Ok(Session { run, config })
    }

    pub fn from_parts(run: RunDir, config: RunConfig) -> Result<Self> {
        config.validate()?;
        run.snapshot_config(&config)?;
        Ok(Session { run, config })
    }

    fn limiter(&self) -> Limiter {
        Limiter::new(self.config.concurrency.max_in_flight, self.config.concurrency.rate_per_sec)
    }

    pub fn chat_gateway(&self) -> Result<ChatGateway> {
        let chat = &self.config.chat;
        let provider: Arc<dyn ChatProvider> = match (&chat.mock_session, &chat.base_url) {
            (Some(session), _) => Arc::new(MockChatProvider::from_session_file(session)?),
            (None, Some(url)) => Arc::new(HttpChatProvider::from_env(url, chat.options.clone(), self.config.timeout())?),
            (None, None) => return Err(FindrError::Config("chat needs a base_url or a mock_session".into())),
        };
        Ok(ChatGateway::new(
            provider,
            Some(self.run.chat_cache()),
            self.config.retry.clone(),
            self.limiter(),
        ))
    }

    pub fn embedding_gateway(&self, slot: &ProviderConfig) -> Result<EmbeddingGateway> {
        let backend: Arc<dyn EmbeddingBackend> = if slot.is_synthetic() {
            let plan = slot
                .plan
                .clone()
                .ok_or_else(|| FindrError::Config("synthetic provider needs a plan".into()))?;
            Arc::new(SyntheticProvider::new(plan)?)
        } else {
            let p = RemoteProvider::connect(&slot.base_url, self.config.timeout(), &self.config.retry)?;
            Arc::new(p.with_input_size(slot.input_size()))
        };
        Ok(EmbeddingGateway::new(
            backend,
            Some(self.run.embed_cache()),
            self.config.retry.clone(),
            self.limiter(),
        ))
    }

    /// The classify gateway, and the judge gateway when it is configured separately.
    fn classify_and_judge(&self) -> Result<(EmbeddingGateway, Option<EmbeddingGateway>)> {
        let classify = self.embedding_gateway(&self.config.classify_provider)?;
        let judge = match &self.config.judge_provider {
            Some(j) if j != &self.config.classify_provider => Some(self.embedding_gateway(j)?),
            _ => None,
        };
        Ok((classify, judge))
    }
}

fn calls(gateways: &[&EmbeddingGateway]) -> u64 {
    gateways.iter().map(|g| g.network_calls()).sum()
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_manifest(path: &Path) -> Result<Manifest> {
    let m = Manifest::load(path, true)?;
    if m.is_empty() {
        log::warn!("manifest {} is empty", path.display());
    }
    Ok(m)
}

pub fn discover(s: &Session, images: &Path) -> Result<Value> {
    let manifest = load_manifest(images)?;
    let chat = s.chat_gateway()?;
    let settings = s.config.discovery_settings();
    let (meta, candidates) = discover_candidates(&manifest, &chat, &settings)?;
    let mut written = vec![s.run.write_json(run::META, &meta)?, s.run.write_jsonl(run::CANDIDATES, &candidates)?];
    let vocab = vocabulary_from(&candidates, &meta.meta, &settings.blocklist)?;
    written.push(s.run.write_json(run::VOCABULARY, &vocab)?);
    Ok(json!({
        "command": "discover",
        "images": manifest.len(),
        "named_images": candidates.iter().filter(|c| c.name.is_some()).count(),
        "vocabulary_size": vocab.names.len(),
        "chat_calls": chat.network_calls(),
        "artifacts": written.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
    }))
}

pub fn refine_stage(s: &Session, images: &Path) -> Result<Value> {
    let vocab: CandidateVocabulary = s.run.read_json(run::VOCABULARY)?;
    let manifest = load_manifest(images)?;
    let gw = s.embedding_gateway(&s.config.refine_provider)?;
    let refined = refine(&vocab, manifest.records(), &gw, &s.config.retention)?;
    let p = s.run.write_json(run::REFINED, &refined)?;
    Ok(json!({
        "command": "refine",
        "candidates": vocab.names.len(),
        "retained": refined.len(),
        "embed_calls": gw.network_calls(),
        "artifacts": [file_name(&p)],
    }))
}

pub fn build(s: &Session, images: &Path) -> Result<Value> {
    let vocab: RefinedVocabulary = s.run.read_json(run::REFINED)?;
    let manifest = load_manifest(images)?;
    let gw = s.embedding_gateway(&s.config.classify_provider)?;
    let (clf, _groups) = build_classifier(&vocab, manifest.records(), &gw, &s.config.build_settings())?;
    let p = s.run.write_json(run::CLASSIFIER, &clf)?;
    Ok(json!({
        "command": "build",
        "classes": clf.len(),
        "classes_without_images": clf.group_sizes.iter().filter(|&&n| n == 0).count(),
        "alpha": clf.alpha,
        "embed_calls": gw.network_calls(),
        "artifacts": [file_name(&p)],
    }))
}

fn load_classifier(s: &Session, gw: &EmbeddingGateway) -> Result<CoupledClassifier> {
    let clf: CoupledClassifier = s.run.read_json(run::CLASSIFIER)?;
    clf.validate()?;
    if clf.dim() != gw.dim() {
        return Err(FindrError::ProviderContract(format!(
            "classifier has dim {}, provider {} has dim {}",
            clf.dim(),
            gw.model_id(),
            gw.dim()
        )));
    }
    if clf.provider_model_id != gw.model_id() {
        log::warn!(
            "classifier was built with {}, classifying with {}",
            clf.provider_model_id,
            gw.model_id()
        );
    }
    Ok(clf)
}

/// `mode` overrides the configured ingestion mode for this invocation.
pub fn classify(s: &Session, images: &Path, mode: Option<IngestionMode>) -> Result<Value> {
    let manifest = load_manifest(images)?;
    let gw = s.embedding_gateway(&s.config.classify_provider)?;
    let clf = load_classifier(s, &gw)?;
    let outcome = classify_batch(manifest.records(), &clf, &gw, mode.unwrap_or(s.config.ingestion))?;
    let mut written = vec![s.run.write_jsonl(run::PREDICTIONS, &outcome.predictions())?];
    if !outcome.skipped.is_empty() {
        written.push(s.run.write_jsonl(run::SKIPPED, &outcome.skipped)?);
    }
    Ok(json!({
        "command": "classify",
        "images": manifest.len(),
        "predicted": outcome.classified.len(),
        "skipped": outcome.skipped.len(),
        "embed_calls": gw.network_calls(),
        "artifacts": written.iter().map(|p| file_name(p)).collect::<Vec<_>>(),
    }))
}

pub fn evaluate_stage(s: &Session, labels: &Path) -> Result<Value> {
    let preds: Vec<Prediction> = s.run.read_jsonl(run::PREDICTIONS)?;
    let gt = Manifest::load(labels, false)?.ground_truth()?;
    let (classify_gw, judge_gw) = s.classify_and_judge()?;
    let judge = judge_gw.as_ref().unwrap_or(&classify_gw);
    let report = evaluate(&preds, &gt, judge)?;
    let p = s.run.write_json(run::REPORT, &report)?;
    Ok(json!({
        "command": "evaluate",
        "cacc": report.cacc,
        "sacc": report.sacc,
        "images": report.n_images,
        "embed_calls": calls(&[judge]),
        "artifacts": [file_name(&p)],
    }))
}

pub fn ablate_alpha(s: &Session, images: &Path, grid: &[f64]) -> Result<Value> {
    let manifest = load_manifest(images)?;
    let gt = manifest.ground_truth()?;
    let (gw, judge_gw) = s.classify_and_judge()?;
    let judge = judge_gw.as_ref().unwrap_or(&gw);
    let clf = load_classifier(s, &gw)?;
    let ids: Vec<String> = manifest.records().iter().map(|r| r.id.clone()).collect();
    let embeddings = gw.embed_images(manifest.records())?;
    let points = alpha_sweep(&clf, &ids, &embeddings, &gt, judge, grid)?;
    let p = s.run.write_bytes(run::ABLATE_ALPHA, alpha_csv(&points).as_bytes())?;
    Ok(json!({
        "command": "ablate-alpha",
        "rows": points.len(),
        "embed_calls": calls(&[&gw]) + judge_gw.as_ref().map_or(0, |j| j.network_calls()),
        "artifacts": [file_name(&p)],
    }))
}

/// The generic replacement name: the dataset's category word in name form.
pub fn generic_name(meta: &MetaRecord) -> String {
    normalize_name(&meta.meta.category_singular).unwrap_or_else(|| meta.meta.category_singular.clone())
}

pub fn ablate_robustness(s: &Session, disc_images: &Path, test_images: &Path) -> Result<Value> {
    let vocab: RefinedVocabulary = s.run.read_json(run::REFINED)?;
    let meta: MetaRecord = s.run.read_json(run::META)?;
    let disc = load_manifest(disc_images)?;
    let test = load_manifest(test_images)?;
    let gt = test.ground_truth()?;
    let (gw, judge_gw) = s.classify_and_judge()?;
    let judge = judge_gw.as_ref().unwrap_or(&gw);
    let clean = load_classifier(s, &gw)?;
    let ids: Vec<String> = test.records().iter().map(|r| r.id.clone()).collect();
    let embeddings = gw.embed_images(test.records())?;
    let settings = s.config.build_settings();
    let generic = generic_name(&meta);
    let setup = RobustnessSetup {
        vocab: &vocab,
        clean: &clean,
        disc: disc.records(),
        test_ids: &ids,
        test_embeddings: &embeddings,
        gt: &gt,
        gateway: &gw,
        judge,
        settings: &settings,
        generic_name: &generic,
        seed: s.config.seeds.corruption_seed,
        flow: s.config.robustness.flow,
    };
    let rows = robustness_sweep(&setup, &s.config.robustness.modes, &s.config.robustness.fractions)?;
    let p = s.run.write_bytes(run::ABLATE_ROBUSTNESS, robustness_csv(&rows).as_bytes())?;
    Ok(json!({
        "command": "ablate-robustness",
        "rows": rows.len(),
        "flow": s.config.robustness.flow,
        "embed_calls": calls(&[&gw]) + judge_gw.as_ref().map_or(0, |j| j.network_calls()),
        "artifacts": [file_name(&p)],
    }))
}

