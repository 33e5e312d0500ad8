//! A self-contained synthetic corpus: images, manifests, a recorded chat
//! session and a configuration that runs the whole pipeline offline.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chat::{cache_key, MockSession};
use crate::config::{ChatConfig, ProviderConfig, RunConfig};
use crate::discovery::{build_main_prompt, build_meta_prompt, build_service_prompt, select_context, MetaInfo};
use crate::embedding::{AnchorSpec, SyntheticPlan};
use crate::error::{FindrError, Result};
use crate::manifest::{ImageRecord, Manifest, ManifestRow};
use crate::store::sha256;

pub const FLOWER_NAMES: [&str; 20] = [
    "Sunflower", "Daisy", "Rose", "Tulip", "Orchid", "Lily", "Iris", "Lotus", "Poppy", "Magnolia",
    "Lavender", "Peony", "Dahlia", "Marigold", "Camellia", "Carnation", "Hibiscus", "Jasmine", "Gardenia", "Azalea",
];

#[derive(Debug, Clone)]
pub struct DemoSpec {
    pub classes: Vec<String>,
    pub disc_per_class: usize,
    pub test_per_class: usize,
    pub dim: usize,
    pub noise: f64,
    pub image_side: u32,
    pub meta: MetaInfo,
    pub chat_model: String,
    pub context_seed: u64,
    /// What the recorded model answers for a class, when not its own name.
    pub answers: BTreeMap<String, String>,
}

impl DemoSpec {
    /// `n` flower classes (numbered beyond the built-in names), 3 discovery
    /// and 10 test images each, noise 0.05.
    pub fn flowers(n: usize) -> Self {
        let classes = (0..n)
            .map(|i| FLOWER_NAMES.get(i).map_or_else(|| format!("Flower {i}"), |s| s.to_string()))
            .collect();
        DemoSpec {
            classes,
            disc_per_class: 3,
            test_per_class: 10,
            dim: 64,
            noise: 0.05,
            image_side: 24,
            meta: MetaInfo {
                category_singular: "flower".into(),
                category_plural: "flowers".into(),
                unit_singular: "species".into(),
                unit_plural: "species".into(),
                expert_name: "botanist".into(),
            },
            chat_model: "recorded-vlm".into(),
            context_seed: 0,
            answers: BTreeMap::new(),
        }
    }

    pub fn plan(&self) -> SyntheticPlan {
        let mut plan = SyntheticPlan::new(self.dim.max(self.classes.len())).with_noise(self.noise);
        for (i, c) in self.classes.iter().enumerate() {
            plan = plan.with_anchor(c.clone(), AnchorSpec::Axis { axis: i });
        }
        plan
    }

    pub fn config(&self, session: PathBuf) -> RunConfig {
        let chat = ChatConfig {
            base_url: None,
            model_id: self.chat_model.clone(),
            options: Default::default(),
            temperature: None,
            max_image_side: None,
            mock_session: Some(session),
        };
        let provider = ProviderConfig::synthetic(self.plan());
        let mut cfg = RunConfig::new(chat, provider.clone(), provider);
        cfg.seeds.context_seed = self.context_seed;
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct DemoCorpus {
    pub root: PathBuf,
    pub disc_manifest: PathBuf,
    pub test_manifest: PathBuf,
    pub config_path: PathBuf,
    pub session_path: PathBuf,
    pub config: RunConfig,
}

fn write_image(path: &Path, id: &str, side: u32) -> Result<()> {
    let mut rng = ChaCha8Rng::from_seed(sha256(id.as_bytes()));
    let img = image::RgbImage::from_fn(side, side, |_, _| image::Rgb([rng.random(), rng.random(), rng.random()]));
    img.save(path).map_err(|e| FindrError::Ingestion {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn split_rows(spec: &DemoSpec, dir: &Path, split: &str, per_class: usize) -> Result<Vec<ManifestRow>> {
    let mut rows = Vec::new();
    for (c, class) in spec.classes.iter().enumerate() {
        for i in 0..per_class {
            let id = format!("{split}-{c:02}-{i:02}");
            let rel = PathBuf::from("images").join(format!("{id}.png"));
            write_image(&dir.join(&rel), &id, spec.image_side)?;
            rows.push(ManifestRow {
                id,
                path: rel,
                label: Some(class.clone()),
                synthetic_class: Some(class.clone()),
            });
        }
    }
    Ok(rows)
}

/// Writes the corpus under `dir` and returns where everything went.
pub fn write_demo(spec: &DemoSpec, dir: &Path) -> Result<DemoCorpus> {
    if spec.classes.is_empty() {
        return Err(FindrError::Config("demo needs at least one class".into()));
    }
    fs::create_dir_all(dir.join("images")).map_err(|e| FindrError::io(dir, e))?;
    let disc_rows = split_rows(spec, dir, "disc", spec.disc_per_class)?;
    let test_rows = split_rows(spec, dir, "test", spec.test_per_class)?;
    let disc_manifest = dir.join("disc.jsonl");
    let test_manifest = dir.join("test.jsonl");
    Manifest::write(&disc_rows, &disc_manifest)?;
    Manifest::write(&test_rows, &test_manifest)?;

    let session_path = dir.join("session.json");
    let config_path = dir.join("config.json");
    let config = spec.config(PathBuf::from("session.json"));
    let settings = config.discovery_settings();

    let disc = Manifest::load(&disc_manifest, true)?;
    let mut responses = BTreeMap::new();
    let context: Vec<ImageRecord> = select_context(disc.records(), settings.context_size, settings.context_seed)?;
    let meta_req = build_meta_prompt(&context, settings.context_size, &settings.chat)?;
    responses.insert(cache_key(&meta_req), serde_json::to_string_pretty(&spec.meta)?);
    for (record, row) in disc.records().iter().zip(&disc_rows) {
        let class = row.label.clone().unwrap_or_default();
        let answer = spec.answers.get(&class).cloned().unwrap_or(class);
        let raw = format!("The image shows a {answer}.");
        let main = build_main_prompt(record, &spec.meta, &settings.prompt, &settings.chat)?;
        responses.insert(cache_key(&main), raw.clone());
        let service = build_service_prompt(&raw, &spec.meta, &settings.chat)?;
        responses.insert(cache_key(&service), serde_json::json!({ "1": answer }).to_string());
    }
    let session = MockSession { responses };
    fs::write(&session_path, serde_json::to_vec_pretty(&session)?).map_err(|e| FindrError::io(&session_path, e))?;
    fs::write(&config_path, serde_json::to_vec_pretty(&config)?).map_err(|e| FindrError::io(&config_path, e))?;

    Ok(DemoCorpus {
        root: dir.to_path_buf(),
        disc_manifest,
        test_manifest,
        config: RunConfig::load(&config_path)?,
        config_path,
        session_path,
    })
}
