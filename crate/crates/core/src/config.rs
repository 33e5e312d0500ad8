//! The run configuration document.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::discovery::{default_blocklist, ChatSettings, DiscoverySettings, PromptOptions, DEFAULT_CONTEXT_SIZE, DEFAULT_PARSE_ATTEMPTS};
use crate::embedding::{AugmentationPolicy, SyntheticPlan, DEFAULT_INPUT_SIZE};
use crate::error::{FindrError, Result};
use crate::evaluation::{CorruptionMode, RobustnessFlow, DEFAULT_ROBUSTNESS_FRACTIONS};
use crate::classifier::{BuildSettings, DEFAULT_ALPHA};
use crate::inference::IngestionMode;
use crate::limits::RetryPolicy;
use crate::refinement::RetentionRule;

pub const SYNTHETIC: &str = "synthetic";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    pub model_id: String,
    /// Merged into every request body; not part of the cache key.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub options: Map<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_image_side: Option<u32>,
    /// Recorded session to replay instead of calling an endpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_session: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// An `http(s)://` base URL or the literal `"synthetic"`.
    pub base_url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<SyntheticPlan>,
    /// Square input side for remote providers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_size: Option<u32>,
}

impl ProviderConfig {
    pub fn synthetic(plan: SyntheticPlan) -> Self {
        ProviderConfig {
            base_url: SYNTHETIC.into(),
            plan: Some(plan),
            input_size: None,
        }
    }

    pub fn is_synthetic(&self) -> bool {
        self.base_url == SYNTHETIC
    }

    pub fn input_size(&self) -> u32 {
        self.input_size.unwrap_or(DEFAULT_INPUT_SIZE)
    }

    fn validate(&self, slot: &str) -> Result<()> {
        if self.is_synthetic() {
            if self.plan.is_none() {
                return Err(FindrError::Config(format!("{slot}: synthetic provider needs a plan")));
            }
        } else if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(FindrError::Config(format!(
                "{slot}: base_url must be an http(s) URL or \"synthetic\", got {:?}",
                self.base_url
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub count: usize,
    pub crop_scale_min: f64,
    pub flip_probability: f64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        let p = AugmentationPolicy::default();
        AugmentationConfig {
            count: p.count,
            crop_scale_min: p.crop_scale_min,
            flip_probability: p.flip_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub context_seed: u64,
    pub augment_seed: u64,
    pub corruption_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Concurrency {
    pub max_in_flight: usize,
    pub rate_per_sec: Option<f64>,
}

impl Default for Concurrency {
    fn default() -> Self {
        Concurrency {
            max_in_flight: 4,
            rate_per_sec: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobustnessConfig {
    pub flow: RobustnessFlow,
    pub modes: Vec<CorruptionMode>,
    pub fractions: Vec<f64>,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            flow: RobustnessFlow::default(),
            modes: CorruptionMode::ALL.to_vec(),
            fractions: DEFAULT_ROBUSTNESS_FRACTIONS.to_vec(),
        }
    }
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_true() -> bool {
    true
}

fn default_context_size() -> usize {
    DEFAULT_CONTEXT_SIZE
}

fn default_parse_attempts() -> u32 {
    DEFAULT_PARSE_ATTEMPTS
}

fn default_blocklist_field() -> Vec<String> {
    default_blocklist()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub chat: ChatConfig,
    pub refine_provider: ProviderConfig,
    pub classify_provider: ProviderConfig,
    /// Defaults to `classify_provider`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_provider: Option<ProviderConfig>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub augmentation: AugmentationConfig,
    #[serde(default = "default_true")]
    pub renormalize_visual: bool,
    #[serde(default)]
    pub retention: RetentionRule,
    #[serde(default)]
    pub prompt: PromptOptions,
    #[serde(default = "default_context_size")]
    pub context_size: usize,
    #[serde(default = "default_parse_attempts")]
    pub parse_attempts: u32,
    #[serde(default = "default_blocklist_field")]
    pub blocklist: Vec<String>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub concurrency: Concurrency,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub ingestion: IngestionMode,
    #[serde(default)]
    pub robustness: RobustnessConfig,
}

impl RunConfig {
    /// A configuration with every optional field at its default.
    pub fn new(chat: ChatConfig, refine_provider: ProviderConfig, classify_provider: ProviderConfig) -> Self {
        RunConfig {
            chat,
            refine_provider,
            classify_provider,
            judge_provider: None,
            alpha: DEFAULT_ALPHA,
            augmentation: AugmentationConfig::default(),
            renormalize_visual: true,
            retention: RetentionRule::default(),
            prompt: PromptOptions::default(),
            context_size: DEFAULT_CONTEXT_SIZE,
            parse_attempts: DEFAULT_PARSE_ATTEMPTS,
            blocklist: default_blocklist(),
            seeds: Seeds::default(),
            concurrency: Concurrency::default(),
            retry: RetryPolicy::default(),
            ingestion: IngestionMode::default(),
            robustness: RobustnessConfig::default(),
        }
    }

    /// Reads and validates a config file. A relative `mock_session` path is
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FindrError::io(path, e))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| FindrError::Config(format!("{}: {e}", path.display())))?;
        if let Some(session) = &cfg.chat.mock_session {
            if session.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                cfg.chat.mock_session = Some(base.join(session));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(FindrError::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        self.augmentation_policy().validate()?;
        self.retention.validate()?;
        self.refine_provider.validate("refine_provider")?;
        self.classify_provider.validate("classify_provider")?;
        self.judge().validate("judge_provider")?;
        if self.context_size == 0 {
            return Err(FindrError::Config("context_size must be at least 1".into()));
        }
        if self.concurrency.max_in_flight == 0 {
            return Err(FindrError::Config("concurrency.max_in_flight must be at least 1".into()));
        }
        if self.concurrency.rate_per_sec.is_some_and(|r| !(r > 0.0)) {
            return Err(FindrError::Config("concurrency.rate_per_sec must be positive".into()));
        }
        if let Some(bad) = self.robustness.fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(FindrError::Config(format!("robustness fraction {bad} is outside [0, 1]")));
        }
        if self.chat.base_url.is_none() && self.chat.mock_session.is_none() {
            return Err(FindrError::Config("chat needs a base_url or a mock_session".into()));
        }
        Ok(())
    }

    pub fn judge(&self) -> &ProviderConfig {
        self.judge_provider.as_ref().unwrap_or(&self.classify_provider)
    }

    pub fn augmentation_policy(&self) -> AugmentationPolicy {
        AugmentationPolicy {
            count: self.augmentation.count,
            crop_scale_min: self.augmentation.crop_scale_min,
            flip_probability: self.augmentation.flip_probability,
            seed: self.seeds.augment_seed,
        }
    }

    pub fn build_settings(&self) -> BuildSettings {
        BuildSettings {
            alpha: self.alpha,
            policy: self.augmentation_policy(),
            renormalize: self.renormalize_visual,
        }
    }

    pub fn discovery_settings(&self) -> DiscoverySettings {
        DiscoverySettings {
            chat: ChatSettings {
                model_id: self.chat.model_id.clone(),
                temperature: self.chat.temperature,
                max_image_side: self.chat.max_image_side,
            },
            prompt: self.prompt.clone(),
            context_size: self.context_size,
            context_seed: self.seeds.context_seed,
            parse_attempts: self.parse_attempts,
            blocklist: self.blocklist.clone(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.retry.timeout_ms)
    }
}
