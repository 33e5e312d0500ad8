use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FindrError, Result};
use crate::refinement::RefinedVocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMode {
    /// The name becomes the dataset's broad category word.
    Generic,
    /// The name becomes another class's name.
    Mispredict,
    /// The name becomes a random 8-letter string.
    Noise,
}

impl CorruptionMode {
    pub const ALL: [CorruptionMode; 3] = [CorruptionMode::Generic, CorruptionMode::Mispredict, CorruptionMode::Noise];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionMode::Generic => "generic",
            CorruptionMode::Mispredict => "mispredict",
            CorruptionMode::Noise => "noise",
        }
    }
}

/// Replaces `round(fraction * n)` seeded positions of the vocabulary.
/// Length, order and scores are kept.
pub fn corrupt_vocabulary(
    vocab: &RefinedVocabulary,
    mode: CorruptionMode,
    fraction: f64,
    seed: u64,
    generic_name: &str,
) -> Result<RefinedVocabulary> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(FindrError::Config(format!("corruption fraction {fraction} is outside [0, 1]")));
    }
    if vocab.is_empty() {
        return Err(FindrError::EmptyInput("vocabulary to corrupt"));
    }
    let n = vocab.len();
    let k = (fraction * n as f64).round() as usize;
    let mut out = vocab.clone();
    if k == 0 {
        return Ok(out);
    }
    if mode == CorruptionMode::Mispredict && n < 2 {
        return Err(FindrError::Config("mispredict corruption needs at least two names".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = rand::seq::index::sample(&mut rng, n, k).into_vec();
    positions.sort_unstable();
    for pos in positions {
        out.names[pos] = match mode {
            CorruptionMode::Generic => generic_name.to_string(),
            CorruptionMode::Mispredict => {
                let mut other = rng.random_range(0..n - 1);
                if other >= pos {
                    other += 1;
                }
                vocab.names[other].clone()
            }
            CorruptionMode::Noise => (0..8).map(|_| rng.random_range(b'a'..=b'z') as char).collect(),
        };
    }
    Ok(out)
}
