//! Embedding vectors and the numeric primitives shared by every stage.
//!
//! Components are stored as `f32`; all reductions (dot products, norms,
//! sums) accumulate in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{FindrError, Result};

/// A finite, non-empty vector of `f32` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct Embedding(Vec<f32>);

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(FindrError::Contract("embedding must have dim >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FindrError::Contract(format!(
                "embedding component {i} is not finite"
            )));
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> Result<f64> {
        check_dims(self, other)?;
        Ok(dot64(&self.0, &other.0))
    }

    /// `wa * a + wb * b`, computed in `f64` per component.
    pub fn weighted_sum(a: &Embedding, wa: f64, b: &Embedding, wb: f64) -> Result<Embedding> {
        check_dims(a, b)?;
        let values = a
            .0
            .iter()
            .zip(&b.0)
            .map(|(&x, &y)| (wa * x as f64 + wb * y as f64) as f32)
            .collect();
        Embedding::new(values)
    }

    pub fn scaled(&self, s: f32) -> Result<Embedding> {
        Embedding::new(self.0.iter().map(|v| v * s).collect())
    }
}

impl TryFrom<Vec<f32>> for Embedding {
    type Error = FindrError;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Embedding::new(values)
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.0
    }
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FindrError::Contract(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

fn dot64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    let na = dot64(&a.0, &a.0);
    let nb = dot64(&b.0, &b.0);
    if na == 0.0 || nb == 0.0 {
        return Err(FindrError::DegenerateVector);
    }
    // sqrt(na * nb) rather than sqrt(na) * sqrt(nb): identical operands give exactly 1.0.
    let c = dot64(&a.0, &b.0) / (na * nb).sqrt();
    Ok(c.clamp(-1.0, 1.0))
}

pub fn l2_normalize(a: &Embedding) -> Result<Embedding> {
    let n = a.norm();
    if n == 0.0 {
        return Err(FindrError::DegenerateVector);
    }
    Embedding::new(a.0.iter().map(|&v| (v as f64 / n) as f32).collect())
}

/// Componentwise arithmetic mean.
pub fn mean(vs: &[Embedding]) -> Result<Embedding> {
    let first = vs.first().ok_or(FindrError::EmptyInput("mean of no vectors"))?;
    let mut acc = vec![0.0f64; first.dim()];
    for v in vs {
        check_dims(first, v)?;
        for (s, &x) in acc.iter_mut().zip(&v.0) {
            *s += x as f64;
        }
    }
    let n = vs.len() as f64;
    Embedding::new(acc.into_iter().map(|s| (s / n) as f32).collect())
}
