//! JSONL image manifests.
//!
//! Each line is `{"id", "path", "label"?, "synthetic_class"?}`. Relative
//! paths resolve against the manifest's directory. Ground-truth labels are
//! kept apart from [`ImageRecord`] and only reachable through
//! [`Manifest::ground_truth`], so the discovery, refinement, build and
//! classify stages never see them.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chat::MediaType;
use crate::error::{FindrError, Result};
use crate::store::sha256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_class: Option<String>,
}

/// An identified image, without its ground-truth label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub synthetic_class: Option<String>,
}

/// Raw file bytes plus what ingestion learned about them.
#[derive(Debug, Clone)]
pub struct LoadedImage {
    pub bytes: Vec<u8>,
    pub media_type: MediaType,
    pub digest: [u8; 32],
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        ImageRecord {
            id: id.into(),
            path: path.into(),
            synthetic_class: None,
        }
    }

    fn ingestion(&self, reason: impl Into<String>) -> FindrError {
        FindrError::Ingestion {
            path: self.path.clone(),
            reason: reason.into(),
        }
    }

    /// Reads the file and checks that it is a decodable JPEG or PNG.
    pub fn load(&self) -> Result<LoadedImage> {
        let bytes = fs::read(&self.path).map_err(|e| self.ingestion(e.to_string()))?;
        let media_type = match image::guess_format(&bytes) {
            Ok(image::ImageFormat::Png) => MediaType::Png,
            Ok(image::ImageFormat::Jpeg) => MediaType::Jpeg,
            Ok(other) => return Err(self.ingestion(format!("unsupported format {other:?}"))),
            Err(e) => return Err(self.ingestion(e.to_string())),
        };
        let digest = sha256(&bytes);
        Ok(LoadedImage {
            bytes,
            media_type,
            digest,
        })
    }

    pub fn decode(&self) -> Result<(LoadedImage, image::DynamicImage)> {
        let loaded = self.load()?;
        let format = match loaded.media_type {
            MediaType::Png => image::ImageFormat::Png,
            MediaType::Jpeg => image::ImageFormat::Jpeg,
        };
        let mut reader = image::ImageReader::new(Cursor::new(&loaded.bytes));
        reader.set_format(format);
        let img = reader.decode().map_err(|e| self.ingestion(e.to_string()))?;
        Ok((loaded, img))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    records: Vec<ImageRecord>,
    labels: Vec<Option<String>>,
}

impl Manifest {
    pub fn from_rows(rows: Vec<ManifestRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut records = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for row in rows {
            if row.id.is_empty() {
                return Err(FindrError::Validation("manifest row with empty id".into()));
            }
            if !seen.insert(row.id.clone()) {
                return Err(FindrError::Validation(format!("duplicate image id {:?}", row.id)));
            }
            records.push(ImageRecord {
                id: row.id,
                path: row.path,
                synthetic_class: row.synthetic_class,
            });
            labels.push(row.label);
        }
        Ok(Manifest { records, labels })
    }

    /// Loads a JSONL manifest. In strict mode every path must exist.
    pub fn load(path: &Path, strict: bool) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FindrError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut row: ManifestRow = serde_json::from_str(line).map_err(|e| {
                FindrError::Validation(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            if row.path.is_relative() {
                row.path = base.join(&row.path);
            }
            if strict && !row.path.exists() {
                return Err(FindrError::Validation(format!(
                    "{}:{}: image {} does not exist",
                    path.display(),
                    lineno + 1,
                    row.path.display()
                )));
            }
            rows.push(row);
        }
        Manifest::from_rows(rows)
    }

    pub fn write(rows: &[ManifestRow], path: &Path) -> Result<()> {
        let mut out = String::new();
        for row in rows {
            out.push_str(&serde_json::to_string(row)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| FindrError::io(path, e))
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Ground-truth labels by image id. Fails listing every row without a label.
    pub fn ground_truth(&self) -> Result<BTreeMap<String, String>> {
        let missing: Vec<&str> = self
            .records
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| l.is_none())
            .map(|(r, _)| r.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(FindrError::Evaluation(format!(
                "missing ground-truth label for: {}",
                missing.join(", ")
            )));
        }
        Ok(self
            .records
            .iter()
            .zip(&self.labels)
            .map(|(r, l)| (r.id.clone(), l.clone().unwrap_or_default()))
            .collect())
    }
}
