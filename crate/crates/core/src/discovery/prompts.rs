//! The meta, main and service prompts, and parsers for their answers.

use std::io::Cursor;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::MetaInfo;
use crate::chat::{ChatRequest, MediaType, Message, Part};
use crate::error::{FindrError, Result};
use crate::manifest::ImageRecord;

pub const META_PROMPT: &str = "\
You are given a set of images representing a specific object category. \
Analyze these images and provide information about the main object in the images:
1. The category describing these specific objects (sungular and plural forms).
2. The word typically used to describe a unit (or a sub-category) of this category, \
to distinct such specific similar objects (singular and plural forms).
3. The word typically used to describe a recognised expert or professional who studied \
this category and is able to easily distinct its units.

Please provide this information in this specific format as a JSON object with the following fields:
{
    \"category_singular\": \"<category_singular>\",
    \"category_plural\": \"<category_plural>\",
    \"unit_singular\": \"<unit_singular>\",
    \"unit_plural\": \"<unit_plural>\",
    \"expert_name\": \"<expert_name>\"
}

Do not provide any additional word or information.";

pub const BASE_QUESTION: &str = "What is the main object in the image?";

/// Model id, sampling temperature and upload size for every chat request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSettings {
    pub model_id: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    /// Longest image side sent to the model; larger images are downscaled.
    #[serde(default)]
    pub max_image_side: Option<u32>,
}

impl ChatSettings {
    pub fn new(model_id: impl Into<String>) -> Self {
        ChatSettings {
            model_id: model_id.into(),
            temperature: None,
            max_image_side: None,
        }
    }
}

/// Which parts of the main prompt are switched on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptOptions {
    pub use_meta: bool,
    pub use_expert: bool,
    pub dataset_hint: Option<String>,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            use_meta: true,
            use_expert: true,
            dataset_hint: None,
        }
    }
}

fn image_part(record: &ImageRecord, max_side: Option<u32>) -> Result<Part> {
    let (loaded, img) = record.decode()?;
    let needs_resize = max_side.is_some_and(|m| img.width().max(img.height()) > m);
    if !needs_resize {
        return Ok(Part::Image {
            data: loaded.bytes,
            media_type: loaded.media_type,
        });
    }
    let side = max_side.unwrap_or(u32::MAX);
    let small = img.resize(side, side, image::imageops::FilterType::Triangle);
    let mut buf = Cursor::new(Vec::new());
    small
        .write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| FindrError::Ingestion {
            path: record.path.clone(),
            reason: e.to_string(),
        })?;
    Ok(Part::Image {
        data: buf.into_inner(),
        media_type: MediaType::Png,
    })
}

fn request(settings: &ChatSettings, parts: Vec<Part>) -> Result<ChatRequest> {
    ChatRequest::new(settings.model_id.clone(), vec![Message::user(parts)?], settings.temperature)
}

/// One user message: the context images followed by the meta prompt.
pub fn build_meta_prompt(context: &[ImageRecord], context_size: usize, settings: &ChatSettings) -> Result<ChatRequest> {
    if context.len() != context_size {
        return Err(FindrError::Contract(format!(
            "meta prompt needs exactly {context_size} context images, got {}",
            context.len()
        )));
    }
    let mut parts = context
        .iter()
        .map(|r| image_part(r, settings.max_image_side))
        .collect::<Result<Vec<_>>>()?;
    parts.push(Part::text(META_PROMPT));
    request(settings, parts)
}

/// The main question text, without the image.
pub fn main_prompt_text(meta: &MetaInfo, options: &PromptOptions) -> String {
    let mut sentences = Vec::new();
    if options.use_expert {
        sentences.push(format!(
            "You are a professional {} and an expert in {} classification.",
            meta.expert_name, meta.category_singular
        ));
    }
    if options.use_meta {
        sentences.push(format!(
            "What is the exact {} {} in the provided image?",
            meta.category_singular, meta.unit_singular
        ));
    } else {
        sentences.push(BASE_QUESTION.to_string());
    }
    if let Some(hint) = options.dataset_hint.as_deref().filter(|h| !h.trim().is_empty()) {
        sentences.push(hint.to_string());
    }
    sentences.join("\n\n")
}

pub fn build_main_prompt(
    image: &ImageRecord,
    meta: &MetaInfo,
    options: &PromptOptions,
    settings: &ChatSettings,
) -> Result<ChatRequest> {
    let img = image_part(image, settings.max_image_side)?;
    request(settings, vec![img, Part::text(main_prompt_text(meta, options))])
}

pub fn service_prompt_text(raw_text: &str, meta: &MetaInfo) -> String {
    let cat = &meta.category_singular;
    let one = format!("{cat} {}", meta.unit_singular);
    let many = format!("{cat} {}", meta.unit_plural);
    format!(
        "Convert the below text containing suggested {many} to a Python dictionary object, \
where a key is an index and the value is a suggestion of the specific {one}.\n\
Only use the final {one} prediction(s), do not use any intermediate suggestions.\n\
Remove duplicated suggestions and unsepcific {many}.\n\
Also keep the numbered order of the suggestions with 1 as a starting index.\n\
Make sure to only use English letters.\n\
Add a space between seprate words if not done in the suggested {many} \
and capitalize abbreviations and first letters of normal words.\n\n{raw_text}"
    )
}

pub fn build_service_prompt(raw_text: &str, meta: &MetaInfo, settings: &ChatSettings) -> Result<ChatRequest> {
    if raw_text.trim().is_empty() {
        return Err(FindrError::Contract("raw prediction text is empty".into()));
    }
    request(settings, vec![Part::text(service_prompt_text(raw_text, meta))])
}

/// Returns every balanced `{...}` span in `text`, in order of their opening brace.
fn json_object_spans(text: &str) -> impl Iterator<Item = &str> {
    let bytes = text.as_bytes();
    (0..bytes.len()).filter(move |&i| bytes[i] == b'{').filter_map(move |start| {
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (off, &b) in bytes[start..].iter().enumerate() {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(&text[start..=start + off]);
                    }
                }
                _ => {}
            }
        }
        None
    })
}

/// The first JSON object embedded in free text (prose and code fences are skipped).
pub fn extract_json_object(text: &str) -> Option<serde_json::Map<String, Value>> {
    json_object_spans(text).find_map(|span| match serde_json::from_str::<Value>(span) {
        Ok(Value::Object(map)) => Some(map),
        _ => None,
    })
}

fn clean_meta_field(map: &serde_json::Map<String, Value>, field: &str) -> Result<String> {
    let raw = map
        .get(field)
        .ok_or_else(|| FindrError::Parse(format!("meta answer lacks field {field:?}")))?
        .as_str()
        .ok_or_else(|| FindrError::Parse(format!("meta field {field:?} is not a string")))?;
    let value = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    if value.is_empty() {
        return Err(FindrError::Parse(format!("meta field {field:?} is empty")));
    }
    if !value.chars().all(|c| c.is_ascii_alphabetic() || c == ' ' || c == '-') {
        return Err(FindrError::Parse(format!("meta field {field:?} has invalid characters: {raw:?}")));
    }
    Ok(value)
}

pub fn parse_meta(text: &str) -> Result<MetaInfo> {
    let map = extract_json_object(text).ok_or_else(|| FindrError::Parse("no JSON object in meta answer".into()))?;
    Ok(MetaInfo {
        category_singular: clean_meta_field(&map, "category_singular")?,
        category_plural: clean_meta_field(&map, "category_plural")?,
        unit_singular: clean_meta_field(&map, "unit_singular")?,
        unit_plural: clean_meta_field(&map, "unit_plural")?,
        expert_name: clean_meta_field(&map, "expert_name")?,
    })
}

/// Parses the service answer into `(index, name)` pairs in numeric index order.
pub fn parse_service(text: &str) -> Result<Vec<(u32, String)>> {
    let map = extract_json_object(text).ok_or_else(|| FindrError::Parse("no JSON object in service answer".into()))?;
    let mut items: Vec<(u32, String)> = map
        .iter()
        .filter_map(|(k, v)| {
            let idx = k.trim().parse::<u32>().ok()?;
            let name = v.as_str()?.trim();
            (!name.is_empty()).then(|| (idx, name.to_string()))
        })
        .collect();
    if items.is_empty() && !map.is_empty() {
        return Err(FindrError::Parse("service answer has no indexed string entries".into()));
    }
    items.sort_by_key(|(i, _)| *i);
    Ok(items)
}

/// The single suggestion kept per image: index 1, else the lowest index present.
pub fn primary_suggestion(items: &[(u32, String)]) -> Option<&str> {
    items
        .iter()
        .find(|(i, _)| *i == 1)
        .or_else(|| items.first())
        .map(|(_, n)| n.as_str())
}
