//! Rule-based class-name normalization and generic-name filtering.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::MetaInfo;
use crate::error::{FindrError, Result};

pub const DEFAULT_BLOCKLIST: [&str; 9] = [
    "Object", "Animal", "Plant", "Vehicle", "Unknown", "Item", "Thing", "Image", "Photo",
];

/// Plurals that are their own singular.
const INVARIANT_PLURALS: [&str; 7] = ["species", "series", "swiss", "news", "means", "chassis", "corps"];

fn allowed(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, ' ' | '-' | '\'' | '.')
}

/// Short all-caps tokens (at most 4 chars, at least one letter) are abbreviations.
fn is_abbreviation(word: &str) -> bool {
    word.len() <= 4
        && word.chars().any(|c| c.is_ascii_alphabetic())
        && word.chars().all(|c| !c.is_ascii_lowercase())
}

fn title_case(word: &str) -> String {
    if is_abbreviation(word) {
        return word.to_string();
    }
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_ascii_uppercase().to_string() + &chars.as_str().to_ascii_lowercase(),
        None => String::new(),
    }
}

fn singularize(word: &str) -> String {
    if is_abbreviation(word) || !word.chars().all(|c| c.is_ascii_alphabetic()) {
        return word.to_string();
    }
    let lower = word.to_ascii_lowercase();
    if INVARIANT_PLURALS.contains(&lower.as_str())
        || lower.ends_with("ss")
        || lower.ends_with("us")
        || lower.ends_with("is")
    {
        return word.to_string();
    }
    let n = word.len();
    if lower.ends_with("ies") && n >= 5 {
        return format!("{}y", &word[..n - 3]);
    }
    if lower.ends_with("sses") || lower.ends_with("xes") || lower.ends_with("ches") || lower.ends_with("shes") {
        return word[..n - 2].to_string();
    }
    if lower.ends_with('s') && n - 1 >= 3 {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Canonical form of a class name, or `None` when nothing usable remains.
///
/// Disallowed characters are stripped (only ASCII letters, digits, space,
/// hyphen, apostrophe and period survive), whitespace runs collapse, words
/// are title-cased except short all-caps abbreviations, and the trailing
/// word is singularized.
pub fn normalize_name(name: &str) -> Option<String> {
    let cleaned: String = name
        .chars()
        .filter_map(|c| {
            if c.is_whitespace() {
                Some(' ')
            } else if allowed(c) {
                Some(c)
            } else {
                None
            }
        })
        .collect();
    let mut words: Vec<String> = cleaned.split_whitespace().map(title_case).collect();
    let last = words.pop()?;
    words.push(singularize(&last));
    let out = words.join(" ");
    if out.chars().any(|c| c.is_ascii_alphanumeric()) {
        Some(out)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub image_id: String,
    pub name: String,
}

/// Discovered names after normalization and generic filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateVocabulary {
    pub entries: Vec<CandidateEntry>,
    pub names: Vec<String>,
}

/// Drops names matching the meta category/unit words or the blocklist
/// (case-insensitive) and deduplicates in first-seen order.
pub fn filter_generic(
    entries: Vec<CandidateEntry>,
    meta: &MetaInfo,
    blocklist: &[String],
) -> Result<CandidateVocabulary> {
    let generic: HashSet<String> = [
        &meta.category_singular,
        &meta.category_plural,
        &meta.unit_singular,
        &meta.unit_plural,
    ]
    .into_iter()
    .chain(blocklist.iter())
    .flat_map(|w| {
        let lower = w.to_lowercase();
        let normalized = normalize_name(w).map(|n| n.to_lowercase());
        std::iter::once(lower).chain(normalized)
    })
    .collect();

    let kept: Vec<CandidateEntry> = entries
        .into_iter()
        .filter(|e| !generic.contains(&e.name.to_lowercase()))
        .collect();
    let mut seen = HashSet::new();
    let names: Vec<String> = kept
        .iter()
        .filter(|e| seen.insert(e.name.clone()))
        .map(|e| e.name.clone())
        .collect();
    if names.is_empty() {
        return Err(FindrError::EmptyVocabulary);
    }
    Ok(CandidateVocabulary { entries: kept, names })
}

pub fn default_blocklist() -> Vec<String> {
    DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect()
}
