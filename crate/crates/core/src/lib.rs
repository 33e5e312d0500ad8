pub mod chat;
pub mod classifier;
pub mod config;
pub mod demo;
pub mod discovery;
pub mod embedding;
pub mod error;
pub mod evaluation;
mod http_util;
pub mod inference;
pub mod limits;
pub mod manifest;
pub mod pipeline;
pub mod refinement;
pub mod run;
pub mod store;
pub mod vector;

pub use error::{FindrError, Result};
pub use vector::{cosine, l2_normalize, mean, Embedding};
