#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use base64::Engine;
use findr::embedding::hashed_unit_vector;
use serde_json::{json, Value};

/// Writes a small PNG whose pixels depend on `seed`, so distinct seeds give distinct files.
pub fn write_png(dir: &Path, name: &str, seed: u32, w: u32, h: u32) -> PathBuf {
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        let v = seed.wrapping_mul(2654435761).wrapping_add(x * 31 + y * 17);
        image::Rgb([(v & 0xff) as u8, ((v >> 8) & 0xff) as u8, ((v >> 16) & 0xff) as u8])
    });
    let path = dir.join(name);
    img.save(&path).unwrap();
    path
}

pub struct MockServer {
    pub base: String,
    pub hits: Arc<AtomicU64>,
}

/// Serves requests on a background thread. The handler gets (method, url, body)
/// and returns (status, JSON body).
pub fn serve(handler: impl Fn(&str, &str, &str) -> (u16, Value) + Send + 'static) -> MockServer {
    let server = tiny_http::Server::http("127.0.0.1:0").unwrap();
    let port = server.server_addr().to_ip().unwrap().port();
    let hits = Arc::new(AtomicU64::new(0));
    let counter = hits.clone();
    thread::spawn(move || {
        for mut req in server.incoming_requests() {
            counter.fetch_add(1, Ordering::SeqCst);
            let mut body = String::new();
            let _ = req.as_reader().read_to_string(&mut body);
            let (status, value) = handler(&req.method().to_string(), req.url(), &body);
            let resp = tiny_http::Response::from_string(value.to_string())
                .with_status_code(status)
                .with_header("Content-Type: application/json".parse::<tiny_http::Header>().unwrap());
            let _ = req.respond(resp);
        }
    });
    MockServer {
        base: format!("http://127.0.0.1:{port}"),
        hits,
    }
}

fn to_f32(v: Vec<f64>) -> Vec<f32> {
    v.into_iter().map(|x| x as f32).collect()
}

/// A well-behaved embedding service: texts hash to unit vectors, images hash
/// their decoded pixels. `reply_dim` lets a test make it lie about the dim.
pub fn embed_service(info_dim: usize, reply_dim: usize) -> MockServer {
    serve(move |method, url, body| {
        let parsed: Option<Value> = serde_json::from_str(body).ok();
        match (method, url) {
            ("GET", "/v1/info") => (200, json!({"model_id": "mock-encoder", "dim": info_dim, "modalities": ["text", "image"]})),
            ("POST", "/v1/embed/text") => {
                let Some(texts) = parsed.as_ref().and_then(|v| v["texts"].as_array().cloned()) else {
                    return (400, json!({"error": "texts missing"}));
                };
                let embs: Vec<Vec<f32>> = texts
                    .iter()
                    .map(|t| to_f32(hashed_unit_vector(reply_dim, t.as_str().unwrap_or("").as_bytes())))
                    .collect();
                (200, json!({"embeddings": embs, "dim": reply_dim}))
            }
            ("POST", "/v1/embed/image") => {
                let Some(images) = parsed.as_ref().and_then(|v| v["images_b64"].as_array().cloned()) else {
                    return (400, json!({"error": "images_b64 missing"}));
                };
                let mut embs = Vec::new();
                for b64 in &images {
                    let bytes = match base64::engine::general_purpose::STANDARD.decode(b64.as_str().unwrap_or("")) {
                        Ok(b) => b,
                        Err(_) => return (422, json!({"error": "bad base64"})),
                    };
                    let Ok(img) = image::load_from_memory(&bytes) else {
                        return (422, json!({"error": "undecodable image"}));
                    };
                    embs.push(to_f32(hashed_unit_vector(reply_dim, img.to_rgb8().as_raw())));
                }
                (200, json!({"embeddings": embs, "dim": reply_dim}))
            }
            _ => (404, json!({"error": "not found"})),
        }
    })
}
