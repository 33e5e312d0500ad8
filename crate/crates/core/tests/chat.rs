mod chat {
    use findr::chat::*;

    use std::io::Cursor;

    fn png(seed: u8) -> Vec<u8> {
        let img = image::RgbImage::from_fn(4, 4, |x, y| image::Rgb([seed, x as u8, y as u8]));
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
        buf.into_inner()
    }

    fn req(text: &str, img: Vec<u8>, temperature: Option<f64>) -> ChatRequest {
        let msg = Message::user(vec![Part::image(img, MediaType::Png).unwrap(), Part::text(text)]).unwrap();
        ChatRequest::new("m", vec![msg], temperature).unwrap()
    }

    #[test]
    fn key_is_deterministic_hex() {
        let a = cache_key(&req("hi", png(1), None));
        let b = cache_key(&req("hi", png(1), None));
        assert_eq!(a, b);
        assert_eq!(a.len(), 64);
        assert!(a.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase()));
    }

    #[test]
    fn key_is_field_sensitive() {
        let base = cache_key(&req("hi", png(1), None));
        assert_ne!(base, cache_key(&req("hi", png(1), Some(0.0))));
        assert_ne!(cache_key(&req("hi", png(1), Some(0.0))), cache_key(&req("hi", png(1), Some(0.5))));
        assert_ne!(base, cache_key(&req("hello", png(1), None)));
        assert_ne!(base, cache_key(&req("hi", png(2), None)));
    }

    #[test]
    fn canonical_form_hides_image_bytes() {
        let r = req("hi", png(1), None);
        let c = findr::store::canonical_json(&r.canonical());
        assert!(c.contains("\"sha256\""));
        assert!(c.len() < 400);
    }

    #[test]
    fn invariants_are_enforced() {
        assert!(Message::user(vec![]).is_err());
        assert!(Message::user(vec![Part::text("  ")]).is_err());
        assert!(Part::image(b"not an image".to_vec(), MediaType::Png).is_err());
        assert!(ChatRequest::new("m", vec![], None).is_err());
        let m = Message::user(vec![Part::text("x")]).unwrap();
        assert!(ChatRequest::new("m", vec![m], Some(-1.0)).is_err());
    }
}

mod gateway {
    use findr::chat::*;
    use std::sync::Arc;
    use findr::chat::{cache_key, ChatProvider, ChatRequest, ChatResponse};
    use findr::error::FindrError;
    use findr::limits::{Limiter, RetryPolicy};
    use findr::store::ContentStore;
    use findr::chat::{Message, MockChatProvider, Part};
    use findr::limits::AttemptError;
    use std::collections::HashMap;

    use std::sync::atomic::{AtomicU64, Ordering};

    fn request(text: &str) -> ChatRequest {
        ChatRequest::new("m", vec![Message::user(vec![Part::text(text)]).unwrap()], None).unwrap()
    }

    fn fast() -> RetryPolicy {
        RetryPolicy { base_delay_ms: 1, ..Default::default() }
    }

    #[test]
    fn mock_echo_through_gateway() {
        let r = request("what?");
        let mock = MockChatProvider::new(HashMap::from([(cache_key(&r), "species: X".to_string())]));
        let gw = ChatGateway::new(Arc::new(mock), None, fast(), Limiter::new(4, None));
        assert_eq!(gw.complete(&r).unwrap().text, "species: X");
    }

    #[test]
    fn second_identical_request_is_a_cache_hit() {
        let dir = tempfile::tempdir().unwrap();
        let r = request("what?");
        let mock = Arc::new(MockChatProvider::new(HashMap::from([(cache_key(&r), "X".to_string())])));
        let gw = ChatGateway::new(mock.clone(), Some(ContentStore::new(dir.path())), fast(), Limiter::new(4, None));
        let first = gw.complete(&r).unwrap();
        let before = mock.network_calls();
        let second = gw.complete(&r).unwrap();
        assert_eq!(mock.network_calls() - before, 0);
        assert_eq!(serde_json::to_vec(&first).unwrap(), serde_json::to_vec(&second).unwrap());
    }

    struct Flaky {
        fail_first: u64,
        calls: AtomicU64,
    }

    impl ChatProvider for Flaky {
        fn send(&self, _req: &ChatRequest) -> std::result::Result<ChatResponse, AttemptError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                Err(AttemptError::Retryable("HTTP 503".into()))
            } else {
                Ok(ChatResponse::new("ok"))
            }
        }
        fn network_calls(&self) -> u64 {
            self.calls.load(Ordering::SeqCst)
        }
    }

    #[test]
    fn transient_failures_are_retried() {
        let p = Arc::new(Flaky { fail_first: 4, calls: AtomicU64::new(0) });
        let gw = ChatGateway::new(p.clone(), None, fast(), Limiter::new(1, None));
        assert_eq!(gw.complete(&request("x")).unwrap().text, "ok");
        assert_eq!(p.network_calls(), 5);

        let p = Arc::new(Flaky { fail_first: 5, calls: AtomicU64::new(0) });
        let gw = ChatGateway::new(p.clone(), None, fast(), Limiter::new(1, None));
        assert!(matches!(gw.complete(&request("x")), Err(FindrError::Transport(_))));
    }

    #[test]
    fn refresh_bypasses_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let p = Arc::new(Flaky { fail_first: 0, calls: AtomicU64::new(0) });
        let gw = ChatGateway::new(p.clone(), Some(ContentStore::new(dir.path())), fast(), Limiter::new(1, None));
        gw.complete(&request("x")).unwrap();
        gw.complete(&request("x")).unwrap();
        assert_eq!(p.network_calls(), 1);
        gw.refresh(&request("x")).unwrap();
        assert_eq!(p.network_calls(), 2);
    }
}

mod http {
    use findr::chat::*;
    use std::time::Duration;
    use serde_json::{json, Map};
    use findr::chat::{ChatRequest, Part};
    use findr::chat::{MediaType, Message};

    use std::io::Cursor;

    #[test]
    fn wire_shape_uses_data_urls_and_omits_default_temperature() {
        let img = image::RgbImage::from_pixel(2, 2, image::Rgb([1, 2, 3]));
        let mut buf = Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png).unwrap();
        let msg = Message::user(vec![Part::image(buf.into_inner(), MediaType::Png).unwrap(), Part::text("q")]).unwrap();
        let req = ChatRequest::new("model-x", vec![msg], None).unwrap();
        let mut opts = Map::new();
        opts.insert("reasoning".into(), json!({"effort": "high"}));
        let p = HttpChatProvider::new("http://h/v1/", "k", opts, Duration::from_secs(1));
        let body = p.wire_body(&req);
        assert_eq!(body["model"], "model-x");
        assert!(body.get("temperature").is_none());
        assert_eq!(body["reasoning"]["effort"], "high");
        let url = body["messages"][0]["content"][0]["image_url"]["url"].as_str().unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
        assert_eq!(body["messages"][0]["content"][1]["text"], "q");
        assert_eq!(p.url(), "http://h/v1/chat/completions");
    }

    #[test]
    fn parses_string_and_array_content() {
        let a = json!({"choices": [{"message": {"content": "hello"}}], "usage": {"total_tokens": 3}});
        let r = parse_completion(&a).unwrap();
        assert_eq!(r.text, "hello");
        assert_eq!(r.provider_meta["usage"]["total_tokens"], 3);
        let b = json!({"choices": [{"message": {"content": [{"type": "text", "text": "he"}, {"type": "text", "text": "llo"}]}}]});
        assert_eq!(parse_completion(&b).unwrap().text, "hello");
        assert!(parse_completion(&json!({"error": "x"})).is_err());
    }
}
