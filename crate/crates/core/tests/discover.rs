mod common;

use std::collections::HashMap;
use std::sync::Arc;

use findr::chat::{cache_key, ChatGateway, ChatProvider, MockChatProvider};
use findr::discovery::{
    build_main_prompt, build_meta_prompt, build_service_prompt, discover_image, extract_meta, ChatSettings,
    DiscoverySettings, MetaInfo,
};
use findr::limits::{Limiter, RetryPolicy};
use findr::manifest::ImageRecord;
use findr::FindrError;

const NIGHTHAWK_ESSAY: &str = "The bird in the image is a **Common Nighthawk \n(Chordeiles minor)**.

### Key Features:
- **Shape and Size:** This bird has a slender, \nstreamlined body and long, pointed wings, which \nare adapted for agile, rapid flight.
- **Plumage:** The Common Nighthawk has cryptic \nbrownish-gray plumage with white spots near the \nwingtips, a white bar across the wing, and darker \nunderparts.
- **Flight Progression:** Common Nighthawks are \noften seen flying high and moving erratically as \nthey chase insects, a behavior captured in this \nimage.

This species is part of the *Caprimulgidae* family, \nalso known as nightjars, and is nocturnal or \ncrepuscular in its habits.";

fn bird_meta() -> MetaInfo {
    MetaInfo {
        category_singular: "bird".into(),
        category_plural: "birds".into(),
        unit_singular: "species".into(),
        unit_plural: "species".into(),
        expert_name: "ornithologist".into(),
    }
}

fn settings() -> DiscoverySettings {
    DiscoverySettings::new(ChatSettings::new("recorded-vlm"))
}

fn gateway(mock: MockChatProvider) -> (Arc<MockChatProvider>, ChatGateway) {
    let mock = Arc::new(mock);
    let policy = RetryPolicy { base_delay_ms: 1, ..Default::default() };
    let gw = ChatGateway::new(mock.clone(), None, policy, Limiter::new(2, None));
    (mock, gw)
}

/// Records a main answer and the service answer for it.
fn recorded(image: &ImageRecord, main: &str, service: &str) -> MockChatProvider {
    let s = settings();
    let mut mock = MockChatProvider::default();
    mock.insert(&build_main_prompt(image, &bird_meta(), &s.prompt, &s.chat).unwrap(), main);
    mock.insert(&build_service_prompt(main, &bird_meta(), &s.chat).unwrap(), service);
    mock
}

#[test]
fn nighthawk_essay_becomes_one_name() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageRecord::new("nh", common::write_png(dir.path(), "nh.png", 1, 8, 8));
    let (_, gw) = gateway(recorded(&img, NIGHTHAWK_ESSAY, r#"{"1": "Common Nighthawk"}"#));
    let line = discover_image(&img, &bird_meta(), &gw, &settings()).unwrap();
    assert_eq!(line.name.as_deref(), Some("Common Nighthawk"));
    assert_eq!(line.raw_text_sha256.as_ref().map(String::len), Some(64));
}

#[test]
fn first_of_several_suggestions_is_kept() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageRecord::new("fc", common::write_png(dir.path(), "fc.png", 2, 8, 8));
    let service = r#"{"1": "Acadian Flycatcher", "2": "Alder Flycatcher"}"#;
    let (_, gw) = gateway(recorded(&img, "Acadian Flycatcher or Alder Flycatcher", service));
    let line = discover_image(&img, &bird_meta(), &gw, &settings()).unwrap();
    assert_eq!(line.name.as_deref(), Some("Acadian Flycatcher"));
}

#[test]
fn empty_service_map_discards_the_image() {
    let dir = tempfile::tempdir().unwrap();
    let img = ImageRecord::new("x", common::write_png(dir.path(), "x.png", 3, 8, 8));
    let (_, gw) = gateway(recorded(&img, "Hard to say.", "{}"));
    let line = discover_image(&img, &bird_meta(), &gw, &settings()).unwrap();
    assert_eq!(line.name, None);
}

#[test]
fn meta_prompt_arity_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let imgs: Vec<ImageRecord> = (0..3)
        .map(|i| ImageRecord::new(format!("b{i}"), common::write_png(dir.path(), &format!("b{i}.png"), i, 8, 8)))
        .collect();
    let chat = ChatSettings::new("m");
    let err = build_meta_prompt(&imgs[..2], 3, &chat).unwrap_err();
    assert!(matches!(err, FindrError::Contract(_)));
    let a = build_meta_prompt(&imgs, 3, &chat).unwrap();
    let b = build_meta_prompt(&imgs, 3, &chat).unwrap();
    assert_eq!(cache_key(&a), cache_key(&b));

    let missing = ImageRecord::new("gone", dir.path().join("gone.png"));
    let err = build_meta_prompt(&[imgs[0].clone(), imgs[1].clone(), missing], 3, &chat).unwrap_err();
    assert!(matches!(err, FindrError::Ingestion { .. }));
    assert!(err.to_string().contains("gone.png"));
}

#[test]
fn unparseable_meta_is_asked_three_times_then_aborts() {
    let dir = tempfile::tempdir().unwrap();
    let imgs: Vec<ImageRecord> = (0..3)
        .map(|i| ImageRecord::new(format!("b{i}"), common::write_png(dir.path(), &format!("b{i}.png"), i, 8, 8)))
        .collect();
    let s = settings();
    let req = build_meta_prompt(&imgs, 3, &s.chat).unwrap();
    let (mock, gw) = gateway(MockChatProvider::new(HashMap::from([(cache_key(&req), "I cannot help".to_string())])));
    let err = extract_meta(&imgs, &gw, &s).unwrap_err();
    assert!(matches!(err, FindrError::Parse(_)));
    assert_eq!(mock.network_calls(), 3);
}
