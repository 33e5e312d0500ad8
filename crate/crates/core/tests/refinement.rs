use findr::refinement::*;
use findr::error::FindrError;

use findr::vector::Embedding;

fn e(v: &[f32]) -> Embedding {
    Embedding::new(v.to_vec()).unwrap()
}

fn scored(pairs: &[(&str, f64)]) -> Vec<ScoredName> {
    pairs.iter().map(|(n, s)| ScoredName { name: n.to_string(), score: *s }).collect()
}

#[test]
fn score_examples() {
    let names = vec!["X".to_string()];
    let s = score_names(&names, &[e(&[1.0, 0.0])], &[e(&[1.0, 0.0]), e(&[0.0, 1.0])]).unwrap();
    assert!((s[0].score - 0.5).abs() < 1e-12);
    let u = e(&[0.6, 0.8]);
    let s = score_names(&names, &[u.clone()], &[u.clone(), u.clone(), u]).unwrap();
    assert_eq!(s[0].score, 1.0);
    assert!(matches!(score_names(&names, &[e(&[1.0])], &[]), Err(FindrError::EmptyInput(_))));
}

#[test]
fn retention_rules() {
    let s = scored(&[("Low", 0.1), ("High", 0.9), ("Mid", 0.5)]);
    let top2 = retain(&s, &RetentionRule::TopM { m: 2 }).unwrap();
    assert_eq!(top2.names, vec!["High", "Mid"]);
    let floor = retain(&s, &RetentionRule::MinScore { tau: 0.95 }).unwrap();
    assert_eq!(floor.names, vec!["High"]);
    let some = retain(&s, &RetentionRule::MinScore { tau: 0.5 }).unwrap();
    assert_eq!(some.names, vec!["High", "Mid"]);
    let all = retain(&s, &RetentionRule::KeepAll).unwrap();
    assert_eq!(all.scores, vec![0.9, 0.5, 0.1]);
    let big = retain(&s, &RetentionRule::TopM { m: 10 }).unwrap();
    assert_eq!(big.len(), 3);
}

#[test]
fn ties_break_by_name() {
    let s = scored(&[("Rose", 0.5), ("Aster", 0.5)]);
    assert_eq!(retain(&s, &RetentionRule::TopM { m: 1 }).unwrap().names, vec!["Aster"]);
}

#[test]
fn invalid_rules() {
    let s = scored(&[("A", 0.1)]);
    assert!(matches!(retain(&s, &RetentionRule::TopM { m: 0 }), Err(FindrError::Config(_))));
    assert!(matches!(retain(&s, &RetentionRule::MinScore { tau: 1.5 }), Err(FindrError::Config(_))));
    assert!(retain(&[], &RetentionRule::KeepAll).is_err());
}

#[test]
fn rule_serialization() {
    let json = serde_json::to_string(&RetentionRule::TopM { m: 3 }).unwrap();
    assert_eq!(json, r#"{"rule":"top_m","m":3}"#);
    let r: RetentionRule = serde_json::from_str(r#"{"rule":"keep_all"}"#).unwrap();
    assert_eq!(r, RetentionRule::KeepAll);
}
