//! The two built-in functions.

use edgefaas_overlay::latency::derive_seed;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::spec::WorkloadKind;

const LEXICON: &[(&str, f64)] = &[
    ("amazing", 0.9),
    ("awesome", 0.9),
    ("awful", -0.9),
    ("bad", -0.7),
    ("beautiful", 0.85),
    ("best", 1.0),
    ("boring", -0.6),
    ("broken", -0.5),
    ("calm", 0.3),
    ("cheap", 0.2),
    ("clean", 0.4),
    ("delay", -0.3),
    ("dirty", -0.6),
    ("disappointing", -0.6),
    ("easy", 0.45),
    ("excellent", 1.0),
    ("fail", -0.5),
    ("fast", 0.2),
    ("fine", 0.4),
    ("good", 0.7),
    ("great", 0.8),
    ("happy", 0.8),
    ("hate", -0.8),
    ("horrible", -1.0),
    ("interesting", 0.5),
    ("love", 0.5),
    ("nice", 0.6),
    ("poor", -0.4),
    ("sad", -0.5),
    ("slow", -0.3),
    ("stable", 0.3),
    ("terrible", -1.0),
    ("ugly", -0.7),
    ("unreliable", -0.6),
    ("useful", 0.3),
    ("wonderful", 1.0),
    ("worst", -1.0),
    ("wrong", -0.5),
];

pub const DEFAULT_LABELS: &[&str] = &[
    "tabby cat",
    "golden retriever",
    "red fox",
    "espresso",
    "mountain bike",
    "lighthouse",
    "sports car",
    "daisy",
    "pizza",
    "volcano",
];

pub const HEAVY_ITERATIONS: u32 = 10_000;

fn lexicon_score(token: &str) -> Option<f64> {
    LEXICON.binary_search_by(|(w, _)| w.cmp(&token)).ok().map(|i| LEXICON[i].1)
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sentiment {
    pub polarity: f64,
    pub subjectivity: f64,
}

pub fn run_sentiment(text: &str) -> Sentiment {
    let toks = tokens(text);
    let mut scores = Vec::new();
    let mut covered = 0usize;
    let mut i = 0;
    while i < toks.len() {
        if toks[i] == "not" {
            if let Some(s) = toks.get(i + 1).and_then(|t| lexicon_score(t)) {
                scores.push(-s);
                covered += 2;
                i += 2;
                continue;
            }
        }
        if let Some(s) = lexicon_score(&toks[i]) {
            scores.push(s);
            covered += 1;
        }
        i += 1;
    }
    if toks.is_empty() {
        return Sentiment { polarity: 0.0, subjectivity: 0.0 };
    }
    let polarity = if scores.is_empty() { 0.0 } else { scores.iter().sum::<f64>() / scores.len() as f64 };
    Sentiment { polarity: polarity.clamp(-1.0, 1.0), subjectivity: covered as f64 / toks.len() as f64 }
}

fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 31)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x.rotate_left(27)
}

pub fn heavy_checksum(seed: u64) -> u64 {
    (0..HEAVY_ITERATIONS).fold(seed, |x, _| mix(x))
}

pub fn run_heavy_classify<S: AsRef<str>>(seed: u64, labels: &[S]) -> Result<(String, u64)> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let checksum = heavy_checksum(seed);
    let label = labels[(checksum % labels.len() as u64) as usize].as_ref().to_owned();
    Ok((label, checksum))
}

/// A decimal body is used as the seed directly; anything else (an image URL,
/// say) is hashed.
pub fn heavy_seed(body: &[u8]) -> u64 {
    let text = String::from_utf8_lossy(body);
    let trimmed = text.trim();
    trimmed.parse().unwrap_or_else(|_| derive_seed(0, trimmed))
}

pub fn execute(kind: WorkloadKind, body: &[u8]) -> Value {
    match kind {
        WorkloadKind::Sentiment => {
            let s = run_sentiment(&String::from_utf8_lossy(body));
            json!({ "polarity": s.polarity, "subjectivity": s.subjectivity })
        }
        WorkloadKind::HeavyClassify => {
            let (label, checksum) = run_heavy_classify(heavy_seed(body), DEFAULT_LABELS).expect("labels are non-empty");
            json!({ "label": label, "checksum": checksum })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicon_is_sorted_and_bounded() {
        assert!(LEXICON.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(LEXICON.iter().all(|(_, s)| (-1.0..=1.0).contains(s)));
        assert!(lexicon_score("not").is_none());
    }

    #[test]
    fn sentiment_examples() {
        assert_eq!(run_sentiment(""), Sentiment { polarity: 0.0, subjectivity: 0.0 });
        let s = run_sentiment("a great day");
        assert!((s.polarity - 0.8).abs() < 1e-12);
        assert!((s.subjectivity - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(run_sentiment("not good"), Sentiment { polarity: -0.7, subjectivity: 1.0 });
    }

    #[test]
    fn negation_only_binds_lexicon_words() {
        let s = run_sentiment("not today, bad day");
        assert_eq!(s.polarity, -0.7);
        assert_eq!(s.subjectivity, 0.25);
        let s = run_sentiment("Not NOT good");
        assert!((s.polarity + 0.7).abs() < 1e-12);
        assert!((s.subjectivity - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_polarity_is_averaged() {
        let s = run_sentiment("good and terrible");
        assert!((s.polarity - (-0.15)).abs() < 1e-12);
        assert!((s.subjectivity - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_single_label_and_empty() {
        let (label, _) = run_heavy_classify(0, &["cat"]).unwrap();
        assert_eq!(label, "cat");
        assert_eq!(run_heavy_classify::<&str>(0, &[]), Err(Error::EmptyLabels));
    }

    #[test]
    fn heavy_is_deterministic() {
        let labels = ["a", "b", "c"];
        assert_eq!(run_heavy_classify(42, &labels).unwrap(), run_heavy_classify(42, &labels).unwrap());
    }

    #[test]
    fn seeds_from_bodies() {
        assert_eq!(heavy_seed(b" 17\n"), 17);
        assert_eq!(heavy_seed(b"https://example.org/cat.jpg"), heavy_seed(b"https://example.org/cat.jpg"));
        assert_ne!(heavy_seed(b"https://example.org/cat.jpg"), heavy_seed(b"https://example.org/dog.jpg"));
    }
}
