//! Seeded synthetic corpus with a Zipf-distributed vocabulary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::store::{Document, Operator, StoredQuery};

const SYLLABLES: [&str; 16] =
    ["ka", "lo", "mi", "ne", "ru", "sa", "te", "vo", "zu", "bi", "do", "fe", "gu", "ha", "ji", "po"];

/// Distinct pronounceable word for every rank.
pub fn word(rank: usize) -> String {
    let mut n = rank + SYLLABLES.len();
    let mut parts = Vec::new();
    while n > 0 {
        parts.push(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    parts.concat()
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub vocabulary: usize,
    pub zipf_exponent: f64,
    pub max_query_terms: usize,
    pub and_fraction: f64,
    /// Query terms skip this many of the most frequent words.
    pub query_rank_offset: usize,
    pub title_tokens: (usize, usize),
    pub body_tokens: (usize, usize),
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            vocabulary: 5000,
            zipf_exponent: 1.1,
            max_query_terms: 3,
            and_fraction: 0.6,
            query_rank_offset: 100,
            title_tokens: (3, 8),
            body_tokens: (10, 40),
        }
    }
}

pub struct Corpus {
    cfg: CorpusConfig,
    zipf: Zipf<f64>,
    rng: ChaCha8Rng,
    next_query: usize,
    next_doc: usize,
}

impl Corpus {
    pub fn new(cfg: CorpusConfig, seed: u64) -> Self {
        let zipf = Zipf::new(cfg.vocabulary as u64, cfg.zipf_exponent).expect("vocabulary and exponent are positive");
        Self { cfg, zipf, rng: ChaCha8Rng::seed_from_u64(seed), next_query: 0, next_doc: 0 }
    }

    fn rank(&mut self) -> usize {
        self.zipf.sample(&mut self.rng) as usize - 1
    }

    fn term(&mut self) -> String {
        word(self.rank())
    }

    fn text(&mut self, (lo, hi): (usize, usize)) -> String {
        let n = self.rng.gen_range(lo..=hi);
        (0..n).map(|_| self.term()).collect::<Vec<_>>().join(" ")
    }

    pub fn query(&mut self) -> StoredQuery {
        let n = self.rng.gen_range(1..=self.cfg.max_query_terms);
        let offset = self.cfg.query_rank_offset;
        let terms: Vec<String> = (0..n).map(|_| word((self.rank() + offset) % self.cfg.vocabulary)).collect();
        let op = if self.rng.gen_bool(self.cfg.and_fraction) { Operator::And } else { Operator::Or };
        let id = format!("q{:06}", self.next_query);
        self.next_query += 1;
        StoredQuery::new(id, op, &terms).expect("generated terms are tokens")
    }

    pub fn document(&mut self) -> Document {
        let title = self.text(self.cfg.title_tokens);
        let body = self.text(self.cfg.body_tokens);
        let id = format!("d{:06}", self.next_doc);
        self.next_doc += 1;
        Document::new(id).with_field("title", title).with_field("body", body)
    }

    pub fn queries(&mut self, n: usize) -> Vec<StoredQuery> {
        (0..n).map(|_| self.query()).collect()
    }

    pub fn documents(&mut self, n: usize) -> Vec<Document> {
        (0..n).map(|_| self.document()).collect()
    }
}
