use std::collections::{BTreeMap, HashMap};
use std::fmt;

use parking_lot::RwLock;

use crate::error::{Error, Result};

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    And,
    Or,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operator::And => "AND",
            Operator::Or => "OR",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredQuery {
    pub id: String,
    pub terms: Vec<String>,
    pub operator: Operator,
}

impl StoredQuery {
    pub fn new<S: AsRef<str>>(id: impl Into<String>, operator: Operator, terms: &[S]) -> Result<Self> {
        let q = Self { id: id.into(), terms: terms.iter().map(|t| t.as_ref().to_owned()).collect(), operator };
        q.validate()?;
        Ok(q)
    }

    pub fn and<S: AsRef<str>>(id: impl Into<String>, terms: &[S]) -> Result<Self> {
        Self::new(id, Operator::And, terms)
    }

    pub fn or<S: AsRef<str>>(id: impl Into<String>, terms: &[S]) -> Result<Self> {
        Self::new(id, Operator::Or, terms)
    }

    fn validate(&self) -> Result<()> {
        let fail = |reason| Err(Error::InvalidQuery { id: self.id.clone(), reason });
        if self.terms.is_empty() {
            return fail("no terms");
        }
        if self.terms.iter().any(|t| tokenize(t) != [t.as_str()]) {
            return fail("terms must be lowercase alphanumeric tokens");
        }
        Ok(())
    }

    fn matches(&self, tf: &HashMap<String, u32>) -> bool {
        match self.operator {
            Operator::And => self.terms.iter().all(|t| tf.contains_key(t)),
            Operator::Or => self.terms.iter().any(|t| tf.contains_key(t)),
        }
    }

    fn score_with(&self, tf: &HashMap<String, u32>) -> f64 {
        let sum: u32 = self.terms.iter().map(|t| tf.get(t).copied().unwrap_or(0)).sum();
        f64::from(sum) / self.terms.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub fields: BTreeMap<String, String>,
}

impl Document {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), fields: BTreeMap::new() }
    }

    pub fn with_field(mut self, name: impl Into<String>, text: impl Into<String>) -> Self {
        self.fields.insert(name.into(), text.into());
        self
    }

    /// Tokens of all fields, in field-name order.
    pub fn tokens(&self) -> Vec<String> {
        self.fields.values().flat_map(|t| tokenize(t)).collect()
    }

    fn term_frequencies(&self) -> HashMap<String, u32> {
        let mut tf = HashMap::new();
        for t in self.tokens() {
            *tf.entry(t).or_insert(0) += 1;
        }
        tf
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub query_id: String,
    pub score: Option<f64>,
}

/// Mean term frequency of the query's terms in the document.
pub fn score(q: &StoredQuery, doc: &Document) -> Result<f64> {
    let tf = doc.term_frequencies();
    if !q.matches(&tf) {
        return Err(Error::QueryDoesNotMatch(q.id.clone()));
    }
    Ok(q.score_with(&tf))
}

#[derive(Debug, Default)]
struct Index {
    queries: Vec<StoredQuery>,
    by_id: HashMap<String, usize>,
    postings: HashMap<String, Vec<usize>>,
}

/// Registered queries behind a single-writer, multi-reader lock.
#[derive(Debug, Default)]
pub struct PercolatorStore {
    index: RwLock<Index>,
}

impl PercolatorStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_query(&self, q: StoredQuery) -> Result<()> {
        q.validate()?;
        let mut idx = self.index.write();
        if idx.by_id.contains_key(&q.id) {
            return Err(Error::DuplicateQueryId(q.id));
        }
        let pos = idx.queries.len();
        let mut terms: Vec<&String> = q.terms.iter().collect();
        terms.sort();
        terms.dedup();
        for t in terms {
            idx.postings.entry(t.clone()).or_default().push(pos);
        }
        idx.by_id.insert(q.id.clone(), pos);
        idx.queries.push(q);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.read().queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: &str) -> Option<StoredQuery> {
        let idx = self.index.read();
        idx.by_id.get(id).map(|&i| idx.queries[i].clone())
    }

    /// Matches sorted by score, highest first, then by id. Without scoring
    /// the same set comes back sorted by id with no scores.
    pub fn percolate(&self, doc: &Document, scoring: bool) -> Vec<Match> {
        let tf = doc.term_frequencies();
        let idx = self.index.read();
        let mut candidates: Vec<usize> = tf.keys().filter_map(|t| idx.postings.get(t)).flatten().copied().collect();
        candidates.sort_unstable();
        candidates.dedup();

        let mut out: Vec<Match> = candidates
            .into_iter()
            .map(|i| &idx.queries[i])
            .filter(|q| q.matches(&tf))
            .map(|q| Match { query_id: q.id.clone(), score: scoring.then(|| q.score_with(&tf)) })
            .collect();
        out.sort_by(|a, b| {
            let by_score = b.score.unwrap_or(0.0).total_cmp(&a.score.unwrap_or(0.0));
            by_score.then_with(|| a.query_id.cmp(&b.query_id))
        });
        out
    }
}
