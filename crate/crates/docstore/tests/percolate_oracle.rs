use std::sync::Arc;

use edgefaas_docstore::corpus::{word, Corpus, CorpusConfig};
use edgefaas_docstore::{
    run_percolate_bench, tokenize, Document, Match, Operator, PercolateBenchConfig, PercolatorStore, StoreNode,
    StoredQuery,
};
use edgefaas_overlay::latency::nebula_profile;
use edgefaas_overlay::Site;
use proptest::prelude::*;

/// Every query against every document, straight from the definitions.
fn brute_force(queries: &[StoredQuery], doc: &Document, scoring: bool) -> Vec<Match> {
    let toks = doc.tokens();
    let tf = |t: &str| toks.iter().filter(|x| *x == t).count();
    let mut out: Vec<Match> = queries
        .iter()
        .filter(|q| match q.operator {
            Operator::And => q.terms.iter().all(|t| tf(t) > 0),
            Operator::Or => q.terms.iter().any(|t| tf(t) > 0),
        })
        .map(|q| {
            let score = q.terms.iter().map(|t| tf(t) as f64).sum::<f64>() / q.terms.len() as f64;
            Match { query_id: q.id.clone(), score: scoring.then_some(score) }
        })
        .collect();
    if scoring {
        out.sort_by(|a, b| b.score.unwrap().total_cmp(&a.score.unwrap()).then(a.query_id.cmp(&b.query_id)));
    } else {
        out.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    }
    out
}

fn small_vocab() -> impl Strategy<Value = String> {
    (0usize..30).prop_map(word)
}

fn arb_query(i: usize) -> impl Strategy<Value = StoredQuery> {
    (prop::collection::vec(small_vocab(), 1..4), any::<bool>()).prop_map(move |(terms, and)| {
        StoredQuery::new(format!("q{i:03}"), if and { Operator::And } else { Operator::Or }, &terms).unwrap()
    })
}

fn arb_doc(i: usize) -> impl Strategy<Value = Document> {
    prop::collection::vec(small_vocab(), 0..25)
        .prop_map(move |words| Document::new(format!("d{i}")).with_field("body", words.join(", ").to_uppercase()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn percolate_equals_brute_force(
        queries in (1usize..=200).prop_flat_map(|n| (0..n).map(arb_query).collect::<Vec<_>>()),
        docs in (1usize..=50).prop_flat_map(|n| (0..n).map(arb_doc).collect::<Vec<_>>()),
    ) {
        let store = PercolatorStore::new();
        for q in &queries {
            store.register_query(q.clone()).unwrap();
        }
        for d in &docs {
            prop_assert_eq!(store.percolate(d, true), brute_force(&queries, d, true));
            prop_assert_eq!(store.percolate(d, false), brute_force(&queries, d, false));
        }
    }

    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,60}") {
        let once = tokenize(&text);
        prop_assert_eq!(tokenize(&once.join(" ")), once.clone());
        prop_assert!(once.iter().all(|t| !t.is_empty()));
    }
}

#[test]
fn ten_thousand_queries_agree_with_oracle() {
    let mut corpus = Corpus::new(CorpusConfig::default(), 77);
    let queries = corpus.queries(10_000);
    let store = PercolatorStore::new();
    for q in &queries {
        store.register_query(q.clone()).unwrap();
    }
    assert_eq!(store.len(), 10_000);
    for d in corpus.documents(20) {
        assert_eq!(store.percolate(&d, true), brute_force(&queries, &d, true));
    }
}

#[test]
fn scoring_toggle_keeps_match_sets() {
    let mut corpus = Corpus::new(CorpusConfig::default(), 5);
    let store = PercolatorStore::new();
    for q in corpus.queries(1000) {
        store.register_query(q).unwrap();
    }
    for d in corpus.documents(1000) {
        let mut on: Vec<String> = store.percolate(&d, true).into_iter().map(|m| m.query_id).collect();
        let off: Vec<String> = store.percolate(&d, false).into_iter().map(|m| m.query_id).collect();
        on.sort();
        assert_eq!(on, off);
    }
}

#[test]
fn repeat_percolation_is_identical() {
    let mut corpus = Corpus::new(CorpusConfig::default(), 9);
    let store = PercolatorStore::new();
    for q in corpus.queries(500) {
        store.register_query(q).unwrap();
    }
    for d in corpus.documents(50) {
        assert_eq!(format!("{:?}", store.percolate(&d, true)), format!("{:?}", store.percolate(&d, true)));
    }
}

#[test]
fn concurrent_readers_see_the_same_results() {
    let mut corpus = Corpus::new(CorpusConfig::default(), 11);
    let store = Arc::new(PercolatorStore::new());
    for q in corpus.queries(1000) {
        store.register_query(q).unwrap();
    }
    let docs = Arc::new(corpus.documents(100));
    let expected: Vec<_> = docs.iter().map(|d| store.percolate(d, true)).collect();
    let handles: Vec<_> = (0..4)
        .map(|_| {
            let (store, docs) = (Arc::clone(&store), Arc::clone(&docs));
            std::thread::spawn(move || docs.iter().map(|d| store.percolate(d, true)).collect::<Vec<_>>())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), expected);
    }
}

fn nodes(site: Site, n: usize, cf: f64) -> Vec<StoreNode> {
    (0..n).map(|i| StoreNode::new(format!("{site}-{i}"), site, cf)).collect()
}

#[test]
fn scoring_off_favours_the_pis_over_the_cloud() {
    let cfg = PercolateBenchConfig { docs: 1000, scoring: false, ..Default::default() };
    let mean = |site, n, cf| {
        let run = run_percolate_bench(&nodes(site, n, cf), &|a, b| nebula_profile(a, b), &cfg).unwrap();
        run.samples.iter().map(|s| s.latency_ms).sum::<f64>() / run.samples.len() as f64
    };
    let rs = mean(Site::Rs, 4, 0.25);
    let cd = mean(Site::Cd, 2, 1.0);
    assert!(cd / rs > 2.0, "rs {rs} cd {cd}");
}

#[test]
fn multi_node_registration_pays_a_sync() {
    let cfg = PercolateBenchConfig { queries: 50, docs: 1, ..Default::default() };
    let one = run_percolate_bench(&nodes(Site::Cd, 1, 1.0), &|a, b| nebula_profile(a, b), &cfg).unwrap();
    let two = run_percolate_bench(&nodes(Site::Cd, 2, 1.0), &|a, b| nebula_profile(a, b), &cfg).unwrap();
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(avg(&two.register_ms) > avg(&one.register_ms) + 0.4);
}
