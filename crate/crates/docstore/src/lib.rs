//! Percolation: documents are matched against stored queries.
//!
//! Queries are AND/OR lists of terms, indexed by term so that a document only
//! visits the queries sharing at least one of its tokens. Scoring ranks the
//! matches by mean term frequency and costs extra work per match, which is
//! the trade-off the percolator bench measures.

pub mod bench;
pub mod corpus;
mod error;
mod store;

pub use bench::{run_percolate_bench, PercolateBenchConfig, PercolateCost, PercolateRun, PercolateSample, StoreNode};
pub use error::{Error, Result};
pub use store::{score, tokenize, Document, Match, Operator, PercolatorStore, StoredQuery};
