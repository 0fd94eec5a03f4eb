//! Category-aware POI embeddings trained from check-in sequences, a
//! Euclidean metric-factorization recommender that consumes them, and
//! top-k evaluation.
//!
//! The pipeline is:
//!
//! 1. [`corpus`]: ingest a check-in TSV into per-user chronological
//!    sequences with an 80/20 train/test split.
//! 2. [`trainer`]: jointly train the [`checkin`] skip-gram and the
//!    [`category`] objective over a shared POI table ([`embedding`]).
//! 3. [`recommender`]: place users and POIs in Euclidean space, starting
//!    POIs from the trained embeddings.
//! 4. [`evaluator`]: Precision@k / Recall@k and paired t-tests.

pub mod cache;
pub mod category;
pub mod checkin;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod evaluator;
#[cfg(feature = "parallel")]
mod hogwild;
pub mod parallel;
pub mod recommender;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod trainer;

pub use corpus::{CheckinRecord, Corpus, IngestOptions, Vocabulary};
pub use embedding::{EmbeddingTable, TrainConfig};
pub use error::{Error, Result};
pub use evaluator::{EvalReport, SystemEvaluation};
pub use recommender::{RankedList, RecommenderConfig, RecommenderModel};
pub use sampler::NegativeSampler;
pub use trainer::{train, Mode, TrainOutput};
