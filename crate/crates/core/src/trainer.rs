//! Joint training of the check-in and category objectives over one shared
//! POI table.
//!
//! Each epoch runs a full check-in pass followed by a full category pass,
//! both drawing from one learning-rate schedule. The `NoCat` mode skips the
//! category pass and leaves the category tables at their initial values.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::category::CategoryObjective;
use crate::checkin::CheckinObjective;
use crate::corpus::{Corpus, Vocabulary};
use crate::embedding::{init_table, save_vectors, EmbeddingTable, SgdState, TrainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Check-in and category objectives.
    Full,
    /// Check-in objective only.
    NoCat,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::NoCat => "nocat",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "nocat" => Ok(Mode::NoCat),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub checkin_loss: f64,
    /// `None` in `NoCat` mode.
    pub category_loss: Option<f64>,
    /// Learning rate at the start of the epoch.
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub table: EmbeddingTable,
    pub log: Vec<EpochRecord>,
}

/// Deterministic single-threaded training.
pub fn train(corpus: &Corpus, config: &TrainConfig, mode: Mode) -> Result<TrainOutput> {
    train_with_threads(corpus, config, mode, 1)
}

/// With `threads > 1` (and the `parallel` feature) the epochs run as
/// lock-free parallel SGD, which is not bitwise reproducible.
pub fn train_with_threads(
    corpus: &Corpus,
    config: &TrainConfig,
    mode: Mode,
    threads: usize,
) -> Result<TrainOutput> {
    config.validate()?;
    let checkin = CheckinObjective::new(corpus, config)?;
    if checkin.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let category = match mode {
        Mode::Full => Some(CategoryObjective::new(corpus, config)?),
        Mode::NoCat => None,
    };
    let per_epoch = checkin.len() + category.as_ref().map_or(0, CategoryObjective::len);
    let mut table = init_table(corpus.poi_vocab.len(), corpus.cat_vocab.len(), config, config.seed)?;
    let mut state = SgdState::new(config, per_epoch * config.epochs);
    let runner = EpochRunner::new(threads)?;

    let mut log = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let lr = state.learning_rate();
        let checkin_loss = runner.checkin(&checkin, &mut table, &mut state)?;
        let category_loss = match &category {
            Some(objective) => Some(runner.category(objective, &mut table, &mut state)?),
            None => None,
        };
        if !table.is_finite() {
            return Err(state.non_finite("embedding table"));
        }
        state.finish_epoch();
        log::debug!("epoch {epoch}: check-in {checkin_loss:.5} category {category_loss:?} lr {lr:.5}");
        log.push(EpochRecord {
            epoch,
            checkin_loss,
            category_loss,
            lr,
        });
    }
    Ok(TrainOutput { table, log })
}

enum EpochRunner {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel(rayon::ThreadPool),
}

impl EpochRunner {
    fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(EpochRunner::Sequential);
        }
        #[cfg(feature = "parallel")]
        {
            Ok(EpochRunner::Parallel(crate::hogwild::build_pool(threads)?))
        }
        #[cfg(not(feature = "parallel"))]
        {
            log::warn!("built without the `parallel` feature; training on one thread");
            Ok(EpochRunner::Sequential)
        }
    }

    fn checkin(&self, o: &CheckinObjective, table: &mut EmbeddingTable, state: &mut SgdState) -> Result<f64> {
        match self {
            EpochRunner::Sequential => o.train_epoch(table, state),
            #[cfg(feature = "parallel")]
            EpochRunner::Parallel(pool) => crate::hogwild::checkin_epoch(o, table, state, pool),
        }
    }

    fn category(&self, o: &CategoryObjective, table: &mut EmbeddingTable, state: &mut SgdState) -> Result<f64> {
        match self {
            EpochRunner::Sequential => o.train_epoch(table, state),
            #[cfg(feature = "parallel")]
            EpochRunner::Parallel(pool) => crate::hogwild::category_epoch(o, table, state, pool),
        }
    }
}

pub fn export_poi_embeddings(table: &EmbeddingTable, vocab: &Vocabulary, path: &Path) -> Result<()> {
    save_vectors(path, vocab.tokens(), &table.poi_in)
}

pub fn export_category_embeddings(table: &EmbeddingTable, vocab: &Vocabulary, path: &Path) -> Result<()> {
    save_vectors(path, vocab.tokens(), &table.cat_in)
}

/// One JSON object per epoch.
pub fn write_log<W: Write>(mut out: W, log: &[EpochRecord]) -> Result<()> {
    for record in log {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Sidecar describing how an embedding file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMetadata {
    pub mode: Mode,
    pub dim: usize,
    pub cat_dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub alpha: f64,
    pub seed: u64,
    pub threads: usize,
    pub num_pois: usize,
    pub num_categories: usize,
}

impl EmbeddingMetadata {
    pub fn new(config: &TrainConfig, mode: Mode, threads: usize, table: &EmbeddingTable) -> Self {
        EmbeddingMetadata {
            mode,
            dim: config.dim,
            cat_dim: config.cat_dim,
            window: config.window,
            negatives: config.negatives,
            learning_rate: config.learning_rate,
            epochs: config.epochs,
            alpha: config.alpha,
            seed: config.seed,
            threads,
            num_pois: table.num_pois(),
            num_categories: table.num_categories(),
        }
    }
}
