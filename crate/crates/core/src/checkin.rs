//! Skip-gram over POI check-in sequences with negative sampling.
//!
//! For a center POI `l` with input row `v_l`, a context POI `w` with output
//! row `v_w` and sampled negatives `e` with output rows `v_e`:
//!
//! ```text
//! loss = −ln σ(v_w·v_l) − Σ_e ln σ(−v_e·v_l)
//! ```

use crate::corpus::{poi_windows, Corpus};
use crate::embedding::{axpy, dot, logistic_terms, EmbeddingTable, SgdState, TrainConfig};
use crate::error::{Error, Result};
use crate::sampler::{build_sampler, NegativeSampler};

/// Gradients of one pair's loss.
#[derive(Debug, Clone, PartialEq)]
pub struct PairGradients {
    /// With respect to the center's `poi_in` row.
    pub center: Vec<f64>,
    /// With respect to the context's `poi_out` row.
    pub context: Vec<f64>,
    /// With respect to each negative's `poi_out` row, in input order.
    pub negatives: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub gradients: PairGradients,
}

pub fn checkin_pair_loss(
    center: u32,
    context: u32,
    negatives: &[u32],
    table: &EmbeddingTable,
) -> Result<PairLoss> {
    let v_l = table.poi_in.row(center as usize);
    let mut coefs = Vec::with_capacity(negatives.len() + 1);
    let loss = logistic_terms(
        v_l,
        table.poi_out.row(context as usize),
        negatives.iter().map(|&e| table.poi_out.row(e as usize)),
        &mut coefs,
    );
    if !loss.is_finite() {
        return Err(Error::NonFiniteValue("check-in pair loss"));
    }
    let outputs: Vec<&[f64]> = std::iter::once(context)
        .chain(negatives.iter().copied())
        .map(|i| table.poi_out.row(i as usize))
        .collect();
    let mut grad_center = vec![0.0; v_l.len()];
    for (g, row) in coefs.iter().zip(&outputs) {
        axpy(&mut grad_center, -g, row);
    }
    let scaled = |g: f64| v_l.iter().map(|x| g * x).collect::<Vec<f64>>();
    Ok(PairLoss {
        loss,
        gradients: PairGradients {
            center: grad_center,
            context: scaled(coefs[0]),
            negatives: coefs[1..].iter().map(|&g| scaled(g)).collect(),
        },
    })
}

/// Full-softmax probability of `context` given `center`, enumerating every POI.
pub fn softmax_context_prob(center: u32, context: u32, table: &EmbeddingTable) -> f64 {
    softmax_context_distribution(center, table)[context as usize]
}

pub fn softmax_context_distribution(center: u32, table: &EmbeddingTable) -> Vec<f64> {
    let v_l = table.poi_in.row(center as usize);
    softmax(table.poi_out.iter_rows().map(|row| dot(row, v_l)).collect())
}

pub(crate) fn softmax(mut logits: Vec<f64>) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in &mut logits {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in &mut logits {
        *x /= total;
    }
    logits
}

/// Mean over all training pairs of the exhaustive-softmax cross-entropy.
pub fn softmax_cross_entropy(pairs: &[(u32, u32)], table: &EmbeddingTable) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|&(c, w)| -softmax_context_prob(c, w, table).ln())
        .sum();
    total / pairs.len() as f64
}

/// Training pairs and sampler for the check-in objective.
#[derive(Debug, Clone)]
pub struct CheckinObjective {
    pub(crate) pairs: Vec<(u32, u32)>,
    pub(crate) sampler: NegativeSampler,
    pub(crate) negatives: usize,
}

impl CheckinObjective {
    pub fn new(corpus: &Corpus, config: &TrainConfig) -> Result<Self> {
        let sampler = build_sampler(&corpus.poi_vocab, config.alpha)?;
        Ok(Self::with_sampler(corpus, sampler, config))
    }

    pub fn with_sampler(corpus: &Corpus, sampler: NegativeSampler, config: &TrainConfig) -> Self {
        let pairs = poi_windows(corpus, config.window)
            .flat_map(|w| w.context.into_iter().map(move |c| (w.center, c)))
            .collect();
        CheckinObjective {
            pairs,
            sampler,
            negatives: config.negatives,
        }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// One pass over all pairs in a freshly shuffled order. Returns the mean
    /// per-pair loss.
    pub fn train_epoch(&self, table: &mut EmbeddingTable, state: &mut SgdState) -> Result<f64> {
        if self.pairs.is_empty() {
            return Ok(0.0);
        }
        let order = state.shuffled(self.pairs.len());
        let dim = table.dim();
        let mut negatives = Vec::with_capacity(self.negatives);
        let mut coefs = Vec::with_capacity(self.negatives + 1);
        let mut center_grad = vec![0.0; dim];
        let mut total = 0.0;

        for idx in order {
            let (center, context) = self.pairs[idx];
            self.sampler
                .sample_excluding(&mut state.negative_rng, context, self.negatives, &mut negatives);
            let lr = state.learning_rate();
            let c = center as usize;

            let poi_out = &mut table.poi_out;
            let v_l = table.poi_in.row(c);
            let loss = logistic_terms(
                v_l,
                poi_out.row(context as usize),
                negatives.iter().map(|&e| poi_out.row(e as usize)),
                &mut coefs,
            );
            if !loss.is_finite() || !coefs.iter().all(|g| g.is_finite()) {
                return Err(state.non_finite("check-in objective"));
            }

            center_grad.iter_mut().for_each(|g| *g = 0.0);
            let outputs = std::iter::once(context).chain(negatives.iter().copied());
            for (&g, o) in coefs.iter().zip(outputs.clone()) {
                axpy(&mut center_grad, -g, poi_out.row(o as usize));
            }
            for (&g, o) in coefs.iter().zip(outputs) {
                axpy(poi_out.row_mut(o as usize), lr * g, v_l);
            }
            axpy(table.poi_in.row_mut(c), lr, &center_grad);

            total += loss;
            state.step += 1;
        }
        Ok(total / self.pairs.len() as f64)
    }
}

/// One check-in epoch over `corpus`; see [`CheckinObjective::train_epoch`].
pub fn train_checkin_epoch(
    corpus: &Corpus,
    table: &mut EmbeddingTable,
    sampler: &NegativeSampler,
    config: &TrainConfig,
    state: &mut SgdState,
) -> Result<f64> {
    CheckinObjective::with_sampler(corpus, sampler.clone(), config).train_epoch(table, state)
}
