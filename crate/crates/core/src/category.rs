//! Category skip-gram: predict context categories from the concatenation of
//! a POI's input row and its category's input row.
//!
//! With `v̂ = poi_in[l] ⊕ cat_in[c]`, positive context row `v_q` and sampled
//! negatives `v_r` (all `cat_out` rows of dimension `dim + cat_dim`):
//!
//! ```text
//! loss = −ln σ(v_q·v̂) − Σ_r ln σ(−v_r·v̂)
//! ```
//!
//! The gradient with respect to `v̂` is split back onto both input rows, so
//! this objective moves POI vectors as well as category vectors.

use crate::checkin::softmax;
use crate::corpus::{category_windows, Corpus};
use crate::embedding::{axpy, dot, logistic_terms, EmbeddingTable, SgdState, TrainConfig};
use crate::error::{Error, Result};
use crate::sampler::{build_sampler, NegativeSampler};

/// One training example of the category objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoryTriple {
    pub poi: u32,
    pub center: u32,
    pub context: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradients {
    /// With respect to the full concatenated vector.
    pub concat: Vec<f64>,
    /// With respect to the POI's `poi_in` row (first `dim` coordinates of `concat`).
    pub poi: Vec<f64>,
    /// With respect to the center category's `cat_in` row (last `cat_dim` coordinates).
    pub category: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleLoss {
    pub loss: f64,
    pub gradients: TripleGradients,
}

pub fn category_triple_loss(
    poi: u32,
    center_cat: u32,
    context_cat: u32,
    negatives: &[u32],
    table: &EmbeddingTable,
) -> Result<TripleLoss> {
    let v_hat = table.concat(poi as usize, center_cat as usize);
    let mut coefs = Vec::with_capacity(negatives.len() + 1);
    let loss = logistic_terms(
        &v_hat,
        table.cat_out.row(context_cat as usize),
        negatives.iter().map(|&r| table.cat_out.row(r as usize)),
        &mut coefs,
    );
    if !loss.is_finite() {
        return Err(Error::NonFiniteValue("category triple loss"));
    }
    let outputs = std::iter::once(context_cat).chain(negatives.iter().copied());
    let mut concat = vec![0.0; v_hat.len()];
    for (g, o) in coefs.iter().zip(outputs) {
        axpy(&mut concat, -g, table.cat_out.row(o as usize));
    }
    let scaled = |g: f64| v_hat.iter().map(|x| g * x).collect::<Vec<f64>>();
    let d = table.dim();
    Ok(TripleLoss {
        loss,
        gradients: TripleGradients {
            poi: concat[..d].to_vec(),
            category: concat[d..].to_vec(),
            concat,
            context: scaled(coefs[0]),
            negatives: coefs[1..].iter().map(|&g| scaled(g)).collect(),
        },
    })
}

pub fn category_softmax_prob(poi: u32, center_cat: u32, context_cat: u32, table: &EmbeddingTable) -> f64 {
    category_softmax_distribution(poi, center_cat, table)[context_cat as usize]
}

pub fn category_softmax_distribution(poi: u32, center_cat: u32, table: &EmbeddingTable) -> Vec<f64> {
    let v_hat = table.concat(poi as usize, center_cat as usize);
    softmax(table.cat_out.iter_rows().map(|row| dot(row, &v_hat)).collect())
}

#[derive(Debug, Clone)]
pub struct CategoryObjective {
    pub(crate) triples: Vec<CategoryTriple>,
    pub(crate) sampler: NegativeSampler,
    pub(crate) negatives: usize,
}

impl CategoryObjective {
    pub fn new(corpus: &Corpus, config: &TrainConfig) -> Result<Self> {
        let sampler = build_sampler(&corpus.cat_vocab, config.alpha)?;
        Ok(Self::with_sampler(corpus, sampler, config))
    }

    pub fn with_sampler(corpus: &Corpus, sampler: NegativeSampler, config: &TrainConfig) -> Self {
        let triples = category_windows(corpus, config.window)
            .flat_map(|w| {
                w.context.into_iter().map(move |context| CategoryTriple {
                    poi: w.poi,
                    center: w.center,
                    context,
                })
            })
            .collect();
        CategoryObjective {
            triples,
            sampler,
            negatives: config.negatives,
        }
    }

    pub fn triples(&self) -> &[CategoryTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// One pass over all triples in a freshly shuffled order. Returns the
    /// mean per-triple loss.
    pub fn train_epoch(&self, table: &mut EmbeddingTable, state: &mut SgdState) -> Result<f64> {
        if self.triples.is_empty() {
            return Ok(0.0);
        }
        let order = state.shuffled(self.triples.len());
        let d = table.dim();
        let mut v_hat = vec![0.0; d + table.cat_dim()];
        let mut grad = vec![0.0; v_hat.len()];
        let mut negatives = Vec::with_capacity(self.negatives);
        let mut coefs = Vec::with_capacity(self.negatives + 1);
        let mut total = 0.0;

        for idx in order {
            let t = self.triples[idx];
            self.sampler
                .sample_excluding(&mut state.negative_rng, t.context, self.negatives, &mut negatives);
            let lr = state.learning_rate();
            let (l, c) = (t.poi as usize, t.center as usize);
            v_hat[..d].copy_from_slice(table.poi_in.row(l));
            v_hat[d..].copy_from_slice(table.cat_in.row(c));

            let cat_out = &mut table.cat_out;
            let loss = logistic_terms(
                &v_hat,
                cat_out.row(t.context as usize),
                negatives.iter().map(|&r| cat_out.row(r as usize)),
                &mut coefs,
            );
            if !loss.is_finite() || !coefs.iter().all(|g| g.is_finite()) {
                return Err(state.non_finite("category objective"));
            }

            grad.iter_mut().for_each(|g| *g = 0.0);
            let outputs = std::iter::once(t.context).chain(negatives.iter().copied());
            for (&g, o) in coefs.iter().zip(outputs.clone()) {
                axpy(&mut grad, -g, cat_out.row(o as usize));
            }
            for (&g, o) in coefs.iter().zip(outputs) {
                axpy(cat_out.row_mut(o as usize), lr * g, &v_hat);
            }
            axpy(table.poi_in.row_mut(l), lr, &grad[..d]);
            axpy(table.cat_in.row_mut(c), lr, &grad[d..]);

            total += loss;
            state.step += 1;
        }
        Ok(total / self.triples.len() as f64)
    }
}

/// One category epoch over `corpus`; see [`CategoryObjective::train_epoch`].
pub fn train_category_epoch(
    corpus: &Corpus,
    table: &mut EmbeddingTable,
    sampler: &NegativeSampler,
    config: &TrainConfig,
    state: &mut SgdState,
) -> Result<f64> {
    CategoryObjective::with_sampler(corpus, sampler.clone(), config).train_epoch(table, state)
}
