//! Euclidean metric-factorization recommender.
//!
//! Users and POIs are points in the same space; a POI's score for a user is
//! the negated distance between them. POI positions start from pre-trained
//! embeddings, user positions are learned with a push-pull hinge loss on
//! squared distances:
//!
//! ```text
//! max(0, ‖p_u − q_i‖² − ‖p_u − q_j‖² + margin)
//! ```
//!
//! for a visited POI `i` and an unvisited POI `j`. Every touched row is
//! projected back onto the ball of radius `radius` after each step.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embedding::{load_vectors, Matrix};
use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommenderConfig {
    pub margin: f64,
    pub radius: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Unvisited POIs sampled per observed interaction.
    pub negatives: usize,
    /// Keep POI positions fixed at their pre-trained values.
    pub freeze_poi: bool,
    pub seed: u64,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        RecommenderConfig {
            margin: 0.5,
            radius: 1.0,
            epochs: 20,
            learning_rate: 0.05,
            negatives: 4,
            freeze_poi: false,
            seed: 42,
        }
    }
}

impl RecommenderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive")))
            }
        };
        positive("margin", self.margin)?;
        positive("radius", self.radius)?;
        positive("recommender learning rate", self.learning_rate)?;
        if self.negatives == 0 {
            return Err(Error::Config("recommender negatives must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommenderModel {
    pub users: Matrix,
    pub pois: Matrix,
    pub margin: f64,
    pub radius: f64,
    pub freeze_poi: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: u32,
    /// `(poi, score)`, best first.
    pub items: Vec<(u32, f64)>,
}

impl RankedList {
    pub fn pois(&self) -> Vec<u32> {
        self.items.iter().map(|&(p, _)| p).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project(row: &mut [f64], radius: f64) {
    let n = norm(row);
    if n > radius {
        let s = radius / n;
        row.iter_mut().for_each(|x| *x *= s);
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl RecommenderModel {
    /// Builds a model from POI vectors keyed by token. Rows are reordered to
    /// the corpus vocabulary and scaled so the largest norm equals `radius`.
    pub fn from_embeddings(
        tokens: &[String],
        vectors: &Matrix,
        corpus: &Corpus,
        config: &RecommenderConfig,
    ) -> Result<Self> {
        config.validate()?;
        let by_token: std::collections::HashMap<&str, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let vocab = corpus.poi_vocab.tokens();
        let missing: Vec<String> = vocab
            .iter()
            .filter(|t| !by_token.contains_key(t.as_str()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingTokens(missing));
        }

        let dim = vectors.cols();
        let mut pois = Matrix::zeros(vocab.len(), dim);
        for (i, token) in vocab.iter().enumerate() {
            pois.row_mut(i).copy_from_slice(vectors.row(by_token[token.as_str()]));
        }
        let max_norm = pois.iter_rows().map(norm).fold(0.0, f64::max);
        if max_norm > 0.0 {
            let s = config.radius / max_norm;
            pois.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }

        let mut rng = rng::stream(config.seed, Stream::Recommender);
        let mut users = Matrix::zeros(corpus.num_users(), dim);
        let half = 0.5 / dim as f64;
        for x in users.as_mut_slice() {
            *x = (rng.random::<f64>() * 2.0 - 1.0) * half;
        }

        Ok(RecommenderModel {
            users,
            pois,
            margin: config.margin,
            radius: config.radius,
            freeze_poi: config.freeze_poi,
        })
    }

    pub fn dim(&self) -> usize {
        self.pois.cols()
    }

    pub fn num_pois(&self) -> usize {
        self.pois.rows()
    }

    pub fn score(&self, user: u32, poi: u32) -> f64 {
        -squared_distance(self.users.row(user as usize), self.pois.row(poi as usize)).sqrt()
    }

    /// Hinge loss for one (user, visited, unvisited) triple.
    pub fn hinge_loss(&self, user: u32, pos: u32, neg: u32) -> f64 {
        let p = self.users.row(user as usize);
        let d_pos = squared_distance(p, self.pois.row(pos as usize));
        let d_neg = squared_distance(p, self.pois.row(neg as usize));
        (d_pos - d_neg + self.margin).max(0.0)
    }

    /// One SGD step on the hinge loss. Returns the loss before the step.
    pub fn hinge_step(&mut self, user: u32, pos: u32, neg: u32, lr: f64) -> Result<f64> {
        let loss = self.hinge_loss(user, pos, neg);
        if loss <= 0.0 {
            return Ok(0.0);
        }
        let (u, i, j) = (user as usize, pos as usize, neg as usize);
        let dim = self.dim();
        let mut grad_u = vec![0.0; dim];
        let mut grad_i = vec![0.0; dim];
        let mut grad_j = vec![0.0; dim];
        {
            let (p, qi, qj) = (self.users.row(u), self.pois.row(i), self.pois.row(j));
            for k in 0..dim {
                grad_u[k] = 2.0 * (qj[k] - qi[k]);
                grad_i[k] = -2.0 * (p[k] - qi[k]);
                grad_j[k] = 2.0 * (p[k] - qj[k]);
            }
        }
        if !grad_u.iter().chain(&grad_i).chain(&grad_j).all(|g| g.is_finite()) {
            return Err(Error::NonFiniteValue("recommender update"));
        }
        let radius = self.radius;
        let p = self.users.row_mut(u);
        crate::embedding::axpy(p, lr, &grad_u);
        project(p, radius);
        if !self.freeze_poi {
            let qi = self.pois.row_mut(i);
            crate::embedding::axpy(qi, lr, &grad_i);
            project(qi, radius);
            let qj = self.pois.row_mut(j);
            crate::embedding::axpy(qj, lr, &grad_j);
            project(qj, radius);
        }
        Ok(loss)
    }
}

pub fn init_from_embeddings(path: &Path, corpus: &Corpus, config: &RecommenderConfig) -> Result<RecommenderModel> {
    let (tokens, vectors) = load_vectors(path)?;
    RecommenderModel::from_embeddings(&tokens, &vectors, corpus, config)
}

pub fn score(model: &RecommenderModel, user: u32, poi: u32) -> f64 {
    model.score(user, poi)
}

/// Trains user (and unless frozen, POI) positions on the corpus training
/// prefixes. Returns the mean hinge loss of each epoch.
pub fn train_recommender(
    model: &mut RecommenderModel,
    corpus: &Corpus,
    config: &RecommenderConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let mut interactions = corpus.train_interactions();
    if interactions.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let visited: Vec<HashSet<u32>> = (0..corpus.num_users()).map(|u| corpus.train_poi_set(u)).collect();
    let n_pois = model.num_pois() as u32;
    let mut rng = rng::stream(config.seed, Stream::RecommenderTrain);
    let mut losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        interactions.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for &(u, i) in &interactions {
            let seen = &visited[u as usize];
            if seen.len() as u32 >= n_pois {
                continue;
            }
            for _ in 0..config.negatives {
                let j = loop {
                    let j = rng.random_range(0..n_pois);
                    if !seen.contains(&j) {
                        break j;
                    }
                };
                total += model.hinge_step(u, i, j, config.learning_rate)?;
                count += 1;
            }
        }
        losses.push(if count == 0 { 0.0 } else { total / count as f64 });
    }
    Ok(losses)
}

fn rank_order(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best-scoring POIs outside `exclude`; ties go to the lower index.
pub fn recommend_topk(model: &RecommenderModel, user: u32, k: usize, exclude: &HashSet<u32>) -> RankedList {
    let mut scored: Vec<(u32, f64)> = (0..model.num_pois() as u32)
        .filter(|p| !exclude.contains(p))
        .map(|p| (p, model.score(user, p)))
        .collect();
    if k == 0 {
        scored.clear();
    } else if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    RankedList { user, items: scored }
}

/// Top-`k` lists for every user, excluding each user's training POIs.
pub fn recommend_all(model: &RecommenderModel, corpus: &Corpus, k: usize) -> Vec<RankedList> {
    parallel::map_indices(corpus.num_users(), |u| {
        recommend_topk(model, u as u32, k, &corpus.train_poi_set(u))
    })
}

pub fn recommend_all_seq(model: &RecommenderModel, corpus: &Corpus, k: usize) -> Vec<RankedList> {
    parallel::map_indices_seq(corpus.num_users(), |u| {
        recommend_topk(model, u as u32, k, &corpus.train_poi_set(u))
    })
}
