#![allow(dead_code)]

use poi_embed::embedding::{init_table, EmbeddingTable, TrainConfig};
use poi_embed::synth::{generate, SyntheticConfig};
use poi_embed::{Corpus, IngestOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A table with every entry uniform in `[-scale, scale]`.
pub fn random_table(seed: u64, pois: usize, cats: usize, dim: usize, cat_dim: usize, scale: f64) -> EmbeddingTable {
    let config = TrainConfig {
        dim,
        cat_dim,
        ..TrainConfig::default()
    };
    let mut table = init_table(pois, cats, &config, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for m in [&mut table.poi_in, &mut table.poi_out, &mut table.cat_in, &mut table.cat_out] {
        for v in m.as_mut_slice() {
            *v = r.random_range(-scale..=scale);
        }
    }
    table
}

pub fn synthetic_corpus(config: &SyntheticConfig) -> Corpus {
    Corpus::from_records(generate(config), &IngestOptions::default()).unwrap()
}

/// About 200 check-ins: 10 users × 20.
pub fn small_corpus(seed: u64) -> Corpus {
    synthetic_corpus(&SyntheticConfig {
        users: 10,
        categories: 4,
        pois_per_category: 8,
        checkins_per_user: 20,
        categories_per_user: 2,
        stickiness: 0.7,
        seed,
    })
}

pub fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        dim: 16,
        cat_dim: 16,
        window: 4,
        negatives: 5,
        learning_rate: 0.025,
        epochs: 20,
        alpha: 0.75,
        seed,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
