//! Generative check-in corpora with latent category structure, used by the
//! test suites, benchmarks, and the `synth` command.
//!
//! Each category owns a pool of POIs. Every user is drawn to a few
//! categories; each check-in either stays in the current category or
//! switches to another of the user's categories, then picks a POI uniformly
//! from that category's pool.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;

use crate::corpus::CheckinRecord;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub users: usize,
    pub categories: usize,
    pub pois_per_category: usize,
    pub checkins_per_user: usize,
    pub categories_per_user: usize,
    /// Probability that the next check-in stays in the current category.
    pub stickiness: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            users: 100,
            categories: 8,
            pois_per_category: 30,
            checkins_per_user: 30,
            categories_per_user: 2,
            stickiness: 0.7,
            seed: 1,
        }
    }
}

pub fn poi_token(category: usize, index: usize) -> String {
    format!("c{category}_p{index}")
}

pub fn category_token(category: usize) -> String {
    format!("cat{category}")
}

pub fn generate(config: &SyntheticConfig) -> Vec<CheckinRecord> {
    assert!(config.categories_per_user >= 1 && config.categories_per_user <= config.categories);
    let mut rng = rng::stream(config.seed, Stream::Synthetic);
    let mut records = Vec::with_capacity(config.users * config.checkins_per_user);
    for u in 0..config.users {
        let liked: Vec<usize> = sample(&mut rng, config.categories, config.categories_per_user).into_vec();
        let mut current = liked[rng.random_range(0..liked.len())];
        for t in 0..config.checkins_per_user {
            if t > 0 && liked.len() > 1 && !rng.random_bool(config.stickiness) {
                let others: Vec<usize> = liked.iter().copied().filter(|&c| c != current).collect();
                current = others[rng.random_range(0..others.len())];
            }
            let poi = rng.random_range(0..config.pois_per_category);
            records.push(CheckinRecord {
                user_id: format!("u{u}"),
                poi_id: poi_token(current, poi),
                category_ids: vec![category_token(current)],
                timestamp: 1_600_000_000 + (t as i64) * 3_600 + u as i64,
            });
        }
    }
    records
}

/// Renders records in the ingest TSV format.
pub fn to_tsv(records: &[CheckinRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.user_id,
            r.poi_id,
            r.timestamp,
            r.category_ids.join(",")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn users_stay_within_their_categories() {
        let config = SyntheticConfig { users: 20, ..SyntheticConfig::default() };
        let records = generate(&config);
        assert_eq!(records.len(), 20 * config.checkins_per_user);
        for u in 0..20 {
            let cats: std::collections::HashSet<&str> = records
                .iter()
                .filter(|r| r.user_id == format!("u{u}"))
                .map(|r| r.category_ids[0].as_str())
                .collect();
            assert!(cats.len() <= 2);
        }
        assert_eq!(generate(&config), records);
    }
}
