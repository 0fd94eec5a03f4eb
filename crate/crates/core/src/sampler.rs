//! Smoothed-unigram negative sampling.

use rand::Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Draws indices with probability proportional to `count^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
    alpha: f64,
}

impl NegativeSampler {
    pub fn from_counts(counts: &[u64], alpha: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("cannot sample from an empty vocabulary".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(alpha)).collect();
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(NegativeSampler { cumulative, alpha })
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn probability(&self, index: usize) -> f64 {
        let prev = if index == 0 { 0.0 } else { self.cumulative[index - 1] };
        self.cumulative[index] - prev
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1) as u32
    }

    /// Fills `out` with `k` draws, rejecting `exclude`. Draws nothing when
    /// `exclude` is the only index with non-zero probability.
    pub fn sample_excluding<R: Rng + ?Sized>(&self, rng: &mut R, exclude: u32, k: usize, out: &mut Vec<u32>) {
        out.clear();
        if self.probability(exclude as usize) >= 1.0 {
            return;
        }
        while out.len() < k {
            let s = self.sample(rng);
            if s != exclude {
                out.push(s);
            }
        }
    }
}

pub fn build_sampler(vocab: &Vocabulary, alpha: f64) -> Result<NegativeSampler> {
    NegativeSampler::from_counts(vocab.counts(), alpha)
}
