//! Lock-free parallel SGD. Workers share the tables and apply row updates
//! without synchronization; only statistical reproducibility holds.
//!
//! Rows are held as `AtomicU64` bit patterns so concurrent access is
//! well-defined. Individual loads and stores are atomic, read-modify-write
//! sequences are not.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::category::CategoryObjective;
use crate::checkin::CheckinObjective;
use crate::embedding::{logistic_terms, EmbeddingTable, Matrix, SgdState};
use crate::error::{Error, Result};
use crate::rng;

struct AtomicMatrix {
    cols: usize,
    data: Vec<AtomicU64>,
}

impl AtomicMatrix {
    fn from_matrix(m: &Matrix) -> Self {
        AtomicMatrix {
            cols: m.cols(),
            data: m.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    fn write_back(&self, m: &mut Matrix) {
        for (dst, src) in m.as_mut_slice().iter_mut().zip(&self.data) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
    }

    fn load_row(&self, row: usize, out: &mut [f64]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f64::from_bits(c.load(Ordering::Relaxed));
        }
    }

    /// `row ← row − scale·direction`.
    fn sub_scaled(&self, row: usize, scale: f64, direction: &[f64]) {
        let cells = &self.data[row * self.cols..(row + 1) * self.cols];
        for (c, d) in cells.iter().zip(direction) {
            let v = f64::from_bits(c.load(Ordering::Relaxed)) - scale * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }
}

fn shards(n: usize, workers: usize) -> usize {
    n.div_ceil(workers.max(1)).max(1)
}

pub(crate) fn checkin_epoch(
    objective: &CheckinObjective,
    table: &mut EmbeddingTable,
    state: &mut SgdState,
    pool: &ThreadPool,
) -> Result<f64> {
    let n = objective.pairs.len();
    if n == 0 {
        return Ok(0.0);
    }
    let order = state.shuffled(n);
    let poi_in = AtomicMatrix::from_matrix(&table.poi_in);
    let poi_out = AtomicMatrix::from_matrix(&table.poi_out);
    let dim = table.dim();
    let k = objective.negatives;
    let step = AtomicUsize::new(state.step);
    let (seed, epoch, schedule) = (state.seed, state.epoch, state.schedule);

    let totals: Vec<Option<f64>> = pool.install(|| {
        order
            .par_chunks(shards(n, pool.current_num_threads()))
            .enumerate()
            .map(|(worker, chunk)| {
                let mut rng = rng::worker_stream(seed, epoch, worker);
                let mut negatives = Vec::with_capacity(k);
                let mut coefs = Vec::with_capacity(k + 1);
                let mut center = vec![0.0; dim];
                let mut grad = vec![0.0; dim];
                let mut outputs = vec![vec![0.0; dim]; k + 1];
                let mut total = 0.0;
                for &idx in chunk {
                    let (c, w) = objective.pairs[idx];
                    objective.sampler.sample_excluding(&mut rng, w, k, &mut negatives);
                    let lr = schedule.at(step.fetch_add(1, Ordering::Relaxed));
                    poi_in.load_row(c as usize, &mut center);
                    let ids: Vec<u32> = std::iter::once(w).chain(negatives.iter().copied()).collect();
                    for (buf, &o) in outputs.iter_mut().zip(&ids) {
                        poi_out.load_row(o as usize, buf);
                    }
                    let loss = logistic_terms(
                        &center,
                        &outputs[0],
                        outputs[1..ids.len()].iter().map(Vec::as_slice),
                        &mut coefs,
                    );
                    if !loss.is_finite() {
                        return None;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for (g, out) in coefs.iter().zip(&outputs) {
                        for (acc, x) in grad.iter_mut().zip(out) {
                            *acc += g * x;
                        }
                    }
                    for (&g, &o) in coefs.iter().zip(&ids) {
                        poi_out.sub_scaled(o as usize, lr * g, &center);
                    }
                    poi_in.sub_scaled(c as usize, lr, &grad);
                    total += loss;
                }
                Some(total)
            })
            .collect()
    });

    state.step += n;
    let total: Option<f64> = totals.into_iter().sum();
    let total = total.ok_or_else(|| state.non_finite("check-in objective (parallel)"))?;
    poi_in.write_back(&mut table.poi_in);
    poi_out.write_back(&mut table.poi_out);
    Ok(total / n as f64)
}

pub(crate) fn category_epoch(
    objective: &CategoryObjective,
    table: &mut EmbeddingTable,
    state: &mut SgdState,
    pool: &ThreadPool,
) -> Result<f64> {
    let n = objective.triples.len();
    if n == 0 {
        return Ok(0.0);
    }
    let order = state.shuffled(n);
    let poi_in = AtomicMatrix::from_matrix(&table.poi_in);
    let cat_in = AtomicMatrix::from_matrix(&table.cat_in);
    let cat_out = AtomicMatrix::from_matrix(&table.cat_out);
    let d = table.dim();
    let width = d + table.cat_dim();
    let k = objective.negatives;
    let step = AtomicUsize::new(state.step);
    let (seed, epoch, schedule) = (state.seed, state.epoch, state.schedule);

    let totals: Vec<Option<f64>> = pool.install(|| {
        order
            .par_chunks(shards(n, pool.current_num_threads()))
            .enumerate()
            .map(|(worker, chunk)| {
                let mut rng = rng::worker_stream(seed ^ 0x5eed, epoch, worker);
                let mut negatives = Vec::with_capacity(k);
                let mut coefs = Vec::with_capacity(k + 1);
                let mut v_hat = vec![0.0; width];
                let mut grad = vec![0.0; width];
                let mut outputs = vec![vec![0.0; width]; k + 1];
                let mut total = 0.0;
                for &idx in chunk {
                    let t = objective.triples[idx];
                    objective.sampler.sample_excluding(&mut rng, t.context, k, &mut negatives);
                    let lr = schedule.at(step.fetch_add(1, Ordering::Relaxed));
                    poi_in.load_row(t.poi as usize, &mut v_hat[..d]);
                    cat_in.load_row(t.center as usize, &mut v_hat[d..]);
                    let ids: Vec<u32> =
                        std::iter::once(t.context).chain(negatives.iter().copied()).collect();
                    for (buf, &o) in outputs.iter_mut().zip(&ids) {
                        cat_out.load_row(o as usize, buf);
                    }
                    let loss = logistic_terms(
                        &v_hat,
                        &outputs[0],
                        outputs[1..ids.len()].iter().map(Vec::as_slice),
                        &mut coefs,
                    );
                    if !loss.is_finite() {
                        return None;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for (g, out) in coefs.iter().zip(&outputs) {
                        for (acc, x) in grad.iter_mut().zip(out) {
                            *acc += g * x;
                        }
                    }
                    for (&g, &o) in coefs.iter().zip(&ids) {
                        cat_out.sub_scaled(o as usize, lr * g, &v_hat);
                    }
                    poi_in.sub_scaled(t.poi as usize, lr, &grad[..d]);
                    cat_in.sub_scaled(t.center as usize, lr, &grad[d..]);
                    total += loss;
                }
                Some(total)
            })
            .collect()
    });

    state.step += n;
    let total: Option<f64> = totals.into_iter().sum();
    let total = total.ok_or_else(|| state.non_finite("category objective (parallel)"))?;
    poi_in.write_back(&mut table.poi_in);
    cat_in.write_back(&mut table.cat_in);
    cat_out.write_back(&mut table.cat_out);
    Ok(total / n as f64)
}

pub(crate) fn build_pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))
}
