//! Dense embedding tables and the numeric kernels shared by both objectives.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Largest magnitude fed to `exp` inside [`sigmoid`].
pub const SIGMOID_CLAMP: f64 = 30.0;

/// Final learning rate as a fraction of the initial one.
pub const LR_FLOOR_FRACTION: f64 = 0.1;

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// `ln σ(x)` computed without cancellation for large negative `x`.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    -(-x).exp().ln_1p()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `row ← row − lr·grad`.
///
/// Returns `false` and leaves `row` untouched when `grad` holds a non-finite
/// entry.
pub fn sgd_step(row: &mut [f64], grad: &[f64], lr: f64) -> bool {
    assert_eq!(row.len(), grad.len(), "row/gradient shape mismatch");
    if !grad.iter().all(|g| g.is_finite()) {
        return false;
    }
    for (r, g) in row.iter_mut().zip(grad) {
        *r -= lr * g;
    }
    true
}

/// `row ← row − scale·direction`, the rank-one form of [`sgd_step`].
#[inline]
pub(crate) fn axpy(row: &mut [f64], scale: f64, direction: &[f64]) {
    for (r, d) in row.iter_mut().zip(direction) {
        *r -= scale * d;
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn fill_uniform<R: Rng>(&mut self, rng: &mut R, half_width: f64) {
        for v in &mut self.data {
            *v = (rng.random::<f64>() * 2.0 - 1.0) * half_width;
        }
    }
}

/// Training hyperparameters for the embedding objectives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// POI vector dimension.
    pub dim: usize,
    /// Category vector dimension.
    pub cat_dim: usize,
    /// Context items taken on each side of the center.
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Exponent applied to frequencies in the negative-sampling distribution.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            cat_dim: 100,
            window: 4,
            negatives: 5,
            learning_rate: 0.025,
            epochs: 50,
            alpha: 0.75,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("cat_dim", self.cat_dim),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Linearly decaying learning rate, from `initial` down to
/// `initial * LR_FLOOR_FRACTION` over `total` examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRate {
    initial: f64,
    total: usize,
}

impl LearningRate {
    pub fn new(initial: f64, total: usize) -> Self {
        LearningRate { initial, total }
    }

    pub fn at(&self, step: usize) -> f64 {
        if self.total == 0 {
            return self.initial;
        }
        let progress = step.min(self.total) as f64 / self.total as f64;
        self.initial * (1.0 - (1.0 - LR_FLOOR_FRACTION) * progress)
    }
}

/// Loss of one center vector against a positive output row and a list of
/// negative output rows, plus `∂loss/∂score` for each output in the same
/// order (positive first).
///
/// The gradient with respect to output row `j` is `coefs[j] · center`; the
/// gradient with respect to the center is `Σ_j coefs[j] · output_j`.
pub(crate) fn logistic_terms<'a>(
    center: &[f64],
    positive: &[f64],
    negatives: impl Iterator<Item = &'a [f64]>,
    coefs: &mut Vec<f64>,
) -> f64 {
    coefs.clear();
    let s = dot(positive, center);
    let mut loss = -log_sigmoid(s);
    coefs.push(sigmoid(s) - 1.0);
    for row in negatives {
        let s = dot(row, center);
        loss -= log_sigmoid(-s);
        coefs.push(sigmoid(s));
    }
    loss
}

/// Mutable state threaded through consecutive training epochs: the shared
/// learning-rate schedule, the global example counter, and the shuffle and
/// negative-sampling streams.
#[derive(Debug, Clone)]
pub struct SgdState {
    pub(crate) schedule: LearningRate,
    pub(crate) step: usize,
    pub(crate) epoch: usize,
    #[cfg_attr(not(feature = "parallel"), allow(dead_code))]
    pub(crate) seed: u64,
    pub(crate) shuffle_rng: ChaCha8Rng,
    pub(crate) negative_rng: ChaCha8Rng,
}

impl SgdState {
    /// `total_examples` is the number of examples the whole run will visit.
    pub fn new(config: &TrainConfig, total_examples: usize) -> Self {
        SgdState {
            schedule: LearningRate::new(config.learning_rate, total_examples),
            step: 0,
            epoch: 0,
            seed: config.seed,
            shuffle_rng: rng::stream(config.seed, Stream::Shuffle),
            negative_rng: rng::stream(config.seed, Stream::Negatives),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.schedule.at(self.step)
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn finish_epoch(&mut self) {
        self.epoch += 1;
    }

    pub(crate) fn shuffled(&mut self, n: usize) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.shuffle_rng);
        order
    }

    pub(crate) fn non_finite(&self, context: &'static str) -> Error {
        Error::NonFinite {
            context,
            epoch: self.epoch + 1,
            step: self.step,
        }
    }
}

/// Input and output vectors for POIs and categories.
///
/// Category output rows have dimension `dim + cat_dim` because they are
/// scored against the concatenation of a POI row and a category row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub poi_in: Matrix,
    pub poi_out: Matrix,
    pub cat_in: Matrix,
    pub cat_out: Matrix,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.poi_in.cols()
    }

    pub fn cat_dim(&self) -> usize {
        self.cat_in.cols()
    }

    pub fn num_pois(&self) -> usize {
        self.poi_in.rows()
    }

    pub fn num_categories(&self) -> usize {
        self.cat_in.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.poi_in.is_finite()
            && self.poi_out.is_finite()
            && self.cat_in.is_finite()
            && self.cat_out.is_finite()
    }

    /// The concatenated center vector for a (POI, category) pair.
    pub fn concat(&self, poi: usize, cat: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim() + self.cat_dim());
        v.extend_from_slice(self.poi_in.row(poi));
        v.extend_from_slice(self.cat_in.row(cat));
        v
    }
}

/// Input tables uniform in `[-0.5/dim, 0.5/dim)`, output tables zero.
pub fn init_table(
    num_pois: usize,
    num_categories: usize,
    config: &TrainConfig,
    seed: u64,
) -> Result<EmbeddingTable> {
    if num_pois == 0 || num_categories == 0 {
        return Err(Error::Config("vocabulary sizes must be at least 1".into()));
    }
    config.validate()?;
    let (d, dc) = (config.dim, config.cat_dim);
    let mut rng = rng::stream(seed, Stream::Init);
    let mut poi_in = Matrix::zeros(num_pois, d);
    poi_in.fill_uniform(&mut rng, 0.5 / d as f64);
    let mut cat_in = Matrix::zeros(num_categories, dc);
    cat_in.fill_uniform(&mut rng, 0.5 / dc as f64);
    Ok(EmbeddingTable {
        poi_in,
        poi_out: Matrix::zeros(num_pois, d),
        cat_in,
        cat_out: Matrix::zeros(num_categories, d + dc),
    })
}

/// Writes `<rows> <dim>` followed by `token v_1 ... v_dim` lines.
pub fn write_vectors<W: Write>(mut out: W, tokens: &[String], matrix: &Matrix) -> Result<()> {
    assert_eq!(tokens.len(), matrix.rows(), "one token per row");
    writeln!(out, "{} {}", matrix.rows(), matrix.cols())?;
    for (token, row) in tokens.iter().zip(matrix.iter_rows()) {
        out.write_all(token.as_bytes())?;
        for v in row {
            write!(out, " {v:.6e}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_vectors(path: &Path, tokens: &[String], matrix: &Matrix) -> Result<()> {
    write_vectors(BufWriter::new(File::create(path)?), tokens, matrix)
}

pub fn read_vectors<R: BufRead>(input: R, path: &Path) -> Result<(Vec<String>, Matrix)> {
    let bad = |message: String| Error::EmbeddingFormat {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
    let mut fields = header.split_whitespace();
    let mut header_field = |name: &str| -> Result<usize> {
        fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad(format!("header lacks a valid {name}")))
    };
    let rows = header_field("row count")?;
    let dim = header_field("dimension")?;

    let mut tokens = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.rsplitn(dim + 1, ' ');
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            let field = parts
                .next()
                .ok_or_else(|| bad(format!("line {}: too few values", i + 2)))?;
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("line {}: bad value {field:?}", i + 2)))?;
            values.push(v);
        }
        let token = parts
            .next()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| bad(format!("line {}: missing token", i + 2)))?;
        values.reverse();
        tokens.push(token.to_string());
        data.extend(values);
    }
    if tokens.len() != rows {
        return Err(bad(format!(
            "header declares {rows} rows but {} were read",
            tokens.len()
        )));
    }
    Ok((tokens, Matrix::from_vec(rows, dim, data)))
}

pub fn load_vectors(path: &Path) -> Result<(Vec<String>, Matrix)> {
    read_vectors(BufReader::new(File::open(path)?), path)
}
