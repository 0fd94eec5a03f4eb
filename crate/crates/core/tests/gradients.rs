mod common;

use poi_embed::category::{category_softmax_distribution, category_softmax_prob, category_triple_loss};
use poi_embed::checkin::{checkin_pair_loss, softmax_context_distribution, softmax_context_prob};
use poi_embed::embedding::{EmbeddingTable, Matrix};
use rand::seq::index::sample;
use rand::Rng;

const TRIALS: u64 = 100;
const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const N: usize = 6;
const D: usize = 4;
const K: usize = 2;

/// Picks `center`, a distinct `context`, and `K` negatives distinct from both.
fn draw_indices(r: &mut impl Rng) -> (u32, u32, Vec<u32>) {
    let picks = sample(r, N, K + 2).into_vec();
    (picks[0] as u32, picks[1] as u32, picks[2..].iter().map(|&i| i as u32).collect())
}

fn central_difference(
    table: &EmbeddingTable,
    pick: impl Fn(&mut EmbeddingTable) -> &mut Matrix,
    row: usize,
    loss: impl Fn(&EmbeddingTable) -> f64,
) -> Vec<f64> {
    let cols = pick(&mut table.clone()).cols();
    (0..cols)
        .map(|j| {
            let mut plus = table.clone();
            pick(&mut plus).row_mut(row)[j] += H;
            let mut minus = table.clone();
            pick(&mut minus).row_mut(row)[j] -= H;
            (loss(&plus) - loss(&minus)) / (2.0 * H)
        })
        .collect()
}

fn assert_close(analytic: &[f64], numeric: &[f64], what: &str) {
    assert_eq!(analytic.len(), numeric.len());
    for (a, n) in analytic.iter().zip(numeric) {
        assert!(common::rel_err(*a, *n) < REL_TOL, "{what}: analytic {a} vs numeric {n}");
    }
}

#[test]
fn checkin_gradients_match_finite_differences() {
    for trial in 0..TRIALS {
        let table = common::random_table(trial, N, N, D, D, 1.0);
        let mut r = common::rng(1000 + trial);
        let (center, context, negatives) = draw_indices(&mut r);
        let f = |t: &EmbeddingTable| checkin_pair_loss(center, context, &negatives, t).unwrap().loss;
        let g = checkin_pair_loss(center, context, &negatives, &table).unwrap().gradients;

        let num = central_difference(&table, |t| &mut t.poi_in, center as usize, f);
        assert_close(&g.center, &num, "center");
        let num = central_difference(&table, |t| &mut t.poi_out, context as usize, f);
        assert_close(&g.context, &num, "context");
        for (e, grad) in negatives.iter().zip(&g.negatives) {
            let num = central_difference(&table, |t| &mut t.poi_out, *e as usize, f);
            assert_close(grad, &num, "negative");
        }
    }
}

#[test]
fn category_gradients_match_finite_differences() {
    for trial in 0..TRIALS {
        let table = common::random_table(500 + trial, N, N, D, D, 1.0);
        let mut r = common::rng(2000 + trial);
        let poi = r.random_range(0..N as u32);
        let (center, context, negatives) = draw_indices(&mut r);
        let f = |t: &EmbeddingTable| category_triple_loss(poi, center, context, &negatives, t).unwrap().loss;
        let g = category_triple_loss(poi, center, context, &negatives, &table)
            .unwrap()
            .gradients;

        let num = central_difference(&table, |t| &mut t.poi_in, poi as usize, f);
        assert_close(&g.poi, &num, "poi");
        let num = central_difference(&table, |t| &mut t.cat_in, center as usize, f);
        assert_close(&g.category, &num, "category");
        let num = central_difference(&table, |t| &mut t.cat_out, context as usize, f);
        assert_close(&g.context, &num, "context");
        for (q, grad) in negatives.iter().zip(&g.negatives) {
            let num = central_difference(&table, |t| &mut t.cat_out, *q as usize, f);
            assert_close(grad, &num, "negative");
        }
    }
}

fn ln_sigmoid(x: f64) -> f64 {
    (1.0 / (1.0 + (-x).exp())).ln()
}

#[test]
fn pair_loss_matches_direct_formula() {
    let table = common::random_table(3, N, N, D, D, 1.0);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let v = table.poi_in.row(1);
    let expected = -ln_sigmoid(dot(table.poi_out.row(2), v))
        - ln_sigmoid(-dot(table.poi_out.row(4), v))
        - ln_sigmoid(-dot(table.poi_out.row(5), v));
    let got = checkin_pair_loss(1, 2, &[4, 5], &table).unwrap().loss;
    assert!((got - expected).abs() < 1e-12);
}

#[test]
fn softmax_sums_to_one() {
    for seed in 0..20 {
        let table = common::random_table(seed, 9, 7, 5, 3, 2.0);
        for center in 0..9 {
            let total: f64 = (0..9).map(|w| softmax_context_prob(center, w, &table)).sum();
            assert!((total - 1.0).abs() < 1e-9);
            let dist_total: f64 = softmax_context_distribution(center, &table).iter().sum();
            assert!((dist_total - 1.0).abs() < 1e-9);
        }
        for poi in 0..9 {
            for c in 0..7 {
                let total: f64 = (0..7).map(|q| category_softmax_prob(poi, c, q, &table)).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn category_softmax_three_way_oracle() {
    // v̂ = (1, 0 | 0), outputs scoring 1, 0, 0 → e/(e+2), 1/(e+2), 1/(e+2).
    let table = EmbeddingTable {
        poi_in: Matrix::from_vec(1, 2, vec![1.0, 0.0]),
        poi_out: Matrix::zeros(1, 2),
        cat_in: Matrix::from_vec(3, 1, vec![0.0, 0.0, 0.0]),
        cat_out: Matrix::from_vec(3, 3, vec![1.0, 0.0, 5.0, 0.0, 1.0, 5.0, 0.0, 0.0, 5.0]),
    };
    let e = 1f64.exp();
    let dist = category_softmax_distribution(0, 1, &table);
    let expected = [e / (e + 2.0), 1.0 / (e + 2.0), 1.0 / (e + 2.0)];
    for (got, want) in dist.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn softmax_survives_large_logits() {
    let mut table = common::random_table(4, 5, 2, 3, 2, 1.0);
    for v in table.poi_out.as_mut_slice() {
        *v *= 400.0;
    }
    let dist = softmax_context_distribution(0, &table);
    assert!(dist.iter().all(|p| p.is_finite()));
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}
