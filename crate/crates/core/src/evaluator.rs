//! Precision@k, Recall@k over the chronological test split, and the
//! two-tailed paired t-test between systems.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::parallel;

pub const DEFAULT_K_VALUES: [usize; 3] = [5, 10, 20];

/// Significance level for the paired t-test.
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

fn hits(recommended: &[u32], relevant: &HashSet<u32>, k: usize) -> usize {
    recommended.iter().take(k).filter(|p| relevant.contains(p)).count()
}

/// Relevant items in the first `k` recommendations, divided by `k`.
pub fn precision_at_k(recommended: &[u32], relevant: &HashSet<u32>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    Ok(hits(recommended, relevant, k) as f64 / k as f64)
}

/// Relevant items in the first `k` recommendations, divided by the number of relevant items.
pub fn recall_at_k(recommended: &[u32], relevant: &HashSet<u32>, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if relevant.is_empty() {
        return Err(Error::InvalidArgument("recall is undefined for an empty relevant set".into()));
    }
    Ok(hits(recommended, relevant, k) as f64 / relevant.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    /// Infinite when the differences are constant and non-zero (serialized as `null`).
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
}

/// Two-tailed paired t-test on `a − b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let df = n - 1;

    let (t, p) = if sd == 0.0 {
        if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = mean / (sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
        (t, (2.0 * dist.sf(t.abs())).min(1.0))
    };
    Ok(TTest {
        t,
        df,
        p,
        significant: p < SIGNIFICANCE_LEVEL,
    })
}

/// Metrics for one evaluated user, aligned with the report's `k_values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user: String,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemEvaluation {
    pub k_values: Vec<usize>,
    pub per_user: Vec<UserMetrics>,
}

impl SystemEvaluation {
    pub fn metric_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.k_values.iter().map(|k| format!("precision@{k}")).collect();
        names.extend(self.k_values.iter().map(|k| format!("recall@{k}")));
        names
    }

    /// Per-user values of the named metric (e.g. `recall@10`), in user order.
    pub fn metric(&self, name: &str) -> Option<Vec<f64>> {
        let (kind, k) = name.split_once('@')?;
        let k: usize = k.parse().ok()?;
        let pos = self.k_values.iter().position(|&x| x == k)?;
        let pick = |m: &UserMetrics| match kind {
            "precision" => Some(m.precision[pos]),
            "recall" => Some(m.recall[pos]),
            _ => None,
        };
        self.per_user.iter().map(pick).collect()
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        let values = self.metric(name)?;
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }

    pub fn aggregates(&self) -> BTreeMap<String, f64> {
        self.metric_names()
            .into_iter()
            .map(|name| {
                let mean = self.mean(&name).unwrap_or(0.0);
                (name, mean)
            })
            .collect()
    }
}

fn check_k_values(k_values: &[usize]) -> Result<()> {
    if k_values.is_empty() || k_values.contains(&0) {
        return Err(Error::InvalidArgument("k values must be non-empty and positive".into()));
    }
    Ok(())
}

fn evaluate_user<F>(recommend: &F, corpus: &Corpus, k_values: &[usize], max_k: usize, u: usize) -> Option<UserMetrics>
where
    F: Fn(usize, usize) -> Vec<u32>,
{
    if !corpus.is_evaluable(u) {
        return None;
    }
    let relevant = corpus.test_poi_set(u);
    let recommended = recommend(u, max_k);
    let precision = k_values
        .iter()
        .map(|&k| precision_at_k(&recommended, &relevant, k))
        .collect::<Result<Vec<_>>>()
        .ok()?;
    let recall = k_values
        .iter()
        .map(|&k| recall_at_k(&recommended, &relevant, k))
        .collect::<Result<Vec<_>>>()
        .ok()?;
    Some(UserMetrics {
        user: corpus.users()[u].clone(),
        precision,
        recall,
    })
}

/// Scores `recommend(user, k)` against each evaluable user's distinct test
/// POIs. Users are evaluated in parallel when the feature is enabled.
pub fn evaluate<F>(recommend: F, corpus: &Corpus, k_values: &[usize]) -> Result<SystemEvaluation>
where
    F: Fn(usize, usize) -> Vec<u32> + Sync + Send,
{
    check_k_values(k_values)?;
    let max_k = *k_values.iter().max().unwrap();
    let per_user: Vec<UserMetrics> = parallel::map_indices(corpus.num_users(), |u| {
        evaluate_user(&recommend, corpus, k_values, max_k, u)
    })
    .into_iter()
    .flatten()
    .collect();
    finish(per_user, k_values)
}

pub fn evaluate_seq<F>(recommend: F, corpus: &Corpus, k_values: &[usize]) -> Result<SystemEvaluation>
where
    F: Fn(usize, usize) -> Vec<u32>,
{
    check_k_values(k_values)?;
    let max_k = *k_values.iter().max().unwrap();
    let per_user: Vec<UserMetrics> = (0..corpus.num_users())
        .filter_map(|u| evaluate_user(&recommend, corpus, k_values, max_k, u))
        .collect();
    finish(per_user, k_values)
}

fn finish(per_user: Vec<UserMetrics>, k_values: &[usize]) -> Result<SystemEvaluation> {
    if per_user.is_empty() {
        return Err(Error::NoEvaluableUsers);
    }
    Ok(SystemEvaluation {
        k_values: k_values.to_vec(),
        per_user,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub system_a: String,
    pub system_b: String,
    pub metric: String,
    pub t: f64,
    pub df: usize,
    pub p: f64,
    pub significant: bool,
}

/// Serializable evaluation report over one or more systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub systems: Vec<String>,
    pub k_values: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_user: Option<BTreeMap<String, Vec<UserMetrics>>>,
    pub aggregates: BTreeMap<String, BTreeMap<String, f64>>,
    pub significance_tests: Vec<Comparison>,
}

impl EvalReport {
    /// Builds a report; with two or more systems every pair is compared on every metric.
    pub fn new(systems: &[(String, SystemEvaluation)], include_per_user: bool) -> Result<Self> {
        let first = &systems
            .first()
            .ok_or_else(|| Error::InvalidArgument("no systems to report".into()))?
            .1;
        let mut significance_tests = Vec::new();
        for (i, (name_a, a)) in systems.iter().enumerate() {
            if a.k_values != first.k_values {
                return Err(Error::InvalidArgument("systems were evaluated at different k".into()));
            }
            for (name_b, b) in &systems[i + 1..] {
                let users_a: Vec<&str> = a.per_user.iter().map(|m| m.user.as_str()).collect();
                let users_b: Vec<&str> = b.per_user.iter().map(|m| m.user.as_str()).collect();
                if users_a != users_b {
                    return Err(Error::InvalidArgument(format!(
                        "{name_a} and {name_b} were evaluated on different users"
                    )));
                }
                for metric in a.metric_names() {
                    let test = paired_ttest(&a.metric(&metric).unwrap(), &b.metric(&metric).unwrap())?;
                    significance_tests.push(Comparison {
                        system_a: name_a.clone(),
                        system_b: name_b.clone(),
                        metric,
                        t: test.t,
                        df: test.df,
                        p: test.p,
                        significant: test.significant,
                    });
                }
            }
        }
        Ok(EvalReport {
            systems: systems.iter().map(|(n, _)| n.clone()).collect(),
            k_values: first.k_values.clone(),
            per_user: include_per_user
                .then(|| systems.iter().map(|(n, s)| (n.clone(), s.per_user.clone())).collect()),
            aggregates: systems.iter().map(|(n, s)| (n.clone(), s.aggregates())).collect(),
            significance_tests,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
