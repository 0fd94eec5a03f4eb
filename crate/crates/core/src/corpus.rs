//! Check-in ingestion, vocabularies, per-user chronological sequences, and
//! context windows over the training prefixes.
//!
//! Input is UTF-8 TSV, one check-in per line:
//!
//! ```text
//! user_id<TAB>poi_id<TAB>timestamp<TAB>cat_1[,cat_2,...]
//! ```
//!
//! Lines starting with `#` and blank lines are skipped.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Category token assigned to check-ins without categories when the
/// sentinel is enabled.
pub const UNKNOWN_CATEGORY: &str = "__UNK__";

/// Fraction of each user's check-ins used for training.
pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckinRecord {
    pub user_id: String,
    pub poi_id: String,
    pub category_ids: Vec<String>,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Map a missing category column to [`UNKNOWN_CATEGORY`] instead of failing.
    pub sentinel_category: bool,
    pub train_ratio: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            sentinel_category: false,
            train_ratio: DEFAULT_TRAIN_RATIO,
        }
    }
}

/// Token ↔ index bijection with occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    index: HashMap<String, u32>,
    tokens: Vec<String>,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    counts: Vec<u64>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(repr: VocabRepr) -> Self {
        let index = repr
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary {
            index,
            tokens: repr.tokens,
            counts: repr.counts,
        }
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr {
            tokens: v.tokens,
            counts: v.counts,
        }
    }
}

impl Vocabulary {
    /// Records one occurrence of `token`, returning its index.
    pub fn observe(&mut self, token: &str) -> u32 {
        if let Some(&i) = self.index.get(token) {
            self.counts[i as usize] += 1;
            return i;
        }
        let i = self.tokens.len() as u32;
        self.index.insert(token.to_string(), i);
        self.tokens.push(token.to_string());
        self.counts.push(1);
        i
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> &str {
        &self.tokens[index as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// An indexed check-in inside a user's sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkin {
    pub poi: u32,
    pub categories: Vec<u32>,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub poi_vocab: Vocabulary,
    pub cat_vocab: Vocabulary,
    users: Vec<String>,
    sequences: Vec<Vec<Checkin>>,
    /// Per-user train prefix length.
    split: Vec<usize>,
}

impl Corpus {
    /// Builds a corpus from parsed records. Users with fewer than two
    /// check-ins are dropped; the rest are sorted by timestamp (stable) and
    /// split at `options.train_ratio`.
    pub fn from_records(records: Vec<CheckinRecord>, options: &IngestOptions) -> Result<Corpus> {
        check_ratio(options.train_ratio)?;
        let mut per_user: HashMap<&str, usize> = HashMap::new();
        for r in &records {
            *per_user.entry(r.user_id.as_str()).or_default() += 1;
        }
        let dropped = per_user.values().filter(|&&n| n < 2).count();
        if dropped > 0 {
            log::info!("dropped {dropped} user(s) with fewer than two check-ins");
        }

        let mut poi_vocab = Vocabulary::default();
        let mut cat_vocab = Vocabulary::default();
        let mut user_index: HashMap<String, usize> = HashMap::new();
        let mut users = Vec::new();
        let mut sequences: Vec<Vec<Checkin>> = Vec::new();
        for r in &records {
            if per_user[r.user_id.as_str()] < 2 {
                continue;
            }
            let u = *user_index.entry(r.user_id.clone()).or_insert_with(|| {
                users.push(r.user_id.clone());
                sequences.push(Vec::new());
                users.len() - 1
            });
            let poi = poi_vocab.observe(&r.poi_id);
            let categories = r.category_ids.iter().map(|c| cat_vocab.observe(c)).collect();
            sequences[u].push(Checkin {
                poi,
                categories,
                timestamp: r.timestamp,
            });
        }
        if users.is_empty() {
            return Err(Error::NoUsableUsers);
        }
        for seq in &mut sequences {
            seq.sort_by_key(|c| c.timestamp);
        }
        let corpus = Corpus {
            poi_vocab,
            cat_vocab,
            users,
            split: vec![0; sequences.len()],
            sequences,
        };
        chronological_split(corpus, options.train_ratio)
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.users.iter().position(|u| u == user_id)
    }

    pub fn num_checkins(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }

    pub fn sequence(&self, user: usize) -> &[Checkin] {
        &self.sequences[user]
    }

    pub fn train(&self, user: usize) -> &[Checkin] {
        &self.sequences[user][..self.split[user]]
    }

    pub fn test(&self, user: usize) -> &[Checkin] {
        &self.sequences[user][self.split[user]..]
    }

    pub fn split_point(&self, user: usize) -> usize {
        self.split[user]
    }

    /// Users with non-empty train and test parts.
    pub fn is_evaluable(&self, user: usize) -> bool {
        !self.train(user).is_empty() && !self.test(user).is_empty()
    }

    pub fn train_poi_set(&self, user: usize) -> HashSet<u32> {
        self.train(user).iter().map(|c| c.poi).collect()
    }

    /// Distinct POIs in the test suffix.
    pub fn test_poi_set(&self, user: usize) -> HashSet<u32> {
        self.test(user).iter().map(|c| c.poi).collect()
    }

    /// Distinct (user, POI) pairs in the training prefixes, in order of first visit.
    pub fn train_interactions(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for u in 0..self.num_users() {
            let mut seen = HashSet::new();
            for c in self.train(u) {
                if seen.insert(c.poi) {
                    out.push((u as u32, c.poi));
                }
            }
        }
        out
    }

    pub fn stats_line(&self) -> String {
        format!(
            "{} users, {} POIs, {} categories, {} check-ins",
            self.num_users(),
            self.poi_vocab.len(),
            self.cat_vocab.len(),
            self.num_checkins()
        )
    }
}

fn check_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )))
    }
}

/// Parses one data line. Returns `Ok(None)` for comments and blank lines.
pub fn parse_line(line: &str, sentinel_category: bool) -> std::result::Result<Option<CheckinRecord>, String> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() < 3 || fields.len() > 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let (user_id, poi_id) = (fields[0].trim(), fields[1].trim());
    if user_id.is_empty() || poi_id.is_empty() {
        return Err("empty user or POI id".into());
    }
    let timestamp: i64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad timestamp {:?}", fields[2]))?;
    if timestamp < 0 {
        return Err(format!("negative timestamp {timestamp}"));
    }
    let mut category_ids: Vec<String> = fields
        .get(3)
        .map(|f| {
            f.split(',')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default();
    if category_ids.is_empty() {
        if !sentinel_category {
            return Err("missing category column".into());
        }
        category_ids.push(UNKNOWN_CATEGORY.to_string());
    }
    Ok(Some(CheckinRecord {
        user_id: user_id.to_string(),
        poi_id: poi_id.to_string(),
        category_ids,
        timestamp,
    }))
}

pub fn read_records<R: BufRead>(input: R, path: &Path, sentinel_category: bool) -> Result<Vec<CheckinRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        match parse_line(&line, sentinel_category) {
            Ok(Some(r)) => records.push(r),
            Ok(None) => {}
            Err(message) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message,
                })
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyInput(path.to_path_buf()));
    }
    Ok(records)
}

pub fn ingest(path: &Path, options: &IngestOptions) -> Result<Corpus> {
    let file = File::open(path)?;
    let records = read_records(BufReader::new(file), path, options.sentinel_category)?;
    Corpus::from_records(records, options)
}

/// Sets each user's train prefix to `floor(ratio × len)`.
pub fn chronological_split(mut corpus: Corpus, ratio: f64) -> Result<Corpus> {
    check_ratio(ratio)?;
    corpus.split = corpus
        .sequences
        .iter()
        .map(|s| (ratio * s.len() as f64).floor() as usize)
        .collect();
    Ok(corpus)
}

/// Positions within `window` of `center`, clipped to `0..len`, excluding the center.
pub fn window_positions(center: usize, len: usize, window: usize) -> impl Iterator<Item = usize> {
    let before: Range<usize> = center.saturating_sub(window)..center;
    let after: Range<usize> = (center + 1).min(len)..(center + window + 1).min(len);
    before.chain(after)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub center: u32,
    pub context: Vec<u32>,
}

/// A center category, the POI whose check-in contributed it, and its window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryWindow {
    pub poi: u32,
    pub center: u32,
    pub context: Vec<u32>,
}

/// One window per position of every user's training prefix.
pub fn poi_windows(corpus: &Corpus, window: usize) -> impl Iterator<Item = ContextWindow> + '_ {
    (0..corpus.num_users()).flat_map(move |u| {
        let seq = corpus.train(u);
        (0..seq.len()).map(move |t| ContextWindow {
            center: seq[t].poi,
            context: window_positions(t, seq.len(), window).map(|p| seq[p].poi).collect(),
        })
    })
}

/// The user's training categories flattened in check-in order, each tagged with its POI.
pub fn category_sequence(checkins: &[Checkin]) -> Vec<(u32, u32)> {
    checkins
        .iter()
        .flat_map(|c| c.categories.iter().map(move |&cat| (c.poi, cat)))
        .collect()
}

pub fn category_windows(corpus: &Corpus, window: usize) -> impl Iterator<Item = CategoryWindow> + '_ {
    (0..corpus.num_users()).flat_map(move |u| {
        let seq = category_sequence(corpus.train(u));
        (0..seq.len())
            .map(|t| CategoryWindow {
                poi: seq[t].0,
                center: seq[t].1,
                context: window_positions(t, seq.len(), window).map(|p| seq[p].1).collect(),
            })
            .collect::<Vec<_>>()
    })
}
