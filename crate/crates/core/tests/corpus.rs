mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use poi_embed::cache::{load_corpus, save_corpus};
use poi_embed::corpus::{
    category_sequence, category_windows, chronological_split, ingest, poi_windows, window_positions, CheckinRecord,
};
use poi_embed::{Corpus, Error, IngestOptions};
use proptest::prelude::*;
use rand::Rng;

fn random_tsv(seed: u64, lines: usize) -> String {
    let mut r = common::rng(seed);
    let mut out = String::from("# user\tpoi\ttimestamp\tcategories\n");
    for i in 0..lines {
        if i % 17 == 5 {
            out.push('\n');
        }
        let cats: Vec<String> = (0..r.random_range(1..=3)).map(|_| format!("k{}", r.random_range(0..9))).collect();
        let _ = writeln!(
            out,
            "user{}\tpoi {}\t{}\t{}",
            r.random_range(0..40),
            r.random_range(0..120),
            r.random_range(0..1_000_000i64),
            cats.join(",")
        );
    }
    out
}

/// Recounts users, POIs, categories and check-ins straight from the text.
fn line_scan_stats(text: &str) -> String {
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| l.split('\t').collect())
        .collect();
    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for row in &rows {
        *per_user.entry(row[0]).or_default() += 1;
    }
    let kept: Vec<&Vec<&str>> = rows.iter().filter(|r| per_user[r[0]] >= 2).collect();
    let users: BTreeSet<&str> = kept.iter().map(|r| r[0]).collect();
    let pois: BTreeSet<&str> = kept.iter().map(|r| r[1]).collect();
    let cats: BTreeSet<&str> = kept.iter().flat_map(|r| r[3].split(',')).collect();
    format!(
        "{} users, {} POIs, {} categories, {} check-ins",
        users.len(),
        pois.len(),
        cats.len(),
        kept.len()
    )
}

#[test]
fn ingest_stats_match_line_scan() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let text = random_tsv(seed, 300);
        let path = dir.path().join(format!("c{seed}.tsv"));
        std::fs::write(&path, &text).unwrap();
        let corpus = ingest(&path, &IngestOptions::default()).unwrap();
        assert_eq!(corpus.stats_line(), line_scan_stats(&text));
    }
}

#[test]
fn ingest_sorts_each_user_by_time() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.tsv");
    std::fs::write(&path, random_tsv(9, 400)).unwrap();
    let corpus = ingest(&path, &IngestOptions::default()).unwrap();
    for u in 0..corpus.num_users() {
        let seq = corpus.sequence(u);
        assert!(seq.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
    }
}

#[test]
fn ingest_reports_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tsv");
    std::fs::write(&path, "u1\tp1\t10\tc1\nu1\tp2\tnot-a-time\tc1\n").unwrap();
    match ingest(&path, &IngestOptions::default()) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn missing_category_needs_sentinel() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nocat.tsv");
    std::fs::write(&path, "u1\tp1\t10\tc1\nu1\tp2\t20\t\n").unwrap();
    assert!(matches!(
        ingest(&path, &IngestOptions::default()),
        Err(Error::Parse { line: 2, .. })
    ));
    let options = IngestOptions {
        sentinel_category: true,
        ..IngestOptions::default()
    };
    let corpus = ingest(&path, &options).unwrap();
    assert!(corpus.cat_vocab.index_of(poi_embed::corpus::UNKNOWN_CATEGORY).is_some());
}

#[test]
fn empty_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.tsv");
    std::fs::write(&path, "# only a comment\n\n").unwrap();
    assert!(matches!(ingest(&path, &IngestOptions::default()), Err(Error::EmptyInput(_))));
}

fn record(user: &str, poi: &str, ts: i64, cats: &[&str]) -> CheckinRecord {
    CheckinRecord {
        user_id: user.into(),
        poi_id: poi.into(),
        category_ids: cats.iter().map(|c| c.to_string()).collect(),
        timestamp: ts,
    }
}

fn corpus_of_lengths(lengths: &[usize]) -> Corpus {
    let mut records = Vec::new();
    for (u, &n) in lengths.iter().enumerate() {
        for t in 0..n {
            records.push(record(&format!("u{u}"), &format!("p{}", (u * 7 + t) % 13), t as i64, &["c"]));
        }
    }
    Corpus::from_records(records, &IngestOptions::default()).unwrap()
}

#[test]
fn split_of_ten_is_eight_two() {
    let corpus = corpus_of_lengths(&[10, 10, 10]);
    for u in 0..3 {
        assert_eq!(corpus.train(u).len(), 8);
        assert_eq!(corpus.test(u).len(), 2);
    }
}

proptest! {
    #[test]
    fn split_is_floor_of_ratio(lengths in prop::collection::vec(2usize..40, 1..8), ratio in 0.05f64..0.95) {
        let corpus = chronological_split(corpus_of_lengths(&lengths), ratio).unwrap();
        for (u, &n) in lengths.iter().enumerate() {
            let expected = (ratio * n as f64).floor() as usize;
            prop_assert_eq!(corpus.train(u).len(), expected);
            prop_assert_eq!(corpus.train(u).len() + corpus.test(u).len(), n);
        }
    }

    #[test]
    fn window_positions_match_brute_force(n in 1usize..=12, w in 1usize..=4, center_seed in 0usize..100) {
        let center = center_seed % n;
        let got: Vec<usize> = window_positions(center, n, w).collect();
        let expected: Vec<usize> = (0..n).filter(|&p| p != center && p.abs_diff(center) <= w).collect();
        prop_assert_eq!(got, expected);
    }
}

/// Brute-force (center, context) POI pairs over train prefixes.
fn brute_force_pairs(corpus: &Corpus, w: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for u in 0..corpus.num_users() {
        let seq: Vec<u32> = corpus.train(u).iter().map(|c| c.poi).collect();
        for i in 0..seq.len() {
            for j in 0..seq.len() {
                if i != j && i.abs_diff(j) <= w {
                    pairs.push((seq[i], seq[j]));
                }
            }
        }
    }
    pairs
}

#[test]
fn poi_windows_on_random_fifty_event_sequence() {
    let mut r = common::rng(50);
    let records: Vec<CheckinRecord> = (0..50)
        .map(|t| record("u", &format!("p{}", r.random_range(0..10)), t, &["c"]))
        .collect();
    let corpus = Corpus::from_records(records, &IngestOptions::default()).unwrap();
    assert_eq!(corpus.train(0).len(), 40);
    for w in 1..=4 {
        let mut got: Vec<(u32, u32)> = poi_windows(&corpus, w)
            .flat_map(|win| win.context.into_iter().map(move |c| (win.center, c)))
            .collect();
        let mut expected = brute_force_pairs(&corpus, w);
        got.sort_unstable();
        expected.sort_unstable();
        assert_eq!(got, expected, "window {w}");
    }
}

#[test]
fn category_triples_match_brute_force() {
    let mut r = common::rng(7);
    let records: Vec<CheckinRecord> = (0..30)
        .map(|t| {
            let n = r.random_range(1..=2);
            let cats: Vec<String> = (0..n).map(|_| format!("c{}", r.random_range(0..5))).collect();
            let cat_refs: Vec<&str> = cats.iter().map(String::as_str).collect();
            record("u", &format!("p{}", r.random_range(0..8)), t, &cat_refs)
        })
        .collect();
    let corpus = Corpus::from_records(records, &IngestOptions::default()).unwrap();
    // Flattened (poi, category) stream of the train prefix, built by hand.
    let mut flat = Vec::new();
    for c in corpus.train(0) {
        for &cat in &c.categories {
            flat.push((c.poi, cat));
        }
    }
    assert_eq!(category_sequence(corpus.train(0)), flat);
    for w in 1..=4 {
        let mut expected = Vec::new();
        for i in 0..flat.len() {
            for j in 0..flat.len() {
                if i != j && i.abs_diff(j) <= w {
                    expected.push((flat[i].0, flat[i].1, flat[j].1));
                }
            }
        }
        let mut got: Vec<(u32, u32, u32)> = category_windows(&corpus, w)
            .flat_map(|win| win.context.into_iter().map(move |q| (win.poi, win.center, q)))
            .collect();
        got.sort_unstable();
        expected.sort_unstable();
        assert_eq!(got, expected, "window {w}");
    }
}

#[test]
fn windows_never_reach_into_test_suffix() {
    let corpus = common::small_corpus(3);
    let test_only: BTreeMap<usize, BTreeSet<u32>> = (0..corpus.num_users())
        .map(|u| {
            let train = corpus.train_poi_set(u);
            (u, corpus.test_poi_set(u).into_iter().filter(|p| !train.contains(p)).collect())
        })
        .collect();
    let mut u = 0;
    let mut seen = 0;
    for win in poi_windows(&corpus, 4) {
        while seen == corpus.train(u).len() {
            u += 1;
            seen = 0;
        }
        seen += 1;
        assert!(!test_only[&u].contains(&win.center));
        assert!(win.context.iter().all(|c| !test_only[&u].contains(c)));
    }
}

#[test]
fn cache_round_trip_preserves_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::small_corpus(11);
    let path = dir.path().join("corpus.json");
    save_corpus(&path, &corpus).unwrap();
    let back = load_corpus(&path).unwrap();
    assert_eq!(back.stats_line(), corpus.stats_line());
    for u in 0..corpus.num_users() {
        assert_eq!(back.sequence(u), corpus.sequence(u));
        assert_eq!(back.split_point(u), corpus.split_point(u));
    }
    assert_eq!(back.poi_vocab, corpus.poi_vocab);
}
