use std::collections::HashSet;

use proptest::prelude::*;
use tmplex_core::benchgen::{generate, CorpusSpec};
use tmplex_core::preprocess::{tokenize, RuleSet};
use tmplex_core::snapshot::{restore, snapshot};
use tmplex_core::{parse_lines, KeywordLibrary, LogRecord, ParseConfig, Parser, TemplateLibrary, TokenSequence};

fn corpus(n_templates: usize, n_logs: usize, seed: u64, jitter: f64) -> tmplex_core::benchgen::Corpus {
    generate(&CorpusSpec {
        n_templates,
        n_logs,
        seed,
        length_jitter: jitter,
        ..Default::default()
    })
    .unwrap()
}

fn assert_send<T: Send>() {}

#[test]
fn library_moves_between_threads() {
    assert_send::<TemplateLibrary>();
    let lib = parse_lines(&["a b c"], ParseConfig::default(), KeywordLibrary::new()).unwrap().library;
    let back = std::thread::spawn(move || lib).join().unwrap();
    assert_eq!(back.template_count(), 1);
}

#[test]
fn snapshot_round_trips_a_parsed_library() {
    let c = corpus(10, 400, 3, 0.2);
    let lib = parse_lines(&c.lines, ParseConfig::default(), c.keywords).unwrap().library;
    assert!(lib.template_count() >= 10);
    let bytes = snapshot(&lib);
    let back = restore(&bytes).unwrap();
    assert_eq!(back, lib);
    assert_eq!(back.catalog_json(4.5).unwrap(), lib.catalog_json(4.5).unwrap());
    for t in lib.templates() {
        let r = back.get(t.id()).unwrap();
        for pos in 0..t.len() {
            assert_eq!(r.position_stats(pos), t.position_stats(pos));
        }
    }
    for key in lib.keys() {
        assert_eq!(back.bucket(key).unwrap().index(), lib.bucket(key).unwrap().index());
    }
    assert_eq!(snapshot(&back), bytes);
}

#[test]
fn every_truncation_is_rejected() {
    let mut lib = TemplateLibrary::new();
    lib.insert_template("open", &TokenSequence::new(vec!["open".into(), "x".into()], 0)).unwrap();
    let bytes = snapshot(&lib);
    for cut in 0..bytes.len() {
        let err = restore(&bytes[..cut]).unwrap_err().to_string();
        assert!(err.contains("offset"), "{err}");
    }
}

#[test]
fn buckets_partition_the_templates() {
    let c = corpus(40, 2000, 11, 0.3);
    let lib = parse_lines(&c.lines, ParseConfig::default(), c.keywords).unwrap().library;
    lib.validate().unwrap();
    let mut ids = HashSet::new();
    let mut total = 0;
    for key in lib.keys() {
        for t in lib.bucket(key).unwrap().templates() {
            assert_eq!(t.keyword_key(), key);
            assert!(ids.insert(t.id()));
            total += 1;
        }
    }
    assert_eq!(total, lib.template_count());
    assert!(ids.iter().all(|&id| id < lib.next_id()));
}

#[test]
fn stream_invariants_hold_on_a_generated_corpus() {
    let c = corpus(30, 3000, 5, 0.3);
    let rules = RuleSet::default();
    let mut p = Parser::new(ParseConfig::default(), c.keywords.clone()).unwrap();
    let mut last_count = 0;
    let mut last_id = None;
    for (i, line) in c.lines.iter().enumerate() {
        let r = p.parse_one(&LogRecord::new(i as u64, line.as_str())).unwrap();
        // parameters splice back into the masked tokens
        assert_eq!(r.splice(), tokenize(&rules.mask(line)).join(" "), "line {i}");
        let count = p.library().template_count();
        assert!(count >= last_count);
        if count > last_count {
            assert!(last_id.is_none_or(|l| r.template_id > l));
            last_id = Some(r.template_id);
        }
        last_count = count;
    }
}

#[test]
fn reparsing_against_the_final_library_is_stable() {
    for seed in [1, 2, 3] {
        let c = corpus(30, 2000, seed, 0.0);
        let mut p = Parser::new(ParseConfig::default(), c.keywords.clone()).unwrap();
        let assigned: Vec<u64> = c
            .lines
            .iter()
            .enumerate()
            .map(|(i, l)| p.parse_one(&LogRecord::new(i as u64, l.as_str())).unwrap().template_id)
            .collect();
        for (line, id) in c.lines.iter().zip(assigned) {
            assert_eq!(p.lookup(line), Some(id), "seed {seed}: {line}");
        }
    }
}

#[test]
fn lookup_does_not_modify_the_parser() {
    let mut p = Parser::new(ParseConfig::default(), KeywordLibrary::new()).unwrap();
    p.parse_one(&LogRecord::new(0, "open file a")).unwrap();
    let before = p.library().clone();
    assert_eq!(p.lookup("open file b"), Some(0));
    assert_eq!(p.lookup("something else entirely"), None);
    assert_eq!(p.library(), &before);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parsing_is_deterministic(seed in 0u64..1000, jitter in 0.0f64..0.5) {
        let c = corpus(8, 300, seed, jitter);
        let a = parse_lines(&c.lines, ParseConfig::default(), c.keywords.clone()).unwrap();
        let b = parse_lines(&c.lines, ParseConfig::default(), c.keywords.clone()).unwrap();
        prop_assert_eq!(&a.results, &b.results);
        prop_assert_eq!(a.library.catalog_json(4.5).unwrap(), b.library.catalog_json(4.5).unwrap());
    }

    #[test]
    fn snapshot_is_identity(seed in 0u64..1000) {
        let c = corpus(6, 120, seed, 0.3);
        let lib = parse_lines(&c.lines, ParseConfig::default(), c.keywords).unwrap().library;
        prop_assert_eq!(restore(&snapshot(&lib)).unwrap(), lib);
    }
}
