//! Library results checked against small independent reimplementations.

use std::collections::BTreeMap;

use proptest::prelude::*;
use tmplex_core::entropy_lcs::{is_variable, lcs, position_entropy};
use tmplex_core::eval::{f_measure, group_accuracy, pair_counts, Grouping};
use tmplex_core::vecindex::{embed, similarity, FeatureSet, PunctuationVector, Standardizer, VectorIndex, DIM, FEATURES};

fn lcs_len_oracle(a: &[String], b: &[String]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] {
                t[i - 1][j - 1] + 1
            } else {
                t[i - 1][j].max(t[i][j - 1])
            };
        }
    }
    t[a.len()][b.len()]
}

fn tokens(max_len: usize, alphabet: u8) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec((0..alphabet).prop_map(|c| format!("w{c}")), 0..=max_len)
}

proptest! {
    #[test]
    fn lcs_length_matches_table_dp(a in tokens(30, 6), b in tokens(30, 6)) {
        let al = lcs(&a, &b);
        prop_assert_eq!(al.len(), lcs_len_oracle(&a, &b));
        for w in al.pairs.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &al.pairs {
            prop_assert_eq!(&a[i], &b[j]);
        }
    }

    #[test]
    fn entropy_matches_direct_sum(counts in prop::collection::vec(1u64..50, 1..40)) {
        let stats: BTreeMap<String, u64> = counts.iter().enumerate().map(|(i, &c)| (format!("t{i}"), c)).collect();
        let n: u64 = counts.iter().sum();
        let direct: f64 = counts
            .iter()
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.log2()
            })
            .sum();
        prop_assert!((position_entropy(&stats, n) - direct).abs() < 1e-9);
    }

    #[test]
    fn pair_metrics_match_enumeration(
        truth in prop::collection::vec(0u8..5, 1..40),
        pred in prop::collection::vec(0u8..5, 1..40),
    ) {
        let n = truth.len().min(pred.len());
        let t: Grouping = (0..n).map(|i| (i as u64, truth[i].to_string())).collect();
        let p: Grouping = (0..n).map(|i| (i as u64, pred[i].to_string())).collect();
        let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
        for i in 0..n {
            for j in i + 1..n {
                let same_t = truth[i] == truth[j];
                let same_p = pred[i] == pred[j];
                match (same_t, same_p) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fneg += 1,
                    _ => {}
                }
            }
        }
        let c = pair_counts(&t, &p).unwrap();
        prop_assert_eq!((c.tp, c.fp, c.r#fn), (tp, fp, fneg));

        let members = |labels: &[u8], i: usize| -> Vec<usize> {
            (0..n).filter(|&j| labels[j] == labels[i]).collect()
        };
        let correct = (0..n).filter(|&i| members(&truth, i) == members(&pred, i)).count();
        prop_assert_eq!(group_accuracy(&t, &p).unwrap(), correct as f64 / n as f64);
        let f = f_measure(&t, &p).unwrap();
        prop_assert!(f.f >= 0.0 && f.f <= 1.0);
    }
}

#[test]
fn uniform_32_is_five_bits_and_boundary_is_not_variable() {
    let stats: BTreeMap<String, u64> = (0..32).map(|i| (format!("v{i}"), 1)).collect();
    assert_eq!(position_entropy(&stats, 32), 5.0);
    assert!(is_variable(&stats, 32, 4.5));
    assert!(!is_variable(&stats, 32, 5.0));
}

fn vector(counts: &[u32], length: u32) -> PunctuationVector {
    let mut c = [0u32; FEATURES];
    c[..counts.len()].copy_from_slice(counts);
    PunctuationVector { counts: c, length }
}

#[test]
fn embed_counts_leading_features() {
    let mut spec: String = "=,;".into();
    spec.extend(tmplex_core::vecindex::DEFAULT_FEATURES.chars().filter(|c| !"=,;".contains(*c)));
    let fs = FeatureSet::new(&spec).unwrap();
    let v = embed("a=1,b=2;", &fs);
    assert_eq!(&v.counts[..4], &[2, 1, 1, 0]);
    assert_eq!(v.length, 8);
}

#[test]
fn standardizer_matches_two_pass_statistics() {
    let data: Vec<PunctuationVector> = (0..50u32)
        .map(|i| vector(&[i % 7, (i * i) % 11, 3], 20 + (i * 13) % 17))
        .collect();
    let mut s = Standardizer::new();
    for v in &data {
        s.update(v);
    }
    for d in 0..DIM {
        let xs: Vec<f64> = data.iter().map(|v| v.as_array()[d]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((s.mean()[d] - mean).abs() < 1e-9);
        assert!((s.std_dev(d) - var.sqrt()).abs() < 1e-9);
    }
    let out = s.transform(&data[3]);
    assert_eq!(out[5], 0.0, "zero-variance dimension maps to 0");
}

#[test]
fn two_point_population_standardizes_to_plus_minus_one() {
    let mut s = Standardizer::new();
    let a = vector(&[0], 0);
    let b = vector(&[2], 0);
    s.update(&a);
    s.update(&b);
    assert_eq!(s.transform(&a)[0], -1.0);
    assert_eq!(s.transform(&b)[0], 1.0);
}

#[test]
fn recall_is_brute_force_top_k_with_prefix_property() {
    let mut index = VectorIndex::new();
    let mut s = Standardizer::new();
    let ids = [7u64, 3, 9, 1, 4, 8, 2, 6, 0, 5];
    for (n, &id) in ids.iter().enumerate() {
        // pairs of identical vectors force similarity ties
        let v = vector(&[(n / 2) as u32, 1], 10 + (n / 2) as u32 * 3);
        s.update(&v);
        index.add(id, v);
    }
    let q = s.transform(&vector(&[1, 1], 13));
    let mut all: Vec<(u64, f64)> = index
        .entries()
        .iter()
        .map(|(id, v)| {
            let e = s.transform(v);
            let d = e.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (*id, similarity(d))
        })
        .collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let got: Vec<(u64, f64)> = index.recall(&q, &s, 5, 0.0).iter().map(|n| (n.template_id, n.similarity)).collect();
    assert_eq!(got, all[..5].to_vec());

    let wide = index.recall(&q, &s, 10, 0.0);
    for tau in [0.1, 0.3, 0.5, 0.9] {
        let narrow = index.recall(&q, &s, 10, tau);
        assert_eq!(narrow[..], wide[..narrow.len()], "tau {tau}");
    }
}
