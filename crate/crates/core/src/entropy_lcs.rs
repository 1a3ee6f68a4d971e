//! Token-level LCS alignment, candidate scoring and the entropy gate.
//!
//! The LCS treats a wildcard on the template side as matching any single log
//! token. Among alignments of maximal length the DP prefers the one that
//! pins the most constant template tokens, then the earliest template
//! positions.

use std::collections::BTreeMap;

use crate::template::{Template, TemplateId, WILDCARD};

/// Minimum score for a candidate to be accepted.
pub const ACCEPT_THRESHOLD: f64 = 0.5;

/// A token that may be the template wildcard.
pub trait MatchToken: PartialEq {
    fn is_wildcard(&self) -> bool;
}

impl MatchToken for String {
    fn is_wildcard(&self) -> bool {
        self == WILDCARD
    }
}

impl MatchToken for &str {
    fn is_wildcard(&self) -> bool {
        *self == WILDCARD
    }
}

impl MatchToken for str {
    fn is_wildcard(&self) -> bool {
        self == WILDCARD
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LcsAlignment {
    /// Matched `(log_position, template_position)` pairs, strictly increasing.
    pub pairs: Vec<(usize, usize)>,
    /// Template positions not covered by any pair.
    pub divergent_template_positions: Vec<usize>,
    /// Pairs whose template side is a constant token.
    pub constant_matches: usize,
}

impl LcsAlignment {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The matched log tokens, in order.
    pub fn lcs_tokens<'a, T: AsRef<str>>(&self, log: &'a [T]) -> Vec<&'a str> {
        self.pairs.iter().map(|&(i, _)| log[i].as_ref()).collect()
    }
}

#[inline]
fn matches<T: MatchToken + ?Sized>(log: &T, template: &T) -> bool {
    template.is_wildcard() || log == template
}

/// Reusable DP buffer for repeated alignments.
#[derive(Debug, Default)]
pub struct LcsScratch {
    table: Vec<u64>,
}

impl LcsScratch {
    pub fn new() -> Self {
        Self::default()
    }

    /// Aligns `log` against `template`.
    pub fn align<T: MatchToken>(&mut self, log: &[T], template: &[T]) -> LcsAlignment {
        let n = log.len();
        let m = template.len();
        let width = m + 1;
        // Cell value = length * scale + constant matches, so maximizing the
        // value maximizes length first.
        let scale = (n.min(m) + 1) as u64;
        self.table.clear();
        self.table.resize((n + 1) * width, 0);
        let t = &mut self.table;
        let gain = |j: usize| -> u64 {
            if template[j].is_wildcard() {
                scale
            } else {
                scale + 1
            }
        };
        for i in (0..n).rev() {
            for j in (0..m).rev() {
                let skip = t[(i + 1) * width + j].max(t[i * width + j + 1]);
                let value = if matches(&log[i], &template[j]) {
                    skip.max(gain(j) + t[(i + 1) * width + j + 1])
                } else {
                    skip
                };
                t[i * width + j] = value;
            }
        }

        let mut pairs = Vec::with_capacity((t[0] / scale) as usize);
        let mut constant_matches = 0;
        let (mut i, mut j) = (0, 0);
        while i < n && j < m {
            let here = t[i * width + j];
            if matches(&log[i], &template[j]) && here == gain(j) + t[(i + 1) * width + j + 1] {
                if !template[j].is_wildcard() {
                    constant_matches += 1;
                }
                pairs.push((i, j));
                i += 1;
                j += 1;
            } else if here == t[(i + 1) * width + j] {
                i += 1;
            } else {
                j += 1;
            }
        }

        let mut divergent = Vec::with_capacity(m - pairs.len());
        let mut covered = pairs.iter().map(|&(_, j)| j).peekable();
        for pos in 0..m {
            if covered.peek() == Some(&pos) {
                covered.next();
            } else {
                divergent.push(pos);
            }
        }

        LcsAlignment {
            pairs,
            divergent_template_positions: divergent,
            constant_matches,
        }
    }
}

/// Longest common subsequence of `log` and `template`.
pub fn lcs<T: MatchToken>(log: &[T], template: &[T]) -> LcsAlignment {
    LcsScratch::new().align(log, template)
}

/// Match quality of an alignment.
///
/// The larger of two coverages: constant template tokens matched over the
/// template's constants, and constant matches over the log length. The first
/// keeps long variable payloads from depressing the score; the second lets a
/// template that was seeded by an unusually long log still absorb short ones.
pub fn alignment_score(align: &LcsAlignment, constant_count: usize, log_len: usize) -> f64 {
    coverage_score(align.constant_matches, constant_count, log_len)
}

/// [`alignment_score`] for a given number of matched constants. Monotone in
/// `matched`, so an upper bound on matches bounds the score.
pub fn coverage_score(matched: usize, constant_count: usize, log_len: usize) -> f64 {
    let matched = matched as f64;
    let template_cov = matched / constant_count.max(1) as f64;
    let log_cov = matched / log_len.max(1) as f64;
    template_cov.max(log_cov).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchDecision {
    pub template_id: Option<TemplateId>,
    pub alignment: LcsAlignment,
    pub score: f64,
    pub constant_count: usize,
}

/// Orders decisions best-first: score, then more constants, then lower id.
pub fn sort_decisions(decisions: &mut [MatchDecision]) {
    decisions.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(b.constant_count.cmp(&a.constant_count))
            .then(a.template_id.cmp(&b.template_id))
    });
}

/// Scores every candidate template against `tokens`, best first.
pub fn score_candidates<S: AsRef<str>>(tokens: &[S], candidates: &[&Template]) -> Vec<MatchDecision> {
    let log: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let mut scratch = LcsScratch::new();
    let mut decisions: Vec<MatchDecision> = candidates
        .iter()
        .map(|t| {
            let tpl: Vec<&str> = t.tokens().iter().map(String::as_str).collect();
            let alignment = scratch.align(&log, &tpl);
            let constant_count = t.constant_count();
            MatchDecision {
                template_id: Some(t.id()),
                score: alignment_score(&alignment, constant_count, log.len()),
                alignment,
                constant_count,
            }
        })
        .collect();
    sort_decisions(&mut decisions);
    decisions
}

pub fn accept(best: &MatchDecision) -> bool {
    best.score >= ACCEPT_THRESHOLD
}

/// Shannon entropy in bits of a token distribution over `n_total` logs.
pub fn position_entropy(stats: &BTreeMap<String, u64>, n_total: u64) -> f64 {
    if n_total == 0 {
        return 0.0;
    }
    let n = n_total as f64;
    let h: f64 = stats
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum();
    // -0.0 for a single-token distribution
    h.max(0.0)
}

/// True when the position's entropy strictly exceeds `theta`.
pub fn is_variable(stats: &BTreeMap<String, u64>, n_total: u64, theta: f64) -> bool {
    position_entropy(stats, n_total) > theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::TemplateLibrary;
    use crate::preprocess::TokenSequence;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split(' ').filter(|t| !t.is_empty()).collect()
    }

    #[test]
    fn lcs_skips_one_substitution() {
        let a = lcs(&toks("a b c d"), &toks("a x c d"));
        assert_eq!(a.lcs_tokens(&toks("a b c d")), vec!["a", "c", "d"]);
        assert_eq!(a.pairs, vec![(0, 0), (2, 2), (3, 3)]);
        assert_eq!(a.divergent_template_positions, vec![1]);
    }

    #[test]
    fn lcs_of_identical_sequences_is_the_sequence() {
        let s = toks("x y z x y");
        let a = lcs(&s, &s);
        assert_eq!(a.lcs_tokens(&s), s);
        assert!(a.divergent_template_positions.is_empty());
    }

    #[test]
    fn lcs_of_disjoint_alphabets_is_empty() {
        let a = lcs(&toks("a b"), &toks("c d"));
        assert!(a.is_empty());
        assert_eq!(a.divergent_template_positions, vec![0, 1]);
    }

    #[test]
    fn wildcard_matches_any_single_token() {
        let a = lcs(&toks("a b c"), &toks("a <*> c"));
        assert_eq!(a.len(), 3);
        assert_eq!(a.constant_matches, 2);
    }

    #[test]
    fn constant_match_preferred_over_wildcard_at_equal_length() {
        let a = lcs(&toks("a"), &toks("<*> a"));
        assert_eq!(a.pairs, vec![(0, 1)]);
        assert_eq!(a.constant_matches, 1);
    }

    #[test]
    fn backtrack_prefers_earliest_template_positions() {
        let a = lcs(&toks("a"), &toks("a a"));
        assert_eq!(a.pairs, vec![(0, 0)]);
        assert_eq!(a.divergent_template_positions, vec![1]);
    }

    fn library_with(templates: &[&str]) -> TemplateLibrary {
        let mut lib = TemplateLibrary::new();
        for t in templates {
            let tokens = t.split(' ').map(String::from).collect();
            lib.insert_template("k", &TokenSequence::new(tokens, 0)).unwrap();
        }
        lib
    }

    #[test]
    fn score_candidates_orders_by_score() {
        let lib = library_with(&["a <*> c", "x y z"]);
        let cands: Vec<&Template> = lib.templates().collect();
        let d = score_candidates(&["a", "b", "c"], &cands);
        assert_eq!(d[0].template_id, Some(0));
        assert_eq!(d[0].score, 1.0);
        assert_eq!(d[1].template_id, Some(1));
        assert_eq!(d[1].score, 0.0);
    }

    #[test]
    fn score_of_identical_candidate_is_one() {
        let lib = library_with(&["p q r"]);
        let cands: Vec<&Template> = lib.templates().collect();
        assert_eq!(score_candidates(&["p", "q", "r"], &cands)[0].score, 1.0);
        assert!(score_candidates::<&str>(&["p"], &[]).is_empty());
    }

    #[test]
    fn equal_scores_break_ties_by_lower_id() {
        let mut lib = TemplateLibrary::new();
        for i in 0..8 {
            let tokens = vec!["same".to_string(), format!("v{i}")];
            lib.insert_template("k", &TokenSequence::new(tokens, 0)).unwrap();
        }
        let cands: Vec<&Template> = lib.templates().filter(|t| t.id() == 7 || t.id() == 3).collect();
        let d = score_candidates(&["same", "zzz"], &cands);
        assert_eq!(d[0].score, d[1].score);
        assert_eq!(d[0].template_id, Some(3));
        assert_eq!(d[1].template_id, Some(7));
    }

    #[test]
    fn tie_prefers_more_constants() {
        let lib = library_with(&["a <*>", "a b"]);
        let cands: Vec<&Template> = lib.templates().collect();
        let d = score_candidates(&["a", "b"], &cands);
        assert_eq!(d[0].template_id, Some(1));
    }

    fn decision(score: f64) -> MatchDecision {
        MatchDecision {
            template_id: Some(0),
            alignment: LcsAlignment::default(),
            score,
            constant_count: 1,
        }
    }

    #[test]
    fn accept_boundary_is_inclusive() {
        assert!(accept(&decision(1.0)));
        assert!(!accept(&decision(0.0)));
        assert!(accept(&decision(0.5)));
        assert!(!accept(&decision(0.4999)));
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(position_entropy(&counts(&[("foo", 10)]), 10), 0.0);
        assert_eq!(position_entropy(&counts(&[("a", 1), ("b", 1)]), 2), 1.0);
        let uniform: BTreeMap<String, u64> = (0..32).map(|i| (format!("t{i}"), 1)).collect();
        assert_eq!(position_entropy(&uniform, 32), 5.0);
        assert_eq!(position_entropy(&BTreeMap::new(), 0), 0.0);
    }

    #[test]
    fn variable_gate_is_strict() {
        let uniform: BTreeMap<String, u64> = (0..32).map(|i| (format!("t{i}"), 1)).collect();
        assert!(is_variable(&uniform, 32, 4.5));
        // H = 1 bit exactly at theta = 1
        let two = counts(&[("a", 1), ("b", 1)]);
        assert!(!is_variable(&two, 2, 1.0));
        assert!(!is_variable(&counts(&[("x", 3)]), 3, 0.1));
    }

    proptest! {
        #[test]
        fn lcs_length_is_symmetric_without_wildcards(
            a in proptest::collection::vec(0u8..6, 0..20),
            b in proptest::collection::vec(0u8..6, 0..20),
        ) {
            let a: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let b: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            prop_assert_eq!(lcs(&a, &b).len(), lcs(&b, &a).len());
        }

        #[test]
        fn wildcards_never_reduce_match_length(
            a in proptest::collection::vec(0u8..5, 1..15),
            b in proptest::collection::vec(0u8..5, 1..15),
            pos in 0usize..15,
        ) {
            let a: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let b: Vec<String> = b.iter().map(|x| x.to_string()).collect();
            let mut w = b.clone();
            let p = pos % w.len();
            w[p] = WILDCARD.to_string();
            prop_assert!(lcs(&a, &w).len() >= lcs(&a, &b).len());
        }

        #[test]
        fn alignment_invariants_hold(
            a in proptest::collection::vec(0u8..4, 0..15),
            b in proptest::collection::vec(0u8..5, 0..15),
        ) {
            let a: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            let b: Vec<String> = b.iter().map(|&x| if x == 4 { WILDCARD.to_string() } else { x.to_string() }).collect();
            let al = lcs(&a, &b);
            for w in al.pairs.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
            }
            prop_assert_eq!(al.pairs.len() + al.divergent_template_positions.len(), b.len());
            for &(i, j) in &al.pairs {
                prop_assert!(b[j] == WILDCARD || a[i] == b[j]);
            }
        }

        #[test]
        fn entropy_is_bounded_by_log_of_support(c in proptest::collection::vec(1u64..50, 1..20)) {
            let map: BTreeMap<String, u64> = c.iter().enumerate().map(|(i, &v)| (i.to_string(), v)).collect();
            let n: u64 = c.iter().sum();
            let h = position_entropy(&map, n);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (c.len() as f64).log2() + 1e-12);
        }
    }
}
