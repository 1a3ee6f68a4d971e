//! Grouping accuracy metrics.
//!
//! Pair counts follow the definitions used by the accuracy tables this
//! crate reproduces, which swap the usual FP/FN roles:
//!
//! * TP: pairs grouped together in both truth and prediction.
//! * FP: pairs together in truth but split in the prediction.
//! * FN: pairs together in the prediction but split in truth.
//!
//! So `precision = TP / (TP + FP)` is the share of true pairs that the
//! prediction keeps together.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Assignment of line numbers to opaque group labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Grouping {
    assignment: BTreeMap<u64, String>,
}

impl Grouping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, line_no: u64, label: impl Into<String>) {
        self.assignment.insert(line_no, label.into());
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn label(&self, line_no: u64) -> Option<&str> {
        self.assignment.get(&line_no).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &str)> {
        self.assignment.iter().map(|(&k, v)| (k, v.as_str()))
    }

    pub fn group_count(&self) -> usize {
        self.assignment.values().collect::<BTreeSet<_>>().len()
    }

    /// Reads the `LineId` and `EventId` columns of a CSV file.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (line_col, event_col) = match (find("LineId"), find("EventId")) {
            (Some(l), Some(e)) => (l, e),
            (l, e) => {
                let missing: Vec<&str> = [("LineId", l), ("EventId", e)]
                    .into_iter()
                    .filter_map(|(n, c)| c.is_none().then_some(n))
                    .collect();
                return Err(Error::Grouping(format!(
                    "missing column(s) {}; found {:?}",
                    missing.join(", "),
                    headers.iter().collect::<Vec<_>>()
                )));
            }
        };
        let mut g = Grouping::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let raw = rec.get(line_col).unwrap_or("").trim();
            let line: u64 = raw
                .parse()
                .map_err(|_| Error::Grouping(format!("row {}: bad LineId {raw:?}", row + 1)))?;
            if g.assignment.contains_key(&line) {
                return Err(Error::Grouping(format!("duplicate LineId {line}")));
            }
            g.insert(line, rec.get(event_col).unwrap_or(""));
        }
        Ok(g)
    }
}

impl FromIterator<(u64, String)> for Grouping {
    fn from_iter<T: IntoIterator<Item = (u64, String)>>(iter: T) -> Self {
        Self {
            assignment: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub tp: u64,
    pub fp: u64,
    pub r#fn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FMeasure {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub pairs: PairCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub group_accuracy: f64,
    pub n_logs: usize,
    pub n_groups_truth: usize,
    pub n_groups_pred: usize,
}

fn check_same_lines(truth: &Grouping, pred: &Grouping) -> Result<()> {
    if truth.assignment.len() == pred.assignment.len()
        && truth.assignment.keys().eq(pred.assignment.keys())
    {
        return Ok(());
    }
    let t: BTreeSet<u64> = truth.assignment.keys().copied().collect();
    let p: BTreeSet<u64> = pred.assignment.keys().copied().collect();
    let only_truth: Vec<u64> = t.difference(&p).copied().collect();
    let only_pred: Vec<u64> = p.difference(&t).copied().collect();
    Err(Error::Grouping(format!(
        "line sets differ: only in truth {only_truth:?}, only in prediction {only_pred:?}"
    )))
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Pair counts from group-size combinatorics.
pub fn pair_counts(truth: &Grouping, pred: &Grouping) -> Result<PairCounts> {
    check_same_lines(truth, pred)?;
    let mut truth_sizes: HashMap<&str, u64> = HashMap::new();
    let mut pred_sizes: HashMap<&str, u64> = HashMap::new();
    let mut joint: HashMap<(&str, &str), u64> = HashMap::new();
    for ((_, t), (_, p)) in truth.assignment.iter().zip(pred.assignment.iter()) {
        *truth_sizes.entry(t).or_default() += 1;
        *pred_sizes.entry(p).or_default() += 1;
        *joint.entry((t, p)).or_default() += 1;
    }
    let tp: u64 = joint.values().map(|&n| pairs(n)).sum();
    let truth_pairs: u64 = truth_sizes.values().map(|&n| pairs(n)).sum();
    let pred_pairs: u64 = pred_sizes.values().map(|&n| pairs(n)).sum();
    Ok(PairCounts {
        tp,
        fp: truth_pairs - tp,
        r#fn: pred_pairs - tp,
    })
}

pub fn f_measure(truth: &Grouping, pred: &Grouping) -> Result<FMeasure> {
    let c = pair_counts(truth, pred)?;
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.r#fn);
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(FMeasure {
        precision,
        recall,
        f,
        pairs: c,
    })
}

/// Share of logs whose predicted group has exactly the members of their
/// true group.
pub fn group_accuracy(truth: &Grouping, pred: &Grouping) -> Result<f64> {
    check_same_lines(truth, pred)?;
    if truth.is_empty() {
        return Ok(0.0);
    }
    let mut truth_sizes: HashMap<&str, usize> = HashMap::new();
    for t in truth.assignment.values() {
        *truth_sizes.entry(t).or_default() += 1;
    }
    // predicted group -> (its size, the single true label it covers, if any)
    let mut pred_groups: HashMap<&str, (usize, Option<&str>, bool)> = HashMap::new();
    for ((_, t), (_, p)) in truth.assignment.iter().zip(pred.assignment.iter()) {
        let e = pred_groups.entry(p).or_insert((0, Some(t), true));
        e.0 += 1;
        if e.1 != Some(t) {
            e.2 = false;
        }
    }
    let correct: usize = pred_groups
        .values()
        .filter(|(size, label, pure)| *pure && label.is_some_and(|l| truth_sizes[l] == *size))
        .map(|(size, _, _)| size)
        .sum();
    Ok(correct as f64 / truth.len() as f64)
}

pub fn evaluate(truth: &Grouping, pred: &Grouping) -> Result<MetricsReport> {
    let f = f_measure(truth, pred)?;
    Ok(MetricsReport {
        precision: f.precision,
        recall: f.recall,
        f_measure: f.f,
        group_accuracy: group_accuracy(truth, pred)?,
        n_logs: truth.len(),
        n_groups_truth: truth.group_count(),
        n_groups_pred: pred.group_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grouping(labels: &[&str]) -> Grouping {
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| (i as u64 + 1, l.to_string()))
            .collect()
    }

    #[test]
    fn identical_groupings_score_one() {
        let g = grouping(&["a", "a", "b", "c", "c"]);
        let f = f_measure(&g, &g).unwrap();
        assert_eq!((f.precision, f.recall, f.f), (1.0, 1.0, 1.0));
        assert_eq!(group_accuracy(&g, &g).unwrap(), 1.0);
    }

    #[test]
    fn split_group_example() {
        let truth = grouping(&["t", "t", "t"]);
        let pred = grouping(&["p", "p", "q"]);
        let f = f_measure(&truth, &pred).unwrap();
        assert_eq!(f.pairs, PairCounts { tp: 1, fp: 2, r#fn: 0 });
        assert_eq!(f.precision, 1.0 / 3.0);
        assert_eq!(f.recall, 1.0);
        assert_eq!(f.f, 0.5);
    }

    #[test]
    fn all_singletons_is_zero_without_division_error() {
        let g = grouping(&["a", "b", "c"]);
        let h = grouping(&["x", "y", "z"]);
        let f = f_measure(&g, &h).unwrap();
        assert_eq!((f.precision, f.recall, f.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn group_accuracy_examples() {
        let truth = grouping(&["a", "a", "a", "b", "b"]);
        let pred = grouping(&["x", "x", "x", "y", "z"]);
        assert_eq!(group_accuracy(&truth, &pred).unwrap(), 0.6);
        let merged = grouping(&["m"; 5]);
        assert_eq!(group_accuracy(&truth, &merged).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_lines_are_reported() {
        let a = grouping(&["a", "a"]);
        let mut b = grouping(&["a"]);
        b.insert(9, "z");
        let err = f_measure(&a, &b).unwrap_err().to_string();
        assert!(err.contains("[2]") && err.contains("[9]"), "{err}");
        assert!(group_accuracy(&a, &b).is_err());
    }

    #[test]
    fn relabeling_does_not_change_metrics() {
        let truth = grouping(&["a", "a", "b", "b", "c"]);
        let pred = grouping(&["1", "1", "1", "2", "3"]);
        let relabeled = grouping(&["z", "z", "z", "y", "x"]);
        assert_eq!(f_measure(&truth, &pred).unwrap(), f_measure(&truth, &relabeled).unwrap());
        assert_eq!(
            group_accuracy(&truth, &pred).unwrap(),
            group_accuracy(&truth, &relabeled).unwrap()
        );
    }

    #[test]
    fn csv_reader_needs_both_columns() {
        let ok = Grouping::from_csv_reader("LineId,EventId,Other\n1,E1,x\n2,E2,y\n".as_bytes()).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok.label(2), Some("E2"));
        let err = Grouping::from_csv_reader("Line,EventId\n1,E1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("LineId"));
        assert!(Grouping::from_csv_reader("LineId,EventId\n1,a\n1,b\n".as_bytes()).is_err());
    }
}
