//! Set-based classification metrics and first-layer weight attribution.
//!
//! Predictions and gold labels are class-index sets, one per example. A class
//! with no true positives, false positives or false negatives has F1 = 1 by
//! convention, which also covers the degenerate micro average.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifyError, Mlp};
use crate::represent::Segment;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Per-class true/false positive and false negative counts.
pub fn class_counts(pred: &[Vec<usize>], gold: &[Vec<usize>], classes: usize) -> Vec<Counts> {
    assert_eq!(pred.len(), gold.len(), "one prediction per gold set");
    let mut counts = vec![Counts::default(); classes];
    for (p, g) in pred.iter().zip(gold) {
        let (p, g) = (sorted(p), sorted(g));
        for &c in &p {
            if g.binary_search(&c).is_ok() {
                counts[c].tp += 1;
            } else {
                counts[c].fp += 1;
            }
        }
        for &c in &g {
            if p.binary_search(&c).is_err() {
                counts[c].fn_ += 1;
            }
        }
    }
    counts
}

/// Exact-set-match rate (subset accuracy).
pub fn accuracy(pred: &[Vec<usize>], gold: &[Vec<usize>]) -> f64 {
    assert_eq!(pred.len(), gold.len(), "one prediction per gold set");
    let hits = pred.iter().zip(gold).filter(|(p, g)| sorted(p) == sorted(g)).count();
    ratio(hits, pred.len())
}

pub fn micro_f1(pred: &[Vec<usize>], gold: &[Vec<usize>], classes: usize) -> f64 {
    let total = class_counts(pred, gold, classes)
        .into_iter()
        .fold(Counts::default(), |a, c| Counts {
            tp: a.tp + c.tp,
            fp: a.fp + c.fp,
            fn_: a.fn_ + c.fn_,
        });
    total.f1()
}

pub fn macro_f1(pred: &[Vec<usize>], gold: &[Vec<usize>], classes: usize) -> f64 {
    if classes == 0 {
        return 1.0;
    }
    let counts = class_counts(pred, gold, classes);
    counts.iter().map(Counts::f1).sum::<f64>() / classes as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub examples: usize,
    pub per_class: Vec<ClassMetrics>,
}

pub fn evaluate(pred: &[Vec<usize>], gold: &[Vec<usize>], class_names: &[String]) -> Metrics {
    let n = class_names.len();
    let counts = class_counts(pred, gold, n);
    let per_class = class_names
        .iter()
        .zip(&counts)
        .map(|(name, c)| ClassMetrics {
            class: name.clone(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            support: c.tp + c.fn_,
            counts: *c,
        })
        .collect();
    Metrics {
        accuracy: accuracy(pred, gold),
        micro_f1: micro_f1(pred, gold, n),
        macro_f1: macro_f1(pred, gold, n),
        examples: pred.len(),
        per_class,
    }
}

/// Share of first-layer absolute weight attributed to each input segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightReport {
    pub epoch: usize,
    pub fractions: BTreeMap<String, f64>,
}

impl WeightReport {
    pub fn fraction(&self, name: &str) -> Option<f64> {
        self.fractions.get(name).copied()
    }
}

/// Sum `|w|` over first-layer weights grouped by the segment their input
/// coordinate falls in, normalised by the total. An all-zero layer is split
/// by segment width.
pub fn weight_group_analysis(
    m: &Mlp,
    segments: &[Segment],
    epoch: usize,
) -> Result<WeightReport, ClassifyError> {
    let span: usize = segments.iter().map(|s| s.len).sum();
    if span != m.input_dim() {
        return Err(ClassifyError::DimMismatch {
            expected: m.input_dim(),
            found: span,
        });
    }
    let w = &m.layers[0].weights;
    let sums: Vec<f64> = segments
        .iter()
        .map(|s| {
            w.rows()
                .into_iter()
                .skip(s.offset)
                .take(s.len)
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .sum()
        })
        .collect();
    let total: f64 = sums.iter().sum();
    let fractions = segments
        .iter()
        .zip(&sums)
        .map(|(s, &sum)| {
            let f = if total > 0.0 {
                sum / total
            } else {
                s.len as f64 / span as f64
            };
            (s.name.clone(), f)
        })
        .collect();
    Ok(WeightReport { epoch, fractions })
}
