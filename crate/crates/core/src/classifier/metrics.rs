use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::blocks::BlockMap;
use crate::channels::ChannelSet;
use crate::error::{DociError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tp: u64,
    pub fp: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tn + self.fn_ + self.tp + self.fp
    }

    pub fn record(&mut self, truth: bool, predicted: bool) {
        match (truth, predicted) {
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
        }
    }
}

/// Four-way block tally over the shared included set.
pub fn confusion(truth: &BlockMap, predicted: &BlockMap) -> Result<ConfusionCounts> {
    if truth.included != predicted.included {
        return Err(DociError::BlockSetMismatch);
    }
    let mut counts = ConfusionCounts::default();
    for ((&inc, &t), &p) in truth
        .included
        .iter()
        .zip(truth.positive.iter())
        .zip(predicted.positive.iter())
    {
        if inc {
            counts.record(t, p);
        }
    }
    Ok(counts)
}

/// Ratios are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(counts: &ConfusionCounts) -> Metrics {
    Metrics {
        sensitivity: ratio(counts.tp, counts.tp + counts.fn_),
        specificity: ratio(counts.tn, counts.tn + counts.fp),
        accuracy: ratio(counts.tn + counts.tp, counts.total()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub channels: ChannelSet,
    pub counts: ConfusionCounts,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricsRow {
    pub fn new(channels: ChannelSet, counts: ConfusionCounts) -> Self {
        let m = metrics(&counts);
        MetricsRow {
            channels,
            counts,
            sensitivity: m.sensitivity,
            specificity: m.specificity,
            accuracy: m.accuracy,
        }
    }
}

/// Percentage with two decimals, or `undefined`.
pub fn format_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}%", 100.0 * v),
        None => "undefined".to_string(),
    }
}

pub const CSV_HEADER: &str = "Channels,TN,FN,TP,FP,Sensitivity,Specificity,Accuracy,Mode";

/// Table in the column order `Channels, TN, FN, TP, FP, Sensitivity,
/// Specificity, Accuracy`, with the evaluation mode appended to each row.
pub fn metrics_csv(rows: &[MetricsRow], mode: &str) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.channels,
            c.tn,
            c.fn_,
            c.tp,
            c.fp,
            format_percent(r.sensitivity),
            format_percent(r.specificity),
            format_percent(r.accuracy),
            mode
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn four_way_enumeration() {
        let inc = array![[true, true, true, true]];
        let truth = BlockMap {
            included: inc.clone(),
            positive: array![[true, true, false, false]],
        };
        let pred = BlockMap {
            included: inc,
            positive: array![[true, false, true, false]],
        };
        let c = confusion(&truth, &pred).unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tn: 1,
                fn_: 1,
                tp: 1,
                fp: 1
            }
        );
    }

    #[test]
    fn all_positive() {
        let inc = array![[true, true], [true, false]];
        let b = BlockMap {
            included: inc.clone(),
            positive: array![[true, true], [true, true]],
        };
        let c = confusion(&b, &b).unwrap();
        assert_eq!(c.tp, 3);
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn mismatched_sets() {
        let a = BlockMap {
            included: array![[true, false]],
            positive: array![[false, false]],
        };
        let b = BlockMap {
            included: array![[true, true]],
            positive: array![[false, false]],
        };
        assert!(matches!(
            confusion(&a, &b),
            Err(DociError::BlockSetMismatch)
        ));
    }

    #[test]
    fn undefined_ratios() {
        let m = metrics(&ConfusionCounts {
            tn: 5,
            fn_: 0,
            tp: 0,
            fp: 1,
        });
        assert_eq!(m.sensitivity, None);
        assert_eq!(format_percent(m.sensitivity), "undefined");
        assert!((m.specificity.unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn csv_shape() {
        let row = MetricsRow::new(
            ChannelSet::all(),
            ConfusionCounts {
                tn: 1269,
                fn_: 178,
                tp: 2009,
                fp: 235,
            },
        );
        let csv = metrics_csv(&[row], "resubstitution");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "[2 - 10],1269,178,2009,235,91.86%,84.38%,88.81%,resubstitution"
        );
    }
}
