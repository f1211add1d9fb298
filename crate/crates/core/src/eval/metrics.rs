use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::{TravelMode, NUM_CLASSES};

/// Counts with rows = actual class and columns = predicted class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

pub fn confusion(actual: &[TravelMode], predicted: &[TravelMode]) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::shape("confusion", actual.len(), predicted.len()));
    }
    let mut cm = ConfusionMatrix::default();
    for (a, p) in actual.iter().zip(predicted) {
        cm.counts[a.index()][p.index()] += 1;
    }
    Ok(cm)
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// Recall in percent; `None` for a class that never occurs.
    pub fn recall(&self, class: TravelMode) -> Option<f64> {
        let i = class.index();
        ratio(self.counts[i][i], self.row_sum(i))
    }

    /// Precision in percent; `None` for a class that is never predicted.
    pub fn precision(&self, class: TravelMode) -> Option<f64> {
        let j = class.index();
        ratio(self.counts[j][j], self.col_sum(j))
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.correct(), self.total())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..NUM_CLASSES {
            for j in 0..NUM_CLASSES {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}

/// Percentage with one decimal, or `n/a`.
pub fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}"))
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<10}", "")?;
        for m in TravelMode::ALL {
            write!(f, "{:>10}", m.to_string())?;
        }
        writeln!(f, "{:>10}", "Recall%")?;
        for a in TravelMode::ALL {
            write!(f, "{:<10}", a.to_string())?;
            for p in TravelMode::ALL {
                write!(f, "{:>10}", self.counts[a.index()][p.index()])?;
            }
            writeln!(f, "{:>10}", fmt_pct(self.recall(a)))?;
        }
        write!(f, "{:<10}", "Precision")?;
        for p in TravelMode::ALL {
            write!(f, "{:>10}", fmt_pct(self.precision(p)))?;
        }
        writeln!(f, "{:>10}", fmt_pct(self.accuracy()))
    }
}

/// Metrics of one evaluation. Percentages keep full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub recall: [Option<f64>; NUM_CLASSES],
    pub precision: [Option<f64>; NUM_CLASSES],
    pub accuracy: Option<f64>,
    pub train_accuracy: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub gap_pct: Option<f64>,
    pub runtime_s: Option<f64>,
}

/// Derived metrics of a confusion matrix; train/validation fields are unset.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    MetricsReport {
        confusion: *cm,
        recall: TravelMode::ALL.map(|m| cm.recall(m)),
        precision: TravelMode::ALL.map(|m| cm.precision(m)),
        accuracy: cm.accuracy(),
        train_accuracy: None,
        validation_accuracy: None,
        gap_pct: None,
        runtime_s: None,
    }
}

impl MetricsReport {
    /// Records train accuracy; the held-out accuracy is this report's accuracy.
    pub fn with_train_accuracy(mut self, train: f64) -> Self {
        self.train_accuracy = Some(train);
        self.validation_accuracy = self.accuracy;
        self.gap_pct = self.accuracy.map(|v| train - v);
        self
    }
}
