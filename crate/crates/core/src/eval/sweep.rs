use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{mean_std, run_split, summarize, CvSpec, FoldOutcome, FOLD_STREAM};
use super::folds::{complement, stratified_holdout, stratified_kfold};
use super::metrics::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::resnet::{ArchitectureSpec, ModelConfig};
use crate::seed;
use crate::trainer::{Dataset, PseudoLabelConfig, TrainConfig};

pub const SAMPLE_RATES: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
pub const DEFAULT_FOLDS: usize = 10;
pub const VALIDATION_FRACTION: f64 = 0.2;
pub const REPORT_HEADER: &str = "cell,arch,config,sample_rate,fold,train_acc,val_acc,gap_pct,runtime_s";
const HOLDOUT_STREAM: u64 = 0x4011;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Evaluation {
    /// One stratified train/validation split.
    Holdout { fraction: f64 },
    KFold { k: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub name: String,
    pub config: ModelConfig,
    pub arch: ArchitectureSpec,
    pub sample_rate: f64,
}

impl SweepCell {
    pub fn new(config: ModelConfig, arch: ArchitectureSpec, sample_rate: f64) -> Self {
        SweepCell {
            name: format!("{}@{}", arch.name(), sample_rate),
            config,
            arch,
            sample_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub cells: Vec<SweepCell>,
    pub evaluation: Evaluation,
    pub train: TrainConfig,
    pub rounds: usize,
    pub master_seed: u64,
    pub timing: bool,
}

impl SweepSpec {
    /// The sixteen configurations on ResNet34, scored on a 20% holdout.
    pub fn config_grid(train: TrainConfig, master_seed: u64) -> Self {
        let arch = ArchitectureSpec::from_depth(34, 2).expect("ResNet34 is valid");
        SweepSpec {
            cells: ModelConfig::grid()
                .into_iter()
                .map(|c| SweepCell { name: c.name(), ..SweepCell::new(c, arch, 0.0) })
                .collect(),
            evaluation: Evaluation::Holdout { fraction: VALIDATION_FRACTION },
            train,
            rounds: 1,
            master_seed,
            timing: false,
        }
    }

    /// Eight residual depths times six sample rates, plus a supervised
    /// plain 34-layer baseline, all under k-fold cross-validation.
    pub fn architecture_grid(config: ModelConfig, train: TrainConfig, folds: usize, master_seed: u64) -> Self {
        let mut cells = Vec::new();
        for arch in ArchitectureSpec::sweep() {
            for rate in SAMPLE_RATES {
                cells.push(SweepCell::new(config, arch, rate));
            }
        }
        let plain = ArchitectureSpec::plain(34).expect("Plain34 is valid");
        cells.push(SweepCell::new(config, plain, 0.0));
        SweepSpec {
            cells,
            evaluation: Evaluation::KFold { k: folds },
            train,
            rounds: 1,
            master_seed,
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.cells {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate sweep cell {}", c.name)));
            }
        }
        match self.evaluation {
            Evaluation::KFold { k } if k < 2 => {
                Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")))
            }
            _ => Ok(()),
        }
    }

    fn cv_spec(&self, cell: &SweepCell) -> CvSpec {
        CvSpec {
            config: cell.config,
            arch: cell.arch,
            plc: PseudoLabelConfig {
                rounds: self.rounds,
                ..PseudoLabelConfig::new(cell.sample_rate, self.train.epochs)
            },
            train: self.train,
            folds: match self.evaluation {
                Evaluation::KFold { k } => k,
                Evaluation::Holdout { .. } => 1,
            },
            master_seed: self.master_seed,
            timing: self.timing,
        }
    }

    /// `(train, held-out)` index pairs shared by every cell.
    fn splits(&self, data: &Dataset) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        match self.evaluation {
            Evaluation::Holdout { fraction } => {
                let seed = seed::derive_seed(self.master_seed, HOLDOUT_STREAM);
                Ok(vec![stratified_holdout(&data.labels, fraction, seed)?])
            }
            Evaluation::KFold { k } => {
                let seed = seed::derive_seed(self.master_seed, FOLD_STREAM);
                Ok(stratified_kfold(&data.labels, k, seed)?
                    .into_iter()
                    .map(|test| (complement(data.len(), &test), test))
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub cell: String,
    pub arch: String,
    pub config: String,
    pub sample_rate: f64,
    pub fold: usize,
    pub train_acc: Option<f64>,
    pub val_acc: Option<f64>,
    pub gap_pct: Option<f64>,
    pub runtime_s: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: String,
    pub arch: String,
    pub config: String,
    pub sample_rate: f64,
    pub runs: usize,
    pub failed: Vec<FailedRun>,
    pub mean_train_acc: Option<f64>,
    pub mean_val_acc: Option<f64>,
    pub std_val_acc: Option<f64>,
    pub mean_gap_pct: Option<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<serde_json::Value>,
    pub master_seed: u64,
    pub cells: Vec<CellSummary>,
    /// Cell names by decreasing mean validation accuracy.
    pub ranking: Vec<String>,
    pub best: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<ReportRow>,
    pub summary: SweepSummary,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.cell,
                r.arch,
                r.config,
                r.sample_rate,
                r.fold,
                opt(r.train_acc),
                opt(r.val_acc),
                opt(r.gap_pct),
                r.runtime_s.map_or_else(String::new, |t| format!("{t:.3}")),
            );
        }
        out
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)? + "\n")
    }

    pub fn cell(&self, name: &str) -> Option<&CellSummary> {
        self.summary.cells.iter().find(|c| c.cell == name)
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{stem}.csv"));
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join(format!("{stem}.json"));
        std::fs::write(&json, self.summary_json()?).map_err(|e| Error::io(&json, e))
    }
}

/// Evaluates every cell of the sweep; runs execute in parallel on the
/// current rayon pool and are reported in cell then fold order.
pub fn run_sweep(spec: &SweepSpec, data: &Dataset, unlabelled: &Matrix) -> Result<SweepReport> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let splits = spec.splits(data)?;
    let tasks: Vec<(usize, usize)> = (0..spec.cells.len())
        .flat_map(|c| (0..splits.len()).map(move |f| (c, f)))
        .collect();
    let outcomes: Vec<FoldOutcome> = tasks
        .par_iter()
        .map(|&(c, f)| {
            let cv = spec.cv_spec(&spec.cells[c]);
            let (train, test) = &splits[f];
            run_split(&cv, data, unlabelled, train, test, f)
        })
        .collect();

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut cells = Vec::with_capacity(spec.cells.len());
    for (cell, chunk) in spec.cells.iter().zip(outcomes.chunks(splits.len())) {
        let (arch, config) = (cell.arch.name(), cell.config.name());
        for o in chunk {
            let r = o.report.as_ref();
            rows.push(ReportRow {
                cell: cell.name.clone(),
                arch: arch.clone(),
                config: config.clone(),
                sample_rate: cell.sample_rate,
                fold: o.fold,
                train_acc: r.and_then(|r| r.train_accuracy),
                val_acc: r.and_then(|r| r.validation_accuracy),
                gap_pct: r.and_then(|r| r.gap_pct),
                runtime_s: r.and_then(|r| r.runtime_s),
                error: o.error.clone(),
            });
        }
        let result = summarize(chunk.to_vec());
        let reports: Vec<_> = result.folds.iter().filter_map(|f| f.report.as_ref()).collect();
        let train: Vec<f64> = reports.iter().filter_map(|r| r.train_accuracy).collect();
        let gaps: Vec<f64> = reports.iter().filter_map(|r| r.gap_pct).collect();
        cells.push(CellSummary {
            cell: cell.name.clone(),
            arch,
            config,
            sample_rate: cell.sample_rate,
            runs: chunk.len(),
            failed: result
                .failures()
                .map(|f| FailedRun { fold: f.fold, error: f.error.clone().unwrap_or_default() })
                .collect(),
            mean_train_acc: mean_std(&train).0,
            mean_val_acc: result.mean_accuracy,
            std_val_acc: result.std_accuracy,
            mean_gap_pct: mean_std(&gaps).0,
            confusion: result.pooled,
        });
    }

    let mut ranked: Vec<&CellSummary> = cells.iter().filter(|c| c.mean_val_acc.is_some()).collect();
    ranked.sort_by(|a, b| b.mean_val_acc.partial_cmp(&a.mean_val_acc).unwrap_or(std::cmp::Ordering::Equal));
    let ranking: Vec<String> = ranked.iter().map(|c| c.cell.clone()).collect();
    Ok(SweepReport {
        rows,
        summary: SweepSummary {
            manifest: None,
            master_seed: spec.master_seed,
            best: ranking.first().cloned(),
            ranking,
            cells,
        },
    })
}

/// Sixteen-configuration sweep on ResNet34 with a 20% validation split.
pub fn run_config_sweep(train: TrainConfig, master_seed: u64, data: &Dataset) -> Result<SweepReport> {
    run_sweep(&SweepSpec::config_grid(train, master_seed), data, &Matrix::zeros(0, data.x.cols()))
}

/// Architecture × sample-rate sweep plus the plain baseline.
pub fn run_architecture_sweep(
    config: ModelConfig,
    train: TrainConfig,
    folds: usize,
    master_seed: u64,
    data: &Dataset,
    unlabelled: &Matrix,
) -> Result<SweepReport> {
    run_sweep(&SweepSpec::architecture_grid(config, train, folds, master_seed), data, unlabelled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::cross_validate;
    use crate::testutil::blobs_with_noise;

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 16, ..TrainConfig::default() }
    }

    #[test]
    fn grid_shapes() {
        let c = SweepSpec::config_grid(quick(1), 0);
        assert_eq!(c.cells.len(), 16);
        assert_eq!(c.cells[10].name, "c10");
        let a = SweepSpec::architecture_grid("c10".parse().unwrap(), quick(1), 10, 0);
        assert_eq!(a.cells.len(), 49);
        assert_eq!(a.cells.last().unwrap().name, "Plain34@0");
        a.validate().unwrap();
        let mut dup = a.clone();
        dup.cells.push(dup.cells[0].clone());
        assert!(dup.validate().is_err());
    }

    #[test]
    fn zero_epoch_config_sweep_is_chance_and_repeatable() {
        let data = blobs_with_noise(20, 0.5, 1);
        let r = run_config_sweep(quick(0), 5, &data).unwrap();
        assert_eq!(r.rows.len(), 16);
        assert_eq!(r.rows[0].error, None);
        assert_eq!(r.summary.ranking.len(), 16);
        for c in &r.summary.cells {
            // untrained models cannot beat a fixed guess by much on balanced classes
            assert!(c.mean_val_acc.unwrap() <= 75.0, "{}: {:?}", c.cell, c.mean_val_acc);
        }
        let again = run_config_sweep(quick(0), 5, &data).unwrap();
        assert_eq!(r.to_csv(), again.to_csv());
        assert_eq!(r.summary_json().unwrap(), again.summary_json().unwrap());
        assert!(r.to_csv().starts_with(REPORT_HEADER));
        assert!(r.rows.iter().all(|row| row.runtime_s.is_none()));
    }

    #[test]
    fn rate_zero_matches_supervised_cv() {
        let data = blobs_with_noise(10, 1.0, 2);
        let pool = blobs_with_noise(5, 1.0, 3).x;
        let config: ModelConfig = "a10".parse().unwrap();
        let arch: ArchitectureSpec = "ResNet6".parse().unwrap();
        let spec = SweepSpec {
            cells: vec![SweepCell::new(config, arch, 0.0), SweepCell::new(config, arch, 1.0)],
            evaluation: Evaluation::KFold { k: 3 },
            train: quick(3),
            rounds: 1,
            master_seed: 17,
            timing: false,
        };
        let report = run_sweep(&spec, &data, &pool).unwrap();
        assert_eq!(report.rows.len(), 6);
        let cv = cross_validate(&spec.cv_spec(&spec.cells[0]), &data, &pool).unwrap();
        let cell = report.cell("ResNet6@0").unwrap();
        assert_eq!(cell.mean_val_acc, cv.mean_accuracy);
        assert_eq!(cell.confusion, cv.pooled);
    }
}
