use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{complement, stratified_kfold};
use super::metrics::{confusion, metrics, ConfusionMatrix, MetricsReport};
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::resnet::{ArchitectureSpec, Model, ModelConfig};
use crate::seed;
use crate::trainer::{evaluate_loss, train_semisupervised, Dataset, PseudoLabelConfig, TrainConfig};

pub(crate) const FOLD_STREAM: u64 = 0xF01D;
const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;

/// One model/training setup evaluated by cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub config: ModelConfig,
    pub arch: ArchitectureSpec,
    pub plc: PseudoLabelConfig,
    pub train: TrainConfig,
    pub folds: usize,
    pub master_seed: u64,
    /// Record wall-clock seconds per fold (makes reports non-reproducible).
    pub timing: bool,
}

impl CvSpec {
    /// Runs with the same architecture and configuration share seeds
    /// regardless of sample rate.
    pub fn cell_key(&self) -> u64 {
        seed::name_key(&format!("{}/{}", self.arch.name(), self.config.name()))
    }

    pub fn fold_seed(&self, fold: usize) -> u64 {
        seed::run_seed(self.master_seed, self.cell_key(), fold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<FoldOutcome>,
    /// Sum of the confusion matrices of all successful folds.
    pub pooled: ConfusionMatrix,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
}

impl CvResult {
    pub fn failures(&self) -> impl Iterator<Item = &FoldOutcome> {
        self.folds.iter().filter(|f| f.error.is_some())
    }
}

/// Mean and sample standard deviation; `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

/// Trains the model of one fold: normalization is fitted on `train_idx` only.
pub fn train_fold(
    spec: &CvSpec,
    data: &Dataset,
    unlabelled: &Matrix,
    train_idx: &[usize],
    fold: usize,
) -> Result<Model> {
    let run = spec.fold_seed(fold);
    let mut model = Model::build(spec.config, spec.arch, seed::derive_seed(run, INIT_STREAM))?;
    let train = data.subset(train_idx);
    model.fit_normalization(&train.x)?;
    let tc = TrainConfig {
        seed: seed::derive_seed(run, TRAIN_STREAM),
        ..spec.train
    };
    train_semisupervised(&mut model, &train, unlabelled, &spec.plc, &tc, None)?;
    Ok(model)
}

fn evaluate_split(
    spec: &CvSpec,
    data: &Dataset,
    unlabelled: &Matrix,
    train_idx: &[usize],
    test_idx: &[usize],
    fold: usize,
) -> Result<MetricsReport> {
    if test_idx.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let started = Instant::now();
    let model = train_fold(spec, data, unlabelled, train_idx, fold)?;
    let (_, train_acc) = evaluate_loss(&model, &data.subset(train_idx))?;
    let test = data.subset(test_idx);
    let predicted = model.predict(&test.x)?;
    let mut report = metrics(&confusion(&test.labels, &predicted)?).with_train_accuracy(100.0 * train_acc);
    if spec.timing {
        report.runtime_s = Some(started.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// Trains on `train_idx`, evaluates on `test_idx` and captures any failure.
pub(crate) fn run_split(
    spec: &CvSpec,
    data: &Dataset,
    unlabelled: &Matrix,
    train_idx: &[usize],
    test_idx: &[usize],
    fold: usize,
) -> FoldOutcome {
    match evaluate_split(spec, data, unlabelled, train_idx, test_idx, fold) {
        Ok(report) => FoldOutcome { fold, report: Some(report), error: None },
        Err(e) => FoldOutcome { fold, report: None, error: Some(e.to_string()) },
    }
}

pub(crate) fn summarize(folds: Vec<FoldOutcome>) -> CvResult {
    let mut pooled = ConfusionMatrix::default();
    let mut accs = Vec::new();
    for r in folds.iter().filter_map(|f| f.report.as_ref()) {
        pooled.merge(&r.confusion);
        accs.extend(r.accuracy);
    }
    let (mean_accuracy, std_accuracy) = mean_std(&accs);
    CvResult { folds, pooled, mean_accuracy, std_accuracy }
}

/// Stratified k-fold cross-validation. The unlabelled pool is shared by
/// all folds; folds run in parallel on the current rayon pool.
pub fn cross_validate(spec: &CvSpec, data: &Dataset, unlabelled: &Matrix) -> Result<CvResult> {
    if spec.folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", spec.folds)));
    }
    let folds = stratified_kfold(&data.labels, spec.folds, seed::derive_seed(spec.master_seed, FOLD_STREAM))?;
    cross_validate_with_folds(spec, data, unlabelled, &folds)
}

/// Cross-validation over caller-supplied held-out folds.
pub fn cross_validate_with_folds(
    spec: &CvSpec,
    data: &Dataset,
    unlabelled: &Matrix,
    folds: &[Vec<usize>],
) -> Result<CvResult> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let outcomes = folds
        .par_iter()
        .enumerate()
        .map(|(i, test)| run_split(spec, data, unlabelled, &complement(data.len(), test), test, i))
        .collect();
    Ok(summarize(outcomes))
}

/// Runs `f` on a rayon pool of `jobs` threads (0 = rayon default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
