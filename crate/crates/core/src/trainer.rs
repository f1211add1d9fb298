//! Supervised and pseudo-label semi-supervised training.
//!
//! Semi-supervised runs draw a sample of the unlabelled pool, label it with
//! the current model's argmax predictions and minimize
//!
//! ```text
//! L = (1/n) Σ_batches CE(labelled) + α(t) · (1/n') Σ_batches CE(pseudo-labelled)
//! ```
//!
//! where `α(t)` ramps linearly from 0 to `alpha_f` between epochs `T1` and
//! `T2`. While `α(t) = 0` the pseudo-labelled stream is skipped outright, so
//! those epochs are exactly supervised epochs.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::TravelMode;
use crate::nn::{one_hot, softmax_xent, AdamConfig, AdamState, Matrix, Phase};
use crate::resnet::{labels_from_proba, Gradients, Model};
use crate::seed::{self, Rng};

pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_EPOCHS: usize = 200;
const SAMPLING_STREAM: u64 = 0x5A3B;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            adam: AdamConfig::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

/// Balancing coefficient of the pseudo-labelled loss term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub t1: f64,
    pub t2: f64,
    pub alpha_f: f64,
}

impl AlphaSchedule {
    /// Ramp from 10% to 60% of training up to 3.0.
    pub fn for_epochs(epochs: usize) -> Self {
        let epochs = epochs.max(1);
        AlphaSchedule {
            t1: 0.1 * epochs as f64,
            t2: 0.6 * epochs as f64,
            alpha_f: 3.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 >= 0.0 && self.t1 < self.t2 && self.alpha_f >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha schedule needs 0 <= T1 < T2 and alpha_f >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn alpha(&self, epoch: usize) -> f64 {
        let t = epoch as f64;
        if t < self.t1 {
            0.0
        } else if t < self.t2 {
            self.alpha_f * (t - self.t1) / (self.t2 - self.t1)
        } else {
            self.alpha_f
        }
    }
}

/// When pseudo-labels are recomputed from the current model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PseudoRefresh {
    /// Once for the whole sampled pool at the start of every epoch.
    #[default]
    PerEpoch,
    /// For each pseudo-labelled batch right before its weight update.
    PerUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelConfig {
    pub sample_rate: f64,
    pub schedule: AlphaSchedule,
    pub rounds: usize,
    pub refresh: PseudoRefresh,
}

impl PseudoLabelConfig {
    pub fn new(sample_rate: f64, epochs: usize) -> Self {
        PseudoLabelConfig {
            sample_rate,
            schedule: AlphaSchedule::for_epochs(epochs),
            rounds: 1,
            refresh: PseudoRefresh::PerEpoch,
        }
    }

    pub fn supervised() -> Self {
        Self::new(0.0, DEFAULT_EPOCHS)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sample_rate) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must lie in [0, 1], got {}",
                self.sample_rate
            )));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidArgument("rounds must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Raw feature rows with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub labels: Vec<TravelMode>,
}

impl Dataset {
    pub fn new(x: Matrix, labels: Vec<TravelMode>) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(Error::shape("Dataset", x.rows(), labels.len()));
        }
        Ok(Dataset { x, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<EpochRecord>,
}

impl TrainTrace {
    pub fn train_records(&self) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter(|r| r.split == Split::Train)
    }

    pub fn final_train_loss(&self) -> Option<f64> {
        self.train_records().last().map(|r| r.loss)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,split,loss,accuracy,alpha\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.split.as_str(),
                r.loss,
                r.accuracy,
                r.alpha
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Value and logit gradients of the combined labelled + pseudo-labelled loss.
#[derive(Debug, Clone)]
pub struct CombinedLoss {
    pub total: f64,
    pub supervised: f64,
    pub unsupervised: f64,
    pub alpha: f64,
    /// Gradient w.r.t. each labelled batch's logits, already scaled by `1/n`.
    pub labelled_grads: Vec<Matrix>,
    /// Gradient w.r.t. each pseudo batch's logits, scaled by `α/n'`.
    pub pseudo_grads: Vec<Matrix>,
}

/// Evaluates the combined loss over `(logits, one-hot targets)` batches.
pub fn combined_loss(
    labelled: &[(Matrix, Matrix)],
    pseudo: &[(Matrix, Matrix)],
    epoch: usize,
    schedule: &AlphaSchedule,
) -> Result<CombinedLoss> {
    if labelled.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let alpha = schedule.alpha(epoch);
    let n = labelled.len() as f64;
    let mut supervised = 0.0;
    let mut labelled_grads = Vec::with_capacity(labelled.len());
    for (logits, targets) in labelled {
        let (loss, mut g) = softmax_xent(logits, targets)?;
        supervised += loss;
        g.data_mut().iter_mut().for_each(|v| *v /= n);
        labelled_grads.push(g);
    }
    supervised /= n;

    let mut unsupervised = 0.0;
    let mut pseudo_grads = Vec::with_capacity(pseudo.len());
    if !pseudo.is_empty() {
        let n_p = pseudo.len() as f64;
        for (logits, targets) in pseudo {
            let (loss, mut g) = softmax_xent(logits, targets)?;
            unsupervised += loss;
            g.data_mut().iter_mut().for_each(|v| *v *= alpha / n_p);
            pseudo_grads.push(g);
        }
        unsupervised /= n_p;
    }
    let total = if pseudo.is_empty() {
        supervised
    } else {
        supervised + alpha * unsupervised
    };
    Ok(CombinedLoss {
        total,
        supervised,
        unsupervised,
        alpha,
        labelled_grads,
        pseudo_grads,
    })
}

/// Argmax of the eval-mode class probabilities for every raw row.
pub fn pseudo_label_assign(model: &Model, unlabelled: &Matrix) -> Result<Vec<TravelMode>> {
    if unlabelled.rows() == 0 {
        return Ok(Vec::new());
    }
    model.predict(unlabelled)
}

/// Shuffled mini-batch index lists. A trailing batch of one row is folded
/// into the previous batch so batch normalization always sees two rows.
fn batches(n: usize, batch_size: usize, shuffle: bool, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        order.shuffle(rng);
    }
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let tail = out.pop().unwrap();
        out.last_mut().unwrap().extend(tail);
    }
    out
}

fn add_grads(acc: &mut Gradients, other: Gradients) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

fn matches(logits: &Matrix, labels: &[TravelMode]) -> usize {
    logits
        .argmax_rows()
        .into_iter()
        .zip(labels)
        .filter(|(p, l)| *p == l.index())
        .count()
}

/// Eval-mode mean cross-entropy and accuracy of `model` on raw data.
pub fn evaluate_loss(model: &Model, data: &Dataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let logits = model.logits(&data.x)?;
    let (loss, _) = softmax_xent(&logits, &one_hot(&data.labels))?;
    Ok((loss, matches(&logits, &data.labels) as f64 / data.len() as f64))
}

struct Loop<'a> {
    model: &'a mut Model,
    adam: AdamState,
    rng: Rng,
    cfg: TrainConfig,
    x: Matrix,
    labels: &'a [TravelMode],
    targets: Matrix,
    validation: Option<&'a Dataset>,
    trace: TrainTrace,
}

impl<'a> Loop<'a> {
    fn new(
        model: &'a mut Model,
        data: &'a Dataset,
        cfg: &TrainConfig,
        validation: Option<&'a Dataset>,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if cfg.batch_size == 0 || (model.config.use_batchnorm && cfg.batch_size < 2) {
            return Err(Error::InvalidArgument(format!(
                "batch size {} is too small for this model",
                cfg.batch_size
            )));
        }
        let x = model.normalize(&data.x)?;
        let adam = AdamState::new(cfg.adam, &model.parameter_sizes());
        Ok(Loop {
            model,
            adam,
            rng: seed::rng(cfg.seed),
            cfg: *cfg,
            x,
            labels: &data.labels,
            targets: one_hot(&data.labels),
            validation,
            trace: TrainTrace::default(),
        })
    }

    fn apply(&mut self, grads: &Gradients) -> Result<()> {
        let mut params = self.model.parameters_mut();
        self.adam.step(&mut params, grads)
    }

    /// One epoch; `pseudo` holds the normalized pool and its per-epoch labels.
    fn epoch(
        &mut self,
        epoch: usize,
        schedule: &AlphaSchedule,
        pseudo: Option<(&Matrix, Option<&Matrix>)>,
    ) -> Result<()> {
        let alpha = schedule.alpha(epoch);
        let lab_batches = batches(self.x.rows(), self.cfg.batch_size, self.cfg.shuffle, &mut self.rng);
        let pseudo = pseudo.filter(|(px, _)| alpha > 0.0 && px.rows() > 0);
        let pseudo_batches = match pseudo {
            Some((px, _)) => batches(px.rows(), self.cfg.batch_size, self.cfg.shuffle, &mut self.rng),
            None => Vec::new(),
        };
        let steps = lab_batches.len().max(pseudo_batches.len());

        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        for step in 0..steps {
            let idx = &lab_batches[step % lab_batches.len()];
            let xb = self.x.select_rows(idx);
            let yb = self.targets.select_rows(idx);
            let (logits, cache) = self.model.forward(&xb, Phase::Train, Some(&mut self.rng))?;
            let labels: Vec<TravelMode> = idx.iter().map(|&i| self.labels[i]).collect();
            correct += matches(&logits, &labels);
            seen += idx.len();

            let mut pseudo_pass = None;
            if let Some((px, fixed)) = pseudo {
                let pidx = &pseudo_batches[step % pseudo_batches.len()];
                let pxb = px.select_rows(pidx);
                let pyb = match fixed {
                    Some(targets) => targets.select_rows(pidx),
                    None => {
                        let eval = self.model.forward(&pxb, Phase::Eval, None)?.0;
                        let labels = labels_from_proba(&eval);
                        one_hot(&labels)
                    }
                };
                let (plogits, pcache) = self.model.forward(&pxb, Phase::Train, Some(&mut self.rng))?;
                pseudo_pass = Some((plogits, pyb, pcache));
            }

            let lab = [(logits, yb)];
            let (combined, grads) = match &pseudo_pass {
                Some((plogits, pyb, pcache)) => {
                    let ps = [(plogits.clone(), pyb.clone())];
                    let c = combined_loss(&lab, &ps, epoch, schedule)?;
                    let mut g = self.model.backward(&cache, &c.labelled_grads[0])?;
                    add_grads(&mut g, self.model.backward(pcache, &c.pseudo_grads[0])?);
                    (c, g)
                }
                None => {
                    let c = combined_loss(&lab, &[], epoch, schedule)?;
                    let g = self.model.backward(&cache, &c.labelled_grads[0])?;
                    (c, g)
                }
            };
            loss_sum += combined.total;
            self.apply(&grads)?;
            self.model.commit_batch_stats(&cache);
            if let Some((_, _, pcache)) = &pseudo_pass {
                self.model.commit_batch_stats(pcache);
            }
        }

        self.trace.records.push(EpochRecord {
            epoch,
            split: Split::Train,
            loss: loss_sum / steps as f64,
            accuracy: correct as f64 / seen as f64,
            alpha: if pseudo.is_some() { alpha } else { 0.0 },
        });
        if let Some(val) = self.validation {
            let (loss, accuracy) = evaluate_loss(self.model, val)?;
            self.trace.records.push(EpochRecord {
                epoch,
                split: Split::Validation,
                loss,
                accuracy,
                alpha: if pseudo.is_some() { alpha } else { 0.0 },
            });
        }
        Ok(())
    }
}

/// Trains on labelled raw features; the model's stored normalization is applied.
pub fn train_supervised(
    model: &mut Model,
    data: &Dataset,
    cfg: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<TrainTrace> {
    let mut lp = Loop::new(model, data, cfg, validation)?;
    let never = AlphaSchedule {
        t1: f64::INFINITY,
        t2: f64::INFINITY,
        alpha_f: 0.0,
    };
    for epoch in 0..cfg.epochs {
        lp.epoch(epoch, &never, None)?;
    }
    Ok(lp.trace)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SemiSupervisedOutcome {
    pub trace: TrainTrace,
    /// Unlabelled row indices drawn in each round.
    pub pools: Vec<Vec<usize>>,
}

/// Pseudo-label training over `rounds` disjoint samples of the unlabelled pool.
///
/// Each round draws `⌈rate·|pool|⌉` unused rows and trains for `cfg.epochs`
/// epochs; α is evaluated on the global epoch counter. A zero rate or an
/// empty pool reduces to [`train_supervised`].
pub fn train_semisupervised(
    model: &mut Model,
    labelled: &Dataset,
    unlabelled: &Matrix,
    plc: &PseudoLabelConfig,
    cfg: &TrainConfig,
    validation: Option<&Dataset>,
) -> Result<SemiSupervisedOutcome> {
    plc.validate()?;
    if plc.sample_rate == 0.0 || unlabelled.rows() == 0 {
        return Ok(SemiSupervisedOutcome {
            trace: train_supervised(model, labelled, cfg, validation)?,
            pools: Vec::new(),
        });
    }
    let pool_x = model.normalize(unlabelled)?;
    let mut sampler = seed::rng(seed::derive_seed(cfg.seed, SAMPLING_STREAM));
    let mut order: Vec<usize> = (0..unlabelled.rows()).collect();
    order.shuffle(&mut sampler);
    let size = ((plc.sample_rate * unlabelled.rows() as f64).ceil() as usize).max(1);

    let mut pools = Vec::new();
    let mut lp = Loop::new(model, labelled, cfg, validation)?;
    for round in 0..plc.rounds {
        let start = round * size;
        if start >= order.len() {
            break;
        }
        let pool: Vec<usize> = order[start..(start + size).min(order.len())].to_vec();
        let px = pool_x.select_rows(&pool);
        for e in 0..cfg.epochs {
            let epoch = round * cfg.epochs + e;
            let targets = if plc.schedule.alpha(epoch) > 0.0 && plc.refresh == PseudoRefresh::PerEpoch {
                let logits = lp.model.forward(&px, Phase::Eval, None)?.0;
                Some(one_hot(&labels_from_proba(&logits)))
            } else {
                None
            };
            lp.epoch(epoch, &plc.schedule, Some((&px, targets.as_ref())))?;
        }
        pools.push(pool);
    }
    Ok(SemiSupervisedOutcome {
        trace: lp.trace,
        pools,
    })
}


#[cfg(test)]
mod training_tests {
    use super::*;
    use crate::resnet::ArchitectureSpec;
    use crate::testutil::blobs;

    fn small(config: &str) -> Model {
        Model::build(config.parse().unwrap(), ArchitectureSpec::from_depth(6, 2).unwrap(), 3).unwrap()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 16, seed: 11, ..TrainConfig::default() }
    }

    #[test]
    fn zero_learning_rate_freezes_weights() {
        let data = blobs(20, 1);
        let mut m = small("a11");
        m.fit_normalization(&data.x).unwrap();
        let before = m.clone();
        let c = TrainConfig { adam: AdamConfig { lr: 0.0, ..AdamConfig::default() }, ..cfg(3) };
        train_supervised(&mut m, &data, &c, None).unwrap();
        for ((name, a), (_, b)) in before.named_tensors().into_iter().zip(m.named_tensors()) {
            if !name.contains("running") {
                assert_eq!(a, b, "{name}");
            }
        }
    }

    #[test]
    fn fits_separable_blobs() {
        let data = blobs(40, 2);
        let mut m = small("a10");
        m.fit_normalization(&data.x).unwrap();
        let trace = train_supervised(&mut m, &data, &cfg(40), None).unwrap();
        let (_, acc) = evaluate_loss(&m, &data).unwrap();
        assert!(acc >= 0.99, "accuracy {acc}");
        let losses: Vec<f64> = trace.train_records().map(|r| r.loss).collect();
        assert!(losses.last().unwrap() < &losses[0]);
    }

    #[test]
    fn same_seed_same_run() {
        let data = blobs(15, 3);
        let run = || {
            let mut m = small("b11");
            m.fit_normalization(&data.x).unwrap();
            let t = train_supervised(&mut m, &data, &cfg(4), Some(&data)).unwrap();
            (m, t)
        };
        let (m1, t1) = run();
        let (m2, t2) = run();
        assert_eq!(t1, t2);
        assert_eq!(m1, m2);
        assert_eq!(t1.to_csv().lines().count(), 1 + 8);
    }

    #[test]
    fn pseudo_labels_match_argmax() {
        let data = blobs(10, 4);
        let mut m = small("a10");
        m.fit_normalization(&data.x).unwrap();
        let assigned = pseudo_label_assign(&m, &data.x).unwrap();
        let proba = m.predict_proba(&data.x).unwrap();
        for (i, label) in assigned.iter().enumerate() {
            let row = proba.row(i);
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            assert_eq!(label.index(), best);
        }
    }

    #[test]
    fn zero_alpha_reproduces_supervised() {
        let data = blobs(12, 5);
        let pool = blobs(30, 6).x;
        let base = {
            let mut m = small("a11");
            m.fit_normalization(&data.x).unwrap();
            m
        };
        let mut sup = base.clone();
        let t_sup = train_supervised(&mut sup, &data, &cfg(5), None).unwrap();

        // rate zero
        let mut semi = base.clone();
        let plc = PseudoLabelConfig::new(0.0, 5);
        let out = train_semisupervised(&mut semi, &data, &pool, &plc, &cfg(5), None).unwrap();
        assert_eq!(out.trace, t_sup);
        assert_eq!(semi, sup);

        // alpha never leaves zero within the run
        let mut late = base.clone();
        let plc = PseudoLabelConfig {
            schedule: AlphaSchedule { t1: 10.0, t2: 20.0, alpha_f: 3.0 },
            ..PseudoLabelConfig::new(0.5, 5)
        };
        let out = train_semisupervised(&mut late, &data, &pool, &plc, &cfg(5), None).unwrap();
        assert_eq!(out.trace.final_train_loss(), t_sup.final_train_loss());
        assert_eq!(late, sup);
        assert_eq!(out.pools[0].len(), 45);
    }

    #[test]
    fn rounds_draw_disjoint_pools() {
        let data = blobs(8, 7);
        let pool = blobs(10, 8).x;
        let mut m = small("a00");
        m.fit_normalization(&data.x).unwrap();
        let plc = PseudoLabelConfig { rounds: 5, refresh: PseudoRefresh::PerUpdate, ..PseudoLabelConfig::new(0.3, 2) };
        let out = train_semisupervised(&mut m, &data, &pool, &plc, &cfg(2), None).unwrap();
        let sizes: Vec<usize> = out.pools.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![9, 9, 9, 3]);
        let mut all: Vec<usize> = out.pools.concat();
        all.sort_unstable();
        assert_eq!(all, (0..30).collect::<Vec<_>>());
        assert_eq!(out.trace.records.len(), 8);
        assert!(out.trace.records.iter().any(|r| r.alpha > 0.0));
    }
}
