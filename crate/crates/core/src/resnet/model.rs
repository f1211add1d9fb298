use super::{ArchitectureSpec, ModelConfig};
use crate::error::{Error, Result};
use crate::features::{NormalizationStats, NUM_FEATURES};
use crate::mode::{TravelMode, NUM_CLASSES};
use crate::nn::{
    dropout_backward, dropout_forward, relu_backward, relu_forward, softmax, softmax_xent,
    BatchNorm, BatchNormCache, DenseParams, Differentiable, DropoutMask, Matrix, Phase,
};
use crate::seed::{self, Rng};

/// One gradient tensor per parameter tensor, in [`Model::parameters_mut`] order.
pub type Gradients = Vec<Vec<f64>>;

const INIT_STREAM: u64 = 0x1417;

/// Dense layer with optional batch normalization ahead of its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub dense: DenseParams,
    pub bn: Option<BatchNorm>,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    input: Matrix,
    bn: Option<BatchNormCache>,
    /// BN input of an eval-mode pass.
    bn_eval_input: Option<Matrix>,
    /// Activation input, kept only when a ReLU follows.
    pre_activation: Option<Matrix>,
    mask: Option<DropoutMask>,
}

/// Dropout settings for one forward pass. `None` rng disables dropout.
struct Dropout<'a> {
    rate: f64,
    rng: Option<&'a mut Rng>,
}

impl Layer {
    fn forward(
        &self,
        x: &Matrix,
        activate: bool,
        phase: Phase,
        dropout: &mut Dropout<'_>,
    ) -> Result<(Matrix, LayerCache)> {
        let mut z = self.dense.forward(x)?;
        let mut bn_cache = None;
        let mut bn_eval_input = None;
        if let Some(bn) = &self.bn {
            z = match phase {
                Phase::Train => {
                    let (out, cache) = bn.forward_batch(&z)?;
                    bn_cache = Some(cache);
                    out
                }
                Phase::Eval => {
                    let out = bn.forward_running(&z)?;
                    bn_eval_input = Some(z);
                    out
                }
            };
        }
        let mut cache = LayerCache {
            input: x.clone(),
            bn: bn_cache,
            bn_eval_input,
            pre_activation: None,
            mask: None,
        };
        if !activate {
            return Ok((z, cache));
        }
        let mut h = relu_forward(&z);
        cache.pre_activation = Some(z);
        if let Some(rng) = dropout.rng.as_deref_mut() {
            let (dropped, mask) = dropout_forward(&h, dropout.rate, phase, rng)?;
            h = dropped;
            cache.mask = mask;
        }
        Ok((h, cache))
    }

    fn backward(&self, cache: &LayerCache, d_out: &Matrix, grads: &mut Vec<Vec<f64>>) -> Result<Matrix> {
        let mut d = d_out.clone();
        if let Some(pre) = &cache.pre_activation {
            d = dropout_backward(cache.mask.as_ref(), &d);
            d = relu_backward(pre, &d);
        }
        let mut bn_grads = None;
        if let Some(bn) = &self.bn {
            let (dz, dg, db) = match (&cache.bn, &cache.bn_eval_input) {
                (Some(bc), _) => bn.backward(bc, &d),
                (None, Some(z)) => bn.backward_running(z, &d),
                (None, None) => {
                    return Err(Error::InvalidArgument("layer cache lacks batch-norm state".into()));
                }
            };
            d = dz;
            bn_grads = Some((dg, db));
        }
        let dense = self.dense.backward(&cache.input, &d)?;
        grads.push(dense.d_weight.into_vec());
        grads.push(dense.d_bias);
        if let Some((dg, db)) = bn_grads {
            grads.push(dg);
            grads.push(db);
        }
        Ok(dense.d_input)
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![self.dense.weight.data_mut(), &mut self.dense.bias];
        if let Some(bn) = &mut self.bn {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        out
    }
}

/// Two or three dense layers wrapped by an identity shortcut.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub layers: Vec<Layer>,
}

impl Block {
    fn forward_cached(
        &self,
        x: &Matrix,
        residual: bool,
        phase: Phase,
        dropout: &mut Dropout<'_>,
    ) -> Result<(Matrix, Vec<LayerCache>)> {
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        let last = self.layers.len() - 1;
        for (j, layer) in self.layers.iter().enumerate() {
            // The last layer's output feeds the sum raw; plain stacks activate it.
            let activate = j < last || !residual;
            let (out, cache) = layer.forward(&h, activate, phase, dropout)?;
            h = out;
            caches.push(cache);
        }
        if residual {
            h.add_assign(x);
        }
        Ok((h, caches))
    }

    /// `y = f(x) + x` where `f` is the layer stack (dropout disabled).
    pub fn forward(&self, x: &Matrix, residual: bool, phase: Phase) -> Result<Matrix> {
        let mut off = Dropout { rate: 0.0, rng: None };
        Ok(self.forward_cached(x, residual, phase, &mut off)?.0)
    }

    /// The residual branch `f(x)` alone.
    pub fn branch(&self, x: &Matrix, phase: Phase) -> Result<Matrix> {
        let mut off = Dropout { rate: 0.0, rng: None };
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (j, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h, j < last, phase, &mut off)?.0;
        }
        Ok(h)
    }

    /// Gradient w.r.t. the block input; parameter gradients are appended to
    /// `grads` in reverse layer order.
    fn backward(
        &self,
        caches: &[LayerCache],
        d_out: &Matrix,
        residual: bool,
        grads: &mut Vec<Vec<f64>>,
    ) -> Result<Matrix> {
        let mut d = d_out.clone();
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            d = layer.backward(cache, &d, grads)?;
        }
        if residual {
            d.add_assign(d_out);
        }
        Ok(d)
    }

    /// Backward pass of a single block, returning `(d_input, gradients)`.
    pub fn backward_single(&self, x: &Matrix, d_out: &Matrix, residual: bool) -> Result<(Matrix, Gradients)> {
        let mut off = Dropout { rate: 0.0, rng: None };
        let (_, caches) = self.forward_cached(x, residual, Phase::Train, &mut off)?;
        let mut grads = Vec::new();
        let d = self.backward(&caches, d_out, residual, &mut grads)?;
        Ok((d, reorder_layer_grads(grads, &self.layers)))
    }
}

/// Everything a backward pass needs from the matching forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: LayerCache,
    blocks: Vec<Vec<LayerCache>>,
    hidden: Matrix,
}

impl ForwardCache {
    /// Which ReLU inputs of the pass are positive, in network order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        std::iter::once(&self.input)
            .chain(self.blocks.iter().flatten())
            .filter_map(|c| c.pre_activation.as_ref())
            .flat_map(|z| z.data().iter().map(|&v| v > 0.0))
            .collect()
    }


    /// Batch mean and variance of every BN layer, in network order.
    fn batch_stats(&self) -> impl Iterator<Item = Option<&BatchNormCache>> {
        std::iter::once(self.input.bn.as_ref())
            .chain(self.blocks.iter().flatten().map(|c| c.bn.as_ref()))
    }
}

/// Residual MLP: input layer, width-homogeneous blocks, softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub arch: ArchitectureSpec,
    pub seed: u64,
    pub norm_stats: NormalizationStats,
    pub input: Layer,
    pub blocks: Vec<Block>,
    pub output: DenseParams,
}

impl Model {
    /// Builds a freshly initialized model with identity normalization stats.
    ///
    /// Weights are He-uniform with zero biases. The last layer of every
    /// residual block is scaled by `1/√block_count` so the residual stream
    /// does not grow geometrically with depth.
    pub fn build(config: ModelConfig, arch: ArchitectureSpec, seed: u64) -> Result<Model> {
        Self::build_with_inputs(config, arch, seed, NUM_FEATURES)
    }

    pub(crate) fn build_with_inputs(
        config: ModelConfig,
        arch: ArchitectureSpec,
        seed: u64,
        inputs: usize,
    ) -> Result<Model> {
        config.validate()?;
        ArchitectureSpec::from_depth(arch.depth(), arch.layers_per_block)?;
        let width = config.hidden_nodes;
        let mut rng = seed::rng(seed::derive_seed(seed, INIT_STREAM));
        let bn = || config.use_batchnorm.then(|| BatchNorm::new(width));
        let input = Layer {
            dense: DenseParams::he_uniform(inputs, width, 1.0, &mut rng),
            bn: bn(),
        };
        let last_scale = if arch.residual {
            1.0 / (arch.block_count as f64).sqrt()
        } else {
            1.0
        };
        let blocks = (0..arch.block_count)
            .map(|_| Block {
                layers: (0..arch.layers_per_block)
                    .map(|j| {
                        let scale = if j + 1 == arch.layers_per_block { last_scale } else { 1.0 };
                        Layer {
                            dense: DenseParams::he_uniform(width, width, scale, &mut rng),
                            bn: bn(),
                        }
                    })
                    .collect(),
            })
            .collect();
        let output = DenseParams::he_uniform(width, NUM_CLASSES, 1.0, &mut rng);
        Ok(Model {
            config,
            arch,
            seed,
            norm_stats: NormalizationStats {
                min: vec![0.0; inputs],
                max: vec![1.0; inputs],
            },
            input,
            blocks,
            output,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input.dense.inputs()
    }

    /// Fits and stores min-max normalization on raw training rows.
    pub fn fit_normalization(&mut self, raw: &Matrix) -> Result<()> {
        if raw.cols() != self.input_width() {
            return Err(Error::shape("model input", self.input_width(), raw.cols()));
        }
        self.norm_stats = crate::features::fit_matrix(raw)?;
        Ok(())
    }

    /// Applies the stored normalization to raw feature rows.
    pub fn normalize(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols() != self.input_width() {
            return Err(Error::shape("model input", self.input_width(), raw.cols()));
        }
        let mut out = raw.clone();
        for i in 0..out.rows() {
            let row = self.norm_stats.apply(raw.row(i));
            out.row_mut(i).copy_from_slice(&row);
        }
        Ok(out)
    }

    /// Forward pass on normalized inputs. Dropout runs only in train mode
    /// with an rng supplied; BN running stats are not modified.
    pub fn forward(
        &self,
        x: &Matrix,
        phase: Phase,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<(Matrix, ForwardCache)> {
        if x.cols() != self.input_width() {
            return Err(Error::shape("model input", self.input_width(), x.cols()));
        }
        let mut dropout = Dropout {
            rate: self.config.dropout_rate,
            rng: if self.config.use_dropout && phase == Phase::Train {
                dropout_rng
            } else {
                None
            },
        };
        let mut no_dropout = Dropout { rate: 0.0, rng: None };
        let (mut h, input) = self.input.forward(x, true, phase, &mut no_dropout)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (out, caches) = block.forward_cached(&h, self.arch.residual, phase, &mut dropout)?;
            h = out;
            blocks.push(caches);
        }
        let logits = self.output.forward(&h)?;
        Ok((
            logits,
            ForwardCache {
                input,
                blocks,
                hidden: h,
            },
        ))
    }

    /// Gradients of every parameter given `d_logits`.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &Matrix) -> Result<Gradients> {
        let mut rev = Vec::new();
        let out = self.output.backward(&cache.hidden, d_logits)?;
        let out_grads = [out.d_weight.into_vec(), out.d_bias];
        let mut d = out.d_input;
        let mut block_grads = Vec::with_capacity(self.blocks.len());
        for (block, caches) in self.blocks.iter().zip(&cache.blocks).rev() {
            let mut g = Vec::new();
            d = block.backward(caches, &d, self.arch.residual, &mut g)?;
            block_grads.push(reorder_layer_grads(g, &block.layers));
        }
        self.input.backward(&cache.input, &d, &mut rev)?;
        let mut grads = reorder_layer_grads(rev, std::slice::from_ref(&self.input));
        for g in block_grads.into_iter().rev() {
            grads.extend(g);
        }
        grads.extend(out_grads);
        Ok(grads)
    }

    /// Cross-entropy loss and gradients for one batch of normalized inputs.
    pub fn loss_and_gradients(
        &self,
        x: &Matrix,
        targets: &Matrix,
        phase: Phase,
        dropout_rng: Option<&mut Rng>,
    ) -> Result<(f64, Gradients, ForwardCache)> {
        let (logits, cache) = self.forward(x, phase, dropout_rng)?;
        let (loss, d_logits) = softmax_xent(&logits, targets)?;
        let grads = self.backward(&cache, &d_logits)?;
        Ok((loss, grads, cache))
    }

    /// Folds the batch statistics of a train-mode pass into the running stats.
    pub fn commit_batch_stats(&mut self, cache: &ForwardCache) {
        let layers = std::iter::once(&mut self.input)
            .chain(self.blocks.iter_mut().flat_map(|b| b.layers.iter_mut()));
        for (layer, stats) in layers.zip(cache.batch_stats()) {
            if let (Some(bn), Some(s)) = (&mut layer.bn, stats) {
                bn.update_running(&s.mean, &s.var);
            }
        }
    }

    /// Eval-mode logits for raw feature rows.
    pub fn logits(&self, raw: &Matrix) -> Result<Matrix> {
        Ok(self.forward(&self.normalize(raw)?, Phase::Eval, None)?.0)
    }

    pub fn predict_proba(&self, raw: &Matrix) -> Result<Matrix> {
        Ok(softmax(&self.logits(raw)?))
    }

    /// Most probable mode per row; ties go to the lowest class index.
    pub fn predict(&self, raw: &Matrix) -> Result<Vec<TravelMode>> {
        Ok(labels_from_proba(&self.predict_proba(raw)?))
    }

    /// Trainable tensors: per layer weight, bias, then BN gamma and beta;
    /// input layer first, output layer last.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.input.tensors_mut();
        for block in &mut self.blocks {
            for layer in &mut block.layers {
                out.extend(layer.tensors_mut());
            }
        }
        out.push(self.output.weight.data_mut());
        out.push(&mut self.output.bias);
        out
    }

    pub fn parameter_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        let mut push_layer = |l: &Layer| {
            sizes.push(l.dense.weight.data().len());
            sizes.push(l.dense.bias.len());
            if let Some(bn) = &l.bn {
                sizes.push(bn.gamma.len());
                sizes.push(bn.beta.len());
            }
        };
        push_layer(&self.input);
        for b in &self.blocks {
            for l in &b.layers {
                push_layer(l);
            }
        }
        sizes.push(self.output.weight.data().len());
        sizes.push(self.output.bias.len());
        sizes
    }

    pub fn num_parameters(&self) -> usize {
        self.parameter_sizes().iter().sum()
    }

    /// Every tensor needed to reproduce predictions, including BN running
    /// statistics, with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        collect_named(self, &mut out);
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        fn push<'a>(prefix: String, l: &'a mut Layer, out: &mut Vec<(String, &'a mut [f64])>) {
            out.push((format!("{prefix}.weight"), l.dense.weight.data_mut()));
            out.push((format!("{prefix}.bias"), &mut l.dense.bias[..]));
            if let Some(bn) = &mut l.bn {
                out.push((format!("{prefix}.bn.gamma"), &mut bn.gamma[..]));
                out.push((format!("{prefix}.bn.beta"), &mut bn.beta[..]));
                out.push((format!("{prefix}.bn.running_mean"), &mut bn.running_mean[..]));
                out.push((format!("{prefix}.bn.running_var"), &mut bn.running_var[..]));
            }
        }
        let mut out = Vec::new();
        push("input".into(), &mut self.input, &mut out);
        for (b, block) in self.blocks.iter_mut().enumerate() {
            for (j, layer) in block.layers.iter_mut().enumerate() {
                push(format!("blocks.{b}.{j}"), layer, &mut out);
            }
        }
        out.push(("output.weight".into(), self.output.weight.data_mut()));
        out.push(("output.bias".into(), &mut self.output.bias[..]));
        out
    }
}

fn collect_named<'a>(model: &'a Model, out: &mut Vec<(String, &'a [f64])>) {
    let push = |prefix: String, l: &'a Layer, out: &mut Vec<(String, &'a [f64])>| {
        out.push((format!("{prefix}.weight"), l.dense.weight.data()));
        out.push((format!("{prefix}.bias"), &l.dense.bias[..]));
        if let Some(bn) = &l.bn {
            out.push((format!("{prefix}.bn.gamma"), &bn.gamma[..]));
            out.push((format!("{prefix}.bn.beta"), &bn.beta[..]));
            out.push((format!("{prefix}.bn.running_mean"), &bn.running_mean[..]));
            out.push((format!("{prefix}.bn.running_var"), &bn.running_var[..]));
        }
    };
    push("input".into(), &model.input, out);
    for (b, block) in model.blocks.iter().enumerate() {
        for (j, layer) in block.layers.iter().enumerate() {
            push(format!("blocks.{b}.{j}"), layer, out);
        }
    }
    out.push(("output.weight".into(), model.output.weight.data()));
    out.push(("output.bias".into(), &model.output.bias[..]));
}

/// Layer backward passes push `[W, b, (γ, β)]` per layer while walking
/// layers in reverse; this restores forward layer order.
fn reorder_layer_grads(rev: Vec<Vec<f64>>, layers: &[Layer]) -> Gradients {
    let mut chunks = Vec::with_capacity(layers.len());
    let mut it = rev.into_iter();
    for layer in layers.iter().rev() {
        let n = if layer.bn.is_some() { 4 } else { 2 };
        chunks.push(it.by_ref().take(n).collect::<Vec<_>>());
    }
    chunks.into_iter().rev().flatten().collect()
}

pub fn labels_from_proba(proba: &Matrix) -> Vec<TravelMode> {
    proba
        .argmax_rows()
        .into_iter()
        .map(|i| TravelMode::from_index(i).expect("three output classes"))
        .collect()
}

/// Fixed batch for gradient checking a [`Model`].
#[derive(Debug, Clone)]
pub struct CheckBatch {
    pub x: Matrix,
    pub targets: Matrix,
    pub phase: Phase,
    /// When set, dropout uses a mask drawn from this seed on every evaluation.
    pub dropout_seed: Option<u64>,
}

impl Differentiable for Model {
    type Batch = CheckBatch;

    fn loss(&self, batch: &CheckBatch) -> f64 {
        self.loss_and_gradients_check(batch).0
    }

    fn loss_and_gradients(&self, batch: &CheckBatch) -> (f64, Vec<Vec<f64>>) {
        self.loss_and_gradients_check(batch)
    }

    fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        Model::parameters_mut(self)
    }
}

impl Model {
    fn loss_and_gradients_check(&self, batch: &CheckBatch) -> (f64, Gradients) {
        let mut rng = batch.dropout_seed.map(seed::rng);
        let (loss, grads, _) = self
            .loss_and_gradients(&batch.x, &batch.targets, batch.phase, rng.as_mut())
            .expect("gradient check batch matches the model");
        (loss, grads)
    }
}
