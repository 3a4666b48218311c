use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use super::layers::{
    film_backward, film_forward, maxpool2x2, maxpool2x2_backward, relu, relu_backward, BatchNorm,
    BnCache, Conv2d, Dense,
};
use super::tensor::{Scalar, Tensor};
use super::NnError;
use crate::util;

/// Conv blocks per embedding stack; each halves the spatial dims, taking
/// the (64, 100) input to (4, 7).
pub const POOL_STAGES: usize = 4;

/// Which conditioning path the classifier runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditioningMode {
    /// s = 1, b = 0; output ignores the conditioning input entirely.
    Unconditioned,
    /// Both scaling and biasing embeddings active.
    Conditioned,
    /// Biasing embedding disabled (b = 0).
    ScaleOnly,
    /// Scaling embedding disabled (s = 1).
    BiasOnly,
}

impl ConditioningMode {
    pub fn uses_scale(self) -> bool {
        matches!(self, Self::Conditioned | Self::ScaleOnly)
    }

    pub fn uses_bias(self) -> bool {
        matches!(self, Self::Conditioned | Self::BiasOnly)
    }

    pub fn is_conditioned(self) -> bool {
        self.uses_scale() || self.uses_bias()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    /// Output channels of the four conv blocks.
    pub channels: [usize; 4],
    pub fc_width: usize,
    pub n_classes: usize,
    pub mode: ConditioningMode,
    pub input_bands: usize,
    pub input_frames: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl ModelConfig {
    /// Laptop-sized configuration used by the experiment suites.
    pub fn desk_scale(n_classes: usize, mode: ConditioningMode) -> Self {
        Self {
            channels: [8, 16, 32, 32],
            fc_width: 512,
            n_classes,
            mode,
            input_bands: 64,
            input_frames: 100,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
        }
    }

    /// Channel widths following the VGG-style progression.
    pub fn paper_scale(n_classes: usize, mode: ConditioningMode) -> Self {
        Self {
            channels: [64, 128, 256, 512],
            ..Self::desk_scale(n_classes, mode)
        }
    }

    /// Minimal configuration for gradient checking.
    pub fn tiny(n_classes: usize, mode: ConditioningMode) -> Self {
        Self {
            channels: [2, 2, 2, 2],
            fc_width: 8,
            input_bands: 8,
            input_frames: 10,
            ..Self::desk_scale(n_classes, mode)
        }
    }

    /// Spatial dims after the pooling chain (ceil halving per stage).
    pub fn pooled_dims(&self) -> (usize, usize) {
        let mut h = self.input_bands;
        let mut w = self.input_frames;
        for _ in 0..POOL_STAGES {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        (h, w)
    }

    pub fn flat_size(&self) -> usize {
        let (h, w) = self.pooled_dims();
        self.channels[3] * h * w
    }
}

/// Conv -> BatchNorm -> ReLU -> MaxPool.
#[derive(Debug, Clone)]
struct ConvBlock<T> {
    conv: Conv2d<T>,
    bn: BatchNorm<T>,
}

struct BlockCache<T> {
    input: Tensor<T>,
    conv_out: Tensor<T>,
    bn_cache: BnCache<T>,
    relu_out: Tensor<T>,
    argmax: Vec<u32>,
}

/// One stack of four conv blocks turning a (1, bands, frames) spectrogram
/// into a (C4, bands/16, frames/16) feature map. The model holds three of
/// these with unshared parameters: H, R_s and R_b.
#[derive(Debug, Clone)]
pub struct EmbeddingStack<T> {
    blocks: Vec<ConvBlock<T>>,
}

pub(crate) struct StackCache<T> {
    blocks: Vec<BlockCache<T>>,
}

/// Per-block gradients: conv weight/bias, bn gamma/beta.
pub(crate) struct StackGrads<T> {
    pub blocks: Vec<(Tensor<T>, Vec<T>, Vec<T>, Vec<T>)>,
}

impl<T: Scalar> EmbeddingStack<T> {
    fn new(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut blocks = Vec::with_capacity(POOL_STAGES);
        let mut c_in = 1;
        for &c_out in &config.channels {
            blocks.push(ConvBlock {
                conv: Conv2d::new_he(c_in, c_out, rng),
                bn: BatchNorm::new(c_out, config.bn_momentum, config.bn_eps),
            });
            c_in = c_out;
        }
        Self { blocks }
    }

    fn forward_train(
        &mut self,
        x: &Tensor<T>,
        update_running: bool,
    ) -> Result<(Tensor<T>, StackCache<T>), NnError> {
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &mut self.blocks {
            let conv_out = block.conv.forward(&cur)?;
            let (bn_out, bn_cache) = block.bn.forward_train(&conv_out, update_running)?;
            let relu_out = relu(&bn_out);
            let (pooled, argmax) = maxpool2x2(&relu_out);
            caches.push(BlockCache {
                input: cur,
                conv_out,
                bn_cache,
                relu_out,
                argmax,
            });
            cur = pooled;
        }
        Ok((cur, StackCache { blocks: caches }))
    }

    fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut cur = x.clone();
        for block in &self.blocks {
            let conv_out = block.conv.forward(&cur)?;
            let bn_out = block.bn.forward_infer(&conv_out);
            let (pooled, _) = maxpool2x2(&relu(&bn_out));
            cur = pooled;
        }
        Ok(cur)
    }

    /// Backward through the four blocks; returns parameter gradients.
    /// The gradient w.r.t. the stack input is discarded (inputs are data).
    fn backward(&self, cache: &StackCache<T>, dy: Tensor<T>) -> StackGrads<T> {
        let mut grads: Vec<(Tensor<T>, Vec<T>, Vec<T>, Vec<T>)> = Vec::new();
        let mut d = dy;
        for (block, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            let d_relu = maxpool2x2_backward(&d, &bc.argmax, bc.relu_out.shape());
            let d_bn = relu_backward(&bc.relu_out, &d_relu);
            let (d_conv, dgamma, dbeta) = block.bn.backward(&bc.conv_out, &d_bn, &bc.bn_cache);
            let (dx, dw, db) = block.conv.backward(&bc.input, &d_conv);
            grads.push((dw, db, dgamma, dbeta));
            d = dx;
        }
        grads.reverse();
        StackGrads { blocks: grads }
    }

    fn zero_grads(&self) -> StackGrads<T> {
        StackGrads {
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    (
                        Tensor::zeros(b.conv.weight.shape()),
                        vec![T::zero(); b.conv.bias.len()],
                        vec![T::zero(); b.bn.gamma.len()],
                        vec![T::zero(); b.bn.beta.len()],
                    )
                })
                .collect(),
        }
    }
}

/// The conditioned classifier: three unshared embedding stacks feeding the
/// feature-wise gate, then two 512-unit FC layers and the output layer.
#[derive(Debug, Clone)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub h_embed: EmbeddingStack<T>,
    pub rs_embed: EmbeddingStack<T>,
    pub rb_embed: EmbeddingStack<T>,
    pub fc1: Dense<T>,
    pub fc2: Dense<T>,
    pub out: Dense<T>,
}

/// Everything the backward pass needs from a training forward.
pub struct TrainCache<T> {
    h_cache: StackCache<T>,
    rs_cache: Option<StackCache<T>>,
    rb_cache: Option<StackCache<T>>,
    h_out: Tensor<T>,
    s_eff: Tensor<T>,
    film_mask: Vec<bool>,
    gated: Tensor<T>,
    fc1_in: Tensor<T>,
    fc1_relu: Tensor<T>,
    fc2_relu: Tensor<T>,
    /// Hash of every ReLU gate state and pooling argmax. Two forwards with
    /// different signatures took different kink branches, so a finite
    /// difference across them is invalid; the gradient checker re-samples.
    pub activation_signature: u64,
}

/// Gradients for every parameter group, in canonical group order.
/// Disabled conditioning stacks carry zeros.
pub struct ModelGrads<T> {
    h: StackGrads<T>,
    rs: StackGrads<T>,
    rb: StackGrads<T>,
    fc1: (Tensor<T>, Vec<T>),
    fc2: (Tensor<T>, Vec<T>),
    out: (Tensor<T>, Vec<T>),
}

impl<T: Scalar> Model<T> {
    /// He-normal init of all three stacks (in order H, R_s, R_b) and the
    /// dense head, from a single seeded stream.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(util::derive_seed(seed, &[util::tag("init")]));
        let h_embed = EmbeddingStack::new(&config, &mut rng);
        let rs_embed = EmbeddingStack::new(&config, &mut rng);
        let rb_embed = EmbeddingStack::new(&config, &mut rng);
        let flat = config.flat_size();
        let fc1 = Dense::new_he(flat, config.fc_width, &mut rng);
        let fc2 = Dense::new_he(config.fc_width, config.fc_width, &mut rng);
        let out = Dense::new_he(config.fc_width, config.n_classes, &mut rng);
        Self {
            config,
            h_embed,
            rs_embed,
            rb_embed,
            fc1,
            fc2,
            out,
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        let want = [
            x.shape()[0],
            1,
            self.config.input_bands,
            self.config.input_frames,
        ];
        if x.shape() != want {
            return Err(NnError::ShapeMismatch {
                expected: want.to_vec(),
                got: x.shape().to_vec(),
            });
        }
        Ok(())
    }

    /// Training forward. `r` is required in any conditioned mode and
    /// ignored when unconditioned. Returns logits [N, n_classes].
    pub fn forward_train(
        &mut self,
        x: &Tensor<T>,
        r: Option<&Tensor<T>>,
        update_running: bool,
    ) -> Result<(Tensor<T>, TrainCache<T>), NnError> {
        self.check_input(x)?;
        let mode = self.config.mode;
        let (h_out, h_cache) = self.h_embed.forward_train(x, update_running)?;

        let (s_eff, rs_cache) = if mode.uses_scale() {
            let r = r.ok_or(NnError::MissingConditioning)?;
            self.check_input(r)?;
            let (s, c) = self.rs_embed.forward_train(r, update_running)?;
            (s, Some(c))
        } else {
            (h_out.map(|_| T::one()), None)
        };
        let (b_eff, rb_cache) = if mode.uses_bias() {
            let r = r.ok_or(NnError::MissingConditioning)?;
            self.check_input(r)?;
            let (b, c) = self.rb_embed.forward_train(r, update_running)?;
            (b, Some(c))
        } else {
            (Tensor::zeros(h_out.shape()), None)
        };

        let (film_out, film_mask) = film_forward(&h_out, &s_eff, &b_eff)?;
        let gated = relu(&film_out);
        let n = x.shape()[0];
        let fc1_in = gated.clone().reshape(&[n, self.config.flat_size()]);
        let fc1_pre = self.fc1.forward(&fc1_in);
        let fc1_relu = relu(&fc1_pre);
        let fc2_pre = self.fc2.forward(&fc1_relu);
        let fc2_relu = relu(&fc2_pre);
        let logits = self.out.forward(&fc2_relu);

        let mut sig = SignatureHasher::new();
        for cache in [Some(&h_cache), rs_cache.as_ref(), rb_cache.as_ref()]
            .into_iter()
            .flatten()
        {
            for block in &cache.blocks {
                sig.add_signs(block.relu_out.data());
                sig.add_indices(&block.argmax);
            }
        }
        sig.add_mask(&film_mask);
        sig.add_signs(gated.data());
        sig.add_signs(fc1_relu.data());
        sig.add_signs(fc2_relu.data());
        let activation_signature = sig.finish();
        Ok((
            logits,
            TrainCache {
                h_cache,
                rs_cache,
                rb_cache,
                h_out,
                s_eff,
                film_mask,
                gated,
                fc1_in,
                fc1_relu,
                fc2_relu,
                activation_signature,
            },
        ))
    }

    /// Inference forward using batch-norm running statistics; no caches.
    pub fn forward_infer(&self, x: &Tensor<T>, r: Option<&Tensor<T>>) -> Result<Tensor<T>, NnError> {
        self.check_input(x)?;
        let mode = self.config.mode;
        let h_out = self.h_embed.forward_infer(x)?;
        let s_eff = if mode.uses_scale() {
            let r = r.ok_or(NnError::MissingConditioning)?;
            self.check_input(r)?;
            self.rs_embed.forward_infer(r)?
        } else {
            h_out.map(|_| T::one())
        };
        let b_eff = if mode.uses_bias() {
            let r = r.ok_or(NnError::MissingConditioning)?;
            self.check_input(r)?;
            self.rb_embed.forward_infer(r)?
        } else {
            Tensor::zeros(h_out.shape())
        };
        let (film_out, _) = film_forward(&h_out, &s_eff, &b_eff)?;
        let gated = relu(&film_out);
        let n = x.shape()[0];
        let fc1_in = gated.reshape(&[n, self.config.flat_size()]);
        let fc1_relu = relu(&self.fc1.forward(&fc1_in));
        let fc2_relu = relu(&self.fc2.forward(&fc1_relu));
        Ok(self.out.forward(&fc2_relu))
    }

    /// Backward from d(loss)/d(logits). Disabled stacks get zero grads.
    pub fn backward(&self, cache: &TrainCache<T>, dlogits: &Tensor<T>) -> ModelGrads<T> {
        let (d_fc2_relu, dw_out, db_out) = self.out.backward(&cache.fc2_relu, dlogits);
        let d_fc2_pre = relu_backward(&cache.fc2_relu, &d_fc2_relu);
        let (d_fc1_relu, dw_fc2, db_fc2) = self.fc2.backward(&cache.fc1_relu, &d_fc2_pre);
        let d_fc1_pre = relu_backward(&cache.fc1_relu, &d_fc1_relu);
        let (d_flat, dw_fc1, db_fc1) = self.fc1.backward(&cache.fc1_in, &d_fc1_pre);

        let d_gated = d_flat.reshape(cache.gated.shape());
        let d_film = relu_backward(&cache.gated, &d_gated);
        let (dh, ds, db_film) =
            film_backward(&cache.h_out, &cache.s_eff, &d_film, &cache.film_mask);

        let h = self.h_embed.backward(&cache.h_cache, dh);
        let rs = match &cache.rs_cache {
            Some(c) => self.rs_embed.backward(c, ds),
            None => self.rs_embed.zero_grads(),
        };
        let rb = match &cache.rb_cache {
            Some(c) => self.rb_embed.backward(c, db_film),
            None => self.rb_embed.zero_grads(),
        };
        ModelGrads {
            h,
            rs,
            rb,
            fc1: (dw_fc1, db_fc1),
            fc2: (dw_fc2, db_fc2),
            out: (dw_out, db_out),
        }
    }

    /// Canonical parameter group order shared by Adam, checkpoints and the
    /// gradient checker.
    pub fn group_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for stack in ["h", "rs", "rb"] {
            for b in 0..POOL_STAGES {
                names.push(format!("{stack}.{b}.conv.w"));
                names.push(format!("{stack}.{b}.conv.b"));
                names.push(format!("{stack}.{b}.bn.gamma"));
                names.push(format!("{stack}.{b}.bn.beta"));
            }
        }
        for fc in ["fc1", "fc2", "out"] {
            names.push(format!("{fc}.w"));
            names.push(format!("{fc}.b"));
        }
        names
    }

    /// Mutable views of every trainable parameter group, canonical order.
    pub fn param_groups_mut(&mut self) -> Vec<&mut [T]> {
        let mut groups: Vec<&mut [T]> = Vec::new();
        for stack in [&mut self.h_embed, &mut self.rs_embed, &mut self.rb_embed] {
            for block in &mut stack.blocks {
                groups.push(block.conv.weight.data_mut());
                groups.push(&mut block.conv.bias);
                groups.push(&mut block.bn.gamma);
                groups.push(&mut block.bn.beta);
            }
        }
        for fc in [&mut self.fc1, &mut self.fc2, &mut self.out] {
            groups.push(fc.weight.data_mut());
            groups.push(&mut fc.bias);
        }
        groups
    }

    /// Read-only views, canonical order.
    pub fn param_groups(&self) -> Vec<&[T]> {
        let mut groups: Vec<&[T]> = Vec::new();
        for stack in [&self.h_embed, &self.rs_embed, &self.rb_embed] {
            for block in &stack.blocks {
                groups.push(block.conv.weight.data());
                groups.push(&block.conv.bias);
                groups.push(&block.bn.gamma);
                groups.push(&block.bn.beta);
            }
        }
        for fc in [&self.fc1, &self.fc2, &self.out] {
            groups.push(fc.weight.data());
            groups.push(&fc.bias);
        }
        groups
    }

    /// Running batch-norm statistics (not trained, but checkpointed), as
    /// (name, values) pairs in a fixed order.
    pub fn bn_running_stats(&self) -> Vec<(String, Vec<T>)> {
        let mut out = Vec::new();
        for (tag, stack) in [
            ("h", &self.h_embed),
            ("rs", &self.rs_embed),
            ("rb", &self.rb_embed),
        ] {
            for (b, block) in stack.blocks.iter().enumerate() {
                out.push((format!("{tag}.{b}.bn.running_mean"), block.bn.running_mean.clone()));
                out.push((format!("{tag}.{b}.bn.running_var"), block.bn.running_var.clone()));
            }
        }
        out
    }

    pub fn set_bn_running_stats(&mut self, stats: &[(String, Vec<T>)]) -> Result<(), NnError> {
        let mut iter = stats.iter();
        for stack in [&mut self.h_embed, &mut self.rs_embed, &mut self.rb_embed] {
            for block in &mut stack.blocks {
                for target in ["running_mean", "running_var"] {
                    let (name, values) = iter.next().ok_or_else(|| {
                        NnError::Checkpoint("missing batch-norm running stats".into())
                    })?;
                    if !name.ends_with(target) || values.len() != block.bn.channels() {
                        return Err(NnError::Checkpoint(format!(
                            "unexpected running-stat entry {name}"
                        )));
                    }
                    if target == "running_mean" {
                        block.bn.running_mean = values.clone();
                    } else {
                        block.bn.running_var = values.clone();
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.param_groups().iter().map(|g| g.len()).sum()
    }
}

impl<T: Scalar> ModelGrads<T> {
    /// Gradient slices in the same canonical order as
    /// [`Model::param_groups`].
    pub fn groups(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        for stack in [&self.h, &self.rs, &self.rb] {
            for (dw, db, dgamma, dbeta) in &stack.blocks {
                out.push(dw.data());
                out.push(db);
                out.push(dgamma);
                out.push(dbeta);
            }
        }
        for (dw, db) in [&self.fc1, &self.fc2, &self.out] {
            out.push(dw.data());
            out.push(db);
        }
        out
    }
}

/// Incremental FNV-1a over activation gate states.
struct SignatureHasher(u64);

impl SignatureHasher {
    fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    fn byte(&mut self, b: u8) {
        self.0 ^= b as u64;
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
    }

    fn add_signs<T: Scalar>(&mut self, values: &[T]) {
        for &v in values {
            self.byte(u8::from(v > T::zero()));
        }
    }

    fn add_mask(&mut self, mask: &[bool]) {
        for &m in mask {
            self.byte(u8::from(m));
        }
    }

    fn add_indices(&mut self, indices: &[u32]) {
        for &i in indices {
            for b in i.to_le_bytes() {
                self.byte(b);
            }
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}
