//! The super-resolution model: a deep feature-reconstruction branch that
//! predicts a residual field, an attention branch that predicts a soft mask,
//! and the composition `hr = residual * mask + upscaled_input`.

mod attention;

pub use attention::{AttentionNet, AttnDenseBlock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{
    expect_nchw, pixel_shuffle, BatchNorm2d, Conv2d, Mode, Parameter,
};
use crate::tensor::{add, concat_channels, mul, relu, Graph, Scalar, Tensor};
use crate::{Error, Result};

fn default_base_channels() -> usize {
    64
}
fn default_denseres_blocks() -> usize {
    6
}
fn default_resblocks_per_block() -> usize {
    4
}
fn default_attn_base_channels() -> usize {
    32
}
fn default_attn_growth() -> usize {
    16
}
fn default_attn_convs_per_dense_block() -> usize {
    3
}

/// Architecture hyperparameters. Everything except the upscaling factor has
/// a default matching the reference configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Upscaling factor, one of 2, 3, 4.
    pub scale: usize,
    /// Channel width of the feature branch.
    #[serde(default = "default_base_channels")]
    pub base_channels: usize,
    /// Number of DenseRes blocks in the feature branch body.
    #[serde(default = "default_denseres_blocks")]
    pub denseres_blocks: usize,
    /// Number of Resblocks inside each DenseRes block.
    #[serde(default = "default_resblocks_per_block")]
    pub resblocks_per_block: usize,
    /// Output width of each upsampling step in the attention decoder.
    #[serde(default = "default_attn_base_channels")]
    pub attn_base_channels: usize,
    /// Channels added by each conv inside an attention dense block.
    #[serde(default = "default_attn_growth")]
    pub attn_growth: usize,
    /// Convs per attention dense block.
    #[serde(default = "default_attn_convs_per_dense_block")]
    pub attn_convs_per_dense_block: usize,
}

impl ModelConfig {
    /// Reference configuration for a given upscaling factor.
    pub fn with_defaults(scale: usize) -> Self {
        ModelConfig {
            scale,
            base_channels: default_base_channels(),
            denseres_blocks: default_denseres_blocks(),
            resblocks_per_block: default_resblocks_per_block(),
            attn_base_channels: default_attn_base_channels(),
            attn_growth: default_attn_growth(),
            attn_convs_per_dense_block: default_attn_convs_per_dense_block(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.scale, 2 | 3 | 4) {
            return Err(Error::invalid(
                "ModelConfig",
                format!("scale must be 2, 3, or 4, got {}", self.scale),
            ));
        }
        for (name, v) in [
            ("base_channels", self.base_channels),
            ("denseres_blocks", self.denseres_blocks),
            ("resblocks_per_block", self.resblocks_per_block),
            ("attn_base_channels", self.attn_base_channels),
            ("attn_growth", self.attn_growth),
            ("attn_convs_per_dense_block", self.attn_convs_per_dense_block),
        ] {
            if v == 0 {
                return Err(Error::invalid("ModelConfig", format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

/// Two 3x3 convs with batch norm and a residual connection:
/// `bn2(conv2(relu(bn1(conv1(h))))) + h`.
pub struct Resblock<T: Scalar> {
    pub conv1: Conv2d<T>,
    pub bn1: BatchNorm2d<T>,
    pub conv2: Conv2d<T>,
    pub bn2: BatchNorm2d<T>,
}

impl<T: Scalar> Resblock<T> {
    pub fn new<R: Rng>(channels: usize, rng: &mut R) -> Self {
        Resblock {
            conv1: Conv2d::new(channels, channels, 3, 1, rng),
            bn1: BatchNorm2d::new(channels),
            conv2: Conv2d::new(channels, channels, 3, 1, rng),
            bn2: BatchNorm2d::new(channels),
        }
    }

    pub fn forward(&self, g: &Graph<T>, h: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let a = self.bn1.forward(g, &self.conv1.forward(g, h)?, mode)?;
        let a = relu(g, &a);
        let a = self.bn2.forward(g, &self.conv2.forward(g, &a)?, mode)?;
        add(g, &a, h)
    }
}

/// A 1x1 conv + batch norm + ReLU unit that fuses a growing channel concat
/// back down to a fixed width.
pub struct FuseUnit<T: Scalar> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm2d<T>,
}

impl<T: Scalar> FuseUnit<T> {
    pub fn new<R: Rng>(in_c: usize, out_c: usize, rng: &mut R) -> Self {
        FuseUnit {
            conv: Conv2d::new(in_c, out_c, 1, 0, rng),
            bn: BatchNorm2d::new(out_c),
        }
    }

    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        Ok(relu(g, &self.bn.forward(g, &self.conv.forward(g, x)?, mode)?))
    }
}

/// A chain of Resblocks with dense connectivity: the i-th Resblock consumes
/// a 1x1-fused concatenation of the block input and every earlier Resblock
/// output, and the block returns the last Resblock's output.
pub struct DenseResBlock<T: Scalar> {
    pub fusers: Vec<FuseUnit<T>>,
    pub resblocks: Vec<Resblock<T>>,
}

impl<T: Scalar> DenseResBlock<T> {
    pub fn new<R: Rng>(channels: usize, resblocks: usize, rng: &mut R) -> Self {
        let mut fusers = Vec::with_capacity(resblocks);
        let mut blocks = Vec::with_capacity(resblocks);
        for i in 1..=resblocks {
            fusers.push(FuseUnit::new(i * channels, channels, rng));
            blocks.push(Resblock::new(channels, rng));
        }
        DenseResBlock { fusers, resblocks: blocks }
    }

    pub fn forward(&self, g: &Graph<T>, g0: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut feats = vec![g0.clone()];
        let mut last = g0.clone();
        for (fuse, res) in self.fusers.iter().zip(&self.resblocks) {
            let cat = if feats.len() == 1 {
                feats[0].clone()
            } else {
                concat_channels(g, &feats)?
            };
            let h = fuse.forward(g, &cat, mode)?;
            last = res.forward(g, &h, mode)?;
            feats.push(last.clone());
        }
        Ok(last)
    }
}

/// Residual field times mask plus the plain upscale:
/// `out[n,c,i,j] = f[n,c,i,j] * m[n,0,i,j] + ilr[n,c,i,j]`.
///
/// The single-channel mask broadcasts across the channel axis. The result is
/// intentionally unclamped; clamping happens only at image export.
pub fn compose<T: Scalar>(
    g: &Graph<T>,
    f: &Tensor<T>,
    m: &Tensor<T>,
    ilr: &Tensor<T>,
) -> Result<Tensor<T>> {
    add(g, &mul(g, f, m)?, ilr)
}

/// The full two-branch model.
///
/// The feature branch (head conv, DenseRes body with 1x1 transitions,
/// shuffle upsampler, tail conv) maps the low-resolution input to an
/// unbounded 3-channel residual field at the target resolution. The
/// attention branch maps the bicubically upscaled input to a soft mask in
/// (0, 1). Their composition with the upscaled input is the prediction.
pub struct AttnSrModel<T: Scalar> {
    config: ModelConfig,
    pub head: Conv2d<T>,
    pub blocks: Vec<DenseResBlock<T>>,
    pub transitions: Vec<FuseUnit<T>>,
    /// Conv + pixel-shuffle stages; each entry holds the conv and its
    /// shuffle factor (one x2 or x3 stage; two cascaded x2 stages for x4).
    pub upsampler: Vec<(Conv2d<T>, usize)>,
    pub tail: Conv2d<T>,
    pub attention: AttentionNet<T>,
}

impl<T: Scalar> AttnSrModel<T> {
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = config.base_channels;
        let head = Conv2d::new(3, c, 3, 1, rng);
        let blocks = (0..config.denseres_blocks)
            .map(|_| DenseResBlock::new(c, config.resblocks_per_block, rng))
            .collect();
        let transitions = (1..config.denseres_blocks)
            .map(|_| FuseUnit::new(c, c, rng))
            .collect();
        let upsampler = match config.scale {
            2 | 3 => {
                let r = config.scale;
                vec![(Conv2d::new(c, c * r * r, 3, 1, rng), r)]
            }
            4 => vec![
                (Conv2d::new(c, c * 4, 3, 1, rng), 2),
                (Conv2d::new(c, c * 4, 3, 1, rng), 2),
            ],
            _ => unreachable!("validated"),
        };
        let tail = Conv2d::new(c, 3, 3, 1, rng);
        // Zero the tail so the residual branch starts as an exact identity
        // on the interpolated input: the first forward pass already matches
        // the bicubic baseline, the branch can only move in directions that
        // improve on it, and the attention gate (initialized open) never
        // sees an early phase where shutting out a noisy residual is the
        // fastest way down. The tail's own gradient is nonzero, so the
        // branch wakes up on the first optimizer step.
        tail.weight.set(Tensor::zeros(&tail.weight.shape()));
        tail.bias.set(Tensor::zeros(&tail.bias.shape()));
        let attention = AttentionNet::new(
            3,
            config.attn_base_channels,
            config.attn_growth,
            config.attn_convs_per_dense_block,
            rng,
        );
        Ok(AttnSrModel {
            config,
            head,
            blocks,
            transitions,
            upsampler,
            tail,
            attention,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Residual-field branch: `[n, 3, h, w]` -> `[n, 3, r*h, r*w]`, unbounded.
    pub fn feature_forward(&self, g: &Graph<T>, lr: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        expect_nchw("feature_forward", lr, 3)?;
        let mut x = self.head.forward(g, lr)?;
        for (i, block) in self.blocks.iter().enumerate() {
            x = block.forward(g, &x, mode)?;
            if let Some(t) = self.transitions.get(i) {
                x = t.forward(g, &x, mode)?;
            }
        }
        for (conv, r) in &self.upsampler {
            x = pixel_shuffle(g, &conv.forward(g, &x)?, *r)?;
        }
        self.tail.forward(g, &x)
    }

    /// Mask branch: `[n, 3, H, W]` -> `[n, 1, H, W]`, values strictly in (0, 1).
    /// `H` and `W` must be divisible by 4 (two pooling stages).
    pub fn attention_forward(&self, g: &Graph<T>, ilr: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        self.attention.forward(g, ilr, mode)
    }

    /// Full prediction: `(hr, mask)` where
    /// `hr = feature_forward(lr) * mask + ilr`. Both branches record onto the
    /// same graph, so one backward pass trains them jointly.
    pub fn forward(
        &self,
        g: &Graph<T>,
        lr: &Tensor<T>,
        ilr: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, Tensor<T>)> {
        let (n, _, h, w) = expect_nchw("model_forward", lr, 3)?;
        let (n2, _, rh, rw) = expect_nchw("model_forward", ilr, 3)?;
        let r = self.config.scale;
        if n2 != n || rh != r * h || rw != r * w {
            return Err(Error::invalid(
                "model_forward",
                format!(
                    "upscaled input [{n2}, 3, {rh}, {rw}] is not {r}x the low-res input [{n}, 3, {h}, {w}]"
                ),
            ));
        }
        let f = self.feature_forward(g, lr, mode)?;
        let m = self.attention_forward(g, ilr, mode)?;
        let hr = compose(g, &f, &m, ilr)?;
        Ok((hr, m))
    }

    /// Every learnable parameter with a stable dotted name, in a fixed order.
    pub fn named_params(&self) -> Vec<(String, &Parameter<T>)> {
        let mut out = Vec::new();
        push_conv(&mut out, "feature.head", &self.head);
        for (b, block) in self.blocks.iter().enumerate() {
            let prefix = format!("feature.block{}", b + 1);
            for (i, fuse) in block.fusers.iter().enumerate() {
                push_conv(&mut out, &format!("{prefix}.fuse{}.conv", i + 1), &fuse.conv);
                push_bn(&mut out, &format!("{prefix}.fuse{}.bn", i + 1), &fuse.bn);
            }
            for (i, res) in block.resblocks.iter().enumerate() {
                let rp = format!("{prefix}.res{}", i + 1);
                push_conv(&mut out, &format!("{rp}.conv1"), &res.conv1);
                push_bn(&mut out, &format!("{rp}.bn1"), &res.bn1);
                push_conv(&mut out, &format!("{rp}.conv2"), &res.conv2);
                push_bn(&mut out, &format!("{rp}.bn2"), &res.bn2);
            }
        }
        for (t, trans) in self.transitions.iter().enumerate() {
            push_conv(&mut out, &format!("feature.transition{}.conv", t + 1), &trans.conv);
            push_bn(&mut out, &format!("feature.transition{}.bn", t + 1), &trans.bn);
        }
        for (s, (conv, _)) in self.upsampler.iter().enumerate() {
            push_conv(&mut out, &format!("feature.up{}", s + 1), conv);
        }
        push_conv(&mut out, "feature.tail", &self.tail);
        self.attention.collect_params(&mut out);
        out
    }

    /// Every batch-norm layer with a stable dotted name (for persisting
    /// running statistics alongside the learnable parameters).
    pub fn named_batchnorms(&self) -> Vec<(String, &BatchNorm2d<T>)> {
        let mut out = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            let prefix = format!("feature.block{}", b + 1);
            for (i, fuse) in block.fusers.iter().enumerate() {
                out.push((format!("{prefix}.fuse{}.bn", i + 1), &fuse.bn));
            }
            for (i, res) in block.resblocks.iter().enumerate() {
                out.push((format!("{prefix}.res{}.bn1", i + 1), &res.bn1));
                out.push((format!("{prefix}.res{}.bn2", i + 1), &res.bn2));
            }
        }
        for (t, trans) in self.transitions.iter().enumerate() {
            out.push((format!("feature.transition{}.bn", t + 1), &trans.bn));
        }
        self.attention.collect_batchnorms(&mut out);
        out
    }

    /// Total learnable parameter count (excludes batch-norm running stats).
    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }
}

pub(crate) fn push_conv<'a, T: Scalar>(
    out: &mut Vec<(String, &'a Parameter<T>)>,
    name: &str,
    conv: &'a Conv2d<T>,
) {
    out.push((format!("{name}.weight"), &conv.weight));
    out.push((format!("{name}.bias"), &conv.bias));
}

pub(crate) fn push_bn<'a, T: Scalar>(
    out: &mut Vec<(String, &'a Parameter<T>)>,
    name: &str,
    bn: &'a BatchNorm2d<T>,
) {
    out.push((format!("{name}.gamma"), &bn.gamma));
    out.push((format!("{name}.beta"), &bn.beta));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{mean, sigmoid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f32> {
        let mut r = rng(seed);
        let n = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| r.gen_range(-1.0..1.0f32)).collect()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::with_defaults(2).validate().is_ok());
        assert!(ModelConfig::with_defaults(5).validate().is_err());
        let mut c = ModelConfig::with_defaults(3);
        c.denseres_blocks = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults_fill_in() {
        let c: ModelConfig = serde_json::from_str(r#"{"scale": 3}"#).unwrap();
        assert_eq!(c, ModelConfig::with_defaults(3));
        assert!(serde_json::from_str::<ModelConfig>(r#"{"scale": 3, "bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<ModelConfig>(r#"{"base_channels": 8}"#).is_err());
    }

    #[test]
    fn resblock_with_zero_convs_is_identity() {
        let mut r = rng(0);
        let block = Resblock::<f32>::new(4, &mut r);
        block.conv1.weight.set(Tensor::zeros(&block.conv1.weight.shape()));
        block.conv1.bias.set(Tensor::zeros(&[4]));
        block.conv2.weight.set(Tensor::zeros(&block.conv2.weight.shape()));
        block.conv2.bias.set(Tensor::zeros(&[4]));
        // With zero convs, bn(0) = beta = 0, so the residual path vanishes.
        let x = random_tensor(&[2, 4, 6, 6], 1);
        let g = Graph::disabled();
        let y = block.forward(&g, &x, Mode::Eval).unwrap();
        assert_eq!(y.data(), x.data(), "zeroed residual path must be exact identity");
    }

    #[test]
    fn resblock_matches_hand_composition() {
        let mut r = rng(2);
        let block = Resblock::<f32>::new(3, &mut r);
        let x = random_tensor(&[1, 3, 5, 5], 3);
        let g = Graph::disabled();
        let got = block.forward(&g, &x, Mode::Eval).unwrap();
        let a = block.bn1.forward(&g, &block.conv1.forward(&g, &x).unwrap(), Mode::Eval).unwrap();
        let a = relu(&g, &a);
        let a = block.bn2.forward(&g, &block.conv2.forward(&g, &a).unwrap(), Mode::Eval).unwrap();
        let want = add(&g, &a, &x).unwrap();
        assert_eq!(got.data(), want.data());
    }

    #[test]
    fn denseres_matches_unrolled_composition() {
        let mut r = rng(4);
        let block = DenseResBlock::<f32>::new(4, 2, &mut r);
        let g0 = random_tensor(&[1, 4, 6, 6], 5);
        let g = Graph::disabled();
        let got = block.forward(&g, &g0, Mode::Eval).unwrap();

        let h1 = block.fusers[0].forward(&g, &g0, Mode::Eval).unwrap();
        let f1 = block.resblocks[0].forward(&g, &h1, Mode::Eval).unwrap();
        let cat = concat_channels(&g, &[g0.clone(), f1.clone()]).unwrap();
        let h2 = block.fusers[1].forward(&g, &cat, Mode::Eval).unwrap();
        let f2 = block.resblocks[1].forward(&g, &h2, Mode::Eval).unwrap();
        assert_eq!(got.data(), f2.data());
    }

    #[test]
    fn feature_forward_shape_contract() {
        let mut r = rng(6);
        let cfg = ModelConfig {
            scale: 3,
            base_channels: 6,
            denseres_blocks: 2,
            resblocks_per_block: 1,
            attn_base_channels: 4,
            attn_growth: 4,
            attn_convs_per_dense_block: 2,
        };
        let model = AttnSrModel::<f32>::new(cfg, &mut r).unwrap();
        let lr = random_tensor(&[1, 3, 8, 8], 7);
        let g = Graph::disabled();
        let f = model.feature_forward(&g, &lr, Mode::Eval).unwrap();
        assert_eq!(f.shape(), &[1, 3, 24, 24]);
    }

    #[test]
    fn upsampler_stage_layout_per_scale() {
        for (scale, stages) in [(2usize, vec![2usize]), (3, vec![3]), (4, vec![2, 2])] {
            let mut r = rng(8);
            let mut cfg = ModelConfig::with_defaults(scale);
            cfg.base_channels = 4;
            cfg.denseres_blocks = 1;
            cfg.resblocks_per_block = 1;
            cfg.attn_base_channels = 2;
            cfg.attn_growth = 2;
            cfg.attn_convs_per_dense_block = 1;
            let model = AttnSrModel::<f32>::new(cfg, &mut r).unwrap();
            let got: Vec<usize> = model.upsampler.iter().map(|(_, f)| *f).collect();
            assert_eq!(got, stages, "scale {scale}");
            let lr = random_tensor(&[1, 3, 4, 4], 9);
            let g = Graph::disabled();
            let f = model.feature_forward(&g, &lr, Mode::Eval).unwrap();
            assert_eq!(f.shape(), &[1, 3, 4 * scale, 4 * scale]);
        }
    }

    #[test]
    fn zeroed_tail_makes_output_equal_ilr_bitwise() {
        let mut r = rng(10);
        let cfg = ModelConfig {
            scale: 2,
            base_channels: 4,
            denseres_blocks: 1,
            resblocks_per_block: 1,
            attn_base_channels: 4,
            attn_growth: 4,
            attn_convs_per_dense_block: 2,
        };
        let model = AttnSrModel::<f32>::new(cfg, &mut r).unwrap();
        let lr = random_tensor(&[1, 3, 4, 4], 11);
        let ilr = random_tensor(&[1, 3, 8, 8], 12);
        let g = Graph::disabled();

        // With a live tail the output must differ from the plain upscale...
        model
            .tail
            .weight
            .set(random_tensor(&model.tail.weight.shape(), 14));
        let (hr, _) = model.forward(&g, &lr, &ilr, Mode::Eval).unwrap();
        assert_ne!(hr.data(), ilr.data(), "live residual must change the output");

        // ...and zeroing it must collapse the model onto the upscale exactly.
        model.tail.weight.set(Tensor::zeros(&model.tail.weight.shape()));
        model.tail.bias.set(Tensor::zeros(&[3]));
        let (hr, mask) = model.forward(&g, &lr, &ilr, Mode::Eval).unwrap();
        assert_eq!(hr.shape(), &[1, 3, 8, 8]);
        assert_eq!(mask.shape(), &[1, 1, 8, 8]);
        let hr_bits: Vec<u32> = hr.data().iter().map(|v| v.to_bits()).collect();
        let ilr_bits: Vec<u32> = ilr.data().iter().map(|v| v.to_bits()).collect();
        assert_eq!(hr_bits, ilr_bits, "zero residual must reproduce the upscale bit-for-bit");
    }

    #[test]
    fn forward_rejects_mismatched_extent_ratio() {
        let mut r = rng(13);
        let cfg = ModelConfig {
            scale: 2,
            base_channels: 4,
            denseres_blocks: 1,
            resblocks_per_block: 1,
            attn_base_channels: 4,
            attn_growth: 4,
            attn_convs_per_dense_block: 1,
        };
        let model = AttnSrModel::<f32>::new(cfg, &mut r).unwrap();
        let lr = random_tensor(&[1, 3, 4, 4], 14);
        let bad_ilr = random_tensor(&[1, 3, 12, 12], 15);
        let g = Graph::disabled();
        assert!(model.forward(&g, &lr, &bad_ilr, Mode::Eval).is_err());
    }

    #[test]
    fn compose_matches_scalar_loop_and_edge_masks() {
        let g = Graph::disabled();
        let f = random_tensor(&[2, 3, 4, 5], 16);
        let m01 = random_tensor(&[2, 1, 4, 5], 17);
        let m = sigmoid(&g, &m01);
        let ilr = random_tensor(&[2, 3, 4, 5], 18);
        let hr = compose(&g, &f, &m, &ilr).unwrap();
        let (plane, chans) = (4 * 5, 3);
        for n in 0..2 {
            for c in 0..chans {
                for i in 0..plane {
                    let idx = (n * chans + c) * plane + i;
                    let want = f.data()[idx] * m.data()[n * plane + i] + ilr.data()[idx];
                    assert_eq!(hr.data()[idx].to_bits(), want.to_bits());
                }
            }
        }
        let zeros = Tensor::zeros(&[2, 1, 4, 5]);
        let hr0 = compose(&g, &f, &zeros, &ilr).unwrap();
        assert_eq!(hr0.data(), ilr.data(), "zero mask passes the upscale through");
        let ones = Tensor::full(&[2, 1, 4, 5], 1.0f32);
        let hr1 = compose(&g, &f, &ones, &ilr).unwrap();
        let sum = add(&g, &f, &ilr).unwrap();
        assert_eq!(hr1.data(), sum.data(), "unit mask adds the full residual");
    }

    #[test]
    fn joint_backward_reaches_every_parameter() {
        let mut r = rng(19);
        let cfg = ModelConfig {
            scale: 2,
            base_channels: 4,
            denseres_blocks: 2,
            resblocks_per_block: 2,
            attn_base_channels: 4,
            attn_growth: 4,
            attn_convs_per_dense_block: 2,
        };
        let model = AttnSrModel::<f32>::new(cfg, &mut r).unwrap();
        let lr = random_tensor(&[2, 3, 4, 4], 20);
        let ilr = random_tensor(&[2, 3, 8, 8], 21);
        let g = Graph::new();
        let (hr, _) = model.forward(&g, &lr, &ilr, Mode::Train).unwrap();
        let loss = mean(&g, &hr);
        g.backward(&loss).unwrap();
        for (name, p) in model.named_params() {
            let t = p.tensor();
            let grad = t.take_grad();
            assert!(grad.is_some(), "parameter {name} received no gradient");
        }
    }

    #[test]
    fn default_parameter_count_matches_closed_form() {
        // Hand-derived counts, independent of the construction code.
        //
        // Feature branch (C = 64, B = 6 blocks, R = 4 resblocks):
        //   head 3x3 (3 -> C):            C*3*9 + C                  =   1_792
        //   per block:
        //     fusers  sum_{i=1..R} (i*C*C + C + 2C)  = 10*C^2 + 12*C =  41_728
        //     resblocks R * (2*(9*C^2 + C) + 4*C)                    = 296_448
        //   transitions (B-1) * (C^2 + C + 2C)                       =  21_440
        //   upsampler x2: C -> 4C 3x3                                = 147_712
        //   tail 3x3 (C -> 3): 3*C*9 + 3                             =   1_731
        //   total x2 feature: 1792 + 6*338176 + 21440 + 147712 + 1731 = 2_201_731
        //
        // Attention branch (growth 16, 3 convs/block, deconv width 32):
        //   widths: enc1 3->51, enc2 51->99, bottleneck 99->147,
        //           dec1 (32+99)=131->179, dec2 (32+51)=83->131
        //   dense block (c_in): sum_j ((c_in + j*16)*16*9 + 16 + 32)
        //     enc1 8_352; enc2 29_088; bottleneck 49_824; dec1 63_648; dec2 42_912
        //   up1 (147->32): 147*32*4 + 32 = 18_848; up2 (179->32): 22_944
        //   head 1x1 (131->1): 132
        //   total attention: 235_748
        let mut r = rng(23);
        let m2 = AttnSrModel::<f32>::new(ModelConfig::with_defaults(2), &mut r).unwrap();
        assert_eq!(m2.param_count(), 2_201_731 + 235_748);

        // x3 swaps the upsampler conv for C -> 9C: 64*576*9 + 576 = 332_352.
        let m3 = AttnSrModel::<f32>::new(ModelConfig::with_defaults(3), &mut r).unwrap();
        assert_eq!(m3.param_count(), 2_201_731 - 147_712 + 332_352 + 235_748);

        // x4 uses two x2 stages.
        let m4 = AttnSrModel::<f32>::new(ModelConfig::with_defaults(4), &mut r).unwrap();
        assert_eq!(m4.param_count(), 2_201_731 + 147_712 + 235_748);
    }

    #[test]
    fn named_params_are_unique_and_complete() {
        let mut r = rng(22);
        let cfg = ModelConfig {
            scale: 4,
            base_channels: 4,
            denseres_blocks: 2,
            resblocks_per_block: 2,
            attn_base_channels: 4,
            attn_growth: 4,
            attn_convs_per_dense_block: 2,
        };
        let model = AttnSrModel::<f32>::new(cfg, &mut r).unwrap();
        let names: Vec<String> = model.named_params().iter().map(|(n, _)| n.clone()).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), names.len(), "duplicate parameter names");
        // Spot-check the naming scheme.
        for expect in [
            "feature.head.weight",
            "feature.block1.fuse1.conv.weight",
            "feature.block2.res2.bn2.beta",
            "feature.transition1.bn.gamma",
            "feature.up1.weight",
            "feature.up2.weight",
            "feature.tail.bias",
            "attn.enc1.conv1.weight",
            "attn.up1.weight",
            "attn.head.bias",
        ] {
            assert!(names.iter().any(|n| n == expect), "missing {expect}");
        }
        let bn_names: Vec<String> =
            model.named_batchnorms().iter().map(|(n, _)| n.clone()).collect();
        let mut bn_dedup = bn_names.clone();
        bn_dedup.sort();
        bn_dedup.dedup();
        assert_eq!(bn_dedup.len(), bn_names.len());
        assert!(bn_names.iter().any(|n| n == "attn.enc1.bn1"));
    }
}
