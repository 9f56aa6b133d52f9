//! The mask-producing branch: a small U-shaped network over the upscaled
//! input whose dense blocks grow channels concatenatively, ending in a
//! sigmoid so every mask value lies strictly inside (0, 1).

use rand::Rng;

use super::{push_bn, push_conv};
use crate::nn::{
    expect_nchw, maxpool2x2, BatchNorm2d, Conv2d, ConvTranspose2d, Mode, Parameter,
};
use crate::tensor::{concat_channels, relu, sigmoid, Graph, Scalar, Tensor};
use crate::{Error, Result};

/// DenseNet-style block: each 3x3 conv (+ BN + ReLU) sees the concatenation
/// of the block input and all earlier conv outputs and adds `growth`
/// channels; the block output is the full concatenation.
pub struct AttnDenseBlock<T: Scalar> {
    pub convs: Vec<(Conv2d<T>, BatchNorm2d<T>)>,
    in_channels: usize,
    growth: usize,
}

impl<T: Scalar> AttnDenseBlock<T> {
    pub fn new<R: Rng>(in_channels: usize, growth: usize, convs: usize, rng: &mut R) -> Self {
        let convs = (0..convs)
            .map(|j| {
                (
                    Conv2d::new(in_channels + j * growth, growth, 3, 1, rng),
                    BatchNorm2d::new(growth),
                )
            })
            .collect();
        AttnDenseBlock { convs, in_channels, growth }
    }

    pub fn out_channels(&self) -> usize {
        self.in_channels + self.convs.len() * self.growth
    }

    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let mut parts = vec![x.clone()];
        for (conv, bn) in &self.convs {
            let cat = if parts.len() == 1 {
                parts[0].clone()
            } else {
                concat_channels(g, &parts)?
            };
            let f = relu(g, &bn.forward(g, &conv.forward(g, &cat)?, mode)?);
            parts.push(f);
        }
        concat_channels(g, &parts)
    }
}

/// Encoder (two dense blocks with 2x2 max pooling), bottleneck dense block,
/// decoder (two transposed-conv upsamplings with channel-concat skips and
/// dense blocks), and a 1x1 conv + sigmoid head to a single channel.
pub struct AttentionNet<T: Scalar> {
    pub enc1: AttnDenseBlock<T>,
    pub enc2: AttnDenseBlock<T>,
    pub bottleneck: AttnDenseBlock<T>,
    pub up1: ConvTranspose2d<T>,
    pub dec1: AttnDenseBlock<T>,
    pub up2: ConvTranspose2d<T>,
    pub dec2: AttnDenseBlock<T>,
    pub head: Conv2d<T>,
}

impl<T: Scalar> AttentionNet<T> {
    pub fn new<R: Rng>(
        in_channels: usize,
        base_channels: usize,
        growth: usize,
        convs_per_block: usize,
        rng: &mut R,
    ) -> Self {
        let enc1 = AttnDenseBlock::new(in_channels, growth, convs_per_block, rng);
        let enc2 = AttnDenseBlock::new(enc1.out_channels(), growth, convs_per_block, rng);
        let bottleneck = AttnDenseBlock::new(enc2.out_channels(), growth, convs_per_block, rng);
        let up1 = ConvTranspose2d::new(bottleneck.out_channels(), base_channels, rng);
        let dec1 = AttnDenseBlock::new(
            base_channels + enc2.out_channels(),
            growth,
            convs_per_block,
            rng,
        );
        let up2 = ConvTranspose2d::new(dec1.out_channels(), base_channels, rng);
        let dec2 = AttnDenseBlock::new(
            base_channels + enc1.out_channels(),
            growth,
            convs_per_block,
            rng,
        );
        let head = Conv2d::new(dec2.out_channels(), 1, 1, 0, rng);
        // Bias the head so the initial mask sits near sigmoid(2) ~ 0.88:
        // an open gate feeds loss gradient to the feature branch from the
        // first step, instead of letting the mask collapse to zero while
        // the residual is still noise (which starves the branch and pins
        // the network at the plain-interpolation output).
        head.bias
            .set(Tensor::new(&[1], vec![T::from_f64(2.0)]).expect("scalar bias"));
        AttentionNet { enc1, enc2, bottleneck, up1, dec1, up2, dec2, head }
    }

    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let (_, _, h, w) = expect_nchw("attention_forward", x, self.enc1.in_channels)?;
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::invalid(
                "attention_forward",
                format!("spatial extents {h}x{w} must be divisible by 4 (two pooling stages)"),
            ));
        }
        let e1 = self.enc1.forward(g, x, mode)?;
        let p1 = maxpool2x2(g, &e1)?;
        let e2 = self.enc2.forward(g, &p1, mode)?;
        let p2 = maxpool2x2(g, &e2)?;
        let b = self.bottleneck.forward(g, &p2, mode)?;
        let u1 = self.up1.forward(g, &b)?;
        let d1 = self.dec1.forward(g, &concat_channels(g, &[u1, e2])?, mode)?;
        let u2 = self.up2.forward(g, &d1)?;
        let d2 = self.dec2.forward(g, &concat_channels(g, &[u2, e1])?, mode)?;
        Ok(sigmoid(g, &self.head.forward(g, &d2)?))
    }

    pub(crate) fn collect_params<'a>(&'a self, out: &mut Vec<(String, &'a Parameter<T>)>) {
        for (name, block) in self.named_blocks() {
            for (j, (conv, bn)) in block.convs.iter().enumerate() {
                push_conv(out, &format!("attn.{name}.conv{}", j + 1), conv);
                push_bn(out, &format!("attn.{name}.bn{}", j + 1), bn);
            }
        }
        for (name, up) in [("up1", &self.up1), ("up2", &self.up2)] {
            out.push((format!("attn.{name}.weight"), &up.weight));
            out.push((format!("attn.{name}.bias"), &up.bias));
        }
        push_conv(out, "attn.head", &self.head);
    }

    pub(crate) fn collect_batchnorms<'a>(
        &'a self,
        out: &mut Vec<(String, &'a BatchNorm2d<T>)>,
    ) {
        for (name, block) in self.named_blocks() {
            for (j, (_, bn)) in block.convs.iter().enumerate() {
                out.push((format!("attn.{name}.bn{}", j + 1), bn));
            }
        }
    }

    fn named_blocks(&self) -> [(&'static str, &AttnDenseBlock<T>); 5] {
        [
            ("enc1", &self.enc1),
            ("enc2", &self.enc2),
            ("bottleneck", &self.bottleneck),
            ("dec1", &self.dec1),
            ("dec2", &self.dec2),
        ]
    }
}
