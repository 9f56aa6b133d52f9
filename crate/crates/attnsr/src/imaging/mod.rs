//! Image values, resampling, color conversion, quality metrics, and PNG I/O.
//!
//! Images live in normalized `[0, 1]` reals, stored planar (all of channel 0,
//! then channel 1, ...). Interleaving happens only at the PNG boundary.

mod io;
mod metrics;
mod resize;
mod synth;

pub use io::{load_png, save_png};
pub use metrics::{psnr, ssim};
pub use resize::{bicubic_kernel, resize_bicubic, resize_bicubic_custom};
pub use synth::{synthetic_texture, write_toy_corpus};

use crate::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// A 1- or 3-channel image of `f32` samples, planar layout, nominally in
/// `[0, 1]` (resampling may step outside; exports clamp).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ImageBuffer {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(
                "ImageBuffer::new",
                format!("channels must be 1 or 3, got {channels}"),
            ));
        }
        if height == 0 || width == 0 || data.len() != channels * height * width {
            return Err(Error::invalid(
                "ImageBuffer::new",
                format!(
                    "{channels}x{height}x{width} wants {} samples, got {}",
                    channels * height * width,
                    data.len()
                ),
            ));
        }
        Ok(ImageBuffer {
            channels,
            height,
            width,
            data,
        })
    }

    /// Constant-filled image.
    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        ImageBuffer::new(channels, height, width, vec![value; channels * height * width])
            .expect("dimensions validated by caller")
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// One channel's plane, row-major.
    pub fn plane(&self, c: usize) -> &[f32] {
        &self.data[c * self.height * self.width..(c + 1) * self.height * self.width]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Luma conversion, BT.601 studio swing:
    /// `Y = (65.481 R + 128.553 G + 24.966 B + 16) / 255`.
    ///
    /// Black maps to 16/255 and white to 235/255 (the coefficients sum
    /// to 219). Single-channel images are treated as `R = G = B`.
    pub fn rgb_to_y(&self) -> ImageBuffer {
        let plane = self.height * self.width;
        let mut y = vec![0.0f32; plane];
        if self.channels == 3 {
            let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
            for i in 0..plane {
                y[i] = ((65.481 * r[i] as f64 + 128.553 * g[i] as f64 + 24.966 * b[i] as f64
                    + 16.0)
                    / 255.0) as f32;
            }
        } else {
            for (yo, &v) in y.iter_mut().zip(self.plane(0)) {
                *yo = ((219.0 * v as f64 + 16.0) / 255.0) as f32;
            }
        }
        ImageBuffer::new(1, self.height, self.width, y).expect("same extents")
    }

    /// Crop height and width down to the nearest multiples of `r`,
    /// discarding bottom rows and right columns.
    pub fn modcrop(&self, r: usize) -> ImageBuffer {
        assert!(r > 0, "modcrop factor must be positive");
        self.crop_top_left(self.height - self.height % r, self.width - self.width % r)
    }

    /// Keep the top-left `h x w` region.
    pub fn crop_top_left(&self, h: usize, w: usize) -> ImageBuffer {
        assert!(
            h >= 1 && w >= 1 && h <= self.height && w <= self.width,
            "crop {h}x{w} out of bounds for {}x{}",
            self.height,
            self.width
        );
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in 0..h {
                data.extend_from_slice(&p[y * self.width..y * self.width + w]);
            }
        }
        ImageBuffer::new(self.channels, h, w, data).expect("validated extents")
    }

    /// Remove `n` pixels from every side (the boundary-ignoring rule used by
    /// evaluation, with `n` = the upscaling factor).
    pub fn crop_border(&self, n: usize) -> Result<ImageBuffer> {
        if 2 * n >= self.height.min(self.width) {
            return Err(Error::invalid(
                "crop_border",
                format!("cannot remove {n} from each side of {}x{}", self.height, self.width),
            ));
        }
        let (h, w) = (self.height - 2 * n, self.width - 2 * n);
        let mut data = Vec::with_capacity(self.channels * h * w);
        for c in 0..self.channels {
            let p = self.plane(c);
            for y in 0..h {
                let row = (y + n) * self.width + n;
                data.extend_from_slice(&p[row..row + w]);
            }
        }
        ImageBuffer::new(self.channels, h, w, data)
    }

    /// Clamp every sample into `[0, 1]`. Negative zeros normalize to +0.0 so
    /// downstream exact-identity comparisons are well defined.
    pub fn clamp01(&self) -> ImageBuffer {
        let data = self
            .data
            .iter()
            .map(|&v| v.max(0.0).min(1.0) + 0.0)
            .collect();
        ImageBuffer {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Extend by `dy` rows below and `dx` columns right, mirroring edge
    /// pixels (edge-inclusive: `a b c | c b a c b a ...` folds as needed).
    pub fn pad_bottom_right_mirror(&self, dy: usize, dx: usize) -> ImageBuffer {
        let (h, w) = (self.height + dy, self.width + dx);
        let mut data = vec![0.0f32; self.channels * h * w];
        for c in 0..self.channels {
            let src = self.plane(c);
            for y in 0..h {
                let sy = mirror_index(y, self.height);
                for x in 0..w {
                    let sx = mirror_index(x, self.width);
                    data[(c * h + y) * w + x] = src[sy * self.width + sx];
                }
            }
        }
        ImageBuffer::new(self.channels, h, w, data).expect("validated extents")
    }

    /// Extend by `dy` rows below and `dx` columns right with zeros.
    pub fn pad_bottom_right_zero(&self, dy: usize, dx: usize) -> ImageBuffer {
        let (h, w) = (self.height + dy, self.width + dx);
        let mut data = vec![0.0f32; self.channels * h * w];
        for c in 0..self.channels {
            let src = self.plane(c);
            for y in 0..self.height {
                data[(c * h + y) * w..(c * h + y) * w + self.width]
                    .copy_from_slice(&src[y * self.width..(y + 1) * self.width]);
            }
        }
        ImageBuffer::new(self.channels, h, w, data).expect("validated extents")
    }

    /// View as a `[1, c, h, w]` tensor in any scalar precision.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = self.data.iter().map(|&v| T::from_f64(v as f64)).collect();
        Tensor::new(&[1, self.channels, self.height, self.width], data)
            .expect("image extents are positive")
    }

    /// Rebuild from a `[1, c, h, w]` tensor (values cast to f32, unclamped).
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<ImageBuffer> {
        let s = t.shape();
        if s.len() != 4 || s[0] != 1 || (s[1] != 1 && s[1] != 3) {
            return Err(Error::shape(
                "ImageBuffer::from_tensor",
                format!("expected [1, 1|3, h, w], got {s:?}"),
            ));
        }
        let data = t.data().iter().map(|&v| v.to_f64() as f32).collect();
        ImageBuffer::new(s[1], s[2], s[3], data)
    }
}

/// Fold an out-of-range index back into `[0, len)` by edge-inclusive
/// mirroring (period `2 * len`).
fn mirror_index(i: usize, len: usize) -> usize {
    let period = 2 * len;
    let m = i % period;
    if m < len {
        m
    } else {
        period - 1 - m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn luma_anchors() {
        let black = ImageBuffer::filled(3, 2, 2, 0.0).rgb_to_y();
        assert!((black.data()[0] - 16.0 / 255.0).abs() < 1e-7);
        let white = ImageBuffer::filled(3, 2, 2, 1.0).rgb_to_y();
        assert!((white.data()[0] - 235.0 / 255.0).abs() < 1e-7);
        let green = ImageBuffer::new(3, 1, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let y = green.rgb_to_y();
        assert!((y.data()[0] - (128.553 + 16.0) / 255.0).abs() < 1e-7);
        // Single-channel images pass through the same gray mapping.
        let gray = ImageBuffer::filled(1, 1, 1, 1.0).rgb_to_y();
        assert!((gray.data()[0] - 235.0 / 255.0).abs() < 1e-7);
    }

    #[test]
    fn modcrop_discards_bottom_right() {
        let img = ImageBuffer::new(1, 5, 7, (0..35).map(|v| v as f32).collect()).unwrap();
        let c = img.modcrop(2);
        assert_eq!((c.height(), c.width()), (4, 6));
        assert_eq!(c.get(0, 0, 0), 0.0);
        assert_eq!(c.get(0, 3, 5), (3 * 7 + 5) as f32);
    }

    #[test]
    fn crop_border_composes_additively() {
        let img = ImageBuffer::new(1, 10, 10, (0..100).map(|v| v as f32).collect()).unwrap();
        let a = img.crop_border(2).unwrap();
        assert_eq!((a.height(), a.width()), (6, 6));
        let b = img.crop_border(1).unwrap().crop_border(1).unwrap();
        assert_eq!(a, b);
        assert_eq!(img.crop_border(0).unwrap(), img);
        assert!(img.crop_border(5).is_err());
    }

    #[test]
    fn clamp_normalizes_negative_zero() {
        let img = ImageBuffer::new(1, 1, 4, vec![-0.5, -0.0, 0.5, 1.5]).unwrap();
        let c = img.clamp01();
        assert_eq!(c.data(), &[0.0, 0.0, 0.5, 1.0]);
        assert_eq!(c.data()[1].to_bits(), 0.0f32.to_bits(), "-0.0 must become +0.0");
    }

    #[test]
    fn mirror_pad_reflects_edges() {
        let img = ImageBuffer::new(1, 2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let p = img.pad_bottom_right_mirror(2, 1);
        assert_eq!((p.height(), p.width()), (4, 4));
        // Row 0 extends 1,2,3 -> 1,2,3,3; rows mirror 0,1 -> 0,1,1,0.
        assert_eq!(p.plane(0), &[
            1.0, 2.0, 3.0, 3.0,
            4.0, 5.0, 6.0, 6.0,
            4.0, 5.0, 6.0, 6.0,
            1.0, 2.0, 3.0, 3.0,
        ]);
    }

    #[test]
    fn tensor_roundtrip() {
        let img = ImageBuffer::new(3, 2, 2, (0..12).map(|v| v as f32 / 12.0).collect()).unwrap();
        let t = img.to_tensor::<f64>();
        assert_eq!(t.shape(), &[1, 3, 2, 2]);
        let back = ImageBuffer::from_tensor(&t).unwrap();
        assert_eq!(img, back);
    }
}
