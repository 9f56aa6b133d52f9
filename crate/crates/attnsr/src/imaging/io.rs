//! PNG load/save for `[0, 1]` planar image buffers.

use std::path::Path;

use image::{ColorType, DynamicImage};

use super::ImageBuffer;
use crate::{Error, Result};

/// Loads an 8-bit PNG as a planar buffer scaled to `[0, 1]` (byte / 255).
///
/// Grayscale stays single-channel, RGB stays three-channel, and an alpha
/// channel is dropped. 16-bit and paletted-exotic inputs are rejected rather
/// than silently truncated.
pub fn load_png(path: &Path) -> Result<ImageBuffer> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let (channels, h, w, interleaved): (usize, usize, usize, Vec<u8>) = match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            (1, h, w, buf.into_raw())
        }
        DynamicImage::ImageLumaA8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let raw = buf.into_raw();
            (1, h, w, raw.chunks_exact(2).map(|px| px[0]).collect())
        }
        DynamicImage::ImageRgb8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            (3, h, w, buf.into_raw())
        }
        DynamicImage::ImageRgba8(buf) => {
            let (w, h) = (buf.width() as usize, buf.height() as usize);
            let raw = buf.into_raw();
            (
                3,
                h,
                w,
                raw.chunks_exact(4).flat_map(|px| [px[0], px[1], px[2]]).collect(),
            )
        }
        other => {
            return Err(Error::invalid(
                "load_png",
                format!(
                    "{}: unsupported pixel format {:?} (only 8-bit gray/RGB, with or without alpha)",
                    path.display(),
                    other.color()
                ),
            ));
        }
    };
    // Interleaved bytes -> planar floats.
    let plane = h * w;
    let mut data = vec![0.0f32; channels * plane];
    for i in 0..plane {
        for c in 0..channels {
            data[c * plane + i] = interleaved[i * channels + c] as f32 / 255.0;
        }
    }
    ImageBuffer::new(channels, h, w, data)
}

/// Writes an 8-bit PNG. Values are clamped to `[0, 1]` and quantized with
/// round-half-away-from-zero, matching the usual `round(v * 255)` convention.
pub fn save_png(path: &Path, img: &ImageBuffer) -> Result<()> {
    let (c, h, w) = (img.channels(), img.height(), img.width());
    let plane = h * w;
    let mut bytes = vec![0u8; c * plane];
    for i in 0..plane {
        for ch in 0..c {
            let v = img.data()[ch * plane + i].max(0.0).min(1.0);
            bytes[i * c + ch] = (v * 255.0).round() as u8;
        }
    }
    let color = match c {
        1 => ColorType::L8,
        3 => ColorType::Rgb8,
        _ => return Err(Error::invalid("save_png", format!("{c} channels"))),
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::io(path, source))?;
        }
    }
    image::save_buffer(path, &bytes, w as u32, h as u32, color).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}
