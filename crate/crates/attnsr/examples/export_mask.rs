//! Exports the attention mask and masked residual for one image, with
//! summary statistics about how hard the gate is working.
//!
//! Usage:
//!   cargo run --example export_mask -- <checkpoint> <input.png> [out_dir]
//!
//! Without arguments it builds a freshly initialized (untrained) model and a
//! synthetic input so the pipeline is demonstrable out of the box; pass a
//! trained checkpoint to see a meaningful mask.

use std::path::PathBuf;

use attnsr::imaging::{load_png, save_png, synthetic_texture, ImageBuffer};
use attnsr::model::{AttnSrModel, ModelConfig};
use attnsr::train::{super_resolve, Checkpoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> attnsr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();

    let (model, input, out_dir) = if args.is_empty() {
        let config = ModelConfig {
            scale: 2,
            base_channels: 16,
            denseres_blocks: 2,
            resblocks_per_block: 2,
            attn_base_channels: 8,
            attn_growth: 8,
            attn_convs_per_dense_block: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = AttnSrModel::<f32>::new(config, &mut rng)?;
        let input = synthetic_texture(48, 64, 5);
        eprintln!("no checkpoint given: using an untrained model on a synthetic image");
        (model, input, std::env::temp_dir().join("attnsr_export_mask"))
    } else {
        let ckpt = Checkpoint::read(&PathBuf::from(&args[0]))?;
        let model = ckpt.restore_model()?;
        let input = load_png(&PathBuf::from(&args[1]))?;
        let out_dir = args
            .get(2)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("attnsr_export_mask"));
        (model, input, out_dir)
    };
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let result = super_resolve(&model, &input)?;

    // How open is the gate, and how much signal passes through it?
    let stats = |name: &str, data: &[f32]| {
        let (mut lo, mut hi, mut sum) = (f32::INFINITY, f32::NEG_INFINITY, 0.0f64);
        for &v in data {
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v as f64;
        }
        println!(
            "{name}: min {lo:.4}  mean {:.4}  max {hi:.4}",
            sum / data.len() as f64
        );
    };
    stats("mask           ", result.mask.data());
    stats("residual       ", result.residual.data());
    let plane = result.mask.height() * result.mask.width();
    let masked: Vec<f32> = result
        .residual
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v * result.mask.data()[i % plane])
        .collect();
    stats("masked residual", &masked);

    // Min-max remap of the masked residual for a viewable grayscale PNG.
    let (lo, hi) = masked
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let viz: Vec<f32> = masked.iter().map(|&v| (v - lo) / span).collect();
    let viz = ImageBuffer::new(3, result.mask.height(), result.mask.width(), viz)
        .expect("same extents as the output");

    save_png(&out_dir.join("sr.png"), &result.hr.clamp01())?;
    save_png(&out_dir.join("mask.png"), &result.mask)?;
    save_png(&out_dir.join("residual.png"), &viz)?;
    println!(
        "wrote sr.png, mask.png, residual.png to {}",
        out_dir.display()
    );
    Ok(())
}
