//! Upscales one PNG with a trained checkpoint. Inputs of any size work:
//! the image is padded internally to the network's tiling and the output
//! is cropped back to exactly `scale` times the input extents.
//!
//! Usage:
//!   cargo run --example super_resolve -- <checkpoint> <input.png> [output.png]
//!
//! Without arguments it runs a freshly initialized (untrained) model on a
//! synthetic image, which demonstrates the plumbing but not the quality.

use std::path::PathBuf;

use attnsr::imaging::{load_png, save_png, synthetic_texture};
use attnsr::model::{AttnSrModel, ModelConfig};
use attnsr::train::{super_resolve, Checkpoint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> attnsr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();

    let (model, input, output) = if args.is_empty() {
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
        eprintln!("no checkpoint given: using an untrained model on a synthetic image");
        (
            AttnSrModel::<f32>::new(config, &mut rng)?,
            synthetic_texture(37, 51, 4),
            std::env::temp_dir().join("attnsr_super_resolve.png"),
        )
    } else {
        let model = Checkpoint::read(&PathBuf::from(&args[0]))?.restore_model()?;
        let input = load_png(&PathBuf::from(&args[1]))?;
        let output = args
            .get(2)
            .map(PathBuf::from)
            .unwrap_or_else(|| std::env::temp_dir().join("attnsr_super_resolve.png"));
        (model, input, output)
    };

    let result = super_resolve(&model, &input)?;
    save_png(&output, &result.hr)?;
    println!(
        "{}x{} -> {}x{} ({})",
        input.height(),
        input.width(),
        result.hr.height(),
        result.hr.width(),
        output.display()
    );
    Ok(())
}
