//! Property-based checks of structural invariants: gradient fan-out
//! accumulation, permutation round trips, metric laws, augmentation group
//! structure, and resize identities.

mod common;

use attnsr::imaging::{psnr, resize_bicubic, ImageBuffer};
use attnsr::nn::{pixel_shuffle, pixel_unshuffle};
use attnsr::tensor::{add, mul, sigmoid, sum, Graph, Tensor};
use attnsr::train::dihedral;
use proptest::prelude::*;

fn small_image(c: usize, h: usize, w: usize, seed: u64) -> ImageBuffer {
    // Deterministic pseudo-random pixels in [0, 1].
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let data = (0..c * h * w)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f32) / (u32::MAX >> 1) as f32 * 0.5
        })
        .collect();
    ImageBuffer::new(c, h, w, data).unwrap()
}

proptest! {
    /// A tensor feeding several consumers receives the sum of their
    /// gradients: d/dx sum(x + x) = 2 and d/dx sum(x * x) = 2x.
    #[test]
    fn fanout_gradients_accumulate(vals in proptest::collection::vec(-2.0f64..2.0, 1..24)) {
        let n = vals.len();
        let x = Tensor::new(&[n], vals.clone()).unwrap();
        let g = Graph::new();
        let doubled = add(&g, &x, &x).unwrap();
        let loss = sum(&g, &doubled);
        g.backward(&loss).unwrap();
        let grad = x.take_grad().unwrap();
        for (i, &d) in grad.iter().enumerate() {
            prop_assert!((d - 2.0).abs() < 1e-12, "add fan-out at {i}: {d}");
        }

        let x = Tensor::new(&[n], vals.clone()).unwrap();
        let g = Graph::new();
        let squared = mul(&g, &x, &x).unwrap();
        let loss = sum(&g, &squared);
        g.backward(&loss).unwrap();
        let grad = x.take_grad().unwrap();
        for (i, &d) in grad.iter().enumerate() {
            prop_assert!((d - 2.0 * vals[i]).abs() < 1e-12, "mul fan-out at {i}: {d}");
        }
    }

    /// Depth-to-space followed by space-to-depth is the identity (and the
    /// other way around), for every supported upscaling factor.
    #[test]
    fn pixel_shuffle_roundtrips(
        r in 2usize..=4,
        n in 1usize..=2,
        cu in 1usize..=3,
        h in 1usize..=4,
        w in 1usize..=4,
        seed in 0u64..1000,
    ) {
        let c = cu * r * r;
        let len = n * c * h * w;
        let data: Vec<f32> = (0..len).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f32 / 999.0).collect();
        let x = Tensor::new(&[n, c, h, w], data.clone()).unwrap();
        let g = Graph::disabled();
        let there = pixel_shuffle(&g, &x, r).unwrap();
        let back = pixel_unshuffle(&g, &there, r).unwrap();
        prop_assert_eq!(back.shape(), x.shape());
        prop_assert_eq!(back.data(), x.data());

        let y = Tensor::new(&[n, cu, h * r, w * r], {
            let len = n * cu * h * r * w * r;
            (0..len).map(|i| ((i as u64 * 40503 + seed) % 997) as f32 / 996.0).collect::<Vec<_>>()
        }).unwrap();
        let there = pixel_unshuffle(&g, &y, r).unwrap();
        let back = pixel_shuffle(&g, &there, r).unwrap();
        prop_assert_eq!(back.data(), y.data());
    }

    /// Sigmoid output stays strictly inside (0, 1) no matter how saturated
    /// the input is — the mask guarantee rests on this.
    #[test]
    fn sigmoid_is_strictly_bounded(vals in proptest::collection::vec(-1e6f32..1e6, 1..32)) {
        let n = vals.len();
        let x = Tensor::new(&[n], vals).unwrap();
        let g = Graph::disabled();
        let y = sigmoid(&g, &x);
        for &v in y.data() {
            prop_assert!(v > 0.0 && v < 1.0, "sigmoid output {v} escaped (0,1)");
        }
    }

    /// Adding a constant offset d to every pixel gives PSNR = -20 log10(d).
    #[test]
    fn psnr_constant_shift_law_is_exact(
        delta in 0.001f64..0.5,
        seed in 0u64..500,
    ) {
        let a = small_image(1, 12, 12, seed);
        let shifted: Vec<f32> = a.data().iter().map(|&v| v + delta as f32).collect();
        let b = ImageBuffer::new(1, 12, 12, shifted).unwrap();
        let got = psnr(&a, &b).unwrap();
        // The f32 addition quantizes the shift per pixel, so allow a loose
        // but still diagnostic tolerance.
        let want = -20.0 * (delta).log10();
        prop_assert!((got - want).abs() < 1e-3, "psnr {got} vs {want} at delta {delta}");
    }

    /// The eight dihedral augmentations form a closed group: each one has
    /// an inverse among the eight, and they are pairwise distinct on a
    /// generic image.
    #[test]
    fn dihedral_transforms_invert_and_differ(seed in 0u64..500) {
        let img = small_image(3, 5, 7, seed.wrapping_add(17));
        for k in 0..8u8 {
            let t = dihedral(&img, k);
            let mut inverted = false;
            for j in 0..8u8 {
                let back = dihedral(&t, j);
                if back.height() == img.height()
                    && back.width() == img.width()
                    && back.data() == img.data()
                {
                    inverted = true;
                    break;
                }
            }
            prop_assert!(inverted, "transform {k} has no inverse in the group");
        }
    }

    /// Resizing to the original extents is the identity: the interpolation
    /// kernel at integer sample offsets is exactly (0, 1, 0).
    #[test]
    fn bicubic_resize_to_same_size_is_identity(
        h in 4usize..16,
        w in 4usize..16,
        seed in 0u64..500,
    ) {
        let img = small_image(3, h, w, seed.wrapping_add(3));
        let out = resize_bicubic(&img, h, w).unwrap();
        for (i, (&a, &b)) in img.data().iter().zip(out.data()).enumerate() {
            prop_assert!((a - b).abs() <= 1e-6, "pixel {i}: {a} vs {b}");
        }
    }
}
