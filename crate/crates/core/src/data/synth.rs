//! Synthetic grain-structure micrographs.
//!
//! Each image is a Voronoi tessellation of randomly placed grain seeds with
//! a gray level per grain, darkened grain boundaries, a copper tint and
//! low-amplitude noise. Fine-grained structures stand for the "≥ 80%"
//! class and coarse ones for "< 80%".

use alloc::format;
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use super::{Label, Sample, IMAGE_SHAPE};
use crate::rng;
use crate::Tensor;

/// Grain count range of the fine-grained ("ge80") class.
pub const FINE_CELLS: RangeInclusive<usize> = 30..=50;
/// Grain count range of the coarse-grained ("lt80") class.
pub const COARSE_CELLS: RangeInclusive<usize> = 5..=12;
/// Half-width of the uniform per-channel noise.
pub const NOISE_AMPLITUDE: f64 = 0.05;

const GRAY_RANGE: (f64, f64) = (0.3, 0.85);
/// Pixels whose two nearest seeds are closer than this (in distance
/// difference) lie on a grain boundary.
const BOUNDARY_WIDTH: f64 = 0.9;
const BOUNDARY_GAIN: f64 = 0.45;
const TINT: [f64; 3] = [1.0, 0.78, 0.6];

/// What the generator drew for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthRecord {
    /// Number of grain seeds placed.
    pub cells: usize,
    /// Number of grains that own at least one pixel.
    pub visible_cells: usize,
}

pub fn synth_generate(label: Label, seed: u64) -> Sample {
    synth_generate_with_record(label, seed).0
}

/// Deterministic in `(label, seed)`.
pub fn synth_generate_with_record(label: Label, seed: u64) -> (Sample, SynthRecord) {
    let [h, w, c] = IMAGE_SHAPE;
    let mut rng = rng::seeded(rng::derive_seed(seed, label.index() as u64));
    let range = match label {
        Label::Ge80 => FINE_CELLS,
        Label::Lt80 => COARSE_CELLS,
    };
    let cells = rng::uniform_int(&mut rng, *range.start(), *range.end());
    let seeds: Vec<(f64, f64, f64)> = (0..cells)
        .map(|_| {
            let y = rng::uniform(&mut rng, 0.0, h as f64);
            let x = rng::uniform(&mut rng, 0.0, w as f64);
            let gray = rng::uniform(&mut rng, GRAY_RANGE.0, GRAY_RANGE.1);
            (y, x, gray)
        })
        .collect();

    let mut owned = alloc::vec![false; cells];
    let mut data = Vec::with_capacity(h * w * c);
    for r in 0..h {
        for col in 0..w {
            let (py, px) = (r as f64 + 0.5, col as f64 + 0.5);
            let mut best = (f64::INFINITY, 0usize);
            let mut second = f64::INFINITY;
            for (k, &(sy, sx, _)) in seeds.iter().enumerate() {
                let d = libm::sqrt((py - sy) * (py - sy) + (px - sx) * (px - sx));
                if d < best.0 {
                    second = best.0;
                    best = (d, k);
                } else if d < second {
                    second = d;
                }
            }
            owned[best.1] = true;
            let mut gray = seeds[best.1].2;
            if second - best.0 < BOUNDARY_WIDTH {
                gray *= BOUNDARY_GAIN;
            }
            for tint in TINT {
                let noise = rng::uniform(&mut rng, -NOISE_AMPLITUDE, NOISE_AMPLITUDE);
                data.push((gray * tint + noise).clamp(0.0, 1.0));
            }
        }
    }
    let image = Tensor::from_vec(&IMAGE_SHAPE, data).expect("buffer matches IMAGE_SHAPE");
    let record = SynthRecord {
        cells,
        visible_cells: owned.iter().filter(|&&o| o).count(),
    };
    let sample = Sample {
        image,
        label,
        source_id: format!("synth_{}_{seed}", label.index()),
    };
    (sample, record)
}
