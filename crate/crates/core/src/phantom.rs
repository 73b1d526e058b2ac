//! Synthetic test volumes with exactly known ground truth.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, Mask, Spacing, Volume};

pub const INTERIOR: f32 = 0.8;
pub const BACKGROUND: f32 = 0.2;
pub const NOISE_AMPLITUDE: f32 = 0.1;
pub const MIN_EXTENT: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomKind {
    Sphere,
    TwoBlobs,
    NoisySphere,
}

/// A ball in voxel coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ball {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Ball {
    fn contains(&self, pos: [usize; 3]) -> bool {
        let d2: f64 = (0..3)
            .map(|k| (pos[k] as f64 - self.center[k]).powi(2))
            .sum();
        d2 <= self.radius * self.radius
    }
}

/// Objects a phantom of the given kind and extent is built from.
///
/// The sphere sits at the integer grid center `dims / 2` with radius
/// `5/16` of the smallest extent (10 voxels on a 32-cube). Two-blob
/// phantoms place balls of radius `min / 6` at `nx/4` and `3nx/4`, with a
/// seeded jitter of at most one voxel along y and z.
pub fn phantom_balls(kind: PhantomKind, dims: Dims, rng_seed: u64) -> Vec<Ball> {
    let min = dims.nx.min(dims.ny).min(dims.nz) as f64;
    let center = [
        (dims.nx / 2) as f64,
        (dims.ny / 2) as f64,
        (dims.nz / 2) as f64,
    ];
    match kind {
        PhantomKind::Sphere | PhantomKind::NoisySphere => vec![Ball {
            center,
            radius: min * 5.0 / 16.0,
        }],
        PhantomKind::TwoBlobs => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let radius = min / 6.0;
            [dims.nx / 4, 3 * dims.nx / 4]
                .into_iter()
                .map(|x| {
                    let jy: i64 = rng.gen_range(-1..=1);
                    let jz: i64 = rng.gen_range(-1..=1);
                    Ball {
                        center: [x as f64, center[1] + jy as f64, center[2] + jz as f64],
                        radius,
                    }
                })
                .collect()
        }
    }
}

/// Builds an intensity volume in `[0, 1]` and its exact ground-truth mask.
///
/// Object voxels have intensity 0.8 and background 0.2. `NoisySphere` adds
/// uniform noise in `[-0.1, 0.1]` drawn from `rng_seed`.
pub fn make_phantom(
    kind: PhantomKind,
    dims: Dims,
    spacing: Spacing,
    rng_seed: u64,
) -> Result<(Volume, Mask)> {
    if dims.nx < MIN_EXTENT || dims.ny < MIN_EXTENT || dims.nz < MIN_EXTENT {
        return Err(Error::InvalidDims(
            dims.as_array(),
            "phantoms need at least 8 voxels along every axis",
        ));
    }
    spacing.validate()?;
    let balls = phantom_balls(kind, dims, rng_seed);
    let mask = Mask::from_bools(
        dims,
        spacing,
        (0..dims.len()).map(|i| {
            let p = dims.coords(i);
            balls.iter().any(|b| b.contains(p))
        }),
    );
    let mut data: Vec<f32> = mask
        .data()
        .iter()
        .map(|&m| if m == 1 { INTERIOR } else { BACKGROUND })
        .collect();
    if kind == PhantomKind::NoisySphere {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for v in &mut data {
            *v = (*v + rng.gen_range(-NOISE_AMPLITUDE..=NOISE_AMPLITUDE)).clamp(0.0, 1.0);
        }
    }
    Ok((Volume::new(dims, spacing, data)?, mask))
}
