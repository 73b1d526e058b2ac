//! Wall-clock timing of the guidance encoders on cubic phantoms.

use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use guidance_core::{
    encode, make_phantom, Click, ClickSet, Dims, Frame, GuidanceConfig, GuidanceKind, Mask, PhantomKind, Polarity,
    Spacing,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

// image, mask, distance buffers and the output map
const BYTES_PER_VOXEL: usize = 48;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub sizes: Vec<usize>,
    pub kinds: Vec<GuidanceKind>,
    pub repetitions: usize,
    pub n_clicks: usize,
    pub sigma: f64,
    pub theta_percent: f64,
    pub phantom: PhantomKind,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            sizes: vec![64, 128, 256],
            kinds: GuidanceKind::ALL.to_vec(),
            repetitions: 5,
            n_clicks: 10,
            sigma: 1.0,
            theta_percent: 0.0,
            phantom: PhantomKind::Sphere,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub kind: GuidanceKind,
    pub size: usize,
    pub repetitions: usize,
    pub median_seconds: f64,
    pub p95_seconds: f64,
    pub runs_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n_clicks: usize,
    pub sigma: f64,
    pub theta_percent: f64,
    pub cells: Vec<BenchCell>,
}

impl BenchReport {
    pub fn cell(&self, kind: GuidanceKind, size: usize) -> Option<&BenchCell> {
        self.cells.iter().find(|c| c.kind == kind && c.size == size)
    }

    /// Cells whose median exceeds the budget.
    pub fn over_budget(&self, budget_seconds: f64) -> Vec<&BenchCell> {
        self.cells.iter().filter(|c| c.median_seconds > budget_seconds).collect()
    }

    /// Sizes at which some kind has a strictly smaller median than Disk.
    pub fn disk_not_fastest(&self) -> Vec<usize> {
        let mut sizes: Vec<usize> = self.cells.iter().map(|c| c.size).collect();
        sizes.dedup();
        sizes
            .into_iter()
            .filter(|&s| {
                self.cell(GuidanceKind::Disk, s).is_some_and(|disk| {
                    self.cells
                        .iter()
                        .any(|c| c.size == s && c.median_seconds < disk.median_seconds)
                })
            })
            .collect()
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<10} {:>6} {:>5} {:>12} {:>12}\n", "kind", "size", "reps", "median_ms", "p95_ms");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{:<10} {:>6} {:>5} {:>12.3} {:>12.3}",
                c.kind.as_str(),
                c.size,
                c.repetitions,
                c.median_seconds * 1e3,
                c.p95_seconds * 1e3
            );
        }
        out
    }
}

/// `n` distinct foreground clicks drawn uniformly from the object.
pub fn object_clicks(gt: &Mask, n: usize, seed: u64) -> Result<ClickSet> {
    let inside: Vec<usize> = (0..gt.data().len()).filter(|&i| gt.data()[i] == 1).collect();
    if inside.len() < n {
        bail!("object has {} voxels, fewer than {n} clicks", inside.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clicks = ClickSet::new();
    while clicks.len() < n {
        let [x, y, z] = gt.dims().coords(inside[rng.gen_range(0..inside.len())]);
        // a repeated draw is simply skipped
        let _ = clicks.push(Click::fg(x, y, z));
    }
    Ok(clicks)
}

/// Nearest-rank quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn check_memory(size: usize) -> Result<()> {
    let voxels = size
        .checked_pow(3)
        .with_context(|| format!("size {size} overflows"))?;
    let bytes = voxels
        .checked_mul(BYTES_PER_VOXEL)
        .with_context(|| format!("size {size} overflows"))?;
    let mut probe: Vec<u8> = Vec::new();
    probe
        .try_reserve_exact(bytes)
        .with_context(|| format!("cannot allocate {} MiB for a {size}^3 volume", bytes >> 20))?;
    Ok(())
}

pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    if spec.repetitions == 0 || spec.sizes.is_empty() || spec.kinds.is_empty() {
        bail!("bench needs at least one size, kind and repetition");
    }
    let mut cells = Vec::new();
    for &size in &spec.sizes {
        check_memory(size)?;
        let dims = Dims::cube(size)?;
        let (image, gt) = make_phantom(spec.phantom, dims, Spacing::UNIT, spec.seed)?;
        let clicks = object_clicks(&gt, spec.n_clicks, spec.seed)?;
        for &kind in &spec.kinds {
            let config = GuidanceConfig {
                sigma: spec.sigma,
                theta_percent: if kind.uses_theta() { spec.theta_percent } else { 0.0 },
                ..GuidanceConfig::new(kind)
            };
            let mut runs = Vec::with_capacity(spec.repetitions);
            for _ in 0..spec.repetitions {
                let start = Instant::now();
                let g = encode(&clicks, Polarity::Foreground, Frame::Image(&image), &config)?;
                runs.push(start.elapsed().as_secs_f64());
                drop(g);
            }
            let mut sorted = runs.clone();
            sorted.sort_by(f64::total_cmp);
            log::info!("{} {size}^3: median {:.4}s", kind.as_str(), quantile(&sorted, 0.5));
            cells.push(BenchCell {
                kind,
                size,
                repetitions: spec.repetitions,
                median_seconds: quantile(&sorted, 0.5),
                p95_seconds: quantile(&sorted, 0.95),
                runs_seconds: runs,
            });
        }
    }
    Ok(BenchReport {
        n_clicks: spec.n_clicks,
        sigma: spec.sigma,
        theta_percent: spec.theta_percent,
        cells,
    })
}
