//! Multi-source distance transforms over the voxel grid.
//!
//! [`edt`] is the exact Euclidean transform, [`gdt`] the raster-scan
//! geodesic transform and [`dijkstra_oracle`] an exact priority-queue
//! reference for the geodesic graph, intended for tests.

mod dijkstra;
mod euclidean;
mod geodesic;

use serde::{Deserialize, Serialize};

pub use dijkstra::{dijkstra_oracle, DIJKSTRA_MAX_VOXELS};
pub use euclidean::edt;
pub use geodesic::gdt;

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::volume::{ClickSet, Dims, Polarity, Spacing, Volume};

/// Seed voxels of a distance transform, stored as ascending linear indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSet {
    dims: Dims,
    indices: Vec<usize>,
}

impl SeedSet {
    pub fn new(dims: Dims, positions: impl IntoIterator<Item = [usize; 3]>) -> Result<Self> {
        let mut indices = Vec::new();
        for p in positions {
            if !dims.contains(p) {
                return Err(Error::OutOfBounds { pos: p, dims });
            }
            indices.push(dims.index_of(p));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { dims, indices })
    }

    pub(crate) fn from_flags(dims: Dims, flags: &[bool]) -> Self {
        debug_assert_eq!(flags.len(), dims.len());
        let indices = flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect();
        Self { dims, indices }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, pos: [usize; 3]) -> bool {
        self.indices.binary_search(&self.dims.index_of(pos)).is_ok()
    }

    pub fn insert(&mut self, pos: [usize; 3]) -> Result<()> {
        if !self.dims.contains(pos) {
            return Err(Error::OutOfBounds {
                pos,
                dims: self.dims,
            });
        }
        let i = self.dims.index_of(pos);
        if let Err(at) = self.indices.binary_search(&i) {
            self.indices.insert(at, i);
        }
        Ok(())
    }

    fn ensure_non_empty(&self) -> Result<()> {
        if self.indices.is_empty() {
            Err(Error::EmptySeeds)
        } else {
            Ok(())
        }
    }
}

/// Union of voxel-unit balls of radius `sigma` around each click of the given
/// polarity, clipped to the grid. `sigma = 0` keeps just the click voxels.
pub fn dilate_seeds(clicks: &ClickSet, polarity: Polarity, sigma: f64, dims: Dims) -> Result<SeedSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma must be >= 0, got {sigma}")));
    }
    let centers = clicks.positions(polarity);
    if centers.is_empty() {
        return Err(Error::NoClicks);
    }
    let mut flags = vec![false; dims.len()];
    for c in centers {
        if !dims.contains(c) {
            return Err(Error::OutOfBounds { pos: c, dims });
        }
        for_each_in_ball(dims, c, sigma, |i, _| flags[i] = true);
    }
    Ok(SeedSet::from_flags(dims, &flags))
}

/// Calls `f(linear_index, squared_distance)` for every in-bounds voxel `v`
/// with `||v - center||_2 <= radius` in voxel units.
pub(crate) fn for_each_in_ball(dims: Dims, center: [usize; 3], radius: f64, mut f: impl FnMut(usize, i64)) {
    let r = radius.floor() as i64;
    let r2 = radius * radius;
    let [cx, cy, cz] = center.map(|v| v as i64);
    let lo = |c: i64| (c - r).max(0);
    let hi = |c: i64, n: usize| (c + r).min(n as i64 - 1);
    for z in lo(cz)..=hi(cz, dims.nz) {
        for y in lo(cy)..=hi(cy, dims.ny) {
            for x in lo(cx)..=hi(cx, dims.nx) {
                let d2 = (x - cx).pow(2) + (y - cy).pow(2) + (z - cz).pow(2);
                if d2 as f64 <= r2 {
                    f(dims.index(x as usize, y as usize, z as usize), d2);
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Euclidean,
    Geodesic,
}

impl DistanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DistanceKind::Euclidean => "euclidean",
            DistanceKind::Geodesic => "geodesic",
        }
    }
}

/// Non-negative distances in physical units; exactly 0 on the seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    pub dims: Dims,
    pub spacing: Spacing,
    pub data: Vec<f32>,
    pub kind: DistanceKind,
}

impl DistanceMap {
    pub fn get(&self, pos: [usize; 3]) -> f32 {
        self.data[self.dims.index_of(pos)]
    }

    pub fn to_volume(&self) -> Volume {
        Volume::new(self.dims, self.spacing, self.data.clone()).expect("distance maps are finite")
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }

    /// Writes a `.vol` payload whose sidecar carries `"kind"`.
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let mut sc = crate::io::Sidecar::new(self.dims, self.spacing, crate::io::Dtype::F32);
        sc.kind = Some(self.kind.as_str().to_owned());
        crate::io::save_volume_with(&self.to_volume(), path, sc)
    }
}

/// Number of raster sweeps run by [`gdt`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Passes {
    /// Alternating forward and backward sweeps, starting forward.
    Count(u32),
    /// Sweep pairs until nothing changes.
    Fixpoint,
}

/// Edge weights of the geodesic voxel graph.
///
/// Adjacent voxels `u`, `w` are joined by an edge of cost
/// `sqrt(spatial_weight * |delta_phys|^2 + gamma^2 * (I(u) - I(w))^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicParams {
    pub gamma: f32,
    /// Weight of the squared physical step length. 1 gives the standard
    /// image-aware geodesic; 0 measures intensity variation alone.
    pub spatial_weight: f32,
    pub passes: Passes,
    pub neighborhood: Connectivity,
}

impl Default for GeodesicParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            spatial_weight: 1.0,
            passes: Passes::Count(4),
            neighborhood: Connectivity::TwentySix,
        }
    }
}

impl GeodesicParams {
    pub fn fixpoint() -> Self {
        Self {
            passes: Passes::Fixpoint,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParam(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.spatial_weight >= 0.0 && self.spatial_weight.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "spatial_weight must be >= 0, got {}",
                self.spatial_weight
            )));
        }
        if self.passes == Passes::Count(0) {
            return Err(Error::InvalidParam("passes must be >= 1".into()));
        }
        Ok(())
    }

    /// Squared weighted physical length of a lattice step.
    pub(crate) fn step_len2(&self, spacing: Spacing, delta: [isize; 3]) -> f64 {
        let s: f64 = (0..3).map(|k| (delta[k] as f64 * spacing.0[k]).powi(2)).sum();
        self.spatial_weight as f64 * s
    }
}

fn check_image(seeds: &SeedSet, image: &Volume) -> Result<()> {
    if seeds.dims() != image.dims() {
        return Err(Error::DimsMismatch(seeds.dims(), image.dims()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Click;

    fn one_click(p: [usize; 3]) -> ClickSet {
        ClickSet::from_clicks([Click { pos: p, polarity: Polarity::Foreground }]).unwrap()
    }

    #[test]
    fn sigma_zero_is_the_click() {
        let d = Dims::cube(8).unwrap();
        let s = dilate_seeds(&one_click([3, 4, 5]), Polarity::Foreground, 0.0, d).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.contains([3, 4, 5]));
    }

    #[test]
    fn sigma_one_is_seven_voxels() {
        // offsets with |d|^2 <= 1: the origin and the 6 unit vectors
        let expected = (-1i32..=1)
            .flat_map(|a| (-1i32..=1).flat_map(move |b| (-1i32..=1).map(move |c| a * a + b * b + c * c)))
            .filter(|&n| n <= 1)
            .count();
        assert_eq!(expected, 7);
        let d = Dims::cube(8).unwrap();
        let s = dilate_seeds(&one_click([4, 4, 4]), Polarity::Foreground, 1.0, d).unwrap();
        assert_eq!(s.len(), expected);
    }

    #[test]
    fn corner_ball_is_clipped() {
        let d = Dims::cube(16).unwrap();
        let full = dilate_seeds(&one_click([8, 8, 8]), Polarity::Foreground, 5.0, d).unwrap();
        let corner = dilate_seeds(&one_click([0, 0, 0]), Polarity::Foreground, 5.0, d).unwrap();
        assert!(corner.len() < full.len());
        assert!(corner.indices().iter().all(|&i| i < d.len()));
    }

    #[test]
    fn missing_polarity_is_an_error() {
        let d = Dims::cube(8).unwrap();
        assert!(matches!(
            dilate_seeds(&one_click([1, 1, 1]), Polarity::Background, 1.0, d),
            Err(Error::NoClicks)
        ));
    }

    #[test]
    fn params_validation() {
        assert!(GeodesicParams::default().validate().is_ok());
        let bad = GeodesicParams {
            passes: Passes::Count(0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = GeodesicParams {
            gamma: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
