use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{check_image, DistanceKind, DistanceMap, GeodesicParams, SeedSet};
use crate::error::{Error, Result};
use crate::volume::Volume;

pub const DIJKSTRA_MAX_VOXELS: usize = 64 * 64 * 64;

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact shortest paths on the same voxel graph as [`super::gdt`], computed
/// with a binary-heap Dijkstra in `f64`. Limited to 64^3 voxels.
///
/// `passes` is ignored.
pub fn dijkstra_oracle(seeds: &SeedSet, image: &Volume, params: &GeodesicParams) -> Result<DistanceMap> {
    seeds.ensure_non_empty()?;
    check_image(seeds, image)?;
    params.validate()?;
    let dims = seeds.dims();
    if dims.len() > DIJKSTRA_MAX_VOXELS {
        return Err(Error::TooLarge(dims.len()));
    }
    let img = image.data();
    let gamma2 = (params.gamma as f64).powi(2);
    let steps: Vec<([isize; 3], f64)> = params
        .neighborhood
        .offsets()
        .into_iter()
        .map(|d| (d, params.step_len2(image.spacing(), d)))
        .collect();

    let mut dist = vec![f64::INFINITY; dims.len()];
    let mut done = vec![false; dims.len()];
    let mut heap = BinaryHeap::new();
    for &i in seeds.indices() {
        dist[i] = 0.0;
        heap.push(Entry { dist: 0.0, index: i });
    }
    while let Some(Entry { dist: du, index: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        let p = dims.coords(u);
        for &(d, s2) in &steps {
            let Some(q) = dims.offset(p, d) else { continue };
            let w = dims.index_of(q);
            if done[w] {
                continue;
            }
            let di = img[u] as f64 - img[w] as f64;
            let cand = du + (s2 + gamma2 * di * di).sqrt();
            if cand < dist[w] {
                dist[w] = cand;
                heap.push(Entry { dist: cand, index: w });
            }
        }
    }
    Ok(DistanceMap {
        dims,
        spacing: image.spacing(),
        data: dist.into_iter().map(|v| v as f32).collect(),
        kind: DistanceKind::Geodesic,
    })
}
