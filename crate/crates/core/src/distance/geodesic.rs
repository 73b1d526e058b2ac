use super::{check_image, DistanceKind, DistanceMap, GeodesicParams, Passes, SeedSet};
use crate::components::Connectivity;
use crate::error::Result;
use crate::volume::{Dims, Volume};

const FIXPOINT_MAX_PAIRS: usize = 100_000;

/// Raster-scan geodesic distance transform.
///
/// Each forward sweep visits voxels in increasing linear order and relaxes
/// every voxel from its already-visited neighbors; backward sweeps mirror
/// this. With [`Passes::Fixpoint`] the result is the exact shortest-path
/// distance on the voxel graph described by [`GeodesicParams`].
///
/// A sweep is split per x-row: the neighbors in previous rows and planes are
/// final for the current row and are folded in first (this part
/// vectorizes), then the in-row dependency is resolved left to right.
pub fn gdt(seeds: &SeedSet, image: &Volume, params: &GeodesicParams) -> Result<DistanceMap> {
    seeds.ensure_non_empty()?;
    check_image(seeds, image)?;
    params.validate()?;
    let dims = seeds.dims();
    let mut dist = vec![f32::INFINITY; dims.len()];
    for &i in seeds.indices() {
        dist[i] = 0.0;
    }
    let plan = SweepPlan::new(dims, image, params);
    match params.passes {
        Passes::Count(n) => {
            for k in 0..n {
                plan.sweep(&mut dist, image.data(), k % 2 == 0);
            }
        }
        Passes::Fixpoint => {
            let mut previous = dist.clone();
            for _ in 0..FIXPOINT_MAX_PAIRS {
                plan.sweep(&mut dist, image.data(), true);
                plan.sweep(&mut dist, image.data(), false);
                if dist == previous {
                    break;
                }
                previous.copy_from_slice(&dist);
            }
        }
    }
    Ok(DistanceMap {
        dims,
        spacing: image.spacing(),
        data: dist,
        kind: DistanceKind::Geodesic,
    })
}

/// Precomputed per-offset constants for one transform.
struct SweepPlan {
    dims: Dims,
    gamma2: f32,
    /// Offsets (dx, dy, dz) with (dy, dz) != (0, 0) and dz < 0 || (dz == 0 && dy < 0),
    /// paired with their squared weighted step length. Backward sweeps negate them.
    cross_row: Vec<([isize; 3], f32)>,
    along_row: f32,
}

impl SweepPlan {
    fn new(dims: Dims, image: &Volume, params: &GeodesicParams) -> Self {
        let spacing = image.spacing();
        let cross_row = params
            .neighborhood
            .offsets()
            .into_iter()
            .filter(|d| d[2] < 0 || (d[2] == 0 && d[1] < 0))
            .map(|d| (d, params.step_len2(spacing, d) as f32))
            .collect();
        debug_assert_eq!(
            match params.neighborhood {
                Connectivity::Six => 2,
                Connectivity::TwentySix => 12,
            },
            Vec::len(&cross_row)
        );
        Self {
            dims,
            gamma2: params.gamma * params.gamma,
            cross_row,
            along_row: params.step_len2(spacing, [1, 0, 0]) as f32,
        }
    }

    fn sweep(&self, dist: &mut [f32], img: &[f32], forward: bool) {
        let Dims { nx, ny, nz } = self.dims;
        let plane = nx * ny;
        let mut cost = Vec::with_capacity(nx);
        for zi in 0..nz {
            let z = if forward { zi } else { nz - 1 - zi };
            for yi in 0..ny {
                let y = if forward { yi } else { ny - 1 - yi };
                let row = nx * (y + ny * z);
                for &(d, s2) in &self.cross_row {
                    let [dx, dy, dz] = if forward { d } else { d.map(|v| -v) };
                    let Some(ny_) = y.checked_add_signed(dy).filter(|&v| v < ny) else {
                        continue;
                    };
                    let Some(nz_) = z.checked_add_signed(dz).filter(|&v| v < nz) else {
                        continue;
                    };
                    let src = nx * ny_ + plane * nz_;
                    self.relax_row(dist, img, row, src, dx, s2);
                }
                self.relax_along(&mut dist[row..row + nx], &img[row..row + nx], &mut cost, forward);
            }
        }
    }

    /// Relaxes the row starting at `row` from the (earlier or later) row at
    /// `src`, shifted by `dx`.
    #[inline]
    fn relax_row(&self, dist: &mut [f32], img: &[f32], row: usize, src: usize, dx: isize, s2: f32) {
        let nx = self.dims.nx;
        let (dst, src_d) = if src < row {
            let (before, cur) = dist.split_at_mut(row);
            (&mut cur[..nx], &before[src..src + nx])
        } else {
            let (cur, after) = dist.split_at_mut(src);
            (&mut cur[row..row + nx], &after[..nx])
        };
        let dst_i = &img[row..row + nx];
        let src_i = &img[src..src + nx];
        let g2 = self.gamma2;
        // dst[x] <- min(dst[x], src[x + dx] + cost)
        let (dst, dst_i, src_d, src_i) = match dx {
            0 => (dst, dst_i, src_d, src_i),
            -1 => (&mut dst[1..], &dst_i[1..], &src_d[..nx - 1], &src_i[..nx - 1]),
            _ => (&mut dst[..nx - 1], &dst_i[..nx - 1], &src_d[1..], &src_i[1..]),
        };
        for ((d, &a), (&s, &b)) in dst.iter_mut().zip(dst_i).zip(src_d.iter().zip(src_i)) {
            let di = a - b;
            let cand = s + (s2 + g2 * di * di).sqrt();
            // plain compare instead of f32::min, which lowers to a NaN-aware sequence
            *d = if cand < *d { cand } else { *d };
        }
    }

    /// Resolves the in-row dependency. Edge costs do not depend on the
    /// distances, so they are computed up front into `cost[x]` (edge x-1, x).
    #[inline]
    fn relax_along(&self, dist: &mut [f32], img: &[f32], cost: &mut Vec<f32>, forward: bool) {
        let s2 = self.along_row;
        let g2 = self.gamma2;
        let n = dist.len();
        cost.clear();
        cost.push(0.0);
        cost.extend(img.windows(2).map(|w| {
            let di = w[1] - w[0];
            (s2 + g2 * di * di).sqrt()
        }));
        if forward {
            for x in 1..n {
                let cand = dist[x - 1] + cost[x];
                if cand < dist[x] {
                    dist[x] = cand;
                }
            }
        } else {
            for x in (0..n.saturating_sub(1)).rev() {
                let cand = dist[x + 1] + cost[x + 1];
                if cand < dist[x] {
                    dist[x] = cand;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{dijkstra_oracle, edt};
    use crate::volume::Spacing;

    fn ramp(dims: Dims) -> Volume {
        let data = (0..dims.len()).map(|i| ((i * 7919) % 101) as f32 / 100.0).collect();
        Volume::new(dims, Spacing::UNIT, data).unwrap()
    }

    #[test]
    fn zero_on_seeds_and_finite() {
        let d = Dims::new(7, 5, 6).unwrap();
        let img = ramp(d);
        let s = SeedSet::new(d, [[0, 0, 0], [6, 4, 5]]).unwrap();
        let m = gdt(&s, &img, &GeodesicParams::default()).unwrap();
        assert_eq!(m.get([0, 0, 0]), 0.0);
        assert_eq!(m.get([6, 4, 5]), 0.0);
        assert!(m.data.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn gamma_zero_ignores_image() {
        let d = Dims::cube(9).unwrap();
        let s = SeedSet::new(d, [[2, 3, 4]]).unwrap();
        let p = GeodesicParams {
            gamma: 0.0,
            ..GeodesicParams::fixpoint()
        };
        let a = gdt(&s, &ramp(d), &p).unwrap();
        let b = gdt(&s, &Volume::filled(d, Spacing::UNIT, 0.5).unwrap(), &p).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn fixpoint_matches_dijkstra_with_six_neighbors_and_spacing() {
        let d = Dims::new(8, 6, 7).unwrap();
        let img = Volume::new(d, Spacing([0.5, 1.0, 2.0]), ramp(d).into_data()).unwrap();
        let s = SeedSet::new(d, [[3, 2, 1]]).unwrap();
        let p = GeodesicParams {
            neighborhood: Connectivity::Six,
            gamma: 2.0,
            ..GeodesicParams::fixpoint()
        };
        let a = gdt(&s, &img, &p).unwrap();
        let b = dijkstra_oracle(&s, &img, &p).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).abs() <= 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn sweeps_never_increase_values() {
        let d = Dims::cube(10).unwrap();
        let img = ramp(d);
        let s = SeedSet::new(d, [[9, 0, 3]]).unwrap();
        let mut prev: Option<Vec<f32>> = None;
        for n in 1..=6 {
            let p = GeodesicParams {
                passes: Passes::Count(n),
                ..Default::default()
            };
            let m = gdt(&s, &img, &p).unwrap();
            if let Some(prev) = &prev {
                assert!(m.data.iter().zip(prev).all(|(a, b)| a <= b));
            }
            prev = Some(m.data);
        }
    }

    #[test]
    fn dominates_euclidean() {
        let d = Dims::cube(8).unwrap();
        let s = SeedSet::new(d, [[1, 2, 3]]).unwrap();
        let g = gdt(&s, &ramp(d), &GeodesicParams::fixpoint()).unwrap();
        let e = edt(&s, Spacing::UNIT).unwrap();
        assert!(g.data.iter().zip(&e.data).all(|(g, e)| *g >= *e - 1e-5));
    }

    #[test]
    fn rejects_mismatched_image() {
        let s = SeedSet::new(Dims::cube(4).unwrap(), [[0, 0, 0]]).unwrap();
        let img = Volume::filled(Dims::cube(5).unwrap(), Spacing::UNIT, 0.0).unwrap();
        assert!(gdt(&s, &img, &GeodesicParams::default()).is_err());
    }

    #[test]
    fn single_row_volume() {
        let d = Dims::new(5, 1, 1).unwrap();
        let img = Volume::filled(d, Spacing::UNIT, 0.3).unwrap();
        let s = SeedSet::new(d, [[4, 0, 0]]).unwrap();
        let m = gdt(&s, &img, &GeodesicParams::default()).unwrap();
        assert_eq!(m.data, vec![4.0, 3.0, 2.0, 1.0, 0.0]);
        let d = Dims::new(1, 1, 5).unwrap();
        let img = Volume::filled(d, Spacing::UNIT, 0.3).unwrap();
        let s = SeedSet::new(d, [[0, 0, 0]]).unwrap();
        let m = gdt(&s, &img, &GeodesicParams::default()).unwrap();
        assert_eq!(m.data, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }
}
