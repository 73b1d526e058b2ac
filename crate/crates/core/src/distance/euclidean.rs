use super::{DistanceKind, DistanceMap, SeedSet};
use crate::error::Result;
use crate::volume::Spacing;

/// Exact multi-source Euclidean distance transform in physical units.
///
/// Separable lower-envelope-of-parabolas method (Felzenszwalb and
/// Huttenlocher), one pass per axis on squared distances in `f64`.
pub fn edt(seeds: &SeedSet, spacing: Spacing) -> Result<DistanceMap> {
    seeds.ensure_non_empty()?;
    spacing.validate()?;
    let dims = seeds.dims();
    let [nx, ny, nz] = dims.as_array();
    let [wx, wy, wz] = spacing.0.map(|s| s * s);

    // Squared distances are stored in f32 between passes (exact for
    // integer offsets under unit spacing) and each line is solved in f64.
    let mut sq = vec![f32::INFINITY; dims.len()];
    for &i in seeds.indices() {
        sq[i] = 0.0;
    }
    let mut scratch = Envelope::with_capacity(nx.max(ny).max(nz));
    let mut line = Vec::with_capacity(nx.max(ny).max(nz));
    let mut out = Vec::with_capacity(nx.max(ny).max(nz));

    // x and y, one z-plane at a time so the plane stays in cache
    for plane in sq.chunks_exact_mut(nx * ny) {
        for row in plane.chunks_exact_mut(nx) {
            nearest_in_row(row, wx);
        }
        if ny > 1 {
            for x in 0..nx {
                line.clear();
                line.extend((0..ny).map(|y| plane[x + nx * y] as f64));
                scratch.transform(&line, wy, &mut out);
                for (y, &v) in out.iter().enumerate() {
                    plane[x + nx * y] = v as f32;
                }
            }
        }
    }

    // z, through a contiguous copy of each xz-slab; takes the square root
    let mut slab = vec![0f32; nx * nz];
    for y in 0..ny {
        for z in 0..nz {
            let at = dims.index(0, y, z);
            slab[z * nx..(z + 1) * nx].copy_from_slice(&sq[at..at + nx]);
        }
        if nz > 1 {
            for x in 0..nx {
                line.clear();
                line.extend((0..nz).map(|z| slab[x + nx * z] as f64));
                scratch.transform(&line, wz, &mut out);
                for (z, &v) in out.iter().enumerate() {
                    slab[x + nx * z] = v.sqrt() as f32;
                }
            }
        } else {
            slab.iter_mut().for_each(|v| *v = v.sqrt());
        }
        for z in 0..nz {
            let at = dims.index(0, y, z);
            sq[at..at + nx].copy_from_slice(&slab[z * nx..(z + 1) * nx]);
        }
    }

    Ok(DistanceMap {
        dims,
        spacing,
        data: sq,
        kind: DistanceKind::Euclidean,
    })
}

/// Replaces a row of 0 (seed) / inf entries by `w * d^2`, `d` being the
/// index distance to the nearest seed.
fn nearest_in_row(row: &mut [f32], w: f64) {
    let mut last = None;
    for q in 0..row.len() {
        if row[q] == 0.0 {
            last = Some(q);
        } else if let Some(p) = last {
            row[q] = (q - p) as f32;
        }
    }
    last = None;
    for q in (0..row.len()).rev() {
        if row[q] == 0.0 {
            last = Some(q);
        } else if let Some(p) = last {
            row[q] = row[q].min((p - q) as f32);
        }
    }
    for v in row.iter_mut() {
        let d = *v as f64;
        *v = (w * d * d) as f32;
    }
}

struct Envelope {
    /// Parabola apex positions.
    apex: Vec<usize>,
    /// Boundaries between consecutive parabolas.
    bound: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            apex: Vec::with_capacity(n),
            bound: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p (w * (q - p)^2 + f[p])`, skipping infinite samples.
    fn transform(&mut self, f: &[f64], w: f64, out: &mut Vec<f64>) {
        let n = f.len();
        out.clear();
        self.apex.clear();
        self.bound.clear();

        let key = |p: usize| f[p] + w * (p * p) as f64;
        for q in (0..n).filter(|&q| f[q].is_finite()) {
            loop {
                let Some(&p) = self.apex.last() else {
                    self.apex.push(q);
                    self.bound.push(f64::NEG_INFINITY);
                    break;
                };
                let s = (key(q) - key(p)) / (2.0 * w * (q - p) as f64);
                if s <= *self.bound.last().unwrap() {
                    self.apex.pop();
                    self.bound.pop();
                } else {
                    self.apex.push(q);
                    self.bound.push(s);
                    break;
                }
            }
        }

        if self.apex.is_empty() {
            out.resize(n, f64::INFINITY);
            return;
        }
        self.bound.push(f64::INFINITY);
        let mut k = 0;
        for q in 0..n {
            while self.bound[k + 1] < q as f64 {
                k += 1;
            }
            let p = self.apex[k];
            let d = q as f64 - p as f64;
            out.push(w * d * d + f[p]);
        }
    }
}
