//! Connected-component labeling of binary masks.

use serde::{Deserialize, Serialize};

use crate::volume::{Dims, Mask};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbors only.
    #[serde(rename = "6")]
    Six,
    /// Face, edge and corner neighbors.
    #[default]
    #[serde(rename = "26")]
    TwentySix,
}

impl Connectivity {
    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1..=1isize {
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let taxicab = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => taxicab == 1,
                        Connectivity::TwentySix => taxicab > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    pub id: usize,
    /// Linear voxel indices, ascending.
    pub voxels: Vec<usize>,
}

impl Component {
    pub fn size(&self) -> usize {
        self.voxels.len()
    }
}

/// Labels the 1-voxels of `mask`.
///
/// Components are sorted by size, largest first; equal sizes are ordered by
/// their smallest linear index. Ids follow that order.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> Vec<Component> {
    let dims = mask.dims();
    let data = mask.data();
    let offsets = connectivity.offsets();
    let mut visited = vec![false; data.len()];
    let mut stack = Vec::new();
    let mut comps = Vec::new();

    for start in 0..data.len() {
        if data[start] == 0 || visited[start] {
            continue;
        }
        visited[start] = true;
        stack.push(start);
        let mut voxels = Vec::new();
        while let Some(i) = stack.pop() {
            voxels.push(i);
            push_neighbors(dims, i, &offsets, |j| {
                if data[j] == 1 && !visited[j] {
                    visited[j] = true;
                    stack.push(j);
                }
            });
        }
        voxels.sort_unstable();
        comps.push(voxels);
    }

    // stable sort keeps discovery order, i.e. smallest first voxel, on ties
    comps.sort_by_key(|v| std::cmp::Reverse(v.len()));
    comps
        .into_iter()
        .enumerate()
        .map(|(id, voxels)| Component { id, voxels })
        .collect()
}

#[inline]
fn push_neighbors(dims: Dims, index: usize, offsets: &[[isize; 3]], mut f: impl FnMut(usize)) {
    let p = dims.coords(index);
    for &d in offsets {
        if let Some(q) = dims.offset(p, d) {
            f(dims.index_of(q));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_with(dims: Dims, on: &[[usize; 3]]) -> Mask {
        let mut m = Mask::zeros(dims);
        for &p in on {
            m.set(p, true);
        }
        m
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = Mask::zeros(Dims::cube(4).unwrap());
        assert!(connected_components(&m, Connectivity::TwentySix).is_empty());
    }

    #[test]
    fn single_voxel() {
        let m = mask_with(Dims::cube(4).unwrap(), &[[1, 2, 3]]);
        let c = connected_components(&m, Connectivity::Six);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].size(), 1);
    }

    #[test]
    fn diagonal_pair_depends_on_connectivity() {
        let m = mask_with(Dims::cube(4).unwrap(), &[[1, 1, 1], [2, 2, 2]]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).len(), 1);
        assert_eq!(connected_components(&m, Connectivity::Six).len(), 2);
    }

    #[test]
    fn sorted_by_size_then_first_index() {
        let dims = Dims::new(8, 1, 1).unwrap();
        // {0}, {2,3}, {5}, {7}
        let m = mask_with(dims, &[[0, 0, 0], [2, 0, 0], [3, 0, 0], [5, 0, 0], [7, 0, 0]]);
        let c = connected_components(&m, Connectivity::Six);
        let firsts: Vec<_> = c.iter().map(|c| c.voxels[0]).collect();
        assert_eq!(firsts, vec![2, 0, 5, 7]);
        assert_eq!(c.iter().map(|c| c.id).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn offsets_counts() {
        assert_eq!(Connectivity::Six.offsets().len(), 6);
        assert_eq!(Connectivity::TwentySix.offsets().len(), 26);
    }
}
