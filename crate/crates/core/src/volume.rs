//! Dense 3D grids and click records.
//!
//! All grids store voxels in x-fastest order: `index = x + nx * (y + ny * z)`.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extent in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidDims([nx, ny, nz], "all extents must be positive"));
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn index_of(&self, pos: [usize; 3]) -> usize {
        self.index(pos[0], pos[1], pos[2])
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.nx;
        let rest = index / self.nx;
        [x, rest % self.ny, rest / self.ny]
    }

    pub fn contains(&self, pos: [usize; 3]) -> bool {
        pos[0] < self.nx && pos[1] < self.ny && pos[2] < self.nz
    }

    /// Bounds-checked neighbor lookup for a signed offset.
    #[inline]
    pub fn offset(&self, pos: [usize; 3], delta: [isize; 3]) -> Option<[usize; 3]> {
        let x = pos[0].checked_add_signed(delta[0])?;
        let y = pos[1].checked_add_signed(delta[1])?;
        let z = pos[2].checked_add_signed(delta[2])?;
        self.contains([x, y, z]).then_some([x, y, z])
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Physical voxel size in millimeters along x, y and z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spacing(pub [f64; 3]);

impl Spacing {
    pub const UNIT: Spacing = Spacing([1.0, 1.0, 1.0]);

    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let s = Spacing([sx, sy, sz]);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidSpacing(self.0))
        }
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self::UNIT
    }
}

/// Scalar volume of finite 32-bit samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    dims: Dims,
    spacing: Spacing,
    data: Vec<f32>,
}

impl Volume {
    pub fn new(dims: Dims, spacing: Spacing, data: Vec<f32>) -> Result<Self> {
        spacing.validate()?;
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                dims,
                expected: dims.len(),
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: Dims, spacing: Spacing, value: f32) -> Result<Self> {
        Self::new(dims, spacing, vec![value; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, pos: [usize; 3]) -> f32 {
        self.data[self.dims.index_of(pos)]
    }

    /// Min-max rescaled copy if any sample lies outside `[0, 1]`; otherwise
    /// the volume itself.
    pub fn normalized(&self) -> Cow<'_, Volume> {
        let (lo, hi) = self
            .data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if lo >= 0.0 && hi <= 1.0 {
            return Cow::Borrowed(self);
        }
        let range = hi - lo;
        let data = if range > 0.0 {
            self.data.iter().map(|&v| (v - lo) / range).collect()
        } else {
            vec![0.0; self.data.len()]
        };
        Cow::Owned(Volume {
            dims: self.dims,
            spacing: self.spacing,
            data,
        })
    }
}

/// Binary volume with values in `{0, 1}`.
///
/// Masks carry a spacing so they can be written with the same sidecar schema
/// as volumes; it plays no role in mask arithmetic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    spacing: [u64; 3],
    data: Vec<u8>,
}

impl Mask {
    pub fn new(dims: Dims, data: Vec<u8>) -> Result<Self> {
        Self::with_spacing(dims, Spacing::UNIT, data)
    }

    pub fn with_spacing(dims: Dims, spacing: Spacing, data: Vec<u8>) -> Result<Self> {
        spacing.validate()?;
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                dims,
                expected: dims.len(),
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidMaskValue {
                index,
                value: data[index],
            });
        }
        Ok(Self {
            dims,
            spacing: spacing.0.map(f64::to_bits),
            data,
        })
    }

    pub fn zeros(dims: Dims) -> Self {
        Self {
            dims,
            spacing: Spacing::UNIT.0.map(f64::to_bits),
            data: vec![0; dims.len()],
        }
    }

    pub(crate) fn from_bools(dims: Dims, spacing: Spacing, values: impl Iterator<Item = bool>) -> Self {
        let data: Vec<u8> = values.map(u8::from).collect();
        debug_assert_eq!(data.len(), dims.len());
        Self {
            dims,
            spacing: spacing.0.map(f64::to_bits),
            data,
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> Spacing {
        Spacing(self.spacing.map(f64::from_bits))
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, pos: [usize; 3]) -> bool {
        self.data[self.dims.index_of(pos)] == 1
    }

    pub fn set(&mut self, pos: [usize; 3], value: bool) {
        let i = self.dims.index_of(pos);
        self.data[i] = u8::from(value);
    }

    pub fn count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    /// Voxelwise `self AND NOT other`.
    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        if self.dims != other.dims {
            return Err(Error::DimsMismatch(self.dims, other.dims));
        }
        Ok(Mask {
            dims: self.dims,
            spacing: self.spacing,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a & (1 - b))
                .collect(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    #[serde(rename = "fg")]
    Foreground,
    #[serde(rename = "bg")]
    Background,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Foreground => "fg",
            Polarity::Background => "bg",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Click {
    pub pos: [usize; 3],
    pub polarity: Polarity,
}

impl Click {
    pub fn fg(x: usize, y: usize, z: usize) -> Self {
        Self {
            pos: [x, y, z],
            polarity: Polarity::Foreground,
        }
    }

    pub fn bg(x: usize, y: usize, z: usize) -> Self {
        Self {
            pos: [x, y, z],
            polarity: Polarity::Background,
        }
    }
}

/// Ordered click history. Index `i` is the `i`-th interaction.
///
/// A voxel can be clicked at most once, whatever the polarity: a voxel that
/// is simultaneously foreground and background evidence is contradictory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Click>", into = "Vec<Click>")]
pub struct ClickSet {
    clicks: Vec<Click>,
}

impl TryFrom<Vec<Click>> for ClickSet {
    type Error = Error;

    fn try_from(clicks: Vec<Click>) -> Result<Self> {
        Self::from_clicks(clicks)
    }
}

impl From<ClickSet> for Vec<Click> {
    fn from(set: ClickSet) -> Self {
        set.clicks
    }
}

impl ClickSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_clicks(clicks: impl IntoIterator<Item = Click>) -> Result<Self> {
        let mut set = Self::new();
        for c in clicks {
            set.push(c)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, click: Click) -> Result<()> {
        if self.clicks.iter().any(|c| c.pos == click.pos) {
            return Err(Error::DuplicateClick(click.pos));
        }
        self.clicks.push(click);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.clicks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Click> {
        self.clicks.iter()
    }

    pub fn as_slice(&self) -> &[Click] {
        &self.clicks
    }

    pub fn positions(&self, polarity: Polarity) -> Vec<[usize; 3]> {
        self.clicks
            .iter()
            .filter(|c| c.polarity == polarity)
            .map(|c| c.pos)
            .collect()
    }

    pub fn has(&self, polarity: Polarity) -> bool {
        self.clicks.iter().any(|c| c.polarity == polarity)
    }

    /// Checks every click against the grid bounds and the duplicate rule.
    pub fn validate(&self, dims: Dims) -> Result<()> {
        for (i, c) in self.clicks.iter().enumerate() {
            if !dims.contains(c.pos) {
                return Err(Error::OutOfBounds { pos: c.pos, dims });
            }
            if self.clicks[..i].iter().any(|p| p.pos == c.pos) {
                return Err(Error::DuplicateClick(c.pos));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a ClickSet {
    type Item = &'a Click;
    type IntoIter = std::slice::Iter<'a, Click>;

    fn into_iter(self) -> Self::IntoIter {
        self.clicks.iter()
    }
}
