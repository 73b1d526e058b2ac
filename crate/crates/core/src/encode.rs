//! Click-to-guidance encoders.
//!
//! Every encoder consumes the clicks of one polarity and produces one dense
//! volume with values in `[0, 1]`. Disk, heatmap and adaptive-heatmap maps
//! are in voxel units; the distance-based maps use physical spacing.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distance::{dilate_seeds, edt, for_each_in_ball, gdt, DistanceMap, GeodesicParams, SeedSet};
use crate::error::{Error, Result};
use crate::io::{save_volume_with, Dtype, Sidecar};
use crate::volume::{ClickSet, Dims, Polarity, Spacing, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidanceKind {
    Disk,
    Heatmap,
    Edt,
    Gdt,
    ExpGdt,
    #[serde(rename = "adaptive")]
    AdaptiveHeatmap,
}

impl GuidanceKind {
    pub const ALL: [GuidanceKind; 6] = [
        GuidanceKind::Disk,
        GuidanceKind::Heatmap,
        GuidanceKind::Edt,
        GuidanceKind::Gdt,
        GuidanceKind::ExpGdt,
        GuidanceKind::AdaptiveHeatmap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GuidanceKind::Disk => "disk",
            GuidanceKind::Heatmap => "heatmap",
            GuidanceKind::Edt => "edt",
            GuidanceKind::Gdt => "gdt",
            GuidanceKind::ExpGdt => "exp-gdt",
            GuidanceKind::AdaptiveHeatmap => "adaptive",
        }
    }

    pub fn needs_image(self) -> bool {
        matches!(
            self,
            GuidanceKind::Gdt | GuidanceKind::ExpGdt | GuidanceKind::AdaptiveHeatmap
        )
    }

    /// Whether `sigma` changes the output (seed radius or disk/heatmap size).
    pub fn uses_sigma(self) -> bool {
        self != GuidanceKind::AdaptiveHeatmap
    }

    /// Whether the θ truncation applies.
    pub fn uses_theta(self) -> bool {
        matches!(self, GuidanceKind::Edt | GuidanceKind::Gdt)
    }
}

impl fmt::Display for GuidanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GuidanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GuidanceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown guidance kind '{s}'")))
    }
}

/// Voxels averaged around a click by the adaptive heatmap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClickNeighborhood {
    /// 3x3 in the click's z-plane.
    #[serde(rename = "9")]
    InPlane9,
    /// Full 3x3x3 cube.
    #[default]
    #[serde(rename = "27")]
    Cube27,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GuidanceConfig {
    pub kind: GuidanceKind,
    /// Disk/heatmap radius, or seed dilation radius for distance kinds (voxels).
    pub sigma: f64,
    /// Percentage of the largest distances clamped away; 0 disables.
    pub theta_percent: f64,
    /// Adaptive heatmap: largest radius.
    pub a: f64,
    /// Adaptive heatmap: decay of the radius with local geodesic distance.
    pub b: f64,
    pub adaptive_neighborhood: ClickNeighborhood,
    /// Graph used by the GDT and exp-GDT encoders.
    pub geodesic: GeodesicParams,
    /// Graph used to sense edges around clicks for the adaptive heatmap.
    pub adaptive_geodesic: GeodesicParams,
    /// Heatmaps use `exp(-d^2 / 2σ^2)` instead of `exp(-d / 2σ^2)`.
    pub squared_exponent: bool,
    /// Output `1 - exp-GDT`, making clicks bright like the other kinds.
    pub invert_exp_gdt: bool,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            kind: GuidanceKind::Disk,
            sigma: 1.0,
            theta_percent: 0.0,
            a: 13.0,
            b: 0.15,
            adaptive_neighborhood: ClickNeighborhood::Cube27,
            geodesic: GeodesicParams::default(),
            adaptive_geodesic: GeodesicParams {
                spatial_weight: 0.0,
                ..GeodesicParams::default()
            },
            squared_exponent: false,
            invert_exp_gdt: false,
        }
    }
}

impl GuidanceConfig {
    pub fn new(kind: GuidanceKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParam(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..100.0).contains(&self.theta_percent) {
            return Err(Error::InvalidParam(format!(
                "theta must lie in [0, 100), got {}",
                self.theta_percent
            )));
        }
        if !(self.a > 0.0 && self.a.is_finite() && self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "a and b must be positive, got a={} b={}",
                self.a, self.b
            )));
        }
        self.geodesic.validate()?;
        self.adaptive_geodesic.validate()
    }
}

/// Encoded guidance for one polarity.
#[derive(Clone, Debug, PartialEq)]
pub struct GuidanceVolume {
    pub dims: Dims,
    pub spacing: Spacing,
    pub data: Vec<f32>,
    pub kind: GuidanceKind,
    pub polarity: Polarity,
    pub sigma: f64,
    pub theta_percent: f64,
    pub per_click_sigmas: Option<Vec<u32>>,
    /// True when clicks map to 1 and values fall off away from them. Only
    /// an uninverted exp-GDT map is the other way round.
    pub peaks_at_clicks: bool,
}

impl GuidanceVolume {
    pub fn get(&self, pos: [usize; 3]) -> f32 {
        self.data[self.dims.index_of(pos)]
    }

    /// Value at linear index `i`, oriented so that 1 means "at a click".
    #[inline]
    pub fn affinity(&self, i: usize) -> f32 {
        if self.peaks_at_clicks {
            self.data[i]
        } else {
            1.0 - self.data[i]
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn to_volume(&self) -> Volume {
        Volume::new(self.dims, self.spacing, self.data.clone()).expect("guidance values are finite")
    }

    pub fn sidecar(&self) -> Sidecar {
        let mut sc = Sidecar::new(self.dims, self.spacing, Dtype::F32);
        sc.kind = Some(self.kind.as_str().to_owned());
        sc.sigma = Some(self.sigma);
        sc.theta_percent = Some(self.theta_percent);
        sc.per_click_sigmas = self.per_click_sigmas.clone();
        sc
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_volume_with(&self.to_volume(), path, self.sidecar())
    }
}

/// The grid a guidance map is built on: either an image (required for the
/// geodesic kinds) or bare geometry.
#[derive(Clone, Copy, Debug)]
pub enum Frame<'a> {
    Image(&'a Volume),
    Grid(Dims, Spacing),
}

impl<'a> Frame<'a> {
    pub fn grid(dims: Dims) -> Self {
        Frame::Grid(dims, Spacing::UNIT)
    }

    pub fn dims(&self) -> Dims {
        match self {
            Frame::Image(v) => v.dims(),
            Frame::Grid(d, _) => *d,
        }
    }

    pub fn spacing(&self) -> Spacing {
        match self {
            Frame::Image(v) => v.spacing(),
            Frame::Grid(_, s) => *s,
        }
    }

    fn image(&self, kind: GuidanceKind) -> Result<&'a Volume> {
        match self {
            Frame::Image(v) => Ok(v),
            Frame::Grid(..) => Err(Error::MissingImage(kind.as_str())),
        }
    }
}

impl<'a> From<&'a Volume> for Frame<'a> {
    fn from(v: &'a Volume) -> Self {
        Frame::Image(v)
    }
}

/// Encodes the clicks of `polarity` with the encoder selected by `config.kind`.
pub fn encode(clicks: &ClickSet, polarity: Polarity, frame: Frame<'_>, config: &GuidanceConfig) -> Result<GuidanceVolume> {
    config.validate()?;
    let mut g = match config.kind {
        GuidanceKind::Disk => encode_disk(clicks, polarity, config.sigma, frame.dims())?,
        GuidanceKind::Heatmap => encode_heatmap(
            clicks,
            polarity,
            config.sigma,
            config.squared_exponent,
            frame.dims(),
        )?,
        GuidanceKind::Edt | GuidanceKind::Gdt | GuidanceKind::ExpGdt => {
            encode_distance_guidance(clicks, polarity, frame, config)?
        }
        GuidanceKind::AdaptiveHeatmap => {
            encode_adaptive_heatmap(clicks, polarity, frame.image(config.kind)?, config)?
        }
    };
    g.spacing = frame.spacing();
    Ok(g)
}

fn click_positions(clicks: &ClickSet, polarity: Polarity, dims: Dims) -> Result<Vec<[usize; 3]>> {
    let pos = clicks.positions(polarity);
    if pos.is_empty() {
        return Err(Error::NoClicks);
    }
    if let Some(&p) = pos.iter().find(|p| !dims.contains(**p)) {
        return Err(Error::OutOfBounds { pos: p, dims });
    }
    Ok(pos)
}

fn blank(dims: Dims, kind: GuidanceKind, polarity: Polarity, sigma: f64) -> GuidanceVolume {
    GuidanceVolume {
        dims,
        spacing: Spacing::UNIT,
        data: vec![0.0; dims.len()],
        kind,
        polarity,
        sigma,
        theta_percent: 0.0,
        per_click_sigmas: None,
        peaks_at_clicks: true,
    }
}

/// Solid balls: 1 where some click lies within `sigma` voxels (inclusive).
pub fn encode_disk(clicks: &ClickSet, polarity: Polarity, sigma: f64, dims: Dims) -> Result<GuidanceVolume> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut g = blank(dims, GuidanceKind::Disk, polarity, sigma);
    for c in click_positions(clicks, polarity, dims)? {
        for_each_in_ball(dims, c, sigma, |i, _| g.data[i] = 1.0);
    }
    Ok(g)
}

/// Gaussian heatmap `exp(-||v - c|| / (2σ^2))`, maximum over clicks.
///
/// All clicks share σ, so the maximum over clicks equals the exponential of
/// the distance to the nearest click, which is taken from the exact EDT.
/// `sigma = 0` yields single-voxel impulses.
pub fn encode_heatmap(
    clicks: &ClickSet,
    polarity: Polarity,
    sigma: f64,
    squared_exponent: bool,
    dims: Dims,
) -> Result<GuidanceVolume> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParam(format!("sigma must be >= 0, got {sigma}")));
    }
    let pos = click_positions(clicks, polarity, dims)?;
    let mut g = blank(dims, GuidanceKind::Heatmap, polarity, sigma);
    if sigma == 0.0 {
        for p in pos {
            g.data[dims.index_of(p)] = 1.0;
        }
        return Ok(g);
    }
    let nearest = edt(&SeedSet::new(dims, pos)?, Spacing::UNIT)?;
    let scale = (1.0 / (2.0 * sigma * sigma)) as f32;
    for (o, &d) in g.data.iter_mut().zip(&nearest.data) {
        let e = if squared_exponent { d * d } else { d };
        *o = (-e * scale).exp();
    }
    Ok(g)
}

/// Nearest-rank percentile: the smallest value with at least `q`% of the
/// samples at or below it.
pub fn percentile(values: &[f32], q: f64) -> f32 {
    assert!(!values.is_empty());
    let n = values.len();
    let rank = ((q / 100.0) * n as f64).ceil() as usize;
    let k = rank.clamp(1, n) - 1;
    let mut buf = values.to_vec();
    let (_, v, _) = buf.select_nth_unstable_by(k, f32::total_cmp);
    *v
}

/// EDT, GDT and exp-GDT guidance.
///
/// Seeds are the clicks dilated by `sigma`. EDT and GDT maps are clamped at
/// the `(100 - θ)` percentile `t` of all distances, divided by `t` and
/// inverted, so seeds map to 1 and every voxel at or beyond `t` to 0.
/// exp-GDT is `1 - exp(-d)` divided by its maximum; it is 0 at the seeds
/// unless `invert_exp_gdt` is set.
pub fn encode_distance_guidance(
    clicks: &ClickSet,
    polarity: Polarity,
    frame: Frame<'_>,
    config: &GuidanceConfig,
) -> Result<GuidanceVolume> {
    config.validate()?;
    let dims = frame.dims();
    click_positions(clicks, polarity, dims)?;
    let seeds = dilate_seeds(clicks, polarity, config.sigma, dims)?;
    let dist = distance_map(&seeds, frame, config)?;
    let mut g = blank(dims, config.kind, polarity, config.sigma);
    g.spacing = frame.spacing();
    match config.kind {
        GuidanceKind::Edt | GuidanceKind::Gdt => {
            g.theta_percent = config.theta_percent;
            let t = percentile(&dist.data, 100.0 - config.theta_percent);
            for (o, &d) in g.data.iter_mut().zip(&dist.data) {
                *o = if t > 0.0 {
                    1.0 - d.min(t) / t
                } else if d == 0.0 {
                    1.0
                } else {
                    0.0
                };
            }
        }
        GuidanceKind::ExpGdt => {
            for (o, &d) in g.data.iter_mut().zip(&dist.data) {
                *o = 1.0 - (-d).exp();
            }
            let max = g.data.iter().copied().fold(0.0f32, f32::max);
            if max > 0.0 {
                g.data.iter_mut().for_each(|v| *v = (*v / max).min(1.0));
            }
            if config.invert_exp_gdt {
                g.data.iter_mut().for_each(|v| *v = 1.0 - *v);
            } else {
                g.peaks_at_clicks = false;
            }
        }
        other => {
            return Err(Error::InvalidParam(format!("{other} is not a distance-based guidance")));
        }
    }
    Ok(g)
}

fn distance_map(seeds: &SeedSet, frame: Frame<'_>, config: &GuidanceConfig) -> Result<DistanceMap> {
    match config.kind {
        GuidanceKind::Edt => edt(seeds, frame.spacing()),
        kind => gdt(seeds, &frame.image(kind)?.normalized(), &config.geodesic),
    }
}

/// Adaptive radius `floor(a * exp(-b * x))` where `x` is the mean of
/// `gdt_map` over the click's neighborhood (clipped at the grid border).
pub fn adaptive_sigma(
    click: [usize; 3],
    gdt_map: &DistanceMap,
    a: f64,
    b: f64,
    neighborhood: ClickNeighborhood,
) -> u32 {
    let dims = gdt_map.dims;
    let dz_range = match neighborhood {
        ClickNeighborhood::InPlane9 => 0..=0,
        ClickNeighborhood::Cube27 => -1..=1,
    };
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for dz in dz_range {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if let Some(q) = dims.offset(click, [dx, dy, dz]) {
                    sum += gdt_map.get(q) as f64;
                    n += 1;
                }
            }
        }
    }
    sigma_from_mean_distance(sum / n as f64, a, b)
}

pub fn sigma_from_mean_distance(x: f64, a: f64, b: f64) -> u32 {
    (a * (-b * x).exp()).floor().max(0.0) as u32
}

/// Gaussian heatmaps whose per-click radius shrinks near intensity edges.
///
/// The geodesic map is computed from the undilated clicks with
/// `config.adaptive_geodesic`; click `i` gets radius σ_i from
/// [`adaptive_sigma`] and contributes `exp(-||v - c_i|| / (2σ_i^2))`
/// (or a single-voxel impulse when σ_i = 0).
pub fn encode_adaptive_heatmap(
    clicks: &ClickSet,
    polarity: Polarity,
    image: &Volume,
    config: &GuidanceConfig,
) -> Result<GuidanceVolume> {
    config.validate()?;
    let dims = image.dims();
    let pos = click_positions(clicks, polarity, dims)?;
    let geo = gdt(
        &SeedSet::new(dims, pos.iter().copied())?,
        &image.normalized(),
        &config.adaptive_geodesic,
    )?;
    let sigmas: Vec<u32> = pos
        .iter()
        .map(|&c| adaptive_sigma(c, &geo, config.a, config.b, config.adaptive_neighborhood))
        .collect();

    // smallest exponent over clicks, then a single exp per voxel
    let mut expo = vec![f32::INFINITY; dims.len()];
    let mut row_d2 = vec![0.0f32; dims.nx];
    for (&c, &s) in pos.iter().zip(&sigmas) {
        if s == 0 {
            continue;
        }
        let scale = (1.0 / (2.0 * (s as f64).powi(2))) as f32;
        for (x, v) in row_d2.iter_mut().enumerate() {
            *v = (x as f32 - c[0] as f32).powi(2);
        }
        for z in 0..dims.nz {
            let dz2 = (z as f32 - c[2] as f32).powi(2);
            for y in 0..dims.ny {
                let dyz2 = (y as f32 - c[1] as f32).powi(2) + dz2;
                let row = dims.index(0, y, z);
                let out = &mut expo[row..row + dims.nx];
                if config.squared_exponent {
                    for (o, &dx2) in out.iter_mut().zip(&row_d2) {
                        *o = o.min((dx2 + dyz2) * scale);
                    }
                } else {
                    for (o, &dx2) in out.iter_mut().zip(&row_d2) {
                        *o = o.min((dx2 + dyz2).sqrt() * scale);
                    }
                }
            }
        }
    }
    let mut g = blank(dims, GuidanceKind::AdaptiveHeatmap, polarity, config.sigma);
    g.spacing = image.spacing();
    for (o, &e) in g.data.iter_mut().zip(&expo) {
        *o = (-e).exp();
    }
    for &c in &pos {
        g.data[dims.index_of(c)] = 1.0;
    }
    g.per_click_sigmas = Some(sigmas);
    Ok(g)
}
