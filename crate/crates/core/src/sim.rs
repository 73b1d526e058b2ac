//! Simulated click-refinement sessions.
//!
//! A session alternates between predicting, scoring the prediction against
//! the ground truth and placing one corrective click in the largest error
//! region, re-encoding the foreground and background guidance after every
//! click.

use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::components::{connected_components, Connectivity};
use crate::distance::{edt, gdt, GeodesicParams, SeedSet};
use crate::encode::{encode, Frame, GuidanceConfig, GuidanceKind, GuidanceVolume};
use crate::error::{Error, Result};
use crate::metrics::{dice, gt_overlap};
use crate::volume::{Click, ClickSet, Dims, Mask, Polarity, Spacing, Volume};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClickPlacement {
    /// The voxel of the error component farthest from its complement.
    #[default]
    ErrorCenter,
    /// A uniformly drawn voxel of the error component.
    UniformInError,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimingMode {
    /// Wall-clock time of the guidance encoders.
    #[default]
    Measured,
    /// Record 0 s for every click, keeping traces bit-reproducible.
    Omitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub n_clicks: usize,
    /// Probability that a volume receives clicks at all, decided once per
    /// session.
    pub p_interaction: f64,
    pub rng_seed: u64,
    pub click_placement: ClickPlacement,
    pub guidance: GuidanceConfig,
    pub timing: TimingMode,
    /// Guidance values above this count as guidance for the overlap metric.
    pub binarize_eps: f32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_clicks: 10,
            p_interaction: 1.0,
            rng_seed: 0,
            click_placement: ClickPlacement::ErrorCenter,
            guidance: GuidanceConfig::new(GuidanceKind::AdaptiveHeatmap),
            timing: TimingMode::Measured,
            binarize_eps: 0.0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clicks == 0 {
            return Err(Error::InvalidParam("n_clicks must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_interaction) {
            return Err(Error::InvalidParam(format!(
                "p_interaction must lie in [0, 1], got {}",
                self.p_interaction
            )));
        }
        self.guidance.validate()
    }
}

/// Record of one simulated session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    #[serde(with = "click_records")]
    pub clicks: ClickSet,
    /// Dice before any click, then after each click.
    pub dice_trajectory: Vec<f64>,
    #[serde(rename = "guidance_timings_seconds")]
    pub guidance_timings: Vec<f64>,
    /// The loop ended before `n_clicks`: the prediction was perfect, or
    /// every remaining error voxel had already been clicked.
    pub early_stop: bool,
    /// Outcome of the per-session interaction draw.
    pub interacted: bool,
    /// Overlap of the final foreground guidance with the ground truth.
    pub gt_overlap: Option<f64>,
    pub config: SimulationConfig,
    #[serde(skip)]
    pub final_prediction: Option<Mask>,
}

impl SessionTrace {
    pub fn initial_dice(&self) -> f64 {
        self.dice_trajectory[0]
    }

    pub fn final_dice(&self) -> f64 {
        *self.dice_trajectory.last().expect("trajectory is never empty")
    }

    /// Clicks that strictly raised the Dice score.
    pub fn improving_clicks(&self) -> usize {
        self.dice_trajectory.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dice_trajectory.len() != self.clicks.len() + 1 {
            return Err(Error::InvalidParam(format!(
                "trace has {} clicks but {} Dice entries",
                self.clicks.len(),
                self.dice_trajectory.len()
            )));
        }
        if self.dice_trajectory.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::InvalidParam("Dice values must lie in [0, 1]".into()));
        }
        if self.guidance_timings.iter().any(|t| t.is_nan() || *t < 0.0) {
            return Err(Error::InvalidParam("timings must be non-negative".into()));
        }
        Ok(())
    }
}

mod click_records {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::volume::{Click, ClickSet, Polarity};

    #[derive(Serialize, Deserialize)]
    struct Record {
        order: usize,
        pos: [usize; 3],
        polarity: Polarity,
    }

    pub fn serialize<S: Serializer>(clicks: &ClickSet, s: S) -> Result<S::Ok, S::Error> {
        let records: Vec<Record> = clicks
            .iter()
            .enumerate()
            .map(|(order, c)| Record {
                order,
                pos: c.pos,
                polarity: c.polarity,
            })
            .collect();
        records.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ClickSet, D::Error> {
        let mut records = Vec::<Record>::deserialize(d)?;
        records.sort_by_key(|r| r.order);
        ClickSet::from_clicks(records.into_iter().map(|r| Click {
            pos: r.pos,
            polarity: r.polarity,
        }))
        .map_err(serde::de::Error::custom)
    }
}

/// Any model that turns an image and its guidance into a prediction.
///
/// Called with no guidance at all for the click-free prediction.
pub trait Segmenter {
    fn segment(
        &self,
        image: &Volume,
        fg: Option<&GuidanceVolume>,
        bg: Option<&GuidanceVolume>,
    ) -> Result<Mask>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleParams {
    pub geodesic: GeodesicParams,
    /// Foreground threshold on the geodesic distance when no background
    /// seeds exist.
    pub tau: f32,
    /// Guidance voxels whose click affinity reaches this level become seeds.
    pub seed_level: f32,
}

impl Default for OracleParams {
    // With intensities 0.8 inside and 0.2 outside an object, crossing its
    // boundary costs about 0.6 * gamma = 60, while paths inside a phantom
    // object of radius <= 20 stay below 40.
    fn default() -> Self {
        Self {
            geodesic: GeodesicParams {
                gamma: 100.0,
                ..GeodesicParams::default()
            },
            tau: 40.0,
            seed_level: 1.0,
        }
    }
}

/// Non-learned segmenter: a voxel is foreground when it is geodesically at
/// least as close to the foreground seeds as to the background seeds, or
/// within `tau` of the foreground seeds when there are none.
pub fn geodesic_oracle_segment(
    image: &Volume,
    fg: &GuidanceVolume,
    bg: Option<&GuidanceVolume>,
    params: &OracleParams,
) -> Result<Mask> {
    let dims = image.dims();
    let seeds_of = |g: &GuidanceVolume| -> Result<SeedSet> {
        if g.dims != dims {
            return Err(Error::DimsMismatch(g.dims, dims));
        }
        let flags: Vec<bool> = (0..dims.len()).map(|i| g.affinity(i) >= params.seed_level).collect();
        Ok(SeedSet::from_flags(dims, &flags))
    };
    let fg_seeds = seeds_of(fg)?;
    if fg_seeds.is_empty() {
        return Err(Error::EmptySeeds);
    }
    let img = image.normalized();
    let d_fg = gdt(&fg_seeds, &img, &params.geodesic)?;
    let bg_seeds = bg.map(seeds_of).transpose()?.filter(|s| !s.is_empty());
    let mask = match bg_seeds {
        Some(seeds) => {
            let d_bg = gdt(&seeds, &img, &params.geodesic)?;
            Mask::from_bools(
                dims,
                image.spacing(),
                d_fg.data.iter().zip(&d_bg.data).map(|(f, b)| f <= b),
            )
        }
        None => Mask::from_bools(dims, image.spacing(), d_fg.data.iter().map(|&f| f <= params.tau)),
    };
    Ok(mask)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeodesicOracle {
    pub params: OracleParams,
}

impl Segmenter for GeodesicOracle {
    fn segment(
        &self,
        image: &Volume,
        fg: Option<&GuidanceVolume>,
        bg: Option<&GuidanceVolume>,
    ) -> Result<Mask> {
        match fg {
            Some(fg) => geodesic_oracle_segment(image, fg, bg, &self.params),
            // without foreground evidence there is nothing to segment
            None => Ok(Mask::from_bools(
                image.dims(),
                image.spacing(),
                std::iter::repeat_n(false, image.dims().len()),
            )),
        }
    }
}

/// Picks the next corrective click.
///
/// The larger of the under- and oversegmented regions (ties go to
/// undersegmentation) is split into 26-connected components and the largest
/// one is targeted. Undersegmentation yields a foreground click,
/// oversegmentation a background click. Voxels in `clicked` are never
/// chosen again; they are removed from the error regions up front.
pub fn sample_click(
    prediction: &Mask,
    ground_truth: &Mask,
    clicked: &ClickSet,
    placement: ClickPlacement,
    rng: &mut impl Rng,
) -> Result<Click> {
    let mut under = ground_truth.and_not(prediction)?;
    let mut over = prediction.and_not(ground_truth)?;
    let dims = under.dims();
    for c in clicked.iter().filter(|c| dims.contains(c.pos)) {
        under.set(c.pos, false);
        over.set(c.pos, false);
    }
    let (nu, no) = (under.count(), over.count());
    if nu == 0 && no == 0 {
        return Err(Error::NoError);
    }
    let (errors, polarity) = if nu >= no {
        (under, Polarity::Foreground)
    } else {
        (over, Polarity::Background)
    };
    let comps = connected_components(&errors, Connectivity::TwentySix);
    let voxels = &comps[0].voxels;
    let index = match placement {
        ClickPlacement::ErrorCenter => deepest_voxel(dims, voxels)?,
        ClickPlacement::UniformInError => voxels[rng.gen_range(0..voxels.len())],
    };
    Ok(Click {
        pos: dims.coords(index),
        polarity,
    })
}

/// Voxel of `component` (ascending linear indices) with the largest exact
/// Euclidean distance to the complement, treating everything outside the
/// grid as complement. Ties go to the smallest index.
fn deepest_voxel(dims: Dims, component: &[usize]) -> Result<usize> {
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for &i in component {
        let p = dims.coords(i);
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    // bounding box plus a one-voxel complement ring
    let sub = Dims::new(hi[0] - lo[0] + 3, hi[1] - lo[1] + 3, hi[2] - lo[2] + 3)?;
    let local = |i: usize| {
        let p = dims.coords(i);
        sub.index(p[0] - lo[0] + 1, p[1] - lo[1] + 1, p[2] - lo[2] + 1)
    };
    let mut outside = vec![true; sub.len()];
    for &i in component {
        outside[local(i)] = false;
    }
    let depth = edt(&SeedSet::from_flags(sub, &outside), Spacing::UNIT)?;
    let mut best = component[0];
    let mut best_d = f32::NEG_INFINITY;
    for &i in component {
        let d = depth.data[local(i)];
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// Runs one simulated session of up to `config.n_clicks` corrective clicks.
pub fn run_session(
    image: &Volume,
    ground_truth: &Mask,
    segmenter: &dyn Segmenter,
    config: &SimulationConfig,
) -> Result<SessionTrace> {
    config.validate()?;
    if image.dims() != ground_truth.dims() {
        return Err(Error::DimsMismatch(image.dims(), ground_truth.dims()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let interacted = rng.gen_bool(config.p_interaction);

    let mut prediction = segmenter.segment(image, None, None)?;
    let mut trace = SessionTrace {
        clicks: ClickSet::new(),
        dice_trajectory: vec![dice(&prediction, ground_truth)?],
        guidance_timings: Vec::new(),
        early_stop: false,
        interacted,
        gt_overlap: None,
        config: config.clone(),
        final_prediction: None,
    };
    let mut fg_guidance = None;

    if interacted {
        for _ in 0..config.n_clicks {
            if prediction == *ground_truth {
                trace.early_stop = true;
                break;
            }
            let click = match sample_click(&prediction, ground_truth, &trace.clicks, config.click_placement, &mut rng) {
                Ok(c) => c,
                // every remaining error voxel has been clicked already
                Err(Error::NoError) => {
                    trace.early_stop = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            trace.clicks.push(click)?;

            let start = (config.timing == TimingMode::Measured).then(Instant::now);
            let guidance_for = |polarity| {
                trace
                    .clicks
                    .has(polarity)
                    .then(|| encode(&trace.clicks, polarity, Frame::Image(image), &config.guidance))
                    .transpose()
            };
            let fg = guidance_for(Polarity::Foreground)?;
            let bg = guidance_for(Polarity::Background)?;
            trace
                .guidance_timings
                .push(start.map_or(0.0, |t| t.elapsed().as_secs_f64()));

            prediction = segmenter.segment(image, fg.as_ref(), bg.as_ref())?;
            trace.dice_trajectory.push(dice(&prediction, ground_truth)?);
            fg_guidance = fg;
        }
    }

    trace.gt_overlap = match &fg_guidance {
        Some(g) => match gt_overlap(g, ground_truth, config.binarize_eps) {
            Ok(v) => Some(v),
            Err(Error::EmptyGuidance) => None,
            Err(e) => return Err(e),
        },
        None => None,
    };
    trace.final_prediction = Some(prediction);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{make_phantom, PhantomKind};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn empty_prediction_clicks_sphere_center() {
        let dims = Dims::cube(24).unwrap();
        let (_, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        // brute force: argmax over GT voxels of the distance to the nearest non-GT voxel
        // (grid exterior counts as non-GT)
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in 0..dims.len() {
            if gt.data()[i] == 0 {
                continue;
            }
            let p = dims.coords(i).map(|v| v as i64);
            let mut d2 = i64::MAX;
            for z in -1..=24i64 {
                for y in -1..=24i64 {
                    for x in -1..=24i64 {
                        let inside = (0..24).contains(&x) && (0..24).contains(&y) && (0..24).contains(&z);
                        if inside && gt.get([x as usize, y as usize, z as usize]) {
                            continue;
                        }
                        d2 = d2.min((x - p[0]).pow(2) + (y - p[1]).pow(2) + (z - p[2]).pow(2));
                    }
                }
            }
            if (d2 as f64) > best.0 {
                best = (d2 as f64, i);
            }
        }
        let empty = Mask::zeros(dims);
        let c = sample_click(&empty, &gt, &ClickSet::new(), ClickPlacement::ErrorCenter, &mut rng()).unwrap();
        assert_eq!(c.polarity, Polarity::Foreground);
        assert_eq!(c.pos, dims.coords(best.1));
        assert_eq!(c.pos, [12, 12, 12]);
    }

    #[test]
    fn perfect_prediction_has_no_click() {
        let dims = Dims::cube(8).unwrap();
        let (_, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        assert!(matches!(
            sample_click(&gt, &gt, &ClickSet::new(), ClickPlacement::ErrorCenter, &mut rng()),
            Err(Error::NoError)
        ));
    }

    #[test]
    fn spurious_voxel_gets_background_click() {
        let dims = Dims::cube(16).unwrap();
        let (_, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        let mut pred = gt.clone();
        pred.set([0, 15, 1], true);
        for placement in [ClickPlacement::ErrorCenter, ClickPlacement::UniformInError] {
            let c = sample_click(&pred, &gt, &ClickSet::new(), placement, &mut rng()).unwrap();
            assert_eq!(c, Click::bg(0, 15, 1));
        }
    }

    #[test]
    fn clicked_voxels_are_not_offered_again() {
        let dims = Dims::cube(16).unwrap();
        let (_, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        let mut pred = gt.clone();
        pred.set([0, 15, 1], true);
        let mut clicked = ClickSet::from_clicks([Click::bg(0, 15, 1)]).unwrap();
        assert!(matches!(
            sample_click(&pred, &gt, &clicked, ClickPlacement::ErrorCenter, &mut rng()),
            Err(Error::NoError)
        ));
        pred.set([15, 0, 0], true);
        let c = sample_click(&pred, &gt, &clicked, ClickPlacement::ErrorCenter, &mut rng()).unwrap();
        assert_eq!(c, Click::bg(15, 0, 0));
        clicked.push(c).unwrap();
    }

    #[test]
    fn uniform_click_lies_in_error() {
        let dims = Dims::cube(16).unwrap();
        let (_, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        let mut r = rng();
        for _ in 0..20 {
            let c = sample_click(&Mask::zeros(dims), &gt, &ClickSet::new(), ClickPlacement::UniformInError, &mut r).unwrap();
            assert!(gt.get(c.pos));
        }
    }

    #[test]
    fn oracle_single_click_beats_empty() {
        let dims = Dims::cube(32).unwrap();
        let (img, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        let clicks = ClickSet::from_clicks([Click::fg(16, 16, 16)]).unwrap();
        let g = encode(&clicks, Polarity::Foreground, Frame::Image(&img), &GuidanceConfig::new(GuidanceKind::Disk)).unwrap();
        let params = OracleParams {
            geodesic: GeodesicParams::default(),
            ..OracleParams::default()
        };
        assert_eq!(params.geodesic.gamma, 1.0);
        let pred = geodesic_oracle_segment(&img, &g, None, &params).unwrap();
        let empty = dice(&Mask::zeros(dims), &gt).unwrap();
        assert!(dice(&pred, &gt).unwrap() > empty);
    }

    #[test]
    fn oracle_without_seeds_fails() {
        let dims = Dims::cube(8).unwrap();
        let img = Volume::filled(dims, Spacing::UNIT, 0.5).unwrap();
        let mut g = encode_disk_at(dims, [1, 1, 1]);
        g.data.iter_mut().for_each(|v| *v = 0.0);
        assert!(geodesic_oracle_segment(&img, &g, None, &OracleParams::default()).is_err());
    }

    fn encode_disk_at(dims: Dims, p: [usize; 3]) -> GuidanceVolume {
        let clicks = ClickSet::from_clicks([Click { pos: p, polarity: Polarity::Foreground }]).unwrap();
        crate::encode::encode_disk(&clicks, Polarity::Foreground, 1.0, dims).unwrap()
    }

    #[test]
    fn session_loop_contract() {
        let dims = Dims::cube(16).unwrap();
        let (img, gt) = make_phantom(PhantomKind::NoisySphere, dims, Spacing::UNIT, 3).unwrap();
        let oracle = GeodesicOracle::default();

        let cfg = SimulationConfig {
            p_interaction: 0.0,
            ..Default::default()
        };
        let t = run_session(&img, &gt, &oracle, &cfg).unwrap();
        assert_eq!(t.clicks.len(), 0);
        assert_eq!(t.dice_trajectory.len(), 1);
        assert!(!t.interacted);

        let cfg = SimulationConfig {
            timing: TimingMode::Omitted,
            guidance: GuidanceConfig::new(GuidanceKind::Disk),
            ..Default::default()
        };
        let t = run_session(&img, &gt, &oracle, &cfg).unwrap();
        t.validate().unwrap();
        assert!(t.interacted);
        assert_eq!(t.dice_trajectory.len(), t.clicks.len() + 1);
        assert_eq!(t.guidance_timings.len(), t.clicks.len());
        if t.early_stop {
            assert!(t.clicks.len() < 10);
        } else {
            assert_eq!(t.clicks.len(), 10);
        }
        let again = run_session(&img, &gt, &oracle, &cfg).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn trace_json_round_trip() {
        let dims = Dims::cube(12).unwrap();
        let (img, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
        let cfg = SimulationConfig {
            timing: TimingMode::Omitted,
            ..Default::default()
        };
        let t = run_session(&img, &gt, &GeodesicOracle::default(), &cfg).unwrap();
        let json = serde_json::to_value(&t).unwrap();
        for key in [
            "clicks",
            "dice_trajectory",
            "guidance_timings_seconds",
            "early_stop",
            "config",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert_eq!(json["clicks"][0]["order"], 0);
        let back: SessionTrace = serde_json::from_value(json).unwrap();
        assert_eq!(back.clicks, t.clicks);
        assert_eq!(back.dice_trajectory, t.dice_trajectory);
        assert!(back.final_prediction.is_none());
    }
}
