//! Browser demo: click on slices of a phantom, look at the guidance the
//! encoders produce, and replay an oracle session.
//!
//! Every method also works natively, which is how the tests drive it.

use guidance_core::{
    dice, encode, make_phantom, run_session, Click, ClickSet, Dims, Frame, GeodesicOracle, GuidanceConfig,
    GuidanceKind, GuidanceVolume, Mask, PhantomKind, Polarity, Segmenter, SimulationConfig, Spacing, TimingMode,
    Volume,
};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn phantom_kind(name: &str) -> Result<PhantomKind, String> {
    match name {
        "sphere" => Ok(PhantomKind::Sphere),
        "two-blobs" => Ok(PhantomKind::TwoBlobs),
        "noisy-sphere" => Ok(PhantomKind::NoisySphere),
        other => Err(format!("unknown phantom {other:?}")),
    }
}

#[wasm_bindgen]
pub struct Demo {
    image: Volume,
    gt: Mask,
    clicks: ClickSet,
    config: GuidanceConfig,
    fg: Option<GuidanceVolume>,
    bg: Option<GuidanceVolume>,
    prediction: Option<Mask>,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(phantom: &str, size: usize, seed: u32) -> Result<Demo, String> {
        let dims = Dims::cube(size).map_err(err)?;
        let (image, gt) = make_phantom(phantom_kind(phantom)?, dims, Spacing::UNIT, u64::from(seed)).map_err(err)?;
        Ok(Demo {
            image,
            gt,
            clicks: ClickSet::new(),
            config: GuidanceConfig::new(GuidanceKind::AdaptiveHeatmap),
            fg: None,
            bg: None,
            prediction: None,
        })
    }

    pub fn size(&self) -> usize {
        self.image.dims().nx
    }

    pub fn kind(&self) -> String {
        self.config.kind.as_str().to_owned()
    }

    pub fn n_clicks(&self) -> usize {
        self.clicks.len()
    }

    /// Switches the encoder (`disk`, `heatmap`, `edt`, `gdt`, `exp-gdt`,
    /// `adaptive`) and re-encodes the current clicks.
    pub fn set_kind(&mut self, kind: &str) -> Result<(), String> {
        self.config.kind = kind.parse().map_err(err)?;
        self.refresh()
    }

    pub fn set_sigma(&mut self, sigma: f64) -> Result<(), String> {
        self.set_param(|c| c.sigma = sigma)
    }

    pub fn set_theta(&mut self, theta_percent: f64) -> Result<(), String> {
        self.set_param(|c| c.theta_percent = theta_percent)
    }

    /// Adds a click and updates guidance and prediction. Returns the new Dice.
    pub fn add_click(&mut self, x: usize, y: usize, z: usize, foreground: bool) -> Result<f64, String> {
        let click = if foreground { Click::fg(x, y, z) } else { Click::bg(x, y, z) };
        if !self.image.dims().contains(click.pos) {
            return Err(format!("click {:?} outside the volume", click.pos));
        }
        let mut next = self.clicks.clone();
        next.push(click).map_err(err)?;
        self.clicks = next;
        self.refresh()?;
        Ok(self.dice())
    }

    pub fn clear(&mut self) {
        self.clicks = ClickSet::new();
        self.fg = None;
        self.bg = None;
        self.prediction = None;
    }

    /// Dice of the current prediction, 0 before the first foreground click.
    pub fn dice(&self) -> f64 {
        self.prediction.as_ref().map_or(0.0, |p| dice(p, &self.gt).unwrap_or(0.0))
    }

    /// Radius the adaptive encoder picked for each foreground click, in
    /// click order. Empty for the other encoders.
    pub fn per_click_sigmas(&self) -> Vec<u32> {
        self.fg.as_ref().and_then(|g| g.per_click_sigmas.clone()).unwrap_or_default()
    }

    /// Clicks as flat `[x, y, z, fg]` quadruples.
    pub fn clicks(&self) -> Vec<u32> {
        self.clicks
            .iter()
            .flat_map(|c| {
                let [x, y, z] = c.pos.map(|v| v as u32);
                [x, y, z, u32::from(c.polarity == Polarity::Foreground)]
            })
            .collect()
    }

    /// Replaces the clicks with a simulated session of `n_clicks` and
    /// returns its Dice trajectory.
    pub fn simulate(&mut self, n_clicks: usize, seed: u32) -> Result<Vec<f64>, String> {
        let config = SimulationConfig {
            n_clicks,
            rng_seed: u64::from(seed),
            guidance: self.config.clone(),
            // no wall clock in the browser
            timing: TimingMode::Omitted,
            ..Default::default()
        };
        let trace = run_session(&self.image, &self.gt, &GeodesicOracle::default(), &config).map_err(err)?;
        self.clicks = trace.clicks.clone();
        self.refresh()?;
        Ok(trace.dice_trajectory)
    }

    /// RGBA pixels of slice `z`: the image in gray, foreground guidance in
    /// red, background guidance in blue, the prediction tinted yellow and
    /// the ground-truth outline in green.
    pub fn slice_rgba(&self, z: usize) -> Vec<u8> {
        let d = self.image.dims();
        let z = z.min(d.nz - 1);
        let mut out = Vec::with_capacity(d.nx * d.ny * 4);
        for y in 0..d.ny {
            for x in 0..d.nx {
                let p = [x, y, z];
                let g = self.image.get(p).clamp(0.0, 1.0);
                let mut rgb = [g * 0.8; 3];
                if self.prediction.as_ref().is_some_and(|m| m.get(p)) {
                    rgb[0] += 0.15;
                    rgb[1] += 0.15;
                }
                if let Some(f) = &self.fg {
                    rgb[0] += f.get(p);
                }
                if let Some(b) = &self.bg {
                    rgb[2] += b.get(p);
                }
                if self.on_outline(p) {
                    rgb = [0.1, 0.9, 0.2];
                }
                out.extend(rgb.map(|c| (c.clamp(0.0, 1.0) * 255.0).round() as u8));
                out.push(255);
            }
        }
        out
    }
}

impl Demo {
    fn set_param(&mut self, f: impl FnOnce(&mut GuidanceConfig)) -> Result<(), String> {
        let mut config = self.config.clone();
        f(&mut config);
        config.validate().map_err(err)?;
        self.config = config;
        self.refresh()
    }

    fn refresh(&mut self) -> Result<(), String> {
        let encode_one = |polarity| -> Result<Option<GuidanceVolume>, String> {
            if !self.clicks.iter().any(|c| c.polarity == polarity) {
                return Ok(None);
            }
            encode(&self.clicks, polarity, Frame::Image(&self.image), &self.config).map(Some).map_err(err)
        };
        let fg = encode_one(Polarity::Foreground)?;
        let bg = encode_one(Polarity::Background)?;
        self.prediction = match &fg {
            Some(_) => Some(GeodesicOracle::default().segment(&self.image, fg.as_ref(), bg.as_ref()).map_err(err)?),
            None => None,
        };
        self.fg = fg;
        self.bg = bg;
        Ok(())
    }

    fn on_outline(&self, p: [usize; 3]) -> bool {
        if !self.gt.get(p) {
            return false;
        }
        let d = self.gt.dims();
        [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0]]
            .iter()
            .any(|&delta| d.offset(p, delta).is_none_or(|q| !self.gt.get(q)))
    }
}
