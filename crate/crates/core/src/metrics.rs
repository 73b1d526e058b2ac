//! Session evaluation: final and initial Dice, efficiency, consistent
//! improvement and ground-truth overlap of the guidance.

use serde::{Deserialize, Serialize};

use crate::encode::GuidanceVolume;
use crate::error::{Error, Result};
use crate::sim::SessionTrace;
use crate::volume::Mask;

/// `2|A∩B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimsMismatch(a.dims(), b.dims()));
    }
    let (mut inter, mut total) = (0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        inter += (x & y) as usize;
        total += (x + y) as usize;
    }
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Fraction of clicks that strictly raised Dice, over `N` clicks per trace.
/// Sessions that stopped early or never interacted still count `N` clicks.
pub fn consistent_improvement(traces: &[SessionTrace]) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("no traces"));
    }
    let improving: usize = traces.iter().map(SessionTrace::improving_clicks).sum();
    let total: usize = traces.iter().map(|t| t.config.n_clicks).sum();
    Ok(improving as f64 / total as f64)
}

/// `|M ∩ G| / |G|` with `G = {v : guidance(v) > binarize_eps}`.
pub fn gt_overlap(guidance: &GuidanceVolume, gt: &Mask, binarize_eps: f32) -> Result<f64> {
    if guidance.dims != gt.dims() {
        return Err(Error::DimsMismatch(guidance.dims, gt.dims()));
    }
    let (mut g, mut both) = (0usize, 0usize);
    for (&v, &m) in guidance.data.iter().zip(gt.data()) {
        if v > binarize_eps {
            g += 1;
            both += m as usize;
        }
    }
    if g == 0 {
        return Err(Error::EmptyGuidance);
    }
    Ok(both as f64 / g as f64)
}

/// `1 - T` where `T` is the mean timing clamped to `[0, 1]` seconds.
pub fn efficiency(timings: &[f64]) -> Result<f64> {
    if timings.is_empty() {
        return Err(Error::EmptyInput("no timings"));
    }
    if let Some(t) = timings.iter().find(|t| t.is_nan() || **t < 0.0) {
        return Err(Error::InvalidParam(format!("negative or NaN timing {t}")));
    }
    let mean = timings.iter().sum::<f64>() / timings.len() as f64;
    Ok(1.0 - mean.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub initial_dice: f64,
    pub final_dice: f64,
    pub clicks: usize,
    pub improving_clicks: usize,
    pub mean_timing_seconds: Option<f64>,
    pub gt_overlap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// M1: mean Dice after the last click.
    pub final_dice: f64,
    /// M2: mean Dice before any click.
    pub initial_dice: f64,
    /// M3: one minus the mean guidance time in seconds, clamped at 1 s.
    pub efficiency: f64,
    /// M4: share of clicks that strictly improved Dice.
    pub consistent_improvement: f64,
    /// M5: mean overlap of the final foreground guidance with the ground truth.
    pub gt_overlap: f64,
    pub n_sessions: usize,
    pub per_session: Vec<SessionMetrics>,
}

/// Aggregates sessions, recomputing the overlap metric from each session's
/// final foreground guidance (`None` for sessions without one).
pub fn aggregate(
    traces: &[SessionTrace],
    guidances: &[Option<GuidanceVolume>],
    gts: &[Mask],
    binarize_eps: f32,
) -> Result<MetricsReport> {
    if traces.len() != guidances.len() || traces.len() != gts.len() {
        return Err(Error::InvalidParam(format!(
            "{} traces, {} guidances and {} ground truths",
            traces.len(),
            guidances.len(),
            gts.len()
        )));
    }
    let overlaps = guidances
        .iter()
        .zip(gts)
        .map(|(g, gt)| match g {
            Some(g) => match gt_overlap(g, gt, binarize_eps) {
                Ok(v) => Ok(Some(v)),
                Err(Error::EmptyGuidance) => Ok(None),
                Err(e) => Err(e),
            },
            None => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    build_report(traces, &overlaps)
}

/// Aggregates sessions using the overlap recorded in each trace.
pub fn aggregate_traces(traces: &[SessionTrace]) -> Result<MetricsReport> {
    let overlaps: Vec<_> = traces.iter().map(|t| t.gt_overlap).collect();
    build_report(traces, &overlaps)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

// Sessions without clicks contribute no timings; if no session computed any
// guidance the efficiency is 1. Likewise the overlap averages only sessions
// that produced foreground guidance and is 0 when none did.
fn build_report(traces: &[SessionTrace], overlaps: &[Option<f64>]) -> Result<MetricsReport> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("no traces"));
    }
    for t in traces {
        t.validate()?;
    }
    let timings: Vec<f64> = traces.iter().flat_map(|t| t.guidance_timings.iter().copied()).collect();
    let efficiency = if timings.is_empty() { 1.0 } else { efficiency(&timings)? };
    let per_session = traces
        .iter()
        .zip(overlaps)
        .map(|(t, &o)| SessionMetrics {
            initial_dice: t.initial_dice(),
            final_dice: t.final_dice(),
            clicks: t.clicks.len(),
            improving_clicks: t.improving_clicks(),
            mean_timing_seconds: mean(t.guidance_timings.iter().copied()),
            gt_overlap: o,
        })
        .collect();
    Ok(MetricsReport {
        final_dice: mean(traces.iter().map(SessionTrace::final_dice)).unwrap_or(0.0),
        initial_dice: mean(traces.iter().map(SessionTrace::initial_dice)).unwrap_or(0.0),
        efficiency,
        consistent_improvement: consistent_improvement(traces)?,
        gt_overlap: mean(overlaps.iter().flatten().copied()).unwrap_or(0.0),
        n_sessions: traces.len(),
        per_session,
    })
}

/// Row labels for tabulating a report.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportLabel {
    pub kind: String,
    pub sigma: Option<f64>,
    pub theta: Option<f64>,
    /// Probability of interaction in percent.
    pub p: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "kind,sigma,theta,p,M1,M2,M3,M4,M5";

    /// One CSV row; parameters that do not apply are left empty.
    pub fn csv_row(&self, label: &ReportLabel) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            label.kind,
            opt(label.sigma),
            opt(label.theta),
            label.p,
            self.final_dice,
            self.initial_dice,
            self.efficiency,
            self.consistent_improvement,
            self.gt_overlap
        )
    }
}
