//! Grid sweep over guidance hyperparameters, one batch of oracle sessions
//! per grid cell.

use anyhow::{bail, Result};
use guidance_core::metrics::ReportLabel;
use guidance_core::{
    aggregate_traces, make_phantom, run_session, ClickPlacement, Dims, GeodesicOracle, GuidanceConfig, GuidanceKind,
    Mask, MetricsReport, PhantomKind, SimulationConfig, Spacing, TimingMode, Volume,
};
use rayon::prelude::*;

pub const DEFAULT_SIGMAS: [f64; 5] = [0.0, 1.0, 5.0, 9.0, 13.0];
pub const DEFAULT_THETAS: [f64; 4] = [0.0, 10.0, 30.0, 50.0];
pub const DEFAULT_P_PERCENT: [f64; 3] = [50.0, 75.0, 100.0];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub kinds: Vec<GuidanceKind>,
    pub sigmas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Probability of interaction in percent.
    pub p_values: Vec<f64>,
    pub n_clicks: usize,
    pub rng_seed: u64,
    pub placement: ClickPlacement,
    pub timing: TimingMode,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kinds: GuidanceKind::ALL.to_vec(),
            sigmas: DEFAULT_SIGMAS.to_vec(),
            thetas: DEFAULT_THETAS.to_vec(),
            p_values: DEFAULT_P_PERCENT.to_vec(),
            n_clicks: 10,
            rng_seed: 0,
            placement: ClickPlacement::ErrorCenter,
            timing: TimingMode::Omitted,
        }
    }
}

/// One grid point; parameters that do not apply to the kind are `None`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub kind: GuidanceKind,
    pub sigma: Option<f64>,
    pub theta: Option<f64>,
    pub p: f64,
}

impl SweepCell {
    pub fn label(&self) -> ReportLabel {
        ReportLabel {
            kind: self.kind.as_str().to_owned(),
            sigma: self.sigma,
            theta: self.theta,
            p: self.p,
        }
    }
}

/// An image with its ground truth.
pub struct Case {
    pub image: Volume,
    pub gt: Mask,
}

/// `count` phantoms of edge `size`, cycling through `kinds`, seeded
/// `seed, seed + 1, ...`.
pub fn phantom_cases(kinds: &[PhantomKind], size: usize, count: usize, seed: u64) -> Result<Vec<Case>> {
    if kinds.is_empty() || count == 0 {
        bail!("need at least one phantom");
    }
    let dims = Dims::cube(size)?;
    (0..count)
        .map(|i| {
            let (image, gt) = make_phantom(kinds[i % kinds.len()], dims, Spacing::UNIT, seed.wrapping_add(i as u64))?;
            Ok(Case { image, gt })
        })
        .collect()
}

fn check_values(name: &str, values: &[f64], ok: impl Fn(f64) -> bool, range: &str) -> Result<()> {
    if values.is_empty() {
        bail!("{name} list is empty");
    }
    if let Some(v) = values.iter().find(|&&v| !ok(v)) {
        bail!("{name} value {v} outside {range}");
    }
    Ok(())
}

/// Cells in grid order: kind, then sigma, then theta, then p.
pub fn grid(spec: &SweepSpec) -> Result<Vec<SweepCell>> {
    if spec.kinds.is_empty() {
        bail!("kind list is empty");
    }
    check_values("sigma", &spec.sigmas, |v| v >= 0.0 && v.is_finite(), "[0, inf)")?;
    check_values("theta", &spec.thetas, |v| (0.0..100.0).contains(&v), "[0, 100)")?;
    check_values("p", &spec.p_values, |v| (0.0..=100.0).contains(&v), "[0, 100]")?;
    if spec.n_clicks == 0 {
        bail!("n_clicks must be >= 1");
    }

    let mut cells = Vec::new();
    for &kind in &spec.kinds {
        let sigmas: Vec<Option<f64>> = if kind.uses_sigma() {
            spec.sigmas.iter().copied().map(Some).collect()
        } else {
            if spec.sigmas.len() > 1 {
                log::info!("{}: sigma does not apply, collapsing {} values", kind, spec.sigmas.len());
            }
            vec![None]
        };
        let thetas: Vec<Option<f64>> = if kind.uses_theta() {
            spec.thetas.iter().copied().map(Some).collect()
        } else {
            if spec.thetas.len() > 1 {
                log::info!("{}: theta does not apply, collapsing {} values", kind, spec.thetas.len());
            }
            vec![None]
        };
        for &sigma in &sigmas {
            for &theta in &thetas {
                for &p in &spec.p_values {
                    cells.push(SweepCell { kind, sigma, theta, p });
                }
            }
        }
    }
    if cells.is_empty() {
        bail!("the sweep grid is empty");
    }
    Ok(cells)
}

fn run_cell(cell: &SweepCell, spec: &SweepSpec, cases: &[Case]) -> Result<MetricsReport> {
    let defaults = GuidanceConfig::new(cell.kind);
    let guidance = GuidanceConfig {
        sigma: cell.sigma.unwrap_or(defaults.sigma),
        theta_percent: cell.theta.unwrap_or(0.0),
        ..defaults
    };
    let oracle = GeodesicOracle::default();
    let traces = cases
        .iter()
        .enumerate()
        .map(|(i, case)| {
            let config = SimulationConfig {
                n_clicks: spec.n_clicks,
                p_interaction: cell.p / 100.0,
                rng_seed: spec.rng_seed.wrapping_add(i as u64),
                click_placement: spec.placement,
                guidance: guidance.clone(),
                timing: spec.timing,
                binarize_eps: 0.0,
            };
            Ok(run_session(&case.image, &case.gt, &oracle, &config)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_traces(&traces)?)
}

/// Runs every cell; rows come back in grid order whatever the scheduling.
pub fn run_sweep(spec: &SweepSpec, cases: &[Case]) -> Result<Vec<(SweepCell, MetricsReport)>> {
    if cases.is_empty() {
        bail!("no volumes to sweep over");
    }
    let cells = grid(spec)?;
    log::info!("{} cells x {} volumes", cells.len(), cases.len());
    cells
        .par_iter()
        .map(|cell| Ok((*cell, run_cell(cell, spec, cases)?)))
        .collect()
}

pub fn to_csv(rows: &[(SweepCell, MetricsReport)]) -> String {
    let mut out = String::from(MetricsReport::CSV_HEADER);
    out.push('\n');
    for (cell, report) in rows {
        out.push_str(&report.csv_row(&cell.label()));
        out.push('\n');
    }
    out
}
