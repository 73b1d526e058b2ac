use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use guidance_cli::bench::{run_bench, BenchSpec};
use guidance_cli::clicks::load_clicks;
use guidance_cli::sweep::{phantom_cases, run_sweep, to_csv, SweepSpec};
use guidance_core::io::{load_mask, load_volume, save_mask, save_volume};
use guidance_core::metrics::ReportLabel;
use guidance_core::{
    aggregate_traces, dilate_seeds, edt, encode, gdt, make_phantom, run_session, ClickPlacement, Connectivity, Dims,
    Frame, GeodesicOracle, GeodesicParams, GuidanceConfig, GuidanceKind, OracleParams, Passes, PhantomKind, Polarity,
    SessionTrace, SimulationConfig, Spacing, TimingMode, Volume,
};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "guidance", version, about = "Click guidance maps, simulated sessions and their metrics")]
struct Cli {
    /// Seed for phantoms, click sampling and interaction draws.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic image and its ground-truth mask.
    Phantom(PhantomArgs),
    /// Euclidean or geodesic distance map from clicks.
    Distance(DistanceArgs),
    /// Encode clicks as a guidance map.
    Encode(EncodeArgs),
    /// Run one simulated click session with the geodesic oracle.
    Simulate(SimulateArgs),
    /// Aggregate session traces into a metrics report.
    Evaluate(EvaluateArgs),
    /// Sweep guidance hyperparameters and tabulate the metrics.
    Sweep(SweepArgs),
    /// Time every encoder on cubic phantoms.
    Bench(BenchArgs),
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|_| format!("invalid value '{s}'"))
}

fn parse_kind(s: &str) -> Result<GuidanceKind, String> {
    s.parse().map_err(|e: guidance_core::Error| e.to_string())
}

fn parse_passes(s: &str) -> Result<Passes, String> {
    match s {
        "fixpoint" => Ok(Passes::Fixpoint),
        n => n
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .map(Passes::Count)
            .ok_or_else(|| format!("expected a positive count or 'fixpoint', got '{s}'")),
    }
}

fn parse_dims(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad extent '{t}'")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected nx,ny,nz, got '{s}'"))
}

fn parse_spacing(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad spacing '{t}'")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected sx,sy,sz, got '{s}'"))
}

#[derive(Args)]
struct PhantomArgs {
    /// sphere, two-blobs or noisy-sphere.
    #[arg(long, default_value = "sphere", value_parser = parse_serde::<PhantomKind>)]
    kind: PhantomKind,
    #[arg(long, default_value = "64,64,64", value_parser = parse_dims)]
    dims: [usize; 3],
    #[arg(long, default_value = "1,1,1", value_parser = parse_spacing)]
    spacing: [f64; 3],
    /// Output prefix; writes <prefix>.vol and <prefix>.msk.
    #[arg(short, long)]
    output: PathBuf,
}

/// Where the map lives: an image, or bare dims and spacing.
#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    image: Option<PathBuf>,
    /// Grid extent when no image is given.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<[usize; 3]>,
    #[arg(long, default_value = "1,1,1", value_parser = parse_spacing)]
    spacing: [f64; 3],
}

#[derive(Args)]
struct GeodesicArgs {
    /// Weight of intensity differences.
    #[arg(long, default_value_t = 1.0)]
    gamma: f32,
    /// Raster sweeps, or 'fixpoint'.
    #[arg(long, default_value = "4", value_parser = parse_passes)]
    passes: Passes,
    /// 6 or 26.
    #[arg(long, default_value = "26", value_parser = parse_serde::<Connectivity>)]
    neighborhood: Connectivity,
}

impl GeodesicArgs {
    fn params(&self) -> GeodesicParams {
        GeodesicParams {
            gamma: self.gamma,
            passes: self.passes,
            neighborhood: self.neighborhood,
            ..GeodesicParams::default()
        }
    }
}

#[derive(Args)]
struct DistanceArgs {
    /// euclidean or geodesic.
    #[arg(long, default_value = "euclidean", value_parser = parse_serde::<guidance_core::DistanceKind>)]
    kind: guidance_core::DistanceKind,
    #[arg(long)]
    clicks: PathBuf,
    /// fg or bg.
    #[arg(long, default_value = "fg", value_parser = parse_serde::<Polarity>)]
    polarity: Polarity,
    /// Seed dilation radius in voxels.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    geodesic: GeodesicArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// disk, heatmap, edt, gdt, exp-gdt or adaptive.
    #[arg(long, value_parser = parse_kind)]
    kind: GuidanceKind,
    /// Radius in voxels (disk, heatmap, seed dilation).
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Percent of the largest distances clamped away (edt, gdt).
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long)]
    clicks: PathBuf,
    /// fg or bg.
    #[arg(long, default_value = "fg", value_parser = parse_serde::<Polarity>)]
    polarity: Polarity,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    geodesic: GeodesicArgs,
    /// Adaptive heatmap: largest radius.
    #[arg(long, default_value_t = 13.0)]
    a: f64,
    /// Adaptive heatmap: radius decay.
    #[arg(long, default_value_t = 0.15)]
    b: f64,
    /// Heatmap falloff exp(-d^2/2σ^2) instead of exp(-d/2σ^2).
    #[arg(long)]
    squared_exponent: bool,
    /// Write 1 - exp-GDT so clicks are bright.
    #[arg(long)]
    invert_exp_gdt: bool,
    #[arg(short, long)]
    output: PathBuf,
}

/// Guidance and session options shared by `simulate` and `sweep`.
#[derive(Args)]
struct SessionArgs {
    #[arg(long, default_value_t = 10)]
    n_clicks: usize,
    /// error-center or uniform-in-error.
    #[arg(long, default_value = "error-center", value_parser = parse_serde::<ClickPlacement>)]
    placement: ClickPlacement,
    /// omitted keeps outputs byte-reproducible; measured records encoder
    /// wall time.
    #[arg(long, default_value = "omitted", value_parser = parse_serde::<TimingMode>)]
    timing: TimingMode,
}

#[derive(Args)]
struct SimulateArgs {
    /// Phantom to simulate on (sphere, two-blobs, noisy-sphere).
    #[arg(long, value_parser = parse_serde::<PhantomKind>, conflicts_with_all = ["image", "gt"])]
    phantom: Option<PhantomKind>,
    /// Phantom edge length.
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, requires = "gt")]
    image: Option<PathBuf>,
    #[arg(long, requires = "image")]
    gt: Option<PathBuf>,
    #[arg(long, default_value = "adaptive", value_parser = parse_kind)]
    kind: GuidanceKind,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Probability of interaction in percent.
    #[arg(long, default_value_t = 100.0)]
    p: f64,
    #[command(flatten)]
    session: SessionArgs,
    /// Oracle segmenter intensity weight.
    #[arg(long, default_value_t = 100.0)]
    oracle_gamma: f32,
    /// Oracle distance threshold without background clicks.
    #[arg(long, default_value_t = 40.0)]
    oracle_tau: f32,
    /// Trace JSON.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write the final foreground guidance.
    #[arg(long)]
    guidance_out: Option<PathBuf>,
    /// Also write the final prediction.
    #[arg(long)]
    prediction_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trace files, each holding one trace or a list of traces.
    #[arg(long, num_args = 1.., required = true)]
    traces: Vec<PathBuf>,
    /// Report JSON.
    #[arg(short, long)]
    output: PathBuf,
    /// Also write a one-row CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "disk,heatmap,edt,gdt,exp-gdt,adaptive", value_parser = parse_kind)]
    kinds: Vec<GuidanceKind>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,5,9,13")]
    sigmas: Vec<f64>,
    /// Percent.
    #[arg(long, value_delimiter = ',', default_value = "0,10,30,50")]
    thetas: Vec<f64>,
    /// Probability of interaction in percent.
    #[arg(long = "p", value_delimiter = ',', default_value = "50,75,100")]
    p_values: Vec<f64>,
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, value_delimiter = ',', default_value = "sphere,noisy-sphere", value_parser = parse_serde::<PhantomKind>)]
    phantoms: Vec<PhantomKind>,
    /// Phantom edge length.
    #[arg(long, default_value_t = 32)]
    size: usize,
    /// Sessions per cell, one phantom each.
    #[arg(long, default_value_t = 4)]
    volumes: usize,
    /// Image volumes to use instead of phantoms, paired with --gts.
    #[arg(long, value_delimiter = ',', requires = "gts")]
    images: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', requires = "images")]
    gts: Vec<PathBuf>,
    /// CSV output (stdout when absent).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "disk,heatmap,edt,gdt,exp-gdt,adaptive", value_parser = parse_kind)]
    kinds: Vec<GuidanceKind>,
    #[arg(long, default_value_t = 5)]
    repetitions: usize,
    #[arg(long, default_value_t = 10)]
    n_clicks: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value = "sphere", value_parser = parse_serde::<PhantomKind>)]
    phantom: PhantomKind,
    /// Fail with exit status 3 when any median exceeds this many seconds.
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Timing JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Budget(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match cli.command {
        Command::Phantom(a) => cmd_phantom(a, cli.seed),
        Command::Distance(a) => cmd_distance(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Evaluate(a) => cmd_evaluate(a, cli.quiet),
        Command::Sweep(a) => cmd_sweep(a, cli.seed),
        Command::Bench(a) => cmd_bench(a, cli.seed, cli.quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("budget exceeded: {msg}");
            ExitCode::from(3)
        }
    }
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_phantom(a: PhantomArgs, seed: u64) -> CmdResult {
    let [nx, ny, nz] = a.dims;
    let [sx, sy, sz] = a.spacing;
    let (image, mask) = make_phantom(a.kind, Dims::new(nx, ny, nz)?, Spacing::new(sx, sy, sz)?, seed)?;
    save_volume(&image, &with_ext(&a.output, "vol"))?;
    save_mask(&mask, &with_ext(&a.output, "msk"))?;
    log::info!("{} phantom {}: {} object voxels", a.kind_name(), image.dims(), mask.count());
    Ok(())
}

impl PhantomArgs {
    fn kind_name(&self) -> &'static str {
        match self.kind {
            PhantomKind::Sphere => "sphere",
            PhantomKind::TwoBlobs => "two-blobs",
            PhantomKind::NoisySphere => "noisy-sphere",
        }
    }
}

/// The loaded image, if any, plus the grid geometry.
fn resolve_grid(g: &GridArgs, needs_image: bool, what: &str) -> Result<(Option<Volume>, Dims, Spacing), Failure> {
    let image = g.image.as_deref().map(load_volume).transpose()?;
    match (&image, g.dims) {
        (None, _) if needs_image => Err(usage(format!("{what} needs --image"))),
        (None, None) => Err(usage("give --image or --dims")),
        (None, Some([nx, ny, nz])) => {
            let [sx, sy, sz] = g.spacing;
            Ok((None, Dims::new(nx, ny, nz)?, Spacing::new(sx, sy, sz)?))
        }
        (Some(img), dims) => {
            if let Some(d) = dims {
                if d != img.dims().as_array() {
                    return Err(usage(format!("--dims {:?} disagree with the image {}", d, img.dims())));
                }
            }
            let (d, s) = (img.dims(), img.spacing());
            Ok((image, d, s))
        }
    }
}

fn cmd_distance(a: DistanceArgs) -> CmdResult {
    use guidance_core::DistanceKind;
    let geodesic = a.kind == DistanceKind::Geodesic;
    let (image, dims, spacing) = resolve_grid(&a.grid, geodesic, "a geodesic distance")?;
    let clicks = load_clicks(&a.clicks)?;
    clicks.validate(dims)?;
    let seeds = dilate_seeds(&clicks, a.polarity, a.sigma, dims)?;
    let map = match image {
        Some(img) if geodesic => gdt(&seeds, &img.normalized(), &a.geodesic.params())?,
        _ => edt(&seeds, spacing)?,
    };
    map.save(&a.output)?;
    log::info!("{} distance {}: max {:.4}", map.kind.as_str(), dims, map.max());
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> CmdResult {
    let (image, dims, spacing) = resolve_grid(&a.grid, a.kind.needs_image(), &format!("--kind {}", a.kind))?;
    let clicks = load_clicks(&a.clicks)?;
    clicks.validate(dims)?;
    let config = GuidanceConfig {
        kind: a.kind,
        sigma: a.sigma,
        theta_percent: a.theta,
        a: a.a,
        b: a.b,
        geodesic: a.geodesic.params(),
        squared_exponent: a.squared_exponent,
        invert_exp_gdt: a.invert_exp_gdt,
        ..GuidanceConfig::default()
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let frame = match &image {
        Some(img) => Frame::Image(img),
        None => Frame::Grid(dims, spacing),
    };
    let g = encode(&clicks, a.polarity, frame, &config)?;
    g.save(&a.output)?;
    log::info!("{} guidance {}: {} nonzero voxels", a.kind, dims, g.nonzero_count());
    if let Some(s) = &g.per_click_sigmas {
        log::info!("per-click sigmas {s:?}");
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs, seed: u64) -> CmdResult {
    let (image, gt) = match (&a.image, &a.gt, a.phantom) {
        (Some(i), Some(g), None) => (load_volume(i)?, load_mask(g)?),
        (None, None, Some(kind)) => make_phantom(kind, Dims::cube(a.size)?, Spacing::UNIT, seed)?,
        (None, None, None) => return Err(usage("give --phantom or --image with --gt")),
        _ => return Err(usage("--phantom cannot be combined with --image/--gt")),
    };
    let config = SimulationConfig {
        n_clicks: a.session.n_clicks,
        p_interaction: a.p / 100.0,
        rng_seed: seed,
        click_placement: a.session.placement,
        guidance: GuidanceConfig {
            sigma: a.sigma,
            theta_percent: a.theta,
            ..GuidanceConfig::new(a.kind)
        },
        timing: a.session.timing,
        binarize_eps: 0.0,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    config.guidance.validate().map_err(|e| usage(e.to_string()))?;
    let oracle = GeodesicOracle {
        params: OracleParams {
            geodesic: GeodesicParams {
                gamma: a.oracle_gamma,
                ..GeodesicParams::default()
            },
            tau: a.oracle_tau,
            ..OracleParams::default()
        },
    };
    let trace = run_session(&image, &gt, &oracle, &config)?;
    write_json(&a.output, &trace)?;
    log::info!(
        "{} clicks, Dice {:.4} -> {:.4}{}",
        trace.clicks.len(),
        trace.initial_dice(),
        trace.final_dice(),
        if trace.early_stop { " (perfect, stopped early)" } else { "" }
    );

    if let Some(path) = &a.guidance_out {
        if trace.clicks.has(Polarity::Foreground) {
            encode(&trace.clicks, Polarity::Foreground, Frame::Image(&image), &config.guidance)?.save(path)?;
        } else {
            log::warn!("no foreground clicks, {} not written", path.display());
        }
    }
    if let (Some(path), Some(pred)) = (&a.prediction_out, &trace.final_prediction) {
        save_mask(pred, path)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_traces(path: &Path) -> anyhow::Result<Vec<SessionTrace>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let traces = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|t| vec![t])
    };
    traces.with_context(|| format!("{} is not a session trace", path.display()))
}

fn cmd_evaluate(a: EvaluateArgs, quiet: bool) -> CmdResult {
    let mut traces = Vec::new();
    for p in &a.traces {
        traces.extend(read_traces(p)?);
    }
    let report = aggregate_traces(&traces)?;
    write_json(&a.output, &report)?;

    if let Some(csv) = &a.csv {
        let c = &traces[0].config;
        let kind = c.guidance.kind;
        let label = ReportLabel {
            kind: kind.as_str().to_owned(),
            sigma: kind.uses_sigma().then_some(c.guidance.sigma),
            theta: kind.uses_theta().then_some(c.guidance.theta_percent),
            p: c.p_interaction * 100.0,
        };
        let text = format!("{}\n{}\n", guidance_core::MetricsReport::CSV_HEADER, report.csv_row(&label));
        fs::write(csv, text).with_context(|| format!("writing {}", csv.display()))?;
    }
    if !quiet {
        println!(
            "M1 {:.4}  M2 {:.4}  M3 {:.4}  M4 {:.4}  M5 {:.4}  ({} sessions)",
            report.final_dice,
            report.initial_dice,
            report.efficiency,
            report.consistent_improvement,
            report.gt_overlap,
            report.n_sessions
        );
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, seed: u64) -> CmdResult {
    let spec = SweepSpec {
        kinds: a.kinds,
        sigmas: a.sigmas,
        thetas: a.thetas,
        p_values: a.p_values,
        n_clicks: a.session.n_clicks,
        rng_seed: seed,
        placement: a.session.placement,
        timing: a.session.timing,
    };
    guidance_cli::sweep::grid(&spec).map_err(Failure::Usage)?;
    let cases = if a.images.is_empty() {
        phantom_cases(&a.phantoms, a.size, a.volumes, seed)?
    } else {
        if a.images.len() != a.gts.len() {
            return Err(usage(format!("{} images but {} ground truths", a.images.len(), a.gts.len())));
        }
        a.images
            .iter()
            .zip(&a.gts)
            .map(|(i, g)| {
                Ok(guidance_cli::sweep::Case {
                    image: load_volume(i)?,
                    gt: load_mask(g)?,
                })
            })
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    let csv = to_csv(&run_sweep(&spec, &cases)?);
    match &a.output {
        Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, seed: u64, quiet: bool) -> CmdResult {
    if let Some(b) = a.budget_seconds {
        if b.is_nan() || b <= 0.0 {
            return Err(usage("--budget-seconds must be positive"));
        }
    }
    let spec = BenchSpec {
        sizes: a.sizes,
        kinds: a.kinds,
        repetitions: a.repetitions,
        n_clicks: a.n_clicks,
        sigma: a.sigma,
        theta_percent: a.theta,
        phantom: a.phantom,
        seed,
    };
    if spec.repetitions == 0 || spec.sizes.is_empty() {
        return Err(usage("need at least one size and repetition"));
    }
    let report = run_bench(&spec)?;
    if !quiet {
        print!("{}", report.table());
    }
    if let Some(p) = &a.output {
        write_json(p, &report)?;
    }
    for size in report.disk_not_fastest() {
        log::warn!("disk is not the fastest kind at {size}^3");
    }
    if let Some(budget) = a.budget_seconds {
        let over = report.over_budget(budget);
        if !over.is_empty() {
            let names: Vec<String> = over
                .iter()
                .map(|c| format!("{} at {}^3 ({:.3}s)", c.kind, c.size, c.median_seconds))
                .collect();
            return Err(Failure::Budget(names.join(", ")));
        }
    }
    Ok(())
}
