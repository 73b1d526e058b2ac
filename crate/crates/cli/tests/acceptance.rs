//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.
//!
//! Run alone with `cargo test -p guidance-cli --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use guidance_cli::bench::{run_bench, BenchSpec};
use guidance_cli::sweep::{phantom_cases, run_sweep, to_csv, SweepSpec};
use guidance_core::encode::sigma_from_mean_distance;
use guidance_core::io::{load_mask, load_volume, save_mask, save_volume};
use guidance_core::{
    aggregate, aggregate_traces, consistent_improvement, dice, dijkstra_oracle, dilate_seeds, edt, efficiency, encode,
    gdt, gt_overlap, make_phantom, run_session, Click, ClickSet, Connectivity, Dims, Frame, GeodesicOracle,
    GeodesicParams, GuidanceConfig, GuidanceKind, Mask, PhantomKind, Polarity, SeedSet, SessionTrace,
    SimulationConfig, Spacing, TimingMode, Volume,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

// tolerances and thresholds
const GDT_ORACLE_TOL: f32 = 1e-4;
const GDT_VOLUMES: usize = 21;
const EDT_IDENTITY_TOL: f64 = 1e-5;
const EDT_CLICKS_PER_SIGMA: usize = 4;
const ENCODER_CASES: usize = 24;
const HEATMAP_AT_TWO_TOL: f32 = 1e-6;
const ADAPTIVE_A: f64 = 13.0;
const ADAPTIVE_B: f64 = 0.15;
const SESSION_SIZE: usize = 64;
const SESSION_CLICKS: usize = 10;
const SPHERE_MEAN_FINAL_DICE: f64 = 0.9;
const BENCH_SIZE: usize = 256;
const BENCH_CLICKS: usize = 10;
const BENCH_REPETITIONS: usize = 5;
const BENCH_BUDGET_SECONDS: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("geodesic sweeps match the Dijkstra oracle", gdt_oracle_equivalence),
        ("Euclidean transform of a dilated click is max(0, r - sigma)", edt_ball_identity),
        ("encoder output contracts", encoder_contracts),
        ("adaptive heatmap radius", adaptive_radius),
        ("oracle sessions improve Dice", interactive_loop),
        ("metrics match hand counts", metrics_hand_counts),
        ("encoders finish within 1 s at 256^3, disk fastest", efficiency_budget),
        ("determinism and bit-exact round trips", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "acceptance {} {verdict} {name}: {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_volume(dims: Dims, rng: &mut ChaCha8Rng) -> Volume {
    let data = (0..dims.len()).map(|_| rng.gen::<f32>()).collect();
    Volume::new(dims, Spacing::UNIT, data).unwrap()
}

fn random_pos(dims: Dims, rng: &mut ChaCha8Rng) -> [usize; 3] {
    [rng.gen_range(0..dims.nx), rng.gen_range(0..dims.ny), rng.gen_range(0..dims.nz)]
}

fn gdt_oracle_equivalence() -> Outcome {
    let dims = Dims::cube(16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0f32;
    let mut runs = 0;
    for _ in 0..GDT_VOLUMES {
        let image = random_volume(dims, &mut rng);
        let n_seeds = rng.gen_range(1..=5);
        let seeds = SeedSet::new(dims, (0..n_seeds).map(|_| random_pos(dims, &mut rng))).unwrap();
        for gamma in [0.0, 0.5, 1.0] {
            let params = GeodesicParams {
                gamma,
                neighborhood: Connectivity::TwentySix,
                ..GeodesicParams::fixpoint()
            };
            let fast = gdt(&seeds, &image, &params).unwrap();
            let exact = dijkstra_oracle(&seeds, &image, &params).unwrap();
            let err = fast
                .data
                .iter()
                .zip(&exact.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0f32, f32::max);
            worst = worst.max(err);
            runs += 1;
        }
    }
    outcome(
        worst <= GDT_ORACLE_TOL,
        format!("max |err| {worst:.3e} over {runs} runs (tol {GDT_ORACLE_TOL:.0e})"),
    )
}

fn edt_ball_identity() -> Outcome {
    let dims = Dims::cube(32).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut per_sigma = Vec::new();
    let mut pass = true;
    for sigma in [0.0, 1.0, 5.0, 9.0, 13.0] {
        let mut worst = 0f64;
        for _ in 0..EDT_CLICKS_PER_SIGMA {
            let c = random_pos(dims, &mut rng);
            let clicks = ClickSet::from_clicks([Click {
                pos: c,
                polarity: Polarity::Foreground,
            }])
            .unwrap();
            let seeds = dilate_seeds(&clicks, Polarity::Foreground, sigma, dims).unwrap();
            let map = edt(&seeds, Spacing::UNIT).unwrap();
            for (i, &d) in map.data.iter().enumerate() {
                let v = dims.coords(i);
                let r = (0..3).map(|k| (v[k] as f64 - c[k] as f64).powi(2)).sum::<f64>().sqrt();
                worst = worst.max((d as f64 - (r - sigma).max(0.0)).abs());
            }
        }
        pass &= worst <= EDT_IDENTITY_TOL;
        per_sigma.push(format!("sigma {sigma}: {worst:.3e}"));
    }
    outcome(pass, format!("max |err| {} (tol {EDT_IDENTITY_TOL:.0e})", per_sigma.join(", ")))
}

fn guidance(kind: GuidanceKind, sigma: f64, theta: f64) -> GuidanceConfig {
    GuidanceConfig {
        sigma,
        theta_percent: theta,
        ..GuidanceConfig::new(kind)
    }
}

fn encoder_contracts() -> Outcome {
    let dims = Dims::cube(20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut problems = Vec::new();
    let mut note = |msg: String| {
        if problems.len() < 5 {
            problems.push(msg);
        }
    };

    for case in 0..ENCODER_CASES {
        let (image, _) = make_phantom(PhantomKind::NoisySphere, dims, Spacing::UNIT, case as u64).unwrap();
        let n = rng.gen_range(1..=4);
        let mut clicks = ClickSet::new();
        while clicks.len() < n {
            let _ = clicks.push(Click {
                pos: random_pos(dims, &mut rng),
                polarity: Polarity::Foreground,
            });
        }
        let mut shuffled = clicks.as_slice().to_vec();
        shuffled.shuffle(&mut rng);
        let shuffled = ClickSet::from_clicks(shuffled).unwrap();
        let sigma = [0.0, 1.0, 5.0, 9.0, 13.0][case % 5];

        for kind in GuidanceKind::ALL {
            let theta = if kind.uses_theta() { [0.0, 10.0, 30.0, 50.0][case % 4] } else { 0.0 };
            let config = guidance(kind, sigma, theta);
            let g = encode(&clicks, Polarity::Foreground, Frame::Image(&image), &config).unwrap();
            if let Some(v) = g.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                note(format!("{kind} value {v} outside [0, 1]"));
            }
            let h = encode(&shuffled, Polarity::Foreground, Frame::Image(&image), &config).unwrap();
            if g.data != h.data {
                note(format!("{kind} depends on click order"));
            }
            if kind == GuidanceKind::Disk {
                // boundary-inclusive balls, brute force
                for (i, &v) in g.data.iter().enumerate() {
                    let p = dims.coords(i);
                    let inside = clicks.iter().any(|c| {
                        (0..3).map(|k| (p[k] as f64 - c.pos[k] as f64).powi(2)).sum::<f64>() <= sigma * sigma
                    });
                    if v != f32::from(u8::from(inside)) {
                        note(format!("disk value {v} at {p:?}, sigma {sigma}"));
                        break;
                    }
                }
            }
        }

        for kind in [GuidanceKind::Edt, GuidanceKind::Gdt] {
            let counts: Vec<usize> = [10.0, 30.0, 50.0]
                .iter()
                .map(|&t| {
                    encode(&clicks, Polarity::Foreground, Frame::Image(&image), &guidance(kind, sigma, t))
                        .unwrap()
                        .nonzero_count()
                })
                .collect();
            if counts.windows(2).any(|w| w[1] > w[0]) {
                note(format!("{kind} nonzero counts {counts:?} increase with theta"));
            }
        }
    }

    // value at distance 2 from a lone click, sigma 1
    let one = ClickSet::from_clicks([Click::fg(10, 10, 10)]).unwrap();
    let h = encode(&one, Polarity::Foreground, Frame::grid(dims), &guidance(GuidanceKind::Heatmap, 1.0, 0.0)).unwrap();
    let at_two = h.get([12, 10, 10]);
    let expected = (-1.0f32).exp();
    if (at_two - expected).abs() > HEATMAP_AT_TWO_TOL {
        note(format!("heatmap at distance 2 is {at_two}, expected {expected}"));
    }

    let pass = problems.is_empty();
    let detail = if pass {
        format!("{ENCODER_CASES} random click sets x 6 kinds; heatmap(d=2, sigma=1) = {at_two:.7}")
    } else {
        problems.join("; ")
    };
    outcome(pass, detail)
}

fn adaptive_radius() -> Outcome {
    let s0 = sigma_from_mean_distance(0.0, ADAPTIVE_A, ADAPTIVE_B);
    let s10 = sigma_from_mean_distance(10.0, ADAPTIVE_A, ADAPTIVE_B);
    let grid: Vec<u32> = (0..=5000)
        .map(|i| sigma_from_mean_distance(i as f64 * 0.01, ADAPTIVE_A, ADAPTIVE_B))
        .collect();
    let monotone = grid.windows(2).all(|w| w[1] <= w[0]);

    let dims = Dims::cube(SESSION_SIZE).unwrap();
    let (image, gt) = make_phantom(PhantomKind::Sphere, dims, Spacing::UNIT, 0).unwrap();
    let c = SESSION_SIZE / 2;
    // last object voxel along +x from the center
    let edge_x = (c..SESSION_SIZE).take_while(|&x| gt.get([x, c, c])).last().unwrap();
    let clicks = ClickSet::from_clicks([Click::fg(c, c, c), Click::fg(edge_x, c, c)]).unwrap();
    let g = encode(
        &clicks,
        Polarity::Foreground,
        Frame::Image(&image),
        &GuidanceConfig::new(GuidanceKind::AdaptiveHeatmap),
    )
    .unwrap();
    let sig = g.per_click_sigmas.clone().unwrap_or_default();
    let shrinks = sig.len() == 2 && sig[1] < sig[0];

    outcome(
        s0 == 13 && s10 == 2 && monotone && shrinks,
        format!(
            "sigma(0) = {s0}, sigma(10) = {s10}, monotone on [0, 50]: {monotone}, center vs edge click ({edge_x},{c},{c}): {sig:?}"
        ),
    )
}

fn session_config(seed: u64) -> SimulationConfig {
    SimulationConfig {
        n_clicks: SESSION_CLICKS,
        p_interaction: 1.0,
        rng_seed: seed,
        timing: TimingMode::Omitted,
        ..SimulationConfig::default()
    }
}

fn interactive_loop() -> Outcome {
    let dims = Dims::cube(SESSION_SIZE).unwrap();
    let oracle = GeodesicOracle::default();
    let mut traces = Vec::new();
    let mut sphere_final = Vec::new();
    let mut regressions = 0;
    for seed in 0..10u64 {
        let kind = if seed % 2 == 0 { PhantomKind::Sphere } else { PhantomKind::NoisySphere };
        let (image, gt) = make_phantom(kind, dims, Spacing::UNIT, seed).unwrap();
        let t = run_session(&image, &gt, &oracle, &session_config(seed)).unwrap();
        if t.final_dice() < t.initial_dice() {
            regressions += 1;
        }
        if kind == PhantomKind::Sphere {
            sphere_final.push(t.final_dice());
        }
        traces.push(t);
    }
    let mean_sphere = sphere_final.iter().sum::<f64>() / sphere_final.len() as f64;
    let m4 = consistent_improvement(&traces).unwrap();

    // independent recount
    let mut improving = 0usize;
    for t in &traces {
        for k in 1..t.dice_trajectory.len() {
            if t.dice_trajectory[k] > t.dice_trajectory[k - 1] {
                improving += 1;
            }
        }
    }
    let recount = improving as f64 / (SESSION_CLICKS * traces.len()) as f64;

    let pass = regressions == 0
        && mean_sphere >= SPHERE_MEAN_FINAL_DICE
        && (0.0..=1.0).contains(&m4)
        && m4 == recount;
    outcome(
        pass,
        format!(
            "{regressions} sessions lost Dice, mean final Dice on sphere {mean_sphere:.4} (>= {SPHERE_MEAN_FINAL_DICE}), M4 {m4:.4} vs recount {recount:.4}"
        ),
    )
}

fn mask_from(dims: Dims, on: impl Fn([usize; 3]) -> bool) -> Mask {
    Mask::new(dims, (0..dims.len()).map(|i| u8::from(on(dims.coords(i)))).collect()).unwrap()
}

fn trace_with(dice_trajectory: Vec<f64>, timings: Vec<f64>) -> SessionTrace {
    let clicks = ClickSet::from_clicks((0..dice_trajectory.len() - 1).map(|i| Click::fg(i, 0, 0))).unwrap();
    SessionTrace {
        clicks,
        dice_trajectory,
        guidance_timings: timings,
        early_stop: false,
        interacted: true,
        gt_overlap: None,
        config: SimulationConfig::default(),
        final_prediction: None,
    }
}

fn metrics_hand_counts() -> Outcome {
    let dims = Dims::cube(4).unwrap();
    let mut checks = Vec::new();

    // two 4-voxel masks sharing 2 voxels: 2*2 / (4+4)
    let a = mask_from(dims, |p| p[2] == 0 && p[1] == 0 && p[0] < 4);
    let b = mask_from(dims, |p| p[2] == 0 && p[1] == 0 && p[0] >= 2 || p[2] == 1 && p[1] == 0 && p[0] < 2);
    let m1 = dice(&a, &b).unwrap();
    checks.push(("Dice", m1, 0.5));

    // 10-click traces with 7 and 6 strict improvements; ties and drops do not count
    let t1 = trace_with(
        vec![0.1, 0.2, 0.3, 0.3, 0.4, 0.35, 0.5, 0.6, 0.7, 0.7, 0.8],
        vec![0.25; 10],
    );
    let t2 = trace_with(
        vec![0.0, 0.1, 0.1, 0.2, 0.3, 0.3, 0.25, 0.4, 0.5, 0.5, 0.6],
        vec![0.5; 10],
    );
    let traces = [t1, t2];
    checks.push(("M4", consistent_improvement(&traces).unwrap(), 13.0 / 20.0));

    // 7 guidance voxels, 5 of them inside the ground truth
    let gt = mask_from(dims, |p| p[2] == 0 && p[1] <= 1);
    let fg = encode(
        &ClickSet::from_clicks([Click::fg(1, 0, 0)]).unwrap(),
        Polarity::Foreground,
        Frame::grid(dims),
        &guidance(GuidanceKind::Disk, 0.0, 0.0),
    )
    .unwrap();
    let mut g = fg.clone();
    g.data.iter_mut().for_each(|v| *v = 0.0);
    for p in [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0], [1, 1, 0], [0, 2, 0], [0, 0, 1]] {
        g.data[dims.index_of(p)] = 1.0;
    }
    checks.push(("M5", gt_overlap(&g, &gt, 0.0).unwrap(), 5.0 / 7.0));

    // mean timing 0.375 s over all 20 clicks
    let all_timings: Vec<f64> = traces.iter().flat_map(|t| t.guidance_timings.clone()).collect();
    checks.push(("M3", efficiency(&all_timings).unwrap(), 0.625));
    checks.push(("M3 clamp", efficiency(&[1.5, 2.0]).unwrap(), 0.0));

    let report = aggregate(&traces, &[Some(g.clone()), None], &[gt.clone(), gt.clone()], 0.0).unwrap();
    checks.push(("M1", report.final_dice, (0.8 + 0.6) / 2.0));
    checks.push(("M2", report.initial_dice, (0.1 + 0.0) / 2.0));
    checks.push(("report M4", report.consistent_improvement, 13.0 / 20.0));
    checks.push(("report M5", report.gt_overlap, 5.0 / 7.0));

    let bad: Vec<String> = checks
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(name, got, want)| format!("{name} {got} != {want}"))
        .collect();
    let summary: Vec<String> = checks.iter().map(|(n, got, _)| format!("{n} {got:.4}")).collect();
    outcome(bad.is_empty(), if bad.is_empty() { summary.join(", ") } else { bad.join("; ") })
}

fn efficiency_budget() -> Outcome {
    let spec = BenchSpec {
        sizes: vec![BENCH_SIZE],
        kinds: GuidanceKind::ALL.to_vec(),
        repetitions: BENCH_REPETITIONS,
        n_clicks: BENCH_CLICKS,
        ..BenchSpec::default()
    };
    let report = match run_bench(&spec) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("bench failed: {e:#}")),
    };
    let over = report.over_budget(BENCH_BUDGET_SECONDS);
    let disk_fastest = report.disk_not_fastest().is_empty();
    let medians: Vec<String> = report
        .cells
        .iter()
        .map(|c| format!("{} {:.0} ms", c.kind, c.median_seconds * 1e3))
        .collect();
    outcome(
        over.is_empty() && disk_fastest,
        format!(
            "medians over {BENCH_REPETITIONS} runs: {} (budget {BENCH_BUDGET_SECONDS} s, disk fastest: {disk_fastest})",
            medians.join(", ")
        ),
    )
}

fn determinism() -> Outcome {
    let mut problems = Vec::new();

    let dims = Dims::cube(24).unwrap();
    let (image, gt) = make_phantom(PhantomKind::NoisySphere, dims, Spacing::UNIT, 7).unwrap();
    let oracle = GeodesicOracle::default();
    let run = || {
        let traces: Vec<SessionTrace> = (0..3)
            .map(|s| {
                let config = SimulationConfig {
                    click_placement: guidance_core::ClickPlacement::UniformInError,
                    ..session_config(s)
                };
                run_session(&image, &gt, &oracle, &config).unwrap()
            })
            .collect();
        let report = aggregate_traces(&traces).unwrap();
        (serde_json::to_string(&traces).unwrap(), serde_json::to_string(&report).unwrap())
    };
    let (traces_a, report_a) = run();
    let (traces_b, report_b) = run();
    if traces_a != traces_b {
        problems.push("traces differ".to_string());
    }
    if report_a != report_b {
        problems.push("reports differ".to_string());
    }

    let spec = SweepSpec {
        kinds: vec![GuidanceKind::Disk, GuidanceKind::Gdt, GuidanceKind::AdaptiveHeatmap],
        sigmas: vec![0.0, 5.0],
        thetas: vec![0.0, 30.0],
        p_values: vec![50.0, 100.0],
        n_clicks: 4,
        rng_seed: 11,
        ..SweepSpec::default()
    };
    let cases = phantom_cases(&[PhantomKind::Sphere, PhantomKind::NoisySphere], 16, 3, 11).unwrap();
    let sweep_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| to_csv(&run_sweep(&spec, &cases).unwrap()))
    };
    let csv = sweep_with(1);
    if csv != sweep_with(3) || csv != sweep_with(1) {
        problems.push("sweep CSV differs between runs".to_string());
    }

    let dir = tempfile::tempdir().unwrap();
    let vol_path = dir.path().join("image.vol");
    let msk_path = dir.path().join("gt.msk");
    save_volume(&image, &vol_path).unwrap();
    save_mask(&gt, &msk_path).unwrap();
    let back = load_volume(&vol_path).unwrap();
    let bits = |v: &Volume| v.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    if back.dims() != image.dims() || back.spacing() != image.spacing() || bits(&back) != bits(&image) {
        problems.push("volume round trip is not bit-exact".to_string());
    }
    if load_mask(&msk_path).unwrap() != gt {
        problems.push("mask round trip differs".to_string());
    }

    let rows = csv.lines().count() - 1;
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("traces and reports identical over 2 runs, {rows}-row sweep CSV identical on 1 and 3 threads, .vol/.msk round trips exact")
        } else {
            problems.join("; ")
        },
    )
}
