//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero when any
//! criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use source_seek::averaging::{
    lyapunov_esc_rate, lyapunov_esc_rate_via_rhs, lyapunov_ga, moving_average, AveragedState, AveragingParams,
};
use source_seek::esc::EscParams;
use source_seek::ga::{GaController, GaGains};
use source_seek::harness::{
    self, gradcheck, monte_carlo, simulate_one, trial_rng, BatchOptions, BatchReport, ExperimentConfig, FieldConfig,
    FieldKind, InitMode, Outcome,
};
use source_seek::sensors::{ProxySettings, SensorArray, SensorCalibration};
use source_seek::vehicle::StopReason;
use source_seek::{perp, simulate, FieldSpec, GradientSource, PlanarVector, Pose, Trajectory};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

type Check = fn() -> Verdict;

fn recipe(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../recipes").join(format!("{name}.toml"));
    harness::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn explicit_poses(cfg: &ExperimentConfig) -> Vec<Pose> {
    match cfg.init_mode().expect("init mode") {
        InitMode::Explicit(poses) => poses,
        InitMode::Random(_) => panic!("recipe has no explicit poses"),
    }
}

/// Runs every pose of a recipe once at the recipe's step.
fn run_recipe(cfg: &ExperimentConfig) -> Vec<(Pose, Trajectory)> {
    let field = cfg.field.build().expect("field");
    explicit_poses(cfg)
        .into_iter()
        .enumerate()
        .map(|(i, init)| {
            let traj = simulate_one(cfg, &field, init, trial_rng(cfg.seed, i), cfg.step(false)).expect("simulate");
            (init, traj)
        })
        .collect()
}

/// Checks that every run of each recipe ends within 5% of its initial
/// distance to the source.
fn five_percent(recipes: &[&str]) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in recipes {
        let cfg = recipe(name);
        let source = cfg.field.build().expect("field").source();
        let mut worst: f64 = 0.0;
        for (init, traj) in run_recipe(&cfg) {
            let d0 = init.position().distance(source);
            let ratio = traj.final_distance(source).expect("samples") / d0;
            worst = worst.max(ratio);
        }
        ok &= worst < 0.05;
        parts.push(format!("{name} worst d/d0={worst:.4}"));
    }
    (ok, parts)
}

fn convergence_quadratic() -> Verdict {
    let start = Instant::now();
    let (ok, parts) =
        five_percent(&["ga_quadratic_k1-1_k2-1", "ga_quadratic_k1-1_k2-10", "ga_quadratic_k1-0.1_k2-10"]);
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(ok && secs < 10.0, format!("{}; runtime {secs:.2} s (< 10 s)", parts.join(", ")))
}

fn convergence_nonquadratic() -> Verdict {
    let (ok, parts) =
        five_percent(&["ga_nonquad_a_k1-1_k2-20", "ga_nonquad_a_k1-0.1_k2-20", "ga_nonquad_a_k1-0.1_k2-5"]);
    Verdict::new(ok, parts.join(", "))
}

fn batch(name: &str, trials: usize, seed: u64) -> BatchReport {
    let mut cfg = recipe(name);
    cfg.trials = Some(trials);
    cfg.seed = seed;
    monte_carlo(&cfg, &BatchOptions { batch: true, ..Default::default() }).expect("batch")
}

fn medians(report: &BatchReport) -> Vec<Option<f64>> {
    report.summary.groups.iter().map(|g| g.stats.median_ts).collect()
}

fn strictly(values: &[Option<f64>], increasing: bool) -> bool {
    values.windows(2).all(|w| match (w[0], w[1]) {
        (Some(a), Some(b)) => if increasing { b > a } else { b < a },
        _ => false,
    })
}

fn fmt_medians(values: &[Option<f64>]) -> String {
    let items: Vec<String> = values.iter().map(|v| v.map_or("none".to_string(), |x| format!("{x:.3}"))).collect();
    format!("[{}]", items.join(", "))
}

fn gain_trends() -> Verdict {
    let start = Instant::now();
    let k2 = medians(&batch("sweep_k2", 100, 1));
    let k1 = medians(&batch("sweep_k1", 100, 1));
    let secs = start.elapsed().as_secs_f64();
    let k2_ok = strictly(&k2, false);
    let k1_ok = strictly(&k1, true);
    Verdict::new(
        k2_ok && k1_ok && secs < 120.0,
        format!(
            "median T_s over k2 {{1,5,10}} {} decreasing={k2_ok}; over k1 {{0.1,0.5,1}} {} increasing={k1_ok}; runtime {secs:.1} s (< 120 s)",
            fmt_medians(&k2),
            fmt_medians(&k1)
        ),
    )
}

/// First index from which the averaged path stays inside the ball.
fn enters_and_stays(avg: &Trajectory, source: PlanarVector, radius: f64) -> Option<f64> {
    let outside = avg.samples.iter().rposition(|s| s.pose.position().distance(source) >= radius);
    match outside {
        None => avg.samples.first().map(|s| s.t),
        Some(i) if i + 1 < avg.samples.len() => Some(avg.samples[i + 1].t),
        Some(_) => None,
    }
}

fn esc_convergence() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["esc_quadratic", "esc_nonquad_b"] {
        let cfg = recipe(name);
        let omega0 = cfg.esc_params().expect("esc params").omega0;
        let source = cfg.field.build().expect("field").source();
        for (init, traj) in run_recipe(&cfg) {
            let avg = moving_average(&traj, omega0, cfg.window_periods).expect("moving average");
            let entry = enters_and_stays(&avg, source, 0.5);
            let end = avg.last().map_or(f64::NAN, |s| s.pose.position().distance(source));
            ok &= entry.is_some() && traj.stop == StopReason::Horizon;
            parts.push(format!(
                "{name} ({:.1},{:.1}) enters r=0.5 at {} final {end:.3}",
                init.z1,
                init.z2,
                entry.map_or("never".to_string(), |t| format!("t={t:.1}"))
            ));
        }
    }
    Verdict::new(ok, parts.join("; "))
}

fn dither_trend() -> Verdict {
    let m = medians(&batch("sweep_omega0", 100, 1));
    let increasing = strictly(&m, true);
    let ratio = match (m.first().copied().flatten(), m.last().copied().flatten()) {
        (Some(lo), Some(hi)) => hi / lo,
        _ => f64::NAN,
    };
    Verdict::new(
        increasing && ratio >= 10.0,
        format!(
            "median T_s over omega0 {{3,10,60,100}} {} increasing={increasing}; T_s(100)/T_s(3)={ratio:.3} (>= 10)",
            fmt_medians(&m)
        ),
    )
}

fn lyapunov_monotone() -> Verdict {
    const SLACK: f64 = 1e-6;
    const DT: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0usize;
    let mut worst_rise: f64 = 0.0;
    let mut samples = 0usize;
    for run in 0..50 {
        let (field, half) = if run % 2 == 0 { (FieldSpec::unit_quadratic(), 5.0) } else { (FieldSpec::NonQuadB, 1.0) };
        let init = Pose::new(
            rng.gen_range(-half..half),
            rng.gen_range(-half..half),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let gains = GaGains::new(rng.gen_range(0.1..1.0), rng.gen_range(1.0..20.0)).expect("gains");
        let mut ctl = GaController::new(gains);
        let traj = simulate(&field, &mut ctl, &mut GradientSource::Analytic, init, DT, 20.0).expect("simulate");
        let j_star = field.peak_value().expect("peak");
        let v: Vec<f64> =
            traj.samples.iter().map(|s| lyapunov_ga(s.j, j_star, s.pose.theta.cos(), s.pose.theta.sin())).collect();
        samples += v.len();
        for w in v.windows(2) {
            let rise = w[1] - w[0];
            worst_rise = worst_rise.max(rise);
            if rise > SLACK {
                violations += 1;
            }
        }
    }
    Verdict::new(
        violations == 0,
        format!("50 runs, {samples} samples at dt={DT}; largest rise {worst_rise:.3e}; {violations} violation(s) beyond {SLACK:e}"),
    )
}

fn averaging_oracle() -> Verdict {
    let cfg = recipe("avgcheck");
    let (summary, _) = harness::avgcheck(&cfg).expect("avgcheck");
    let errs: Vec<f64> = summary.runs.iter().map(|r| r.sup_error).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let last = errs.last().copied().unwrap_or(f64::NAN);
    let bound = last <= 0.15;

    let p = AveragingParams::new(&EscParams::reference_quadratic(), 1.0, 1.0).expect("params");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let s = AveragedState::new(
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        worst = worst.max((lyapunov_esc_rate(&s, &p) - lyapunov_esc_rate_via_rhs(&s, &p)).abs());
    }
    let identity = worst <= 1e-10;
    let items: Vec<String> =
        summary.runs.iter().map(|r| format!("omega0={} sup={:.4}", r.omega0, r.sup_error)).collect();
    Verdict::new(
        decreasing && bound && identity,
        format!(
            "{} decreasing={decreasing}; sup at omega0=100 {last:.4} (<= 0.15: {bound}); rate identity max abs diff {worst:.2e} over 1e4 states (<= 1e-10: {identity})",
            items.join(", ")
        ),
    )
}

fn gradient_correctness() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [FieldKind::Quadratic, FieldKind::NonquadA, FieldKind::NonquadB, FieldKind::Fan] {
        let field = FieldConfig::of_kind(kind).build().expect("field");
        let report = gradcheck(&field, 1000, 8).expect("gradcheck");
        ok &= report.max_rel_error < 1e-6;
        parts.push(format!("{} {:.2e}", report.field, report.max_rel_error));
    }
    Verdict::new(ok, format!("max relative error at 1000 points: {} (< 1e-6)", parts.join(", ")))
}

fn perp_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut dot, mut norm, mut min_cross) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..10_000 {
        let g = PlanarVector::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0));
        let p = perp(g);
        let scale = g.norm_squared().max(1.0);
        dot = dot.max(g.dot(p).abs() / scale);
        norm = norm.max((p.norm() - g.norm()).abs() / g.norm().max(1.0));
        min_cross = min_cross.min(p.cross(g));
    }
    let ok = dot <= 1e-12 && norm <= 1e-12 && min_cross >= 0.0;
    Verdict::new(
        ok,
        format!("1e4 vectors: max |<g,perp g>| {dot:.1e}, max norm gap {norm:.1e}, min perp x g {min_cross:.3e}"),
    )
}

fn sensor_run(cal: SensorCalibration, seed: u64) -> f64 {
    let array = SensorArray::new(cal, ProxySettings::default(), ChaCha8Rng::seed_from_u64(seed)).expect("array");
    let mut source = GradientSource::SensorArray(Box::new(array));
    let mut ctl = GaController::new(GaGains::new(1.0, 10.0).expect("gains"));
    let traj = simulate(
        &FieldSpec::unit_quadratic(),
        &mut ctl,
        &mut source,
        Pose::from_degrees(4.0, 3.0, 30.0),
        1e-3,
        100.0,
    )
    .expect("simulate");
    traj.final_distance(PlanarVector::ZERO).unwrap_or(f64::INFINITY)
}

fn sensor_closed_loop() -> Verdict {
    let clean = sensor_run(SensorCalibration::ideal(), 1);
    let noisy = (1..=10)
        .map(|seed| sensor_run(SensorCalibration { noise_std: 0.05, ..Default::default() }, seed))
        .fold(0.0, f64::max);
    Verdict::new(
        clean < 0.1 && noisy < 0.3,
        format!("noiseless final {clean:.4} (< 0.1); 10-bit + noise 0.05 worst of 10 seeds {noisy:.4} (< 0.3)"),
    )
}

fn fan_recipe() -> Verdict {
    let cfg = recipe("fan_sensors");
    let report = harness::monte_carlo(&cfg, &BatchOptions::default()).expect("fan batch");
    let ok = report.results.iter().all(|r| r.outcome == Outcome::Domain);
    let items: Vec<String> =
        report.results.iter().map(|r| format!("trial {} {} d={:.3}", r.trial, r.outcome.label(), r.final_distance)).collect();
    Verdict::new(ok, format!("{} (all must end at the exclusion boundary)", items.join(", ")))
}

fn montecarlo_summary(work: &Path, config: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_source-seek"))
        .current_dir(work)
        .args(["montecarlo", "--config"])
        .arg(config)
        .args(["--trials", "20", "--seed", "42"])
        .output()
        .expect("spawn cli");
    assert!(status.status.success(), "montecarlo failed: {}", String::from_utf8_lossy(&status.stderr));
    std::fs::read(work.join("out/determinism/summary.json")).expect("summary.json")
}

fn determinism() -> Verdict {
    let config_dir = tempfile::tempdir().expect("tempdir");
    let config: PathBuf = config_dir.path().join("mc.toml");
    std::fs::write(
        &config,
        "controller = \"ga\"\nk1 = 0.5\nk2 = 10.0\nt_end = 30.0\noutput_dir = \"out/determinism\"\n\n[field]\nkind = \"quadratic\"\n",
    )
    .expect("write config");
    let (a, b) = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    let first = montecarlo_summary(a.path(), &config);
    let second = montecarlo_summary(b.path(), &config);
    Verdict::new(first == second, format!("two runs, 20 trials, seed 42: {} vs {} bytes, identical={}", first.len(), second.len(), first == second))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 12] = [
        ("GA convergence on the quadratic field", convergence_quadratic),
        ("GA convergence on the non-quadratic field", convergence_nonquadratic),
        ("settling-time trends in k1 and k2", gain_trends),
        ("ESC moving-average convergence", esc_convergence),
        ("settling-time trend in the dither frequency", dither_trend),
        ("Lyapunov monotonicity", lyapunov_monotone),
        ("averaging oracle", averaging_oracle),
        ("gradient correctness", gradient_correctness),
        ("perp operator properties", perp_properties),
        ("sensor pipeline closed loop", sensor_closed_loop),
        ("fan field with sensors", fan_recipe),
        ("montecarlo determinism", determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let verdict = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::new(false, format!("panicked: {msg}"))
        });
        if !verdict.pass {
            failed += 1;
        }
        println!("{} criterion {n} {name}: {}", if verdict.pass { "PASS" } else { "FAIL" }, verdict.detail);
    }
    println!("acceptance: {failed} criterion/criteria failed");
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
