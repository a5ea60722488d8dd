//! Seeded Monte-Carlo batches, settling times and file outputs.
//!
//! Trial `i` draws from a ChaCha8 stream keyed by `(seed, i)`, so results do
//! not depend on scheduling, and every sweep group sees the same initial
//! conditions.

pub mod config;
mod output;
pub mod stats;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{compare_full_vs_averaged, AveragingReport};
use crate::error::{Error, Result};
use crate::field::{finite_diff_gradient, FieldSpec, PlanarVector, DEFAULT_FD_STEP};
use crate::sensors::SensorArray;
use crate::vehicle::{simulate, GradientSource, Pose, StopReason, Trajectory};

pub use config::{ControllerKind, ExperimentConfig, FieldConfig, FieldKind, GroupSpec, InitBox, InitMode};
pub use output::{write_batch_outputs, write_avgcheck_outputs, OutputSet};
pub use stats::{quantile, FiveNumber};

/// Attempts per pose before rejection sampling gives up.
pub const MAX_SAMPLING_ATTEMPTS: usize = 1000;

/// First time the distance to `source` drops to `fraction` of its initial
/// value, or `None` if it never does.
pub fn settling_time(traj: &Trajectory, source: PlanarVector, fraction: f64) -> Result<Option<f64>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::validation(format!("settling fraction must be in (0, 1), got {fraction}")));
    }
    let first = traj.first().ok_or_else(|| Error::validation("empty trajectory"))?;
    let threshold = fraction * first.pose.position().distance(source);
    Ok(traj.samples.iter().find(|s| s.pose.position().distance(source) <= threshold).map(|s| s.t))
}

/// Uniform pose in `b`, resampled until it lies in the field's domain.
pub fn sample_initial_conditions<R: Rng + ?Sized>(rng: &mut R, b: &InitBox, field: &FieldSpec) -> Result<Pose> {
    let draw = |rng: &mut R, r: [f64; 2]| if r[0] == r[1] { r[0] } else { rng.gen_range(r[0]..r[1]) };
    for _ in 0..MAX_SAMPLING_ATTEMPTS {
        let pose = Pose::new(draw(rng, b.z1), draw(rng, b.z2), draw(rng, b.heading));
        if field.contains(pose.position()) {
            return Ok(pose);
        }
    }
    Err(Error::config(format!(
        "no initial condition inside the {field} field's domain after {MAX_SAMPLING_ATTEMPTS} draws"
    )))
}

/// The random stream of one trial.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// How a trial ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Horizon,
    /// Entered the field's exclusion zone.
    Domain,
    Failed(String),
}

impl Outcome {
    pub fn label(&self) -> &str {
        match self {
            Outcome::Horizon => "horizon",
            Outcome::Domain => "domain",
            Outcome::Failed(_) => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub group: usize,
    pub trial: usize,
    pub init: Pose,
    pub settling_time: Option<f64>,
    pub final_distance: f64,
    pub outcome: Outcome,
    /// Closed in on the source while driving backwards.
    pub reverse: bool,
    /// Decimated `(t, z1, z2)` for trajectory overlays, when requested.
    pub path: Vec<[f64; 3]>,
    /// Failure to write the trial's trajectory file.
    pub write_error: Option<String>,
}

impl TrialResult {
    pub fn settled(&self) -> bool {
        self.settling_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: String,
    pub value: Option<f64>,
    pub trials: usize,
    pub failures: usize,
    #[serde(flatten)]
    pub stats: FiveNumber,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub config_hash: String,
    pub controller: ControllerKind,
    pub field: String,
    pub trials: usize,
    pub failures: usize,
    #[serde(flatten)]
    pub stats: FiveNumber,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_param: Option<String>,
    pub groups: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub summary: BatchSummary,
    pub results: Vec<TrialResult>,
}

impl BatchReport {
    pub fn group_results(&self, group: usize) -> impl Iterator<Item = &TrialResult> {
        self.results.iter().filter(move |r| r.group == group)
    }
}

/// Knobs that are not part of the experiment itself.
#[derive(Debug, Clone, Default)]
pub struct BatchOptions {
    /// Use the batch default step when the config omits `dt`.
    pub batch: bool,
    /// Write one trajectory CSV per trial here.
    pub trajectory_dir: Option<PathBuf>,
    /// Keep decimated paths for the overlay CSV.
    pub overlay: bool,
}

/// Maximum overlay points kept per trial.
const OVERLAY_POINTS: usize = 2000;

/// Runs every trial of every group. Failures of individual trials are
/// recorded in their results; only configuration problems abort.
pub fn monte_carlo(cfg: &ExperimentConfig, opts: &BatchOptions) -> Result<BatchReport> {
    cfg.validate()?;
    let groups = cfg.groups()?;
    let field = cfg.field.build()?;
    let dt = cfg.step(opts.batch);
    let mode = cfg.init_mode()?;
    let trials = cfg.trial_count();

    for g in &groups {
        g.config.build_controller()?.check_step(dt)?;
    }
    if dt > cfg.t_end {
        return Err(Error::config(format!("dt ({dt}) exceeds t_end ({})", cfg.t_end)));
    }

    let inits: Vec<(Pose, ChaCha8Rng)> = (0..trials)
        .map(|i| {
            let mut rng = trial_rng(cfg.seed, i);
            let pose = match &mode {
                InitMode::Explicit(poses) => poses[i % poses.len()],
                InitMode::Random(b) => sample_initial_conditions(&mut rng, b, &field)?,
            };
            Ok((pose, rng))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..groups.len()).flat_map(|g| (0..trials).map(move |i| (g, i))).collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(g, i)| {
            let (init, rng) = &inits[i];
            run_trial(&groups[g].config, &field, g, i, *init, rng.clone(), dt, opts)
        })
        .collect();

    let summaries = groups
        .iter()
        .enumerate()
        .map(|(g, spec)| summarize(spec.name.clone(), spec.value, results.iter().filter(|r| r.group == g)))
        .collect();
    let overall = summarize(String::new(), None, results.iter());
    Ok(BatchReport {
        summary: BatchSummary {
            config_hash: cfg.hash(),
            controller: cfg.controller,
            field: field.name().to_string(),
            trials: overall.trials,
            failures: overall.failures,
            stats: overall.stats,
            sweep_param: cfg.sweep.as_ref().map(|s| s.param.name().to_string()),
            groups: summaries,
        },
        results,
    })
}

fn summarize<'a>(group: String, value: Option<f64>, results: impl Iterator<Item = &'a TrialResult>) -> GroupSummary {
    let mut settled = Vec::new();
    let mut trials = 0;
    for r in results {
        trials += 1;
        if let Some(ts) = r.settling_time {
            settled.push(ts);
        }
    }
    GroupSummary { group, value, trials, failures: trials - settled.len(), stats: FiveNumber::of(&settled) }
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    cfg: &ExperimentConfig,
    field: &FieldSpec,
    group: usize,
    trial: usize,
    init: Pose,
    rng: ChaCha8Rng,
    dt: f64,
    opts: &BatchOptions,
) -> TrialResult {
    let source = field.source();
    let mut result = TrialResult {
        group,
        trial,
        init,
        settling_time: None,
        final_distance: init.position().distance(source),
        outcome: Outcome::Horizon,
        reverse: false,
        path: Vec::new(),
        write_error: None,
    };
    let traj = match simulate_one(cfg, field, init, rng, dt) {
        Ok(traj) => traj,
        Err(e) => {
            result.outcome = Outcome::Failed(e.to_string());
            return result;
        }
    };
    result.outcome = match &traj.stop {
        StopReason::Horizon => Outcome::Horizon,
        StopReason::Aborted(Error::Domain { .. }) => Outcome::Domain,
        StopReason::Aborted(e) => Outcome::Failed(e.to_string()),
    };
    result.settling_time = settling_time(&traj, source, cfg.settle_fraction).ok().flatten();
    result.final_distance = traj.final_distance(source).unwrap_or(result.final_distance);
    result.reverse = traj.converged_in_reverse(source);
    if opts.overlay {
        let stride = traj.len().div_ceil(OVERLAY_POINTS).max(1);
        result.path = traj.samples.iter().step_by(stride).map(|s| [s.t, s.pose.z1, s.pose.z2]).collect();
    }
    if let Some(dir) = &opts.trajectory_dir {
        let path = dir.join(output::trajectory_file_name(group, trial));
        if let Err(e) = output::write_trajectory(&path, &traj) {
            result.write_error = Some(format!("{}: {e}", path.display()));
        }
    }
    result
}

/// One closed-loop run as configured. The rng feeds the sensor noise.
pub fn simulate_one(cfg: &ExperimentConfig, field: &FieldSpec, init: Pose, rng: ChaCha8Rng, dt: f64) -> Result<Trajectory> {
    let mut controller = cfg.build_controller()?;
    let mut source = if cfg.sensor.enabled {
        GradientSource::SensorArray(Box::new(SensorArray::new(cfg.sensor.calibration(), cfg.sensor.proxy(), rng)?))
    } else {
        GradientSource::Analytic
    };
    simulate(field, &mut controller, &mut source, init, dt, cfg.t_end)
}

/// One averaging comparison per group.
#[derive(Debug, Clone, PartialEq)]
pub struct AvgCheckRun {
    pub group: String,
    pub omega0: f64,
    pub report: AveragingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvgCheckRunSummary {
    pub group: String,
    pub omega0: f64,
    pub sup_error: f64,
    pub sup_error_z1: f64,
    pub sup_error_z2: f64,
    pub final_averaged_distance: Option<f64>,
}

/// Contents of `avgcheck.json`. `sup_error` is the largest over all runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvgCheckSummary {
    pub config_hash: String,
    pub sup_error: f64,
    pub runs: Vec<AvgCheckRunSummary>,
}

pub fn avgcheck(cfg: &ExperimentConfig) -> Result<(AvgCheckSummary, Vec<AvgCheckRun>)> {
    cfg.validate()?;
    if cfg.controller != ControllerKind::Esc {
        return Err(Error::config("avgcheck needs controller = \"esc\""));
    }
    if cfg.field.kind != FieldKind::Quadratic {
        return Err(Error::config("avgcheck needs a quadratic field"));
    }
    let field = cfg.field.build()?;
    let init = match cfg.init_mode()? {
        InitMode::Explicit(poses) => poses[0],
        InitMode::Random(b) => sample_initial_conditions(&mut trial_rng(cfg.seed, 0), &b, &field)?,
    };
    let dt = cfg.step(false);
    let runs = cfg
        .groups()?
        .into_par_iter()
        .map(|g| {
            let esc = g.config.esc_params()?;
            let report = compare_full_vs_averaged(&field, &esc, init, cfg.t_end, dt, cfg.window_periods)?;
            Ok(AvgCheckRun { group: g.name, omega0: esc.omega0, report })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = AvgCheckSummary {
        config_hash: cfg.hash(),
        sup_error: runs.iter().map(|r| r.report.sup_error).fold(0.0, f64::max),
        runs: runs
            .iter()
            .map(|r| AvgCheckRunSummary {
                group: r.group.clone(),
                omega0: r.omega0,
                sup_error: r.report.sup_error,
                sup_error_z1: r.report.sup_error_z1,
                sup_error_z2: r.report.sup_error_z2,
                final_averaged_distance: r.report.final_averaged_distance(),
            })
            .collect(),
    };
    Ok((summary, runs))
}

/// Tolerance of the analytic-versus-finite-difference gradient check.
pub const GRADCHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub field: String,
    pub points: usize,
    pub max_rel_error: f64,
    pub worst_point: [f64; 2],
    pub pass: bool,
}

/// Compares analytic and central-difference gradients at `points` seeded
/// random points. The error is relative to `max(‖∇J‖, 1e-3)`.
pub fn gradcheck(field: &FieldSpec, points: usize, seed: u64) -> Result<GradCheckReport> {
    if points == 0 {
        return Err(Error::config("gradcheck needs at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = field.source();
    let mut report = GradCheckReport {
        field: field.name().to_string(),
        points,
        max_rel_error: 0.0,
        worst_point: [src.x, src.y],
        pass: true,
    };
    for _ in 0..points {
        let p = match field {
            FieldSpec::FanPolynomial(fan) => {
                let d = rng.gen_range(fan.d_min + 0.01..6.0 * fan.r_f + fan.d_min);
                src + PlanarVector::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * d
            }
            FieldSpec::Quadratic { .. } => src + PlanarVector::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
            _ => PlanarVector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        };
        let an = field.gradient(p)?;
        let fd = finite_diff_gradient(field, p, DEFAULT_FD_STEP)?;
        let rel = (an - fd).norm() / an.norm().max(1e-3);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_point = [p.x, p.y];
        }
    }
    report.pass = report.max_rel_error < GRADCHECK_TOLERANCE;
    Ok(report)
}

/// Batch run writing `summary.json`, `boxplot.csv`, `trials.csv` and, with
/// `opts.overlay`, `overlay.csv` into the config's output directory. Files
/// written before a failure are removed.
pub fn run(cfg: &ExperimentConfig, opts: &BatchOptions) -> Result<BatchReport> {
    let mut outputs = OutputSet::new(&cfg.output_dir)?;
    let result = (|| {
        if let Some(dir) = &opts.trajectory_dir {
            outputs.ensure_dir(dir)?;
        }
        let report = monte_carlo(cfg, opts)?;
        if let Some(msg) = report.results.iter().find_map(|r| r.write_error.clone()) {
            return Err(Error::Io(msg));
        }
        if let Some(dir) = &opts.trajectory_dir {
            for r in &report.results {
                outputs.track(dir.join(output::trajectory_file_name(r.group, r.trial)));
            }
        }
        write_batch_outputs(&mut outputs, &report, opts.overlay)?;
        Ok(report)
    })();
    match result {
        Ok(report) => {
            outputs.commit();
            Ok(report)
        }
        Err(e) => {
            outputs.rollback();
            Err(e)
        }
    }
}

/// [`avgcheck`] writing `avgcheck.csv` (one per sweep group) and
/// `avgcheck.json` into the output directory.
pub fn run_avgcheck(cfg: &ExperimentConfig) -> Result<AvgCheckSummary> {
    let mut outputs = OutputSet::new(&cfg.output_dir)?;
    let result = avgcheck(cfg).and_then(|(summary, runs)| {
        write_avgcheck_outputs(&mut outputs, &summary, &runs)?;
        Ok(summary)
    });
    match result {
        Ok(s) => {
            outputs.commit();
            Ok(s)
        }
        Err(e) => {
            outputs.rollback();
            Err(e)
        }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}
