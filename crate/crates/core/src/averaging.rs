//! Averaged ESC closed loop and Lyapunov functions.
//!
//! In the slow time `τ = ω0 t`, with
//! `A = Cz1 c1 z̃1 z5 + Cz2 c2 z̃2 z6` and `B = Cz1 c1 z̃1 z6 − Cz2 c2 z̃2 z5`,
//! the averaged system reads
//!
//! ```text
//! dz̃1/dτ = −(a k1 / ω0) z5 A
//! dz̃2/dτ = −(a k1 / ω0) z6 A
//! dz5/dτ  =  (a k2 / ω0) z6 B
//! dz6/dτ  = −(a k2 / ω0) z5 B
//! ```
//!
//! and `V = ½(Cz1 c1 z̃1² + Cz2 c2 z̃2² + z5² + z6²)` decays at
//! `−(a k1 / ω0) A²`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::esc::{EscController, EscParams};
use crate::field::{FieldSpec, PlanarVector};
use crate::ode::rk4_step;
use crate::vehicle::{simulate, GradientSource, Pose, Sample, StopReason, Trajectory};

/// Largest slow-time step of the averaged integration.
pub const MAX_DTAU: f64 = 0.01;

/// `(z̃1, z̃2, cos θ̃, sin θ̃)` of the averaged system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedState {
    pub zt1: f64,
    pub zt2: f64,
    pub z5: f64,
    pub z6: f64,
}

impl AveragedState {
    pub fn new(zt1: f64, zt2: f64, heading: f64) -> Self {
        let (z6, z5) = heading.sin_cos();
        AveragedState { zt1, zt2, z5, z6 }
    }

    /// Initial state matching a full-system pose: the dither offset
    /// `(a sin 0, −a cos 0)` is removed from the position.
    pub fn matched(init: Pose, source: PlanarVector, a: f64) -> Self {
        AveragedState::new(init.z1 - source.x, init.z2 - source.y + a, init.theta)
    }

    fn to_array(self) -> [f64; 4] {
        [self.zt1, self.zt2, self.z5, self.z6]
    }

    fn from_array(x: [f64; 4]) -> Self {
        AveragedState { zt1: x[0], zt2: x[1], z5: x[2], z6: x[3] }
    }

    fn renormalized(self) -> Self {
        let n = self.z5.hypot(self.z6);
        AveragedState { z5: self.z5 / n, z6: self.z6 / n, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingParams {
    pub a: f64,
    pub omega0: f64,
    pub c_z1: f64,
    pub c_z2: f64,
    pub k1: f64,
    pub k2: f64,
    /// Curvatures of the quadratic field.
    pub c1: f64,
    pub c2: f64,
}

impl AveragingParams {
    pub fn new(esc: &EscParams, c1: f64, c2: f64) -> Result<Self> {
        esc.validate()?;
        ensure_positive("c1", c1)?;
        ensure_positive("c2", c2)?;
        Ok(AveragingParams { a: esc.a, omega0: esc.omega0, c_z1: esc.c_z1, c_z2: esc.c_z2, k1: esc.k1, k2: esc.k2, c1, c2 })
    }

    fn brackets(&self, s: &AveragedState) -> (f64, f64) {
        let p1 = self.c_z1 * self.c1 * s.zt1;
        let p2 = self.c_z2 * self.c2 * s.zt2;
        (p1 * s.z5 + p2 * s.z6, p1 * s.z6 - p2 * s.z5)
    }
}

pub fn averaged_rhs(s: &AveragedState, p: &AveragingParams) -> AveragedState {
    let (a_term, b_term) = p.brackets(s);
    let lin = p.a * p.k1 / p.omega0;
    let ang = p.a * p.k2 / p.omega0;
    AveragedState {
        zt1: -lin * s.z5 * a_term,
        zt2: -lin * s.z6 * a_term,
        z5: ang * s.z6 * b_term,
        z6: -ang * s.z5 * b_term,
    }
}

/// `−J + ½(z3² + z4²) + J*`, the gradient-ascent Lyapunov function.
pub fn lyapunov_ga(j_value: f64, j_star: f64, z3: f64, z4: f64) -> f64 {
    -j_value + 0.5 * (z3 * z3 + z4 * z4) + j_star
}

pub fn lyapunov_esc(s: &AveragedState, p: &AveragingParams) -> f64 {
    0.5 * (p.c_z1 * p.c1 * s.zt1 * s.zt1 + p.c_z2 * p.c2 * s.zt2 * s.zt2 + s.z5 * s.z5 + s.z6 * s.z6)
}

/// Closed-form `dV/dτ` along [`averaged_rhs`].
pub fn lyapunov_esc_rate(s: &AveragedState, p: &AveragingParams) -> f64 {
    let (a_term, _) = p.brackets(s);
    -(p.a * p.k1 / p.omega0) * a_term * a_term
}

/// `dV/dτ` by the chain rule through [`averaged_rhs`].
pub fn lyapunov_esc_rate_via_rhs(s: &AveragedState, p: &AveragingParams) -> f64 {
    let d = averaged_rhs(s, p);
    p.c_z1 * p.c1 * s.zt1 * d.zt1 + p.c_z2 * p.c2 * s.zt2 * d.zt2 + s.z5 * d.z5 + s.z6 * d.z6
}

/// RK4 in `τ`, renormalizing `(z5, z6)` after every step. Returns
/// `steps + 1` states including `init`.
pub fn integrate_averaged(init: AveragedState, p: &AveragingParams, dtau: f64, steps: usize) -> Result<Vec<AveragedState>> {
    ensure_positive("dtau", dtau)?;
    for v in init.to_array() {
        ensure_finite("averaged state", v)?;
    }
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = init.renormalized();
    out.push(s);
    for _ in 0..steps {
        let x = rk4_step(&s.to_array(), dtau, |x| averaged_rhs(&AveragedState::from_array(*x), p).to_array());
        s = AveragedState::from_array(x).renormalized();
        out.push(s);
    }
    Ok(out)
}

/// Number of samples in `k` dither periods.
pub fn window_len(dt: f64, omega0: f64, k: u32) -> Result<usize> {
    ensure_positive("dt", dt)?;
    ensure_positive("omega0", omega0)?;
    if k == 0 {
        return Err(Error::validation("window must span at least one dither period"));
    }
    Ok(((2.0 * PI * f64::from(k) / omega0) / dt).round().max(1.0) as usize)
}

/// Forward rectangular moving average over `k` dither periods, stamped at
/// the window start. Every numeric channel is averaged.
pub fn moving_average(traj: &Trajectory, omega0: f64, k: u32) -> Result<Trajectory> {
    let m = window_len(traj.dt, omega0, k)?;
    let n = traj.samples.len();
    if m > n {
        return Err(Error::validation(format!(
            "averaging window of {m} samples exceeds the {n}-sample trajectory"
        )));
    }
    let channels = |s: &Sample| {
        [s.pose.z1, s.pose.z2, s.pose.theta, s.control.u, s.control.omega, s.j, s.grad_est.x, s.grad_est.y]
    };
    let mut sums = [0.0; 8];
    for s in &traj.samples[..m] {
        for (acc, v) in sums.iter_mut().zip(channels(s)) {
            *acc += v;
        }
    }
    let inv = 1.0 / m as f64;
    let mut samples = Vec::with_capacity(n - m + 1);
    for i in 0..=n - m {
        if i > 0 {
            let (old, new) = (channels(&traj.samples[i - 1]), channels(&traj.samples[i + m - 1]));
            for c in 0..8 {
                sums[c] += new[c] - old[c];
            }
        }
        let mean = sums.map(|v| v * inv);
        samples.push(Sample {
            t: traj.samples[i].t,
            pose: Pose::new(mean[0], mean[1], mean[2]),
            control: crate::vehicle::ControlInput::new(mean[3], mean[4]),
            j: mean[5],
            grad_est: PlanarVector::new(mean[6], mean[7]),
        });
    }
    Ok(Trajectory { dt: traj.dt, samples, stop: StopReason::Horizon })
}

/// One aligned comparison instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingRow {
    pub tau: f64,
    pub zt1: f64,
    pub zt2: f64,
    pub z1avg_full: f64,
    pub z2avg_full: f64,
    /// Euclidean position discrepancy.
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragingReport {
    pub sup_error: f64,
    pub sup_error_z1: f64,
    pub sup_error_z2: f64,
    pub rows: Vec<AveragingRow>,
}

pub const AVGCHECK_CSV_HEADER: &str = "tau,zt1,zt2,z1avg_full,z2avg_full,err";

impl AveragingReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{AVGCHECK_CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{},{}", r.tau, r.zt1, r.zt2, r.z1avg_full, r.z2avg_full, r.err)?;
        }
        Ok(())
    }

    /// Averaged-system position error at the last compared instant.
    pub fn final_averaged_distance(&self) -> Option<f64> {
        self.rows.last().map(|r| r.zt1.hypot(r.zt2))
    }
}

/// Slow-time step dividing `ω0·dt` exactly, at most [`MAX_DTAU`].
pub fn aligned_dtau(omega0: f64, dt: f64) -> (f64, usize) {
    let phase = omega0 * dt;
    let sub = (phase / MAX_DTAU - 1e-9).ceil().max(1.0) as usize;
    (phase / sub as f64, sub)
}

/// Runs the dithered loop and the averaged system from matched initial
/// conditions and compares the moving-averaged position with `z* + z̃avg`.
pub fn compare_full_vs_averaged(
    field: &FieldSpec,
    esc: &EscParams,
    init: Pose,
    horizon: f64,
    dt: f64,
    window_periods: u32,
) -> Result<AveragingReport> {
    let (c1, c2, source) = match *field {
        FieldSpec::Quadratic { c1, c2, source, .. } => (c1, c2, source),
        _ => return Err(Error::config(format!("averaging comparison needs a quadratic field, got {}", field.name()))),
    };
    let params = AveragingParams::new(esc, c1, c2)?;
    esc.check_step(dt)?;

    let mut controller = EscController::new(*esc)?;
    let full = simulate(field, &mut controller, &mut GradientSource::Analytic, init, dt, horizon)?;
    if let StopReason::Aborted(e) = &full.stop {
        return Err(e.clone());
    }
    let avg_full = moving_average(&full, esc.omega0, window_periods)?;

    let (dtau, sub) = aligned_dtau(esc.omega0, dt);
    let steps = (avg_full.samples.len() - 1) * sub;
    let averaged = integrate_averaged(AveragedState::matched(init, source, esc.a), &params, dtau, steps)?;

    let mut report = AveragingReport { sup_error: 0.0, sup_error_z1: 0.0, sup_error_z2: 0.0, rows: Vec::with_capacity(avg_full.samples.len()) };
    for (i, s) in avg_full.samples.iter().enumerate() {
        let a = averaged[i * sub];
        let e1 = s.pose.z1 - (source.x + a.zt1);
        let e2 = s.pose.z2 - (source.y + a.zt2);
        let err = e1.hypot(e2);
        report.sup_error = report.sup_error.max(err);
        report.sup_error_z1 = report.sup_error_z1.max(e1.abs());
        report.sup_error_z2 = report.sup_error_z2.max(e2.abs());
        report.rows.push(AveragingRow {
            tau: esc.omega0 * s.t,
            zt1: a.zt1,
            zt2: a.zt2,
            z1avg_full: s.pose.z1,
            z2avg_full: s.pose.z2,
            err,
        });
    }
    Ok(report)
}
