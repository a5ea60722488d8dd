//! Unicycle kinematics and the sample-and-hold closed loop.
//!
//! The state is `(z1, z2, θ)` with `ż1 = u cos θ`, `ż2 = u sin θ`, `θ̇ = ω`.
//! Each step integrates this with classical RK4 while the command computed at
//! the start of the step is held.

use std::io::Write;

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::field::{FieldSpec, PlanarVector};
use crate::ga::GradientSample;
use crate::ode::rk4_step;
use crate::sensors::SensorArray;

/// Planar pose. `theta` is never wrapped so heading histories stay continuous.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub z1: f64,
    pub z2: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(z1: f64, z2: f64, theta: f64) -> Self {
        Pose { z1, z2, theta }
    }

    pub fn from_degrees(z1: f64, z2: f64, theta_deg: f64) -> Self {
        Pose { z1, z2, theta: theta_deg.to_radians() }
    }

    pub fn position(&self) -> PlanarVector {
        PlanarVector::new(self.z1, self.z2)
    }

    /// Unit heading vector `(cos θ, sin θ)`.
    pub fn heading(&self) -> PlanarVector {
        PlanarVector::from_angle(self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite() && self.theta.is_finite()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        ensure_finite("z1", self.z1)?;
        ensure_finite("z2", self.z2)?;
        ensure_finite("theta", self.theta)
    }
}

/// Longitudinal and angular velocity command. `u` may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlInput {
    pub u: f64,
    pub omega: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { u: 0.0, omega: 0.0 };

    pub const fn new(u: f64, omega: f64) -> Self {
        ControlInput { u, omega }
    }
}

fn unicycle_rhs(x: &[f64; 3], control: ControlInput) -> [f64; 3] {
    let (s, c) = x[2].sin_cos();
    [control.u * c, control.u * s, control.omega]
}

/// Advance the unicycle by `dt` with the command held constant.
pub fn step(pose: Pose, control: ControlInput, dt: f64) -> Result<Pose> {
    pose.validate()?;
    ensure_finite("u", control.u)?;
    ensure_finite("omega", control.omega)?;
    ensure_positive("dt", dt)?;
    let x = rk4_step(&[pose.z1, pose.z2, pose.theta], dt, |x| unicycle_rhs(x, control));
    Ok(Pose::new(x[0], x[1], x[2]))
}

/// What a controller sees at one sampling instant.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub t: f64,
    pub dt: f64,
    /// Heading from the on-board encoder.
    pub theta: f64,
    /// Scalar potential measurement `J`.
    pub measurement: f64,
    /// Gradient measurement, when a gradient source is attached.
    pub gradient: Option<GradientSample>,
}

/// A controller's output for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub control: ControlInput,
    /// The gradient the controller acted on, in the world frame.
    pub gradient_estimate: PlanarVector,
}

/// Feedback law closing the loop in [`simulate`].
pub trait Controller {
    fn command(&mut self, obs: &Observation) -> Result<Command>;

    /// Whether [`Observation::gradient`] must be populated.
    fn needs_gradient(&self) -> bool {
        true
    }

    /// Reject step sizes the controller cannot run at.
    fn check_step(&self, _dt: f64) -> Result<()> {
        Ok(())
    }
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn command(&mut self, obs: &Observation) -> Result<Command> {
        (**self).command(obs)
    }
    fn needs_gradient(&self) -> bool {
        (**self).needs_gradient()
    }
    fn check_step(&self, dt: f64) -> Result<()> {
        (**self).check_step(dt)
    }
}

/// Where gradient measurements come from.
#[derive(Debug, Clone)]
pub enum GradientSource {
    /// Exact field gradient in the world frame.
    Analytic,
    /// Emulated four-sensor flow array, body frame.
    SensorArray(Box<SensorArray>),
}

impl GradientSource {
    fn sample(&mut self, field: &FieldSpec, pose: Pose) -> Result<GradientSample> {
        match self {
            GradientSource::Analytic => Ok(GradientSample::world(field.gradient(pose.position())?)),
            GradientSource::SensorArray(array) => array.observe(field, pose),
        }
    }

    fn after_step(&mut self, control: ControlInput, dt: f64) -> Result<()> {
        match self {
            GradientSource::Analytic => Ok(()),
            GradientSource::SensorArray(array) => array.advance_odometry(control, dt),
        }
    }
}

/// One recorded instant of a closed-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pose: Pose,
    pub control: ControlInput,
    pub j: f64,
    pub grad_est: PlanarVector,
}

/// Why a simulation stopped.
#[derive(Debug, Clone, PartialEq)]
pub enum StopReason {
    /// Reached `t_end`.
    Horizon,
    /// Aborted; the trajectory holds every sample before the failure.
    Aborted(Error),
}

/// Uniformly sampled closed-loop record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
    pub stop: StopReason,
}

/// CSV header for [`Trajectory::write_csv`].
pub const TRAJECTORY_CSV_HEADER: &str = "t,z1,z2,theta,u,omega,J,gx,gy";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// True if the run ended by entering a field's exclusion zone.
    pub fn exited_domain(&self) -> bool {
        matches!(self.stop, StopReason::Aborted(Error::Domain { .. }))
    }

    /// Distance from the final pose to `target`.
    pub fn final_distance(&self, target: PlanarVector) -> Option<f64> {
        self.last().map(|s| s.pose.position().distance(target))
    }

    /// Flags a run that closed in on `target` while driving backwards over
    /// the last tenth of the record. The −90° perpendicular admits this.
    pub fn converged_in_reverse(&self, target: PlanarVector) -> bool {
        let n = self.samples.len();
        if n < 10 {
            return false;
        }
        let tail = &self.samples[n - n / 10..];
        let approaching = tail.first().map(|s| s.pose.position().distance(target))
            > tail.last().map(|s| s.pose.position().distance(target));
        let reversing = tail.iter().filter(|s| s.control.u < 0.0).count() * 2 > tail.len();
        approaching && reversing
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.t, s.pose.z1, s.pose.z2, s.pose.theta, s.control.u, s.control.omega, s.j,
                s.grad_est.x, s.grad_est.y
            )?;
        }
        Ok(())
    }
}

/// Run the closed loop from `init` until `t_end`.
///
/// At every sample the gradient source and the field are queried at the
/// current pose, the controller is evaluated, and the vehicle is advanced by
/// one held step. Precondition failures return `Err`; failures during the run
/// (e.g. entering a fan's exclusion zone) stop the run and are reported in
/// [`Trajectory::stop`] alongside the samples recorded so far.
pub fn simulate<C: Controller + ?Sized>(
    field: &FieldSpec,
    controller: &mut C,
    source: &mut GradientSource,
    init: Pose,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory> {
    ensure_positive("dt", dt)?;
    ensure_finite("t_end", t_end)?;
    if t_end < dt {
        return Err(Error::validation(format!("t_end ({t_end}) must be at least dt ({dt})")));
    }
    init.validate()?;
    controller.check_step(dt)?;
    field.eval(init.position())?;

    let steps = (t_end / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut pose = init;
    let mut stop = StopReason::Horizon;

    for k in 0..=steps {
        let t = k as f64 * dt;
        match closed_loop_sample(field, controller, source, pose, t, dt) {
            Ok(sample) => {
                samples.push(sample);
                if k == steps {
                    break;
                }
                let advanced = step(pose, sample.control, dt)
                    .and_then(|next| source.after_step(sample.control, dt).map(|_| next));
                match advanced {
                    Ok(next) => pose = next,
                    Err(e) => {
                        stop = StopReason::Aborted(e);
                        break;
                    }
                }
            }
            Err(e) => {
                stop = StopReason::Aborted(e);
                break;
            }
        }
    }

    Ok(Trajectory { dt, samples, stop })
}

fn closed_loop_sample<C: Controller + ?Sized>(
    field: &FieldSpec,
    controller: &mut C,
    source: &mut GradientSource,
    pose: Pose,
    t: f64,
    dt: f64,
) -> Result<Sample> {
    let j = field.eval(pose.position())?;
    let gradient = if controller.needs_gradient() { Some(source.sample(field, pose)?) } else { None };
    let obs = Observation { t, dt, theta: pose.theta, measurement: j, gradient };
    let cmd = controller.command(&obs)?;
    Ok(Sample { t, pose, control: cmd.control, j, grad_est: cmd.gradient_estimate })
}
