//! Extremum-seeking gradient ascent.
//!
//! The scalar measurement passes through a washout (high-pass `s/(s+h)`),
//! is demodulated against the dither, and the resulting estimate drives the
//! same projected law as [`crate::ga`], but with a +90° perpendicular:
//!
//! ```text
//! Ĵz1 = Cz1 Δ sin(ω0 t) + a ω0 cos(ω0 t)
//! Ĵz2 = −Cz2 Δ cos(ω0 t) + a ω0 sin(ω0 t)
//! ∇Ĵ⊥ = (−Ĵz2, Ĵz1)
//! u = k1 ⟨v, ∇Ĵ⟩,   ω = −k2 ⟨v, ∇Ĵ⊥⟩
//! ```

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::field::PlanarVector;
use crate::vehicle::{Command, ControlInput, Controller, Observation};

/// Largest admissible `ω0·dt`.
pub const MAX_PHASE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscParams {
    /// Dither amplitude.
    pub a: f64,
    /// Dither frequency, rad/s.
    pub omega0: f64,
    /// Washout cut-off, 1/s.
    pub h: f64,
    pub c_z1: f64,
    pub c_z2: f64,
    pub k1: f64,
    pub k2: f64,
}

impl EscParams {
    pub fn new(a: f64, omega0: f64, h: f64, c_z1: f64, c_z2: f64, k1: f64, k2: f64) -> Result<Self> {
        let p = EscParams { a, omega0, h, c_z1, c_z2, k1, k2 };
        p.validate()?;
        Ok(p)
    }

    /// Simulation parameters of the quadratic-field study.
    pub fn reference_quadratic() -> Self {
        EscParams { a: 0.2, omega0: 10.0, h: 3.0, c_z1: 0.5, c_z2: 0.5, k1: 1.0, k2: 20.0 }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("a", self.a)?;
        ensure_positive("omega0", self.omega0)?;
        ensure_positive("h", self.h)?;
        ensure_positive("c_z1", self.c_z1)?;
        ensure_positive("c_z2", self.c_z2)?;
        ensure_positive("k1", self.k1)?;
        ensure_positive("k2", self.k2)
    }

    /// Requires at least ~63 samples per dither period.
    pub fn check_step(&self, dt: f64) -> Result<()> {
        ensure_positive("dt", dt)?;
        if self.omega0 * dt > MAX_PHASE_STEP * (1.0 + 1e-12) {
            return Err(Error::config(format!(
                "omega0*dt = {} exceeds {MAX_PHASE_STEP}; reduce dt below {}",
                self.omega0 * dt,
                MAX_PHASE_STEP / self.omega0
            )));
        }
        Ok(())
    }
}

/// Low-pass state `e_f` of the washout; `Δ = J − e_f`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WashoutState {
    pub lowpass: f64,
    pub initialized: bool,
}

impl WashoutState {
    /// A filter already at rest at `lowpass`.
    pub fn at_rest(lowpass: f64) -> Self {
        WashoutState { lowpass, initialized: true }
    }
}

/// Exact zero-order-hold step of `ė_f = h (J − e_f)`. Returns the new state
/// and `Δ = J − e_f'`. An uninitialized filter starts at `e_f = J`.
pub fn washout_step(state: WashoutState, measurement: f64, dt: f64, h: f64) -> Result<(WashoutState, f64)> {
    ensure_finite("measurement", measurement)?;
    ensure_positive("dt", dt)?;
    ensure_positive("h", h)?;
    let prev = if state.initialized { state.lowpass } else { measurement };
    let lowpass = measurement + (prev - measurement) * (-h * dt).exp();
    Ok((WashoutState::at_rest(lowpass), measurement - lowpass))
}

pub fn estimate_gradient(delta: f64, t: f64, p: &EscParams) -> PlanarVector {
    let (s, c) = (p.omega0 * t).sin_cos();
    let dither = p.a * p.omega0;
    PlanarVector::new(p.c_z1 * delta * s + dither * c, -p.c_z2 * delta * c + dither * s)
}

/// The +90° perpendicular used by this law.
pub fn perp_ccw(g: PlanarVector) -> PlanarVector {
    PlanarVector::new(-g.y, g.x)
}

pub fn compute_control(est: PlanarVector, theta: f64, p: &EscParams) -> ControlInput {
    let v = PlanarVector::from_angle(theta);
    ControlInput::new(p.k1 * v.dot(est), -p.k2 * v.dot(perp_ccw(est)))
}

/// One controller update: washout, demodulation, projection.
pub fn esc_controller(
    state: WashoutState,
    measurement: f64,
    t: f64,
    dt: f64,
    theta: f64,
    p: &EscParams,
) -> Result<(WashoutState, PlanarVector, ControlInput)> {
    ensure_finite("t", t)?;
    ensure_finite("theta", theta)?;
    let (state, delta) = washout_step(state, measurement, dt, p.h)?;
    let est = estimate_gradient(delta, t, p);
    Ok((state, est, compute_control(est, theta, p)))
}

/// Stateful [`Controller`] that needs only the scalar measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscController {
    pub params: EscParams,
    pub washout: WashoutState,
}

impl EscController {
    pub fn new(params: EscParams) -> Result<Self> {
        params.validate()?;
        Ok(EscController { params, washout: WashoutState::default() })
    }
}

impl Controller for EscController {
    fn command(&mut self, obs: &Observation) -> Result<Command> {
        let (washout, est, control) =
            esc_controller(self.washout, obs.measurement, obs.t, obs.dt, obs.theta, &self.params)?;
        self.washout = washout;
        Ok(Command { control, gradient_estimate: est })
    }

    fn needs_gradient(&self) -> bool {
        false
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        self.params.check_step(dt)
    }
}
