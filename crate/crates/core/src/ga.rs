//! Projected gradient-ascent law.
//!
//! With `v(θ) = (cos θ, sin θ)`:
//!
//! ```text
//! u = k1 ⟨v, ∇J⟩
//! ω = −k2 ⟨v, ∇⊥J⟩
//! ```
//!
//! where `∇⊥J` is the −90° perpendicular from [`crate::field::perp`].

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::field::{perp, PlanarVector};
use crate::vehicle::{Command, ControlInput, Controller, Observation};

/// Longitudinal and angular gains, both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaGains {
    pub k1: f64,
    pub k2: f64,
}

impl GaGains {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        ensure_positive("k1", k1)?;
        ensure_positive("k2", k2)?;
        Ok(GaGains { k1, k2 })
    }
}

/// Frame a gradient sample is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    /// Robot frame: x forward, y to the left.
    Body,
}

/// A gradient and its perpendicular, as consumed by the law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSample {
    pub grad: PlanarVector,
    pub perp_grad: PlanarVector,
    pub frame: Frame,
}

impl GradientSample {
    pub fn world(grad: PlanarVector) -> Self {
        GradientSample { grad, perp_grad: perp(grad), frame: Frame::World }
    }

    pub fn body(grad: PlanarVector) -> Self {
        GradientSample { grad, perp_grad: perp(grad), frame: Frame::Body }
    }

    /// Checks orthogonality and equal norms up to rounding.
    pub fn validate(&self) -> Result<()> {
        if !self.grad.is_finite() || !self.perp_grad.is_finite() {
            return Err(Error::validation("gradient sample has non-finite components"));
        }
        let scale = self.grad.norm_squared().max(self.perp_grad.norm_squared());
        let tol = 1e-9 * scale;
        if self.grad.dot(self.perp_grad).abs() > tol {
            return Err(Error::validation("perpendicular is not orthogonal to the gradient"));
        }
        if (self.grad.norm_squared() - self.perp_grad.norm_squared()).abs() > tol {
            return Err(Error::validation("perpendicular and gradient norms differ"));
        }
        Ok(())
    }

    /// The gradient rotated into the world frame.
    pub fn world_gradient(&self, theta: f64) -> PlanarVector {
        match self.frame {
            Frame::World => self.grad,
            Frame::Body => self.grad.rotated(theta),
        }
    }
}

pub fn compute_control(sample: &GradientSample, theta: f64, gains: GaGains) -> Result<ControlInput> {
    sample.validate()?;
    ensure_finite("theta", theta)?;
    let v = match sample.frame {
        Frame::World => PlanarVector::from_angle(theta),
        Frame::Body => PlanarVector::new(1.0, 0.0),
    };
    Ok(ControlInput::new(gains.k1 * v.dot(sample.grad), -gains.k2 * v.dot(sample.perp_grad)))
}

/// [`Controller`] wrapper around [`compute_control`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaController {
    pub gains: GaGains,
}

impl GaController {
    pub fn new(gains: GaGains) -> Self {
        GaController { gains }
    }
}

impl Controller for GaController {
    fn command(&mut self, obs: &Observation) -> Result<Command> {
        let sample = obs
            .gradient
            .ok_or_else(|| Error::validation("gradient-ascent controller needs a gradient measurement"))?;
        Ok(Command {
            control: compute_control(&sample, obs.theta, self.gains)?,
            gradient_estimate: sample.world_gradient(obs.theta),
        })
    }
}
