//! Analytic potential fields with exact gradients.
//!
//! A field `J(z1, z2)` is maximal at the source. Four variants are provided:
//! a separable quadratic, two non-quadratic test maps, and a fitted fan speed
//! profile expressed through the normalised radius `R = r_f / d`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A vector in the plane: a position in meters, or a gradient in field
/// units per meter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarVector {
    pub x: f64,
    pub y: f64,
}

impl PlanarVector {
    pub const ZERO: PlanarVector = PlanarVector { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        PlanarVector { x, y }
    }

    /// Checked constructor rejecting NaN and infinities.
    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        ensure_finite("x", x)?;
        ensure_finite("y", y)?;
        Ok(PlanarVector { x, y })
    }

    /// Unit vector at `angle` radians from the x axis.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        PlanarVector { x: c, y: s }
    }

    pub fn dot(self, other: PlanarVector) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Scalar (z-component) cross product `self × other`.
    pub fn cross(self, other: PlanarVector) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: PlanarVector) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        PlanarVector { x: c * self.x - s * self.y, y: s * self.x + c * self.y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for PlanarVector {
    type Output = PlanarVector;
    fn add(self, rhs: PlanarVector) -> PlanarVector {
        PlanarVector::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for PlanarVector {
    type Output = PlanarVector;
    fn sub(self, rhs: PlanarVector) -> PlanarVector {
        PlanarVector::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for PlanarVector {
    type Output = PlanarVector;
    fn mul(self, rhs: f64) -> PlanarVector {
        PlanarVector::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for PlanarVector {
    type Output = PlanarVector;
    fn neg(self) -> PlanarVector {
        PlanarVector::new(-self.x, -self.y)
    }
}

/// The −90° perpendicular `(g.y, −g.x)`.
///
/// Orthogonal to `g`, same norm, and `perp(g) × g = ‖g‖² ≥ 0`.
pub fn perp(g: PlanarVector) -> PlanarVector {
    PlanarVector::new(g.y, -g.x)
}

/// Fitted fan speed profile `v(R) = c4 R⁴ + c3 R³ + c2 R² + c1 R + c0` with
/// `R = r_f / d` and `d` the distance to the fan centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanPolynomial {
    /// Highest order first: `[c4, c3, c2, c1, c0]`.
    pub coeffs: [f64; 5],
    /// Fan blade radius, meters.
    pub r_f: f64,
    pub source: PlanarVector,
    /// Exclusion radius; the fit is not used closer than this.
    pub d_min: f64,
}

impl FanPolynomial {
    pub const LAB_COEFFS: [f64; 5] = [68.54, -102.80, 36.13, 6.41, -0.34];
    pub const LAB_BLADE_RADIUS: f64 = 0.45;
    pub const LAB_EXCLUSION_RADIUS: f64 = 0.5;

    pub fn new(coeffs: [f64; 5], r_f: f64, source: PlanarVector, d_min: f64) -> Result<Self> {
        for (i, c) in coeffs.iter().enumerate() {
            ensure_finite(&format!("fan coefficient {i}"), *c)?;
        }
        ensure_positive("r_f", r_f)?;
        ensure_positive("d_min", d_min)?;
        if !source.is_finite() {
            return Err(Error::validation("fan source must be finite"));
        }
        Ok(FanPolynomial { coeffs, r_f, source, d_min })
    }

    /// The lab fan fit centred at the origin.
    pub fn lab_fit() -> Self {
        FanPolynomial {
            coeffs: Self::LAB_COEFFS,
            r_f: Self::LAB_BLADE_RADIUS,
            source: PlanarVector::ZERO,
            d_min: Self::LAB_EXCLUSION_RADIUS,
        }
    }

    /// Speed as a function of the normalised radius.
    pub fn speed_at_ratio(&self, r: f64) -> f64 {
        let [c4, c3, c2, c1, c0] = self.coeffs;
        (((c4 * r + c3) * r + c2) * r + c1) * r + c0
    }

    /// `dv/dR`.
    pub fn speed_slope_at_ratio(&self, r: f64) -> f64 {
        let [c4, c3, c2, c1, _] = self.coeffs;
        ((4.0 * c4 * r + 3.0 * c3) * r + 2.0 * c2) * r + c1
    }

    fn checked_distance(&self, p: PlanarVector) -> Result<f64> {
        let d = p.distance(self.source);
        if d < self.d_min || d == 0.0 {
            return Err(Error::Domain { distance: d, d_min: self.d_min });
        }
        Ok(d)
    }
}

/// A scalar potential field `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    /// `J = J* − c1 (z1 − z1*)² − c2 (z2 − z2*)²`.
    Quadratic { j_star: f64, c1: f64, c2: f64, source: PlanarVector },
    /// `J = −z1² − (z2² − z1³)²`.
    NonQuadA,
    /// `J = −z1² − (z2 − z1²)²`.
    NonQuadB,
    FanPolynomial(FanPolynomial),
}

impl FieldSpec {
    pub fn quadratic(j_star: f64, c1: f64, c2: f64, source: PlanarVector) -> Result<Self> {
        ensure_finite("j_star", j_star)?;
        ensure_positive("c1", c1)?;
        ensure_positive("c2", c2)?;
        if !source.is_finite() {
            return Err(Error::validation("quadratic source must be finite"));
        }
        Ok(FieldSpec::Quadratic { j_star, c1, c2, source })
    }

    /// `J = −z1² − z2²`, the map used for the simulation studies.
    pub fn unit_quadratic() -> Self {
        FieldSpec::Quadratic { j_star: 0.0, c1: 1.0, c2: 1.0, source: PlanarVector::ZERO }
    }

    pub fn fan_lab() -> Self {
        FieldSpec::FanPolynomial(FanPolynomial::lab_fit())
    }

    /// Short identifier used by the CLI and config files.
    pub fn name(&self) -> &'static str {
        match self {
            FieldSpec::Quadratic { .. } => "quadratic",
            FieldSpec::NonQuadA => "nonquad_a",
            FieldSpec::NonQuadB => "nonquad_b",
            FieldSpec::FanPolynomial(_) => "fan",
        }
    }

    /// Location of the source (the maximiser, or the fan centre).
    pub fn source(&self) -> PlanarVector {
        match self {
            FieldSpec::Quadratic { source, .. } => *source,
            FieldSpec::NonQuadA | FieldSpec::NonQuadB => PlanarVector::ZERO,
            FieldSpec::FanPolynomial(fan) => fan.source,
        }
    }

    /// Value of `J` at the source, when the source is a maximiser.
    pub fn peak_value(&self) -> Option<f64> {
        match self {
            FieldSpec::Quadratic { j_star, .. } => Some(*j_star),
            FieldSpec::NonQuadA | FieldSpec::NonQuadB => Some(0.0),
            FieldSpec::FanPolynomial(_) => None,
        }
    }

    pub fn contains(&self, p: PlanarVector) -> bool {
        match self {
            FieldSpec::FanPolynomial(fan) => fan.checked_distance(p).is_ok(),
            _ => p.is_finite(),
        }
    }

    pub fn eval(&self, p: PlanarVector) -> Result<f64> {
        match *self {
            FieldSpec::Quadratic { j_star, c1, c2, source } => {
                let dz = p - source;
                Ok(j_star - c1 * dz.x * dz.x - c2 * dz.y * dz.y)
            }
            FieldSpec::NonQuadA => {
                let (z1, z2) = (p.x, p.y);
                let inner = z2 * z2 - z1 * z1 * z1;
                Ok(-z1 * z1 - inner * inner)
            }
            FieldSpec::NonQuadB => {
                let (z1, z2) = (p.x, p.y);
                let inner = z2 - z1 * z1;
                Ok(-z1 * z1 - inner * inner)
            }
            FieldSpec::FanPolynomial(ref fan) => {
                let d = fan.checked_distance(p)?;
                Ok(fan.speed_at_ratio(fan.r_f / d))
            }
        }
    }

    pub fn gradient(&self, p: PlanarVector) -> Result<PlanarVector> {
        match *self {
            FieldSpec::Quadratic { c1, c2, source, .. } => {
                let dz = p - source;
                Ok(PlanarVector::new(-2.0 * c1 * dz.x, -2.0 * c2 * dz.y))
            }
            FieldSpec::NonQuadA => {
                let (z1, z2) = (p.x, p.y);
                let inner = z2 * z2 - z1 * z1 * z1;
                Ok(PlanarVector::new(
                    -2.0 * z1 + 6.0 * z1 * z1 * inner,
                    -4.0 * z2 * inner,
                ))
            }
            FieldSpec::NonQuadB => {
                let (z1, z2) = (p.x, p.y);
                let inner = z2 - z1 * z1;
                Ok(PlanarVector::new(-2.0 * z1 + 4.0 * z1 * inner, -2.0 * inner))
            }
            FieldSpec::FanPolynomial(ref fan) => {
                // dv/dp = dv/dR · dR/dd · ∇d, with dR/dd = −R/d and ∇d = (p − s)/d.
                let d = fan.checked_distance(p)?;
                let r = fan.r_f / d;
                let scale = fan.speed_slope_at_ratio(r) * (-r / d) / d;
                Ok((p - fan.source) * scale)
            }
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Central-difference gradient, used as an independent check on
/// [`FieldSpec::gradient`].
pub fn finite_diff_gradient(field: &FieldSpec, p: PlanarVector, h: f64) -> Result<PlanarVector> {
    ensure_positive("finite-difference step", h)?;
    let ex = PlanarVector::new(h, 0.0);
    let ey = PlanarVector::new(0.0, h);
    let gx = (field.eval(p + ex)? - field.eval(p - ex)?) / (2.0 * h);
    let gy = (field.eval(p + ey)? - field.eval(p - ey)?) / (2.0 * h);
    Ok(PlanarVector::new(gx, gy))
}
