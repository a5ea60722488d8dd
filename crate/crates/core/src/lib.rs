//! Source-seeking control for unicycle robots.
//!
//! Scalar fields with exact gradients ([`field`]), unicycle kinematics and
//! the sample-and-hold closed loop ([`vehicle`]), the projected
//! gradient-ascent law ([`ga`]), its extremum-seeking counterpart ([`esc`]),
//! an emulated flow-sensor array ([`sensors`]), the averaged ESC system
//! ([`averaging`]) and a seeded Monte-Carlo harness ([`harness`]).

pub mod averaging;
pub mod error;
pub mod esc;
pub mod field;
pub mod ga;
pub mod harness;
pub mod ode;
pub mod sensors;
pub mod vehicle;

pub use error::{Error, Result};
pub use field::{perp, FieldSpec, PlanarVector};
pub use vehicle::{simulate, ControlInput, Controller, GradientSource, Pose, Trajectory};
