//! Emulated four-cantilever flow array and its gradient proxy.
//!
//! Sensor order is front, left, rear, right. A positive body-frame wind
//! component along x bends the front cantilever, a negative one the rear;
//! likewise left/right for y. Readings go through the linear calibration
//! `s = gain · ΔR/R0`, an ADC with full scale `±gain` and optional Gaussian
//! noise, then the per-axis dominant sensor is selected with the rear/right
//! readings counted negative.
//!
//! The proxy gradient points along the measured flow with magnitude given by
//! a dirty derivative of `s_r` per metre travelled (odometry).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::field::{FieldSpec, PlanarVector};
use crate::ga::GradientSample;
use crate::vehicle::{step, ControlInput, Pose};

/// Flow norms below this map to a zero gradient.
pub const FLOW_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorCalibration {
    /// m/s per unit relative resistance change.
    pub gain: f64,
    /// Nominal resistance, ohms.
    pub r0: f64,
    pub adc_bits: u32,
    /// Standard deviation of additive noise, m/s.
    pub noise_std: f64,
    pub quantize: bool,
}

impl Default for SensorCalibration {
    fn default() -> Self {
        SensorCalibration { gain: 23.80, r0: 47600.0, adc_bits: 10, noise_std: 0.0, quantize: true }
    }
}

impl SensorCalibration {
    pub fn ideal() -> Self {
        SensorCalibration { quantize: false, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sensor.gain", self.gain)?;
        ensure_positive("sensor.r0", self.r0)?;
        if !(8..=16).contains(&self.adc_bits) {
            return Err(Error::validation(format!("sensor.adc_bits must be in [8, 16], got {}", self.adc_bits)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::validation(format!("sensor.noise_std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }

    /// ADC step in relative-resistance units.
    pub fn lsb(&self) -> f64 {
        2.0 / f64::from(1u32 << self.adc_bits)
    }

    /// Worst-case quantization error in m/s inside the ADC range.
    pub fn quantization_bound(&self) -> f64 {
        self.gain / f64::from(1u32 << self.adc_bits)
    }
}

/// Dirty-derivative tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxySettings {
    /// Odometry displacement required before the slope is refreshed, metres.
    pub baseline: f64,
    /// Slope used before the first refresh.
    pub initial_slope: f64,
    /// Lower bound on refreshed slopes. A zero slope stops the robot, and a
    /// stopped robot never refreshes again.
    pub min_slope: f64,
}

impl Default for ProxySettings {
    fn default() -> Self {
        ProxySettings { baseline: 0.1, initial_slope: 1.0, min_slope: 0.1 }
    }
}

impl ProxySettings {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("sensor.baseline", self.baseline)?;
        ensure_finite("sensor.initial_slope", self.initial_slope)?;
        if self.initial_slope < 0.0 {
            return Err(Error::validation("sensor.initial_slope must be >= 0"));
        }
        ensure_finite("sensor.min_slope", self.min_slope)?;
        if self.min_slope < 0.0 {
            return Err(Error::validation("sensor.min_slope must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrameReading {
    /// Front, left, rear, right, m/s.
    pub s: [f64; 4],
    pub s_z1r: f64,
    pub s_z2r: f64,
    pub s_r: f64,
}

impl SensorFrameReading {
    pub fn from_sensors(s: [f64; 4]) -> Self {
        let s_z1r = if s[0].abs() >= s[2].abs() { s[0] } else { -s[2] };
        let s_z2r = if s[1].abs() >= s[3].abs() { s[1] } else { -s[3] };
        SensorFrameReading { s, s_z1r, s_z2r, s_r: s_z1r.hypot(s_z2r) }
    }

    /// Body-frame flow `(s_z1r, s_z2r)`.
    pub fn flow(&self) -> PlanarVector {
        PlanarVector::new(self.s_z1r, self.s_z2r)
    }
}

/// Reference point of the dirty derivative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradientProxyState {
    pub prev_s_r: f64,
    pub prev_position_odom: PlanarVector,
    /// Last computed slope `|Δs_r| / δ`.
    pub slope: f64,
    pub valid: bool,
}

/// Gradient-aligned wind of magnitude `|J|`, in the body frame.
pub fn wind_at(field: &FieldSpec, pose: Pose) -> Result<PlanarVector> {
    let p = pose.position();
    let j = field.eval(p)?;
    let g = field.gradient(p)?;
    let n = g.norm();
    if n == 0.0 {
        return Ok(PlanarVector::ZERO);
    }
    Ok(to_body(g * (j.abs() / n), pose.theta))
}

pub fn to_body(world: PlanarVector, theta: f64) -> PlanarVector {
    world.rotated(-theta)
}

/// Relative resistance change of a cantilever reading `speed`, ohms.
pub fn resistance_change(speed: f64, cal: &SensorCalibration) -> f64 {
    speed / cal.gain * cal.r0
}

fn adc_round_trip(speed: f64, cal: &SensorCalibration) -> f64 {
    let lsb = cal.lsb();
    let half = f64::from(1u32 << (cal.adc_bits - 1));
    let code = ((speed / cal.gain) / lsb).round().clamp(-half, half - 1.0);
    code * lsb * cal.gain
}

/// Sample the four sensors for a body-frame wind.
pub fn measure<R: Rng + ?Sized>(wind_body: PlanarVector, cal: &SensorCalibration, rng: &mut R) -> SensorFrameReading {
    let exposed = [wind_body.x.max(0.0), wind_body.y.max(0.0), (-wind_body.x).max(0.0), (-wind_body.y).max(0.0)];
    let noise = (cal.noise_std > 0.0).then(|| Normal::new(0.0, cal.noise_std).expect("validated noise_std"));
    let s = exposed.map(|mut v| {
        if let Some(n) = &noise {
            v += n.sample(rng);
        }
        if cal.quantize {
            v = adc_round_trip(v, cal);
        }
        v.max(0.0)
    });
    SensorFrameReading::from_sensors(s)
}

/// Body-frame gradient estimate from one reading.
///
/// The slope is refreshed once the odometry has moved at least
/// `settings.baseline` from the reference point and held otherwise. A fresh
/// state starts from `settings.initial_slope`.
pub fn gradient_proxy(
    reading: &SensorFrameReading,
    state: GradientProxyState,
    odom_position: PlanarVector,
    settings: &ProxySettings,
) -> (GradientProxyState, GradientSample) {
    let next = if !state.valid {
        GradientProxyState {
            prev_s_r: reading.s_r,
            prev_position_odom: odom_position,
            slope: settings.initial_slope,
            valid: true,
        }
    } else {
        let delta = odom_position.distance(state.prev_position_odom);
        if delta >= settings.baseline && delta > 0.0 {
            GradientProxyState {
                prev_s_r: reading.s_r,
                prev_position_odom: odom_position,
                slope: ((reading.s_r - state.prev_s_r).abs() / delta).max(settings.min_slope),
                valid: true,
            }
        } else {
            state
        }
    };
    let flow = reading.flow();
    let n = flow.norm();
    let grad = if n < FLOW_EPSILON || !next.slope.is_finite() { PlanarVector::ZERO } else { flow * (next.slope / n) };
    (next, GradientSample::body(grad))
}

/// Sensor array mounted on one robot, with its noise stream and odometry.
#[derive(Debug, Clone)]
pub struct SensorArray {
    pub calibration: SensorCalibration,
    pub settings: ProxySettings,
    rng: ChaCha8Rng,
    proxy: GradientProxyState,
    odometry: Option<Pose>,
    degenerate: u64,
}

impl SensorArray {
    pub fn new(calibration: SensorCalibration, settings: ProxySettings, rng: ChaCha8Rng) -> Result<Self> {
        calibration.validate()?;
        settings.validate()?;
        Ok(SensorArray { calibration, settings, rng, proxy: GradientProxyState::default(), odometry: None, degenerate: 0 })
    }

    /// Samples the array at the true pose and returns the proxy gradient.
    /// The odometry is anchored to the pose seen on the first call.
    pub fn observe(&mut self, field: &FieldSpec, pose: Pose) -> Result<GradientSample> {
        let wind = wind_at(field, pose)?;
        let reading = measure(wind, &self.calibration, &mut self.rng);
        let odom = *self.odometry.get_or_insert(pose);
        let (proxy, sample) = gradient_proxy(&reading, self.proxy, odom.position(), &self.settings);
        self.proxy = proxy;
        if sample.grad == PlanarVector::ZERO {
            self.degenerate += 1;
        }
        Ok(sample)
    }

    /// Dead-reckons the commanded velocities over one step.
    pub fn advance_odometry(&mut self, control: ControlInput, dt: f64) -> Result<()> {
        if let Some(pose) = self.odometry {
            self.odometry = Some(step(pose, control, dt)?);
        }
        Ok(())
    }

    pub fn odometry(&self) -> Option<Pose> {
        self.odometry
    }

    pub fn proxy_state(&self) -> GradientProxyState {
        self.proxy
    }

    /// Number of observations that produced a zero gradient.
    pub fn degenerate_count(&self) -> u64 {
        self.degenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::{GaController, GaGains};
    use crate::vehicle::{simulate, GradientSource, StopReason};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::f64::consts::FRAC_PI_2;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn wind_examples() {
        let field = FieldSpec::unit_quadratic();
        assert_eq!(wind_at(&field, Pose::new(0.0, 0.0, 1.2)).unwrap(), PlanarVector::ZERO);
        assert_eq!(to_body(PlanarVector::new(1.0, 0.0), 0.0), PlanarVector::new(1.0, 0.0));
        let b = to_body(PlanarVector::new(1.0, 0.0), FRAC_PI_2);
        assert!(b.x.abs() < 1e-12 && (b.y + 1.0).abs() < 1e-12);
        // J = −2 at (1,1): wind of magnitude 2 toward the origin.
        let w = wind_at(&field, Pose::new(1.0, 1.0, 0.0)).unwrap();
        assert!((w - PlanarVector::new(-2f64.sqrt(), -2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn measure_examples() {
        let r = measure(PlanarVector::new(0.5, 0.2), &SensorCalibration::ideal(), &mut rng());
        assert_eq!(r.s, [0.5, 0.2, 0.0, 0.0]);
        assert_eq!((r.s_z1r, r.s_z2r), (0.5, 0.2));
        assert!((r.s_r - 0.29f64.sqrt()).abs() < 1e-15);
        assert!((r.s_r - 0.53852).abs() < 1e-5);

        let r = measure(PlanarVector::new(-0.8, 0.1), &SensorCalibration::ideal(), &mut rng());
        assert_eq!(r.s, [0.0, 0.1, 0.8, 0.0]);
        assert_eq!((r.s_z1r, r.s_z2r), (-0.8, 0.1));
    }

    #[test]
    fn one_metre_per_second_is_2000_ohm() {
        let dr = resistance_change(1.0, &SensorCalibration::default());
        assert!((dr - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn calibration_validation() {
        assert!(SensorCalibration::default().validate().is_ok());
        assert!(SensorCalibration { adc_bits: 7, ..Default::default() }.validate().is_err());
        assert!(SensorCalibration { adc_bits: 17, ..Default::default() }.validate().is_err());
        assert!(SensorCalibration { gain: 0.0, ..Default::default() }.validate().is_err());
        assert!(SensorCalibration { noise_std: -0.1, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn proxy_example() {
        let settings = ProxySettings::default();
        let state = GradientProxyState {
            prev_s_r: 0.8,
            prev_position_odom: PlanarVector::ZERO,
            slope: 0.0,
            valid: true,
        };
        let reading = SensorFrameReading::from_sensors([0.6, 0.8, 0.0, 0.0]);
        assert_eq!(reading.s_r, 1.0);
        let (next, g) = gradient_proxy(&reading, state, PlanarVector::new(0.1, 0.0), &settings);
        assert!((next.slope - 2.0).abs() < 1e-12);
        assert!((g.grad - PlanarVector::new(1.2, 1.6)).norm() < 1e-12);
        assert!((g.perp_grad - PlanarVector::new(1.6, -1.2)).norm() < 1e-12);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn proxy_degenerate_cases() {
        let settings = ProxySettings::default();
        let state = GradientProxyState { prev_s_r: 0.5, prev_position_odom: PlanarVector::ZERO, slope: 3.0, valid: true };
        let zero_flow = SensorFrameReading::from_sensors([0.0; 4]);
        let (_, g) = gradient_proxy(&zero_flow, state, PlanarVector::new(1.0, 0.0), &settings);
        assert_eq!(g.grad, PlanarVector::ZERO);

        let at_rest = GradientProxyState { slope: 0.0, ..state };
        let reading = SensorFrameReading::from_sensors([0.3, 0.4, 0.0, 0.0]);
        let (next, g) = gradient_proxy(&reading, at_rest, PlanarVector::ZERO, &settings);
        assert_eq!(g.grad, PlanarVector::ZERO);
        assert_eq!(next, at_rest);
    }

    #[test]
    fn proxy_holds_slope_below_baseline() {
        let settings = ProxySettings::default();
        let reading = SensorFrameReading::from_sensors([0.3, 0.4, 0.0, 0.0]);
        let (s0, g0) = gradient_proxy(&reading, GradientProxyState::default(), PlanarVector::ZERO, &settings);
        assert_eq!(s0.slope, settings.initial_slope);
        assert!((g0.grad.norm() - settings.initial_slope).abs() < 1e-15);
        let later = SensorFrameReading::from_sensors([0.6, 0.8, 0.0, 0.0]);
        let (s1, _) = gradient_proxy(&later, s0, PlanarVector::new(0.05, 0.0), &settings);
        assert_eq!(s1, s0);
        let (s2, g2) = gradient_proxy(&later, s1, PlanarVector::new(0.25, 0.0), &settings);
        assert!((s2.slope - 2.0).abs() < 1e-12);
        assert!((g2.grad.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantization_error_bound() {
        let cal = SensorCalibration::default();
        let bound = cal.quantization_bound();
        assert!((bound - 23.80 / 1024.0).abs() < 1e-15);
        for i in 0..=4000 {
            let span = cal.gain * (1.0 - 1.0 / 1024.0);
            let w = -span + 2.0 * span * f64::from(i) / 4000.0;
            let wind = PlanarVector::new(w, -0.5 * w);
            let r = measure(wind, &cal, &mut rng());
            assert!((r.s_z1r - w).abs() <= bound + 1e-12, "w = {w}: {}", r.s_z1r);
            assert!((r.s_z2r + 0.5 * w).abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn noise_is_seeded() {
        let cal = SensorCalibration { noise_std: 0.1, ..Default::default() };
        let a: Vec<_> = {
            let mut r = rng();
            (0..100).map(|_| measure(PlanarVector::new(1.0, -2.0), &cal, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = rng();
            (0..100).map(|_| measure(PlanarVector::new(1.0, -2.0), &cal, &mut r)).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().any(|r| r.s[0] != a[0].s[0]));
        assert!(a.iter().all(|r| r.s.iter().all(|&v| v >= 0.0)));
    }

    fn closed_loop(cal: SensorCalibration, seed: u64) -> f64 {
        let array = SensorArray::new(cal, ProxySettings::default(), ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut source = GradientSource::SensorArray(Box::new(array));
        let mut ctl = GaController::new(GaGains::new(1.0, 10.0).unwrap());
        let traj = simulate(
            &FieldSpec::unit_quadratic(),
            &mut ctl,
            &mut source,
            Pose::from_degrees(4.0, 3.0, 30.0),
            1e-3,
            100.0,
        )
        .unwrap();
        assert_eq!(traj.stop, StopReason::Horizon);
        traj.final_distance(PlanarVector::ZERO).unwrap()
    }

    #[test]
    fn closed_loop_noiseless_reaches_source() {
        let d = closed_loop(SensorCalibration::ideal(), 1);
        assert!(d < 0.1, "final distance {d}");
    }

    #[test]
    fn flat_refresh_keeps_the_floor() {
        let reading = SensorFrameReading::from_sensors([1.0, 0.0, 0.0, 0.0]);
        let state = GradientProxyState { prev_s_r: 1.0, prev_position_odom: PlanarVector::ZERO, slope: 2.0, valid: true };
        let settings = ProxySettings::default();
        let (next, g) = gradient_proxy(&reading, state, PlanarVector::new(0.2, 0.0), &settings);
        assert_eq!(next.slope, settings.min_slope);
        assert_eq!(g.grad, PlanarVector::new(settings.min_slope, 0.0));
    }

    #[test]
    fn noisy_closed_loop_never_stalls() {
        let worst = (1..=10)
            .map(|seed| closed_loop(SensorCalibration { noise_std: 0.05, ..Default::default() }, seed))
            .fold(0.0, f64::max);
        assert!(worst < 0.3, "worst final distance {worst}");
    }

    #[test]
    fn closed_loop_with_quantization_and_noise() {
        let d = closed_loop(SensorCalibration { noise_std: 0.05, ..Default::default() }, 3);
        assert!(d < 0.3, "final distance {d}");
    }

    proptest! {
        #[test]
        fn reading_identities(wx in -20.0f64..20.0, wy in -20.0f64..20.0) {
            let r = measure(PlanarVector::new(wx, wy), &SensorCalibration::ideal(), &mut rng());
            prop_assert!(r.s.iter().all(|&v| v >= 0.0));
            prop_assert!((r.s_r * r.s_r - (r.s_z1r * r.s_z1r + r.s_z2r * r.s_z2r)).abs() <= 1e-12 * (1.0 + r.s_r * r.s_r));
            // Exact axis projection: the signed selection recovers the wind.
            prop_assert_eq!(r.s_z1r, wx);
            prop_assert_eq!(r.s_z2r, wy);
        }

        #[test]
        fn proxy_perp_invariants(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0, d in 0.0f64..5.0, x in -1.0f64..1.0) {
            let reading = SensorFrameReading::from_sensors([a, b, c, d]);
            let state = GradientProxyState { prev_s_r: 0.1, prev_position_odom: PlanarVector::ZERO, slope: 0.0, valid: true };
            let (_, g) = gradient_proxy(&reading, state, PlanarVector::new(x, 1.0), &ProxySettings::default());
            let scale = g.grad.norm_squared();
            prop_assert!(g.grad.dot(g.perp_grad).abs() <= 1e-12 * scale);
            prop_assert!((g.grad.norm() - g.perp_grad.norm()).abs() <= 1e-12 * (1.0 + g.grad.norm()));
            prop_assert!(g.perp_grad.cross(g.grad) >= 0.0);
        }
    }
}
