//! TOML experiment configuration.
//!
//! ```toml
//! controller = "ga"          # or "esc"
//! k1 = 1.0
//! k2 = 10.0
//! t_end = 100.0
//!
//! [field]
//! kind = "quadratic"         # quadratic | nonquad_a | nonquad_b | fan
//!
//! [init]
//! poses = [[4.0, 3.0, 30.0]] # z1, z2, heading in degrees
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::esc::{EscController, EscParams};
use crate::field::{FanPolynomial, FieldSpec, PlanarVector};
use crate::ga::{GaController, GaGains};
use crate::sensors::{ProxySettings, SensorCalibration};
use crate::vehicle::{Controller, Pose};

/// Step used when a single-run config omits `dt`.
pub const DEFAULT_SIMULATION_DT: f64 = 1e-3;
/// Step used when a batch config omits `dt`.
pub const DEFAULT_BATCH_DT: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Ga,
    Esc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Quadratic,
    NonquadA,
    NonquadB,
    Fan,
}

impl std::str::FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(FieldKind::Quadratic),
            "nonquad_a" => Ok(FieldKind::NonquadA),
            "nonquad_b" => Ok(FieldKind::NonquadB),
            "fan" => Ok(FieldKind::Fan),
            other => Err(Error::config(format!(
                "unknown field `{other}`; expected quadratic, nonquad_a, nonquad_b or fan"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    #[serde(default)]
    pub j_star: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    /// Source location (quadratic) or fan centre (fan).
    #[serde(default)]
    pub source: [f64; 2],
    #[serde(default = "lab_coeffs")]
    pub coeffs: [f64; 5],
    #[serde(default = "lab_blade_radius")]
    pub r_f: f64,
    #[serde(default = "lab_exclusion_radius")]
    pub d_min: f64,
}

fn one() -> f64 {
    1.0
}
fn lab_coeffs() -> [f64; 5] {
    FanPolynomial::LAB_COEFFS
}
fn lab_blade_radius() -> f64 {
    FanPolynomial::LAB_BLADE_RADIUS
}
fn lab_exclusion_radius() -> f64 {
    FanPolynomial::LAB_EXCLUSION_RADIUS
}

impl FieldConfig {
    pub fn of_kind(kind: FieldKind) -> Self {
        FieldConfig {
            kind,
            j_star: 0.0,
            c1: 1.0,
            c2: 1.0,
            source: [0.0, 0.0],
            coeffs: lab_coeffs(),
            r_f: lab_blade_radius(),
            d_min: lab_exclusion_radius(),
        }
    }

    pub fn build(&self) -> Result<FieldSpec> {
        let source = PlanarVector::new(self.source[0], self.source[1]);
        let spec = match self.kind {
            FieldKind::Quadratic => FieldSpec::quadratic(self.j_star, self.c1, self.c2, source),
            FieldKind::NonquadA => Ok(FieldSpec::NonQuadA),
            FieldKind::NonquadB => Ok(FieldSpec::NonQuadB),
            FieldKind::Fan => FanPolynomial::new(self.coeffs, self.r_f, source, self.d_min).map(FieldSpec::FanPolynomial),
        };
        spec.map_err(|e| Error::config(format!("[field]: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub enabled: bool,
    pub gain: f64,
    pub r0: f64,
    pub adc_bits: u32,
    pub noise_std: f64,
    pub quantize: bool,
    pub baseline: f64,
    pub initial_slope: f64,
    pub min_slope: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        let cal = SensorCalibration::default();
        let proxy = ProxySettings::default();
        SensorConfig {
            enabled: false,
            gain: cal.gain,
            r0: cal.r0,
            adc_bits: cal.adc_bits,
            noise_std: cal.noise_std,
            quantize: cal.quantize,
            baseline: proxy.baseline,
            initial_slope: proxy.initial_slope,
            min_slope: proxy.min_slope,
        }
    }
}

impl SensorConfig {
    pub fn calibration(&self) -> SensorCalibration {
        SensorCalibration {
            gain: self.gain,
            r0: self.r0,
            adc_bits: self.adc_bits,
            noise_std: self.noise_std,
            quantize: self.quantize,
        }
    }

    pub fn proxy(&self) -> ProxySettings {
        ProxySettings { baseline: self.baseline, initial_slope: self.initial_slope, min_slope: self.min_slope }
    }
}

/// Explicit poses or a uniform box. Headings are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poses: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading_deg: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    K1,
    K2,
    A,
    Omega0,
    H,
    CZ1,
    CZ2,
    NoiseStd,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K1 => "k1",
            SweepParam::K2 => "k2",
            SweepParam::A => "a",
            SweepParam::Omega0 => "omega0",
            SweepParam::H => "h",
            SweepParam::CZ1 => "c_z1",
            SweepParam::CZ2 => "c_z2",
            SweepParam::NoiseStd => "noise_std",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub controller: ControllerKind,
    pub k1: f64,
    pub k2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_z1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_z2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_settle_fraction")]
    pub settle_fraction: f64,
    #[serde(default = "default_window_periods")]
    pub window_periods: u32,
    #[serde(default)]
    pub save_trajectories: bool,
    pub field: FieldConfig,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_settle_fraction() -> f64 {
    0.2
}
fn default_window_periods() -> u32 {
    1
}

/// Sampling box for random initial conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitBox {
    pub z1: [f64; 2],
    pub z2: [f64; 2],
    /// Radians.
    pub heading: [f64; 2],
}

/// How trial initial conditions are produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    Explicit(Vec<Pose>),
    Random(InitBox),
}

/// One parameter set of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    pub name: String,
    pub value: Option<f64>,
    pub config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn step(&self, batch: bool) -> f64 {
        self.dt.unwrap_or(if batch { DEFAULT_BATCH_DT } else { DEFAULT_SIMULATION_DT })
    }

    pub fn trial_count(&self) -> usize {
        self.trials.unwrap_or_else(|| self.init.poses.as_ref().map_or(1, Vec::len))
    }

    pub fn esc_params(&self) -> Result<EscParams> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::config(format!("controller = \"esc\" requires `{name}`")))
        };
        EscParams::new(
            need("a", self.a)?,
            need("omega0", self.omega0)?,
            need("h", self.h)?,
            need("c_z1", self.c_z1)?,
            need("c_z2", self.c_z2)?,
            self.k1,
            self.k2,
        )
        .map_err(to_config)
    }

    pub fn build_controller(&self) -> Result<Box<dyn Controller + Send>> {
        Ok(match self.controller {
            ControllerKind::Ga => Box::new(GaController::new(GaGains::new(self.k1, self.k2).map_err(to_config)?)),
            ControllerKind::Esc => Box::new(EscController::new(self.esc_params()?)?),
        })
    }

    pub fn init_mode(&self) -> Result<InitMode> {
        let i = &self.init;
        if let Some(poses) = &i.poses {
            if i.z1.is_some() || i.z2.is_some() || i.heading_deg.is_some() {
                return Err(Error::config("[init]: give either `poses` or a sampling box, not both"));
            }
            return Ok(InitMode::Explicit(poses.iter().map(|p| Pose::from_degrees(p[0], p[1], p[2])).collect()));
        }
        let half = match self.field.kind {
            FieldKind::Quadratic | FieldKind::Fan => 5.0,
            FieldKind::NonquadA | FieldKind::NonquadB => 1.0,
        };
        let centre = self.field.source;
        let z1 = i.z1.unwrap_or([centre[0] - half, centre[0] + half]);
        let z2 = i.z2.unwrap_or([centre[1] - half, centre[1] + half]);
        let h = i.heading_deg.unwrap_or([0.0, 360.0]);
        Ok(InitMode::Random(InitBox { z1, z2, heading: [h[0].to_radians(), h[1].to_radians()] }))
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        let field = self.field.build()?;
        self.build_controller()?;
        for (name, v) in [("t_end", self.t_end), ("settle_fraction", self.settle_fraction)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if self.settle_fraction >= 1.0 {
            return Err(Error::config("`settle_fraction` must be below 1"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) || dt > self.t_end {
                return Err(Error::config(format!("`dt` must be in (0, t_end], got {dt}")));
            }
        }
        if self.trials == Some(0) {
            return Err(Error::config("`trials` must be at least 1"));
        }
        if self.window_periods == 0 {
            return Err(Error::config("`window_periods` must be at least 1"));
        }
        if self.sensor.enabled {
            self.sensor.calibration().validate().map_err(to_config)?;
            self.sensor.proxy().validate().map_err(to_config)?;
            if self.controller == ControllerKind::Esc {
                return Err(Error::config("the sensor array feeds gradients; it cannot drive the esc controller"));
            }
        }
        match self.init_mode()? {
            InitMode::Explicit(poses) => {
                if poses.is_empty() {
                    return Err(Error::config("[init]: `poses` is empty"));
                }
                for (k, p) in poses.iter().enumerate() {
                    if !p.is_finite() || !field.contains(p.position()) {
                        return Err(Error::config(format!(
                            "[init]: pose {k} ({}, {}) is outside the {} field's domain",
                            p.z1, p.z2, field
                        )));
                    }
                }
            }
            InitMode::Random(b) => {
                for (name, r) in [("z1", b.z1), ("z2", b.z2), ("heading_deg", b.heading)] {
                    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
                        return Err(Error::config(format!("[init]: `{name}` range is empty or not finite")));
                    }
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("[sweep]: `values` is empty"));
            }
            for g in self.groups()? {
                g.config.build_controller()?;
            }
        }
        Ok(())
    }

    /// The parameter sets of a batch: one per sweep value, or the config
    /// itself.
    pub fn groups(&self) -> Result<Vec<GroupSpec>> {
        let Some(sweep) = &self.sweep else {
            return Ok(vec![GroupSpec { name: "all".into(), value: None, config: self.clone() }]);
        };
        sweep
            .values
            .iter()
            .map(|&v| {
                let mut c = self.clone();
                c.sweep = None;
                match sweep.param {
                    SweepParam::K1 => c.k1 = v,
                    SweepParam::K2 => c.k2 = v,
                    SweepParam::A => c.a = Some(v),
                    SweepParam::Omega0 => c.omega0 = Some(v),
                    SweepParam::H => c.h = Some(v),
                    SweepParam::CZ1 => c.c_z1 = Some(v),
                    SweepParam::CZ2 => c.c_z2 = Some(v),
                    SweepParam::NoiseStd => c.sensor.noise_std = v,
                }
                Ok(GroupSpec { name: format!("{}={}", sweep.param.name(), v), value: Some(v), config: c })
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON form, lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn to_config(e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Config(msg),
        other => other,
    }
}
