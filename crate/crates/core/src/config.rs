//! Scenario configuration: a single JSON document in SI units.
//!
//! ```json
//! {
//!   "material":  { "n_op": 1.734, "r33_m_per_v": 30.8e-12 },
//!   "carriers":  { "f_w_hz": 30e9, "lambda_op_m": 1555e-9 },
//!   "geometry":  { "W_m": "optimum", "D_m": "optimum", "N": [1, 5, 10], "gamma": 6500 },
//!   "drive":     { "E_w_v_per_m": 50, "constellation_deg": [0, 60, 120, 180] },
//!   "state":     { "n_ph": [10, 100] },
//!   "mc":        { "n_samples": 10000, "n_trials": 1000000, "seed": 1 },
//!   "numerics":  { "S": null, "K": null, "steps_per_period": 2000 }
//! }
//! ```
//!
//! Only `carriers` and `drive` are required. `N` and `n_ph` accept a single
//! value or a list; runners iterate over every combination.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::physics::{
    optimum_array_periodicity, optimum_element_width, Carriers, ConverterDesign, Geometry, MaterialParams,
    MicrowaveDrive, DEFAULT_R33,
};
use crate::qstate::MIN_STEPS_PER_PERIOD;

pub const DEFAULT_N_OP: f64 = 1.734;
pub const DEFAULT_GAMMA: f64 = 6500.0;
pub const DEFAULT_N_SAMPLES: usize = 10_000;
pub const DEFAULT_N_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2000;
pub const DEFAULT_SWEEP_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub material: MaterialConfig,
    pub carriers: CarrierConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub drive: DriveConfig,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub mc: MonteCarloConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    pub eps_op: Option<f64>,
    pub n_op: Option<f64>,
    pub r33_m_per_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierConfig {
    pub f_w_hz: f64,
    pub lambda_op_m: f64,
}

/// A length in metres or the keyword `"optimum"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Metres(f64),
    Keyword(String),
}

impl Default for Length {
    fn default() -> Self {
        Length::Keyword("optimum".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(rename = "W_m", default)]
    pub width: Length,
    #[serde(rename = "D_m", default)]
    pub period: Length,
    #[serde(rename = "N", default = "default_count")]
    pub count: OneOrMany<i64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_count() -> OneOrMany<i64> {
    OneOrMany::One(1)
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            width: Length::default(),
            period: Length::default(),
            count: default_count(),
            gamma: DEFAULT_GAMMA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(rename = "E_w_v_per_m")]
    pub field: f64,
    #[serde(default = "default_constellation")]
    pub constellation_deg: Vec<f64>,
}

fn default_constellation() -> Vec<f64> {
    vec![0.0, 60.0, 120.0, 180.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    #[serde(default = "default_n_ph")]
    pub n_ph: OneOrMany<f64>,
}

fn default_n_ph() -> OneOrMany<f64> {
    OneOrMany::One(10.0)
}

impl Default for StateConfig {
    fn default() -> Self {
        Self { n_ph: default_n_ph() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_n_trials")]
    pub n_trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_n_samples() -> usize {
    DEFAULT_N_SAMPLES
}

fn default_n_trials() -> u64 {
    DEFAULT_N_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_N_SAMPLES,
            n_trials: DEFAULT_N_TRIALS,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    /// Sideband truncation; `null` applies `ceil(|δθ_N|) + 15`.
    #[serde(rename = "S", default)]
    pub half_width: Option<usize>,
    /// Fock cutoff; `null` applies `ceil(n + 10√n + 10)`.
    #[serde(rename = "K", default)]
    pub fock_cutoff: Option<usize>,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    #[serde(default = "default_sweep_points")]
    pub sweep_points: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
}

fn default_steps() -> usize {
    DEFAULT_STEPS_PER_PERIOD
}

fn default_sweep_points() -> usize {
    DEFAULT_SWEEP_POINTS
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            half_width: None,
            fock_cutoff: None,
            steps_per_period: DEFAULT_STEPS_PER_PERIOD,
            sweep_points: DEFAULT_SWEEP_POINTS,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max entry deviation for matrix identities.
    pub matrix: f64,
    /// Max `|T^H T - I|` entry on the inner block.
    pub unitarity: f64,
    /// Sideband probability conservation.
    pub probability: f64,
    /// Reconstructed vs closed-form phase (rad).
    pub phase_rad: f64,
    /// ODE vs closed-form phase (rad).
    pub ode_rad: f64,
    /// Modulated Fock amplitudes vs the rotated coherent state.
    pub coherence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            matrix: 1e-9,
            unitarity: 1e-10,
            probability: 1e-9,
            phase_rad: 1e-10,
            ode_rad: 1e-6,
            coherence: 1e-12,
        }
    }
}

/// A validated scenario with every keyword resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub material: MaterialParams,
    pub carriers: Carriers,
    pub width: f64,
    pub period: f64,
    pub counts: Vec<usize>,
    pub gamma: f64,
    pub drive: MicrowaveDrive,
    pub constellation_deg: Vec<f64>,
    pub constellation: Constellation,
    pub photon_numbers: Vec<f64>,
    pub n_samples: usize,
    pub n_trials: u64,
    pub seed: u64,
    pub half_width: Option<usize>,
    pub fock_cutoff: Option<usize>,
    pub steps_per_period: usize,
    pub sweep_points: usize,
    pub tolerances: Tolerances,
}

impl ResolvedScenario {
    /// Design with `count` elements.
    pub fn design(&self, count: usize) -> Result<ConverterDesign> {
        let geometry = Geometry::new(self.width, self.period, count, self.gamma).map_err(field_error("geometry"))?;
        Ok(ConverterDesign::new(self.material, self.carriers, geometry, self.drive))
    }

    pub fn designs(&self) -> Result<Vec<ConverterDesign>> {
        self.counts.iter().map(|&n| self.design(n)).collect()
    }

    pub fn optimum_width(&self) -> f64 {
        optimum_element_width(&self.material, &self.carriers)
    }

    pub fn optimum_period(&self) -> f64 {
        optimum_array_periodicity(&self.material, &self.carriers)
    }
}

fn config_error(field: impl Into<String>, constraint: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        constraint: constraint.into(),
    }
}

fn field_error(prefix: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidParameter { name, constraint } => {
            config_error(format!("{prefix}.{}", config_key(name)), constraint)
        }
        other => other,
    }
}

// Library parameter names to their configuration keys.
fn config_key(name: &str) -> &str {
    match name {
        "W" => "W_m",
        "D" => "D_m",
        "E_w" => "E_w_v_per_m",
        "f_w" => "f_w_hz",
        "lambda_op" => "lambda_op_m",
        "r33" => "r33_m_per_v",
        other => other,
    }
}

fn finite(field: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(field, format!("must be finite, got {v}")))
    }
}

/// Reads, parses and validates a scenario file.
pub fn load_config(path: impl AsRef<Path>) -> Result<(ScenarioConfig, ResolvedScenario)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error("<file>", format!("cannot read {}: {e}", path.display())))?;
    let config = parse_config(&text)?;
    let resolved = resolve(&config)?;
    Ok((config, resolved))
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| config_error("<document>", e.to_string()))
}

/// Applies defaults, re-validates every invariant and resolves `"optimum"` lengths.
pub fn resolve(config: &ScenarioConfig) -> Result<ResolvedScenario> {
    let m = &config.material;
    let r33 = finite("material.r33_m_per_v", m.r33_m_per_v.unwrap_or(DEFAULT_R33))?;
    let material = match (m.eps_op, m.n_op) {
        (Some(_), Some(_)) => {
            return Err(config_error("material", "give either eps_op or n_op, not both"));
        }
        (Some(eps), None) => MaterialParams::new(finite("material.eps_op", eps)?, r33),
        (None, n_op) => MaterialParams::from_index(finite("material.n_op", n_op.unwrap_or(DEFAULT_N_OP))?, r33),
    }
    .map_err(field_error("material"))?;

    let c = &config.carriers;
    let carriers = Carriers::new(
        finite("carriers.f_w_hz", c.f_w_hz)?,
        finite("carriers.lambda_op_m", c.lambda_op_m)?,
    )
    .map_err(field_error("carriers"))?;

    let g = &config.geometry;
    let w_o = optimum_element_width(&material, &carriers);
    let d_o = optimum_array_periodicity(&material, &carriers);
    let width = resolve_length("geometry.W_m", &g.width, w_o)?;
    let period = resolve_length("geometry.D_m", &g.period, d_o)?;
    let counts = g
        .count
        .to_vec()
        .into_iter()
        .map(|n| {
            if n >= 1 {
                Ok(n as usize)
            } else {
                Err(config_error("geometry.N", format!("must be >= 1, got {n}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if counts.is_empty() {
        return Err(config_error("geometry.N", "list must not be empty"));
    }
    let gamma = finite("geometry.gamma", g.gamma)?;
    for &n in &counts {
        Geometry::new(width, period, n, gamma).map_err(field_error("geometry"))?;
    }

    let d = &config.drive;
    let drive = MicrowaveDrive::new(finite("drive.E_w_v_per_m", d.field)?, 0.0).map_err(field_error("drive"))?;
    for &deg in &d.constellation_deg {
        finite("drive.constellation_deg", deg)?;
    }
    let constellation = Constellation::from_degrees(&d.constellation_deg)
        .map_err(|e| config_error("drive.constellation_deg", e.to_string()))?;

    let photon_numbers = config.state.n_ph.to_vec();
    if photon_numbers.is_empty() {
        return Err(config_error("state.n_ph", "list must not be empty"));
    }
    for &n in &photon_numbers {
        if !n.is_finite() || n < 0.0 {
            return Err(config_error("state.n_ph", format!("must be finite and >= 0, got {n}")));
        }
    }

    let mc = &config.mc;
    if mc.n_samples == 0 {
        return Err(config_error("mc.n_samples", "must be >= 1"));
    }
    if mc.n_trials < crate::constellation::MIN_SER_TRIALS {
        return Err(config_error(
            "mc.n_trials",
            format!("must be >= {}", crate::constellation::MIN_SER_TRIALS),
        ));
    }

    let num = &config.numerics;
    if num.steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(config_error(
            "numerics.steps_per_period",
            format!("must be >= {MIN_STEPS_PER_PERIOD}"),
        ));
    }
    if num.fock_cutoff == Some(0) {
        return Err(config_error("numerics.K", "must be >= 1"));
    }
    if num.half_width == Some(0) {
        return Err(config_error("numerics.S", "must be >= 1"));
    }
    if num.sweep_points < 2 {
        return Err(config_error("numerics.sweep_points", "must be >= 2"));
    }
    let t = num.tolerances;
    for (name, v) in [
        ("numerics.tolerances.matrix", t.matrix),
        ("numerics.tolerances.unitarity", t.unitarity),
        ("numerics.tolerances.probability", t.probability),
        ("numerics.tolerances.phase_rad", t.phase_rad),
        ("numerics.tolerances.ode_rad", t.ode_rad),
        ("numerics.tolerances.coherence", t.coherence),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(config_error(name, format!("must be finite and > 0, got {v}")));
        }
    }

    Ok(ResolvedScenario {
        material,
        carriers,
        width,
        period,
        counts,
        gamma,
        drive,
        constellation_deg: d.constellation_deg.clone(),
        constellation,
        photon_numbers,
        n_samples: mc.n_samples,
        n_trials: mc.n_trials,
        seed: mc.seed,
        half_width: num.half_width,
        fock_cutoff: num.fock_cutoff,
        steps_per_period: num.steps_per_period,
        sweep_points: num.sweep_points,
        tolerances: t,
    })
}

fn resolve_length(field: &str, value: &Length, optimum: f64) -> Result<f64> {
    match value {
        Length::Metres(v) => {
            let v = finite(field, *v)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(config_error(field, format!("must be > 0, got {v}")))
            }
        }
        Length::Keyword(k) if k == "optimum" => Ok(optimum),
        Length::Keyword(k) => Err(config_error(
            field,
            format!("expected metres or \"optimum\", got \"{k}\""),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "carriers": { "f_w_hz": 30e9, "lambda_op_m": 1555e-9 },
        "drive": { "E_w_v_per_m": 50 }
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let r = resolve(&parse_config(MINIMAL).unwrap()).unwrap();
        assert_eq!(r.material.r33(), 30.8e-12);
        assert!((r.material.n_op() - 1.734).abs() < 1e-15);
        assert_eq!(r.steps_per_period, DEFAULT_STEPS_PER_PERIOD);
        assert_eq!(r.counts, vec![1]);
        assert_eq!(r.tolerances, Tolerances::default());
        assert!((r.width - 2.88e-3).abs() / 2.88e-3 < 5e-3);
        assert_eq!(r.period, r.optimum_period());
    }

    #[test]
    fn rejects_zero_elements() {
        let text = MINIMAL.replace("\"drive\"", "\"geometry\": {\"N\": 0}, \"drive\"");
        let err = resolve(&parse_config(&text).unwrap()).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref field, .. } if field == "geometry.N"),
            "{err}"
        );
        assert!(err.to_string().contains(">= 1"));
    }

    #[test]
    fn rejects_bad_keyword_and_unknown_field() {
        let text = MINIMAL.replace("\"drive\"", "\"geometry\": {\"W_m\": \"best\"}, \"drive\"");
        let err = resolve(&parse_config(&text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "geometry.W_m"));
        let text = MINIMAL.replace("\"drive\"", "\"geometri\": {}, \"drive\"");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn rejects_period_shorter_than_width() {
        let text = MINIMAL.replace("\"drive\"", "\"geometry\": {\"W_m\": 3e-3, \"D_m\": 1e-3}, \"drive\"");
        let err = resolve(&parse_config(&text).unwrap()).unwrap_err();
        assert!(
            matches!(err, Error::Config { ref field, .. } if field == "geometry.D_m"),
            "{err}"
        );
    }

    #[test]
    fn rejects_out_of_range_numbers() {
        let text = MINIMAL.replace("50", "1e400");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace("50", "-1");
        let err = resolve(&parse_config(&text).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "drive.E_w_v_per_m"));
    }

    #[test]
    fn lists_of_counts_and_photon_numbers() {
        let text = r#"{
            "carriers": { "f_w_hz": 30e9, "lambda_op_m": 1555e-9 },
            "geometry": { "N": [1, 5, 10] },
            "drive": { "E_w_v_per_m": 50 },
            "state": { "n_ph": [10, 100] }
        }"#;
        let r = resolve(&parse_config(text).unwrap()).unwrap();
        assert_eq!(r.counts, vec![1, 5, 10]);
        assert_eq!(r.photon_numbers, vec![10.0, 100.0]);
        assert_eq!(r.designs().unwrap().len(), 3);
    }
}
