//! Run configuration: built-in defaults, overridden by a TOML file, in turn
//! overridden by command-line flags.
//!
//! Every key is optional in the file; keys absent there keep their default.
//! Unknown keys are rejected rather than ignored so that typos surface.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analog::OperatorSpec;
use crate::error::{Error, Result};
use crate::geometry::{place_scenario, Placement, RfConstants, Scenario};
use crate::onn::TrainParams;
use crate::surface::{RicsProfile, DEFAULT_ABSORBERS};
use crate::synth::{CaptureSetup, SynthParams};
use crate::throughput::FrameParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub d_user: f64,
    pub d_bs: f64,
    pub angle_deg: f64,
    pub d_eve: f64,
    pub eve_angle_deg: f64,
    pub user_spread_deg: f64,
    pub tx_power_w: f64,
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub carrier_hz: f64,
    pub hop_exponent: f64,
    pub direct_exponent: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = Placement::default();
        let rf = RfConstants::default();
        ScenarioConfig {
            d_user: p.d_user,
            d_bs: p.d_bs,
            angle_deg: p.angle_deg,
            d_eve: p.d_eve,
            eve_angle_deg: p.eve_angle_deg,
            user_spread_deg: p.user_spread_deg,
            tx_power_w: rf.tx_power_w,
            bandwidth_hz: rf.bandwidth_hz,
            noise_density_dbm_hz: rf.noise_density_dbm_hz,
            carrier_hz: rf.carrier_hz,
            hop_exponent: rf.hop_exponent,
            direct_exponent: rf.direct_exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceConfig {
    /// Element counts swept by both experiments.
    pub n_elements: Vec<usize>,
    /// Reflected power fractions swept by the secrecy experiment.
    pub alpha: Vec<f64>,
    pub n_absorb: usize,
    /// Surface size used when capturing training and test data.
    pub sensing_elements: usize,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            n_elements: vec![20, 40, 60, 80, 100],
            alpha: vec![0.2, 0.5, 0.8],
            n_absorb: DEFAULT_ABSORBERS,
            sensing_elements: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnnConfig {
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for OnnConfig {
    fn default() -> Self {
        let t = TrainParams::default();
        OnnConfig {
            layers: 2,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            decay_every: t.decay_every,
            decay_factor: t.decay_factor,
            train_per_class: 500,
            test_per_class: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub frames: usize,
    pub frame_slots: usize,
    pub slot_duration_s: f64,
    pub payload_bits: f64,
    /// Accuracies used by emulation mode when no confusion matrix is given.
    pub emulated_accuracy_2layer: f64,
    pub emulated_accuracy_4layer: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let f = FrameParams::default();
        ExperimentConfig {
            frames: 2000,
            frame_slots: f.frame_slots,
            slot_duration_s: f.slot_duration_s,
            payload_bits: f.payload_bits,
            emulated_accuracy_2layer: 0.85,
            emulated_accuracy_4layer: 0.90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecrecyConfig {
    /// Sender -> receiver line of sight in the secrecy scenario.
    pub direct_legit_link: bool,
    /// `frequency_shift`, `differentiate`, `integrate` or `convolve`.
    pub operator: String,
    pub shift_hz: f64,
    /// Real taps for `convolve`.
    pub kernel: Vec<f64>,
    pub alpha_step: f64,
}

impl Default for SecrecyConfig {
    fn default() -> Self {
        SecrecyConfig {
            direct_legit_link: true,
            operator: "frequency_shift".into(),
            shift_hz: 1e6,
            kernel: Vec::new(),
            alpha_step: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub seed: u64,
    pub output: PathBuf,
    pub scenario: ScenarioConfig,
    pub surface: SurfaceConfig,
    pub onn: OnnConfig,
    pub experiment: ExperimentConfig,
    pub secrecy: SecrecyConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            output: PathBuf::from("out"),
            scenario: ScenarioConfig::default(),
            surface: SurfaceConfig::default(),
            onn: OnnConfig::default(),
            experiment: ExperimentConfig::default(),
            secrecy: SecrecyConfig::default(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line on which `section.key` (or a top-level `key`) is assigned.
fn find_key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let assigned = line
            .split_once('=')
            .map(|(k, _)| k.trim().trim_matches('"'))
            .filter(|k| *k == key);
        if assigned.is_some() && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    None
}

fn check_keys(path: &Path, text: &str, user: &toml::Table, defaults: &toml::Table) -> Result<()> {
    for (key, value) in user {
        let Some(default) = defaults.get(key) else {
            return Err(Error::UnknownKey {
                path: path.to_path_buf(),
                line: find_key_line(text, None, key).unwrap_or(1),
                key: key.clone(),
            });
        };
        if let (toml::Value::Table(sub), toml::Value::Table(sub_default)) = (value, default) {
            if let Some(unknown) = sub.keys().find(|k| !sub_default.contains_key(*k)) {
                return Err(Error::UnknownKey {
                    path: path.to_path_buf(),
                    line: find_key_line(text, Some(key), unknown).unwrap_or(1),
                    key: format!("{key}.{unknown}"),
                });
            }
        }
    }
    Ok(())
}

/// Reads a config file on top of the built-in defaults and validates it.
pub fn parse_config(path: &Path) -> Result<Config> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::ConfigMissing { path: path.to_path_buf() });
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let config = parse_config_str(&text, path)?;
    config.validate().map_err(|e| match e {
        Error::OutOfRange { key, reason, .. } => {
            let (section, leaf) = match key.split_once('.') {
                Some((s, k)) => (Some(s), k),
                None => (None, key.as_str()),
            };
            let location = match find_key_line(&text, section, leaf) {
                Some(line) => format!("{}:{line}", path.display()),
                None => format!("{} (default)", path.display()),
            };
            Error::OutOfRange { location, key, reason }
        }
        other => other,
    })?;
    Ok(config)
}

/// Parses TOML text without range validation; `path` only labels errors.
pub fn parse_config_str(text: &str, path: &Path) -> Result<Config> {
    let syntax = |e: toml::de::Error| Error::ConfigSyntax {
        path: path.to_path_buf(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    };
    let user: toml::Table = toml::from_str(text).map_err(syntax)?;
    let defaults = toml::Table::try_from(Config::default()).expect("defaults serialize to a table");
    check_keys(path, text, &user, &defaults)?;
    toml::from_str(text).map_err(syntax)
}

fn out_of_range(key: &str, reason: impl Into<String>) -> Error {
    Error::OutOfRange {
        location: "config".into(),
        key: key.into(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(out_of_range(key, format!("must be positive, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(out_of_range(key, "must be at least 1"))
    }
}

fn unit_interval(key: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(out_of_range(key, format!("must lie in [0, 1], got {v}")))
    }
}

impl Config {
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Range checks for every field; a valid config never makes a module
    /// fail on its parameters.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        for (key, v) in [
            ("scenario.d_user", s.d_user),
            ("scenario.d_bs", s.d_bs),
            ("scenario.d_eve", s.d_eve),
            ("scenario.tx_power_w", s.tx_power_w),
            ("scenario.bandwidth_hz", s.bandwidth_hz),
            ("scenario.carrier_hz", s.carrier_hz),
            ("scenario.hop_exponent", s.hop_exponent),
            ("scenario.direct_exponent", s.direct_exponent),
        ] {
            positive(key, v)?;
        }
        if !(s.angle_deg > 0.0 && s.angle_deg < 360.0) {
            return Err(out_of_range("scenario.angle_deg", format!("must lie in (0, 360), got {}", s.angle_deg)));
        }
        if !s.eve_angle_deg.is_finite() {
            return Err(out_of_range("scenario.eve_angle_deg", "must be finite"));
        }
        if !(s.user_spread_deg >= 0.0 && s.user_spread_deg < 45.0) {
            return Err(out_of_range("scenario.user_spread_deg", "must lie in [0, 45)"));
        }
        if !s.noise_density_dbm_hz.is_finite() {
            return Err(out_of_range("scenario.noise_density_dbm_hz", "must be finite"));
        }

        let sf = &self.surface;
        at_least_one("surface.n_absorb", sf.n_absorb)?;
        if sf.n_elements.is_empty() {
            return Err(out_of_range("surface.n_elements", "grid is empty"));
        }
        if let Some(n) = sf.n_elements.iter().chain([&sf.sensing_elements]).find(|&&n| n <= sf.n_absorb) {
            return Err(out_of_range(
                "surface.n_elements",
                format!("{n} elements leave no reflectors next to {} sensing elements", sf.n_absorb),
            ));
        }
        if sf.alpha.is_empty() {
            return Err(out_of_range("surface.alpha", "grid is empty"));
        }
        for &a in &sf.alpha {
            unit_interval("surface.alpha", a)?;
        }

        let o = &self.onn;
        for (key, v) in [
            ("onn.layers", o.layers),
            ("onn.epochs", o.epochs),
            ("onn.batch_size", o.batch_size),
            ("onn.decay_every", o.decay_every),
            ("onn.train_per_class", o.train_per_class),
            ("onn.test_per_class", o.test_per_class),
        ] {
            at_least_one(key, v)?;
        }
        if !(o.learning_rate >= 0.0 && o.learning_rate.is_finite()) {
            return Err(out_of_range("onn.learning_rate", "must be non-negative"));
        }
        if !(o.decay_factor > 0.0 && o.decay_factor <= 1.0) {
            return Err(out_of_range("onn.decay_factor", "must lie in (0, 1]"));
        }

        let e = &self.experiment;
        at_least_one("experiment.frames", e.frames)?;
        at_least_one("experiment.frame_slots", e.frame_slots)?;
        positive("experiment.slot_duration_s", e.slot_duration_s)?;
        if !(e.payload_bits >= 0.0 && e.payload_bits.is_finite()) {
            return Err(out_of_range("experiment.payload_bits", "must be non-negative"));
        }
        unit_interval("experiment.emulated_accuracy_2layer", e.emulated_accuracy_2layer)?;
        unit_interval("experiment.emulated_accuracy_4layer", e.emulated_accuracy_4layer)?;

        let sc = &self.secrecy;
        if !(sc.alpha_step > 0.0 && sc.alpha_step <= 0.5) {
            return Err(out_of_range("secrecy.alpha_step", "must lie in (0, 0.5]"));
        }
        if !(sc.shift_hz.is_finite() && sc.shift_hz.abs() < s.bandwidth_hz / 2.0) {
            return Err(out_of_range("secrecy.shift_hz", "must stay below half the bandwidth"));
        }
        match self.operator() {
            Ok(_) => Ok(()),
            Err(e) => Err(out_of_range("secrecy.operator", e.to_string())),
        }
    }

    pub fn placement(&self) -> Placement {
        let s = &self.scenario;
        Placement {
            d_user: s.d_user,
            d_bs: s.d_bs,
            angle_deg: s.angle_deg,
            d_eve: s.d_eve,
            eve_angle_deg: s.eve_angle_deg,
            user_spread_deg: s.user_spread_deg,
        }
    }

    pub fn rf(&self) -> RfConstants {
        let s = &self.scenario;
        RfConstants {
            tx_power_w: s.tx_power_w,
            bandwidth_hz: s.bandwidth_hz,
            noise_density_dbm_hz: s.noise_density_dbm_hz,
            carrier_hz: s.carrier_hz,
            hop_exponent: s.hop_exponent,
            direct_exponent: s.direct_exponent,
        }
    }

    /// Scenario of the sensing/throughput design (direct path blocked).
    pub fn scenario(&self) -> Result<Scenario> {
        place_scenario(&self.placement(), self.rf())
    }

    pub fn secrecy_scenario(&self) -> Result<Scenario> {
        let mut s = self.scenario()?;
        s.direct_user_bs = self.secrecy.direct_legit_link;
        Ok(s)
    }

    pub fn synth_params(&self) -> SynthParams {
        SynthParams {
            sample_rate: self.scenario.bandwidth_hz,
            ..SynthParams::default()
        }
    }

    pub fn capture_setup(&self) -> Result<CaptureSetup> {
        Ok(CaptureSetup {
            params: self.synth_params(),
            per_user_power: self.scenario.tx_power_w,
            profile: RicsProfile::ra_aligned(self.surface.sensing_elements, self.surface.n_absorb)?,
            scenario: self.scenario()?,
        })
    }

    pub fn train_params(&self) -> TrainParams {
        let o = &self.onn;
        TrainParams {
            epochs: o.epochs,
            learning_rate: o.learning_rate,
            batch_size: o.batch_size,
            decay_every: o.decay_every,
            decay_factor: o.decay_factor,
        }
    }

    pub fn frame_params(&self) -> FrameParams {
        let e = &self.experiment;
        FrameParams {
            frame_slots: e.frame_slots,
            slot_duration_s: e.slot_duration_s,
            payload_bits: e.payload_bits,
        }
    }

    pub fn operator(&self) -> Result<OperatorSpec> {
        let kernel = (!self.secrecy.kernel.is_empty())
            .then(|| self.secrecy.kernel.iter().map(|&t| Complex64::new(t, 0.0)).collect());
        OperatorSpec::from_kind(&self.secrecy.operator, kernel, Some(self.secrecy.shift_hz))
    }
}
