//! Run configuration: TOML file, environment and `--set` overrides.
//!
//! Precedence, lowest first: built-in defaults, config file, environment
//! variables `BIPHOTON_CFG__<section>__<key>`, then `--set section.key=value`.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::detection::DetectionConfig;
use crate::optics::{PolarizerState, SourceParams};
use crate::temporal::{BeatingParams, BiphotonEnvelope, EnvelopeShape, TwoSidedEnvelope};

pub const ENV_PREFIX: &str = "BIPHOTON_CFG__";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub source: SourceSection,
    pub envelope: EnvelopeSection,
    pub detection: DetectionSection,
    pub beating: BeatingSection,
    pub polarization: PolarizationSection,
    pub tomography: TomographySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    /// AOM shift δ/2π in MHz.
    pub delta_mhz: f64,
    /// Linear collection polarizations of paths 1 and 2, degrees from H.
    pub p1_deg: f64,
    pub p2_deg: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            delta_mhz: 100.0,
            p1_deg: 0.0,
            p2_deg: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvelopeSection {
    pub shape: EnvelopeShape,
    pub decay_ns: f64,
    pub rise_ns: f64,
    /// Oscillation angular frequency for the damped-oscillation shape, rad/ns.
    pub osc_rad_per_ns: f64,
}

impl Default for EnvelopeSection {
    fn default() -> Self {
        EnvelopeSection {
            shape: EnvelopeShape::Exponential,
            decay_ns: 50.0,
            rise_ns: 1.0,
            osc_rad_per_ns: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub eta: f64,
    pub bin_width_ns: f64,
    pub duration_s: f64,
    pub pair_rate_hz: f64,
    /// Flat beat background per bin; calibrated to the target visibility when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub background_per_bin: Option<f64>,
    pub tau_max_ns: f64,
    pub seed: u64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        let d = DetectionConfig::default();
        DetectionSection {
            eta: d.eta,
            bin_width_ns: d.bin_width_ns,
            duration_s: d.duration_s,
            pair_rate_hz: d.pair_rate_hz,
            background_per_bin: None,
            tau_max_ns: 200.0,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeatMode {
    /// `½ G₀ (1 - cos δτ)`
    Antisymmetric,
    /// `⅛ G₀ (1 + cos(δτ - θ))`
    PhaseShifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeatingSection {
    pub mode: BeatMode,
    /// Phase θ in radians (phase-shifted mode).
    pub theta: f64,
    /// Noiseless fitted visibility the background is calibrated to; mode default when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_visibility: Option<f64>,
}

impl Default for BeatingSection {
    fn default() -> Self {
        BeatingSection {
            mode: BeatMode::Antisymmetric,
            theta: 0.0,
            target_visibility: None,
        }
    }
}

impl BeatingSection {
    pub fn target(&self) -> f64 {
        self.target_visibility.unwrap_or(match self.mode {
            BeatMode::Antisymmetric => 0.80,
            BeatMode::PhaseShifted => 0.78,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolarizationSection {
    /// Frequency shift during the scan; non-zero couples polarization to frequency.
    pub delta_mhz: f64,
    pub p3_angles_deg: Vec<f64>,
    pub scan_step_deg: f64,
    pub window_ns: f64,
    /// Exposure per analyzer setting.
    pub exposure_s: f64,
    /// Per-curve visibilities the accidental floors are calibrated to.
    pub target_visibilities: Vec<f64>,
}

impl Default for PolarizationSection {
    fn default() -> Self {
        PolarizationSection {
            delta_mhz: 0.0,
            p3_angles_deg: vec![0.0, 45.0],
            scan_step_deg: 20.0,
            window_ns: 90.0,
            exposure_s: 25.0,
            target_visibilities: vec![0.87, 0.84],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TomoSource {
    Singlet,
    /// Partially mixed reference state near the singlet.
    Reference,
    MaximallyMixed,
    Werner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    pub source: TomoSource,
    pub werner_p: f64,
    /// Counts scale per setting.
    pub n0: f64,
    /// Exposure recorded with simulated settings, s.
    pub exposure_s: f64,
    /// Ingest these records instead of simulating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    pub bootstrap: usize,
}

impl Default for TomographySection {
    fn default() -> Self {
        TomographySection {
            source: TomoSource::Reference,
            werner_p: 0.8,
            n0: 300.0,
            exposure_s: 60.0,
            records: None,
            bootstrap: 200,
        }
    }
}

impl RunConfig {
    pub fn delta(&self) -> f64 {
        2.0 * PI * self.source.delta_mhz * 1e-3
    }

    pub fn source_params(&self) -> crate::Result<SourceParams> {
        SourceParams::new(
            self.delta(),
            PolarizerState::linear(self.source.p1_deg.to_radians()),
            PolarizerState::linear(self.source.p2_deg.to_radians()),
        )
    }

    pub fn envelope(&self) -> crate::Result<BiphotonEnvelope> {
        BiphotonEnvelope {
            shape: self.envelope.shape,
            decay_time: self.envelope.decay_ns,
            rise_time: self.envelope.rise_ns,
            osc_freq: self.envelope.osc_rad_per_ns,
            amplitude_scale: 1.0,
        }
        .validated()
    }

    pub fn two_sided(&self) -> crate::Result<TwoSidedEnvelope> {
        Ok(TwoSidedEnvelope::symmetric(self.envelope()?))
    }

    pub fn detection(&self) -> crate::Result<DetectionConfig> {
        let d = &self.detection;
        let cfg = DetectionConfig {
            eta: d.eta,
            bin_width_ns: d.bin_width_ns,
            duration_s: d.duration_s,
            background_per_bin: d.background_per_bin.unwrap_or(0.0),
            pair_rate_hz: d.pair_rate_hz,
            seed: d.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn beating_params(&self) -> BeatingParams {
        match self.beating.mode {
            BeatMode::Antisymmetric => BeatingParams::antisymmetric(self.delta()),
            BeatMode::PhaseShifted => BeatingParams::phase_shifted(self.delta(), self.beating.theta),
        }
    }

    /// Checks every section so errors surface at load time.
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error::InvalidParameter as Bad;
        self.source_params()?;
        self.envelope()?;
        self.detection()?;
        self.beating_params().validate()?;
        if !(self.detection.tau_max_ns.is_finite() && self.detection.tau_max_ns > 0.0) {
            return Err(Bad("detection.tau_max_ns must be positive".into()));
        }
        let t = self.beating.target();
        if !(t > 0.0 && t < 1.0) {
            return Err(Bad("beating.target_visibility must lie in (0, 1)".into()));
        }
        let p = &self.polarization;
        if p.target_visibilities.len() != p.p3_angles_deg.len() {
            return Err(Bad(format!(
                "polarization.target_visibilities has {} entries for {} p3 angles",
                p.target_visibilities.len(),
                p.p3_angles_deg.len()
            )));
        }
        if p.p3_angles_deg.is_empty() {
            return Err(Bad("polarization.p3_angles_deg is empty".into()));
        }
        if !(p.delta_mhz.is_finite() && p.delta_mhz >= 0.0) {
            return Err(Bad("polarization.delta_mhz must be >= 0".into()));
        }
        if !(p.exposure_s.is_finite() && p.exposure_s > 0.0) {
            return Err(Bad("polarization.exposure_s must be positive".into()));
        }
        let tomo = &self.tomography;
        if !(tomo.n0.is_finite() && tomo.n0 > 0.0) {
            return Err(Bad("tomography.n0 must be positive".into()));
        }
        if !(0.0..=1.0).contains(&tomo.werner_p) {
            return Err(Bad("tomography.werner_p must lie in [0, 1]".into()));
        }
        if !(tomo.exposure_s.is_finite() && tomo.exposure_s > 0.0) {
            return Err(Bad("tomography.exposure_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("override {0:?}: expected section.key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(format!("{key}={raw}")));
    }
    let section = table
        .entry(parts[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match section {
        toml::Value::Table(t) => {
            t.insert(parts[1].to_string(), parse_value(raw));
            Ok(())
        }
        _ => Err(ConfigError::Override(format!("{key}={raw}"))),
    }
}

/// Overrides from `BIPHOTON_CFG__<section>__<key>` variables, sorted by name.
pub fn env_overrides(vars: impl Iterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            Some((rest.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    out.sort();
    out
}

/// Builds the effective configuration.
pub fn load(
    file: Option<&std::path::Path>,
    env: &[(String, String)],
    sets: &[String],
    seed: Option<u64>,
) -> Result<RunConfig, ConfigError> {
    let (text, origin) = match file {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse {
        origin: origin.clone(),
        message: e.to_string(),
    })?;
    for (k, v) in env {
        apply_override(&mut table, k, v)?;
    }
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Override(s.clone()))?;
        apply_override(&mut table, k.trim(), v.trim())?;
    }
    let mut cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Parse {
            origin,
            message: e.to_string(),
        })?;
    if let Some(s) = seed {
        cfg.detection.seed = s;
    }
    cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(cfg)
}

pub fn to_toml(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = load(None, &[], &[], None).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn serialization_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.detection.background_per_bin = Some(3.5);
        cfg.beating.mode = BeatMode::PhaseShifted;
        cfg.beating.theta = 1.25;
        cfg.tomography.records = Some(PathBuf::from("counts.csv"));
        let text = to_toml(&cfg);
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_apply_in_order() {
        let env = vec![("detection.duration_s".to_string(), "100".to_string())];
        let sets = vec![
            "detection.duration_s=200".to_string(),
            "beating.mode=phase-shifted".to_string(),
        ];
        let cfg = load(None, &env, &sets, Some(9)).unwrap();
        assert_eq!(cfg.detection.duration_s, 200.0);
        assert_eq!(cfg.beating.mode, BeatMode::PhaseShifted);
        assert_eq!(cfg.detection.seed, 9);
    }

    #[test]
    fn integer_literal_coerces_to_float() {
        let cfg = load(None, &[], &["source.delta_mhz=0".to_string()], None).unwrap();
        assert_eq!(cfg.source.delta_mhz, 0.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = load(None, &[], &["detection.etta=0.5".to_string()], None).unwrap_err();
        assert!(err.to_string().contains("etta"), "{err}");
        assert!(load(None, &[], &["nosuch.key=1".to_string()], None).is_err());
        assert!(load(None, &[], &["novalue".to_string()], None).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            load(None, &[], &["detection.eta=2.0".to_string()], None),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            load(None, &[], &["polarization.target_visibilities=[0.9]".to_string()], None),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn env_names_map_to_keys() {
        let vars = vec![
            ("BIPHOTON_CFG__DETECTION__SEED".to_string(), "5".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ];
        assert_eq!(
            env_overrides(vars.into_iter()),
            vec![("detection.seed".to_string(), "5".to_string())]
        );
    }

    #[test]
    fn shipped_defaults_file_matches_builtin_defaults() {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/defaults.toml");
        let cfg = load(Some(&path), &[], &[], None).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
