//! End-to-end measurement pipelines: envelope histograms, two-photon
//! beating with normalization and fits, and polarization-correlation scans.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    beat_phase_extract, fit_sinusoid, fit_sinusoid_weighted, normalize_beating, BeatPhase, NormalizedBeat, SinusoidFit,
};
use crate::detection::{expected_from_curve, sample_histogram_tagged, tau_grid, CoincidenceHistogram, DetectionConfig};
use crate::error::{Error, Result};
use crate::optics::{build_hyperentangled, project_analyzers, PolarizerState, SourceParams};
use crate::temporal::{beating_g2, state_g2, BeatingParams, BiphotonEnvelope, Envelope, TwoSidedEnvelope};

/// 2π × 100 MHz in rad/ns.
pub const DEFAULT_DELTA: f64 = 2.0 * PI * 0.1;

const SIGNAL_TAG: u32 = 1;
const ENVELOPE_TAG: u32 = 2;
const POLARIZATION_TAG: u32 = 3;

/// Expected and sampled two-sided envelope histogram before the beam splitter.
pub fn envelope_histograms(
    env: &TwoSidedEnvelope,
    cfg: &DetectionConfig,
    tau_max_ns: f64,
) -> Result<(CoincidenceHistogram, CoincidenceHistogram)> {
    let tau = tau_grid(tau_max_ns, cfg.bin_width_ns);
    let expected = expected_from_curve(&tau, |t| env.g2(t), cfg)?;
    let sampled = sample_histogram_tagged(&expected, cfg.seed, ENVELOPE_TAG);
    Ok((expected, sampled))
}

/// Beat measurement after the beam splitter together with the envelope
/// reference used for normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatSetup {
    pub envelope: TwoSidedEnvelope,
    pub params: BeatingParams,
    /// `background_per_bin` applies to the beat histogram only.
    pub detection: DetectionConfig,
    pub tau_max_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeatRun {
    pub expected_signal: CoincidenceHistogram,
    pub signal: CoincidenceHistogram,
    pub expected_envelope: CoincidenceHistogram,
    pub envelope: CoincidenceHistogram,
    pub normalized: NormalizedBeat,
    pub phase: BeatPhase,
}

impl BeatRun {
    /// Sinusoid fit of the normalized beat with the period left free.
    pub fn free_period_fit(&self) -> Result<SinusoidFit> {
        fit_sinusoid_weighted(
            &self.normalized.tau,
            &self.normalized.ratio,
            self.normalized.weighting(),
            None,
        )
    }
}

impl BeatSetup {
    pub fn new(
        envelope: TwoSidedEnvelope,
        params: BeatingParams,
        detection: DetectionConfig,
        tau_max_ns: f64,
    ) -> Result<Self> {
        params.validate()?;
        detection.validate()?;
        if !(params.delta > 0.0) {
            return Err(Error::InvalidParameter(
                "beating needs a non-zero frequency shift".into(),
            ));
        }
        if !(tau_max_ns.is_finite() && tau_max_ns > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_max_ns must be positive, got {tau_max_ns}"
            )));
        }
        Ok(BeatSetup {
            envelope,
            params,
            detection,
            tau_max_ns,
        })
    }

    pub fn with_background(mut self, background_per_bin: f64) -> Self {
        self.detection.background_per_bin = background_per_bin;
        self
    }

    fn tau(&self) -> Vec<f64> {
        tau_grid(self.tau_max_ns, self.detection.bin_width_ns)
    }

    pub fn expected_signal(&self) -> Result<CoincidenceHistogram> {
        expected_from_curve(
            &self.tau(),
            |t| beating_g2(&self.envelope, &self.params, t),
            &self.detection,
        )
    }

    pub fn expected_envelope(&self) -> Result<CoincidenceHistogram> {
        let cfg = DetectionConfig {
            background_per_bin: 0.0,
            ..self.detection
        };
        expected_from_curve(&self.tau(), |t| self.envelope.g2(t), &cfg)
    }

    fn analyze(
        &self,
        expected_signal: CoincidenceHistogram,
        signal: CoincidenceHistogram,
        expected_envelope: CoincidenceHistogram,
        envelope: CoincidenceHistogram,
    ) -> Result<BeatRun> {
        let normalized = normalize_beating(&signal, &envelope, self.params.prefactor)?;
        let phase = beat_phase_extract(&normalized, self.params.delta)?;
        Ok(BeatRun {
            expected_signal,
            signal,
            expected_envelope,
            envelope,
            normalized,
            phase,
        })
    }

    /// Shot-noise realization; beat and envelope histograms use separate
    /// substream tags under the same seed.
    pub fn run(&self, seed: u64) -> Result<BeatRun> {
        let es = self.expected_signal()?;
        let ee = self.expected_envelope()?;
        let s = sample_histogram_tagged(&es, seed, SIGNAL_TAG);
        let e = sample_histogram_tagged(&ee, seed, ENVELOPE_TAG);
        self.analyze(es, s, ee, e)
    }

    /// The pipeline applied to expected counts.
    pub fn noiseless(&self) -> Result<BeatRun> {
        let es = self.expected_signal()?;
        let ee = self.expected_envelope()?;
        self.analyze(es.clone(), es, ee.clone(), ee)
    }
}

/// Flat beat background that brings the noiseless fitted visibility of the
/// normalized beat down to `target`, found by bisection.
pub fn calibrate_beat_background(setup: &BeatSetup, target: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target visibility {target} outside (0, 1)"
        )));
    }
    let vis = |bg: f64| -> Result<f64> { Ok(setup.with_background(bg).noiseless()?.phase.visibility) };
    let v0 = vis(0.0)?;
    if v0 < target {
        return Err(Error::InvalidParameter(format!(
            "noiseless visibility {v0:.4} already below target {target}"
        )));
    }
    let peak = setup.expected_signal()?.counts.iter().copied().fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = peak.max(1.0);
    while vis(hi)? > target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::FitFailed("background calibration diverged".into()));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if vis(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Polarization-correlation scan: P3 fixed per curve, P4 stepped, counts
/// integrated over `[0, window)` of the Stokes-first sector.
#[derive(Debug, Clone)]
pub struct PolarizationSetup {
    pub source: SourceParams,
    pub envelope: BiphotonEnvelope,
    /// `duration_s` is the exposure per analyzer setting; the flat floor is per curve.
    pub detection: DetectionConfig,
    pub window_ns: f64,
    pub p3_angles: Vec<f64>,
    pub p4_angles: Vec<f64>,
    /// Accidental counts added to every point of curve `i`.
    pub background_per_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationCurve {
    /// Radians.
    pub p3_angle: f64,
    pub p4_angles: Vec<f64>,
    pub expected: Vec<f64>,
    pub counts: Vec<f64>,
    pub fit: SinusoidFit,
}

impl PolarizationSetup {
    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.envelope.validated()?;
        if !(self.window_ns.is_finite() && self.window_ns > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "window must be positive, got {}",
                self.window_ns
            )));
        }
        if self.background_per_point.len() != self.p3_angles.len() {
            return Err(Error::Dimension {
                expected: self.p3_angles.len(),
                got: self.background_per_point.len(),
            });
        }
        Ok(())
    }

    /// Signal coincidences at one analyzer pair, without background.
    pub fn integrated_signal(&self, p3: f64, p4: f64) -> Result<f64> {
        let state = build_hyperentangled(&self.source)?;
        let (freq, _) = project_analyzers(&state, &PolarizerState::linear(p3), &PolarizerState::linear(p4));
        let comp = [[freq[0], freq[1]]];
        let dt = self.detection.bin_width_ns;
        let bins = (self.window_ns / dt).round() as usize;
        let sum: f64 = (0..bins)
            .map(|k| state_g2(&self.envelope, self.source.delta, &comp, k as f64 * dt))
            .sum();
        Ok(sum * self.detection.signal_scale())
    }

    fn expected_curve(&self, p3: f64, background: f64) -> Result<Vec<f64>> {
        self.p4_angles
            .iter()
            .map(|&p4| Ok(self.integrated_signal(p3, p4)? + background))
            .collect()
    }

    fn fit_degrees(&self, y: &[f64]) -> Result<SinusoidFit> {
        let x: Vec<f64> = self.p4_angles.iter().map(|a| a.to_degrees()).collect();
        fit_sinusoid(&x, y, Some(180.0))
    }

    /// Noiseless curves (expectation values fitted directly).
    pub fn expected(&self) -> Result<Vec<PolarizationCurve>> {
        self.validate()?;
        self.p3_angles
            .iter()
            .zip(&self.background_per_point)
            .map(|(&p3, &bg)| {
                let e = self.expected_curve(p3, bg)?;
                Ok(PolarizationCurve {
                    p3_angle: p3,
                    p4_angles: self.p4_angles.clone(),
                    fit: self.fit_degrees(&e)?,
                    counts: e.clone(),
                    expected: e,
                })
            })
            .collect()
    }

    /// Poisson realization; point `j` of curve `i` uses substream
    /// `(seed, tag + i, j)`.
    pub fn run(&self, seed: u64) -> Result<Vec<PolarizationCurve>> {
        self.validate()?;
        self.p3_angles
            .iter()
            .zip(&self.background_per_point)
            .enumerate()
            .map(|(i, (&p3, &bg))| {
                let e = self.expected_curve(p3, bg)?;
                let counts: Vec<f64> = e
                    .iter()
                    .enumerate()
                    .map(|(j, &m)| crate::rng::poisson(seed, POLARIZATION_TAG + i as u32, j as u32, m) as f64)
                    .collect();
                Ok(PolarizationCurve {
                    p3_angle: p3,
                    p4_angles: self.p4_angles.clone(),
                    fit: self.fit_degrees(&counts)?,
                    expected: e,
                    counts,
                })
            })
            .collect()
    }

    /// Per-curve floors `A / V - c` that bring each noiseless curve's fitted
    /// visibility to its target.
    pub fn calibrate_backgrounds(&self, targets: &[f64]) -> Result<Vec<f64>> {
        if targets.len() != self.p3_angles.len() {
            return Err(Error::Dimension {
                expected: self.p3_angles.len(),
                got: targets.len(),
            });
        }
        self.p3_angles
            .iter()
            .zip(targets)
            .map(|(&p3, &target)| {
                if !(target > 0.0 && target <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "target visibility {target} outside (0, 1]"
                    )));
                }
                let fit = self.fit_degrees(&self.expected_curve(p3, 0.0)?)?;
                Ok((fit.amplitude / target - fit.offset).max(0.0))
            })
            .collect()
    }
}

/// Analyzer angles `0, step, 2 step, ...` below 360°, in radians.
pub fn scan_angles(step_deg: f64) -> Result<Vec<f64>> {
    if !(step_deg > 0.0 && step_deg <= 45.0) {
        return Err(Error::InvalidParameter(format!(
            "scan step {step_deg}° outside (0, 45]"
        )));
    }
    let n = (360.0 / step_deg - 1e-9).floor() as usize + 1;
    Ok((0..n).map(|k| (k as f64 * step_deg).to_radians()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::phase_difference;

    fn beat_setup(params: BeatingParams) -> BeatSetup {
        BeatSetup::new(
            TwoSidedEnvelope::symmetric(BiphotonEnvelope::default()),
            params,
            DetectionConfig::default(),
            200.0,
        )
        .unwrap()
    }

    fn pol_setup(delta: f64) -> PolarizationSetup {
        PolarizationSetup {
            source: SourceParams::new(delta, PolarizerState::h(), PolarizerState::v()).unwrap(),
            envelope: BiphotonEnvelope::default(),
            detection: DetectionConfig {
                duration_s: 60.0,
                ..DetectionConfig::default()
            },
            window_ns: 90.0,
            p3_angles: vec![0.0, PI / 4.0],
            p4_angles: scan_angles(20.0).unwrap(),
            background_per_point: vec![0.0, 0.0],
        }
    }

    #[test]
    fn envelope_has_empty_center_bin() {
        let env = TwoSidedEnvelope::symmetric(BiphotonEnvelope::default());
        let (e, s) = envelope_histograms(&env, &DetectionConfig::default(), 200.0).unwrap();
        assert_eq!(e.len(), 401);
        assert_eq!(e.counts[200], 0.0);
        assert_eq!(s.counts[200], 0.0);
        assert_eq!(e.counts[199], e.counts[201]);
    }

    #[test]
    fn noiseless_antisymmetric_beat_is_ideal() {
        let run = beat_setup(BeatingParams::antisymmetric(DEFAULT_DELTA))
            .noiseless()
            .unwrap();
        assert!((run.phase.visibility - 1.0).abs() < 1e-9);
        assert!(phase_difference(run.phase.theta, PI).abs() < 1e-9);
    }

    #[test]
    fn calibration_hits_target() {
        let setup = beat_setup(BeatingParams::antisymmetric(DEFAULT_DELTA));
        let bg = calibrate_beat_background(&setup, 0.8).unwrap();
        let v = setup.with_background(bg).noiseless().unwrap().phase.visibility;
        assert!((v - 0.8).abs() < 1e-9, "{v}");
        assert!(bg > 0.0);
    }

    #[test]
    fn phase_shifted_noiseless_recovers_theta() {
        for theta in [0.0, PI / 2.0, PI, 3.0 * PI / 2.0] {
            let run = beat_setup(BeatingParams::phase_shifted(DEFAULT_DELTA, theta))
                .noiseless()
                .unwrap();
            assert!(phase_difference(run.phase.theta, theta).abs() < 1e-9);
        }
    }

    #[test]
    fn runs_are_seed_deterministic() {
        let setup = beat_setup(BeatingParams::antisymmetric(DEFAULT_DELTA)).with_background(10.0);
        assert_eq!(setup.run(3).unwrap(), setup.run(3).unwrap());
        assert_ne!(setup.run(3).unwrap().signal, setup.run(4).unwrap().signal);
    }

    #[test]
    fn scan_angles_cover_full_turn() {
        let a = scan_angles(20.0).unwrap();
        assert_eq!(a.len(), 18);
        assert!((a[17].to_degrees() - 340.0).abs() < 1e-9);
        assert!(scan_angles(0.0).is_err());
    }

    #[test]
    fn decoupled_polarization_curves_have_unit_visibility() {
        for c in pol_setup(0.0).expected().unwrap() {
            assert!((c.fit.visibility - 1.0).abs() < 1e-9, "{}", c.fit.visibility);
        }
    }

    #[test]
    fn coupled_source_washes_out_diagonal_fringes() {
        let curves = pol_setup(DEFAULT_DELTA).expected().unwrap();
        assert!((curves[0].fit.visibility - 1.0).abs() < 1e-9);
        assert!(curves[1].fit.visibility < 0.05, "{}", curves[1].fit.visibility);
    }

    #[test]
    fn polarization_background_calibration() {
        let mut s = pol_setup(0.0);
        s.background_per_point = s.calibrate_backgrounds(&[0.87, 0.84]).unwrap();
        let curves = s.expected().unwrap();
        assert!((curves[0].fit.visibility - 0.87).abs() < 1e-9);
        assert!((curves[1].fit.visibility - 0.84).abs() < 1e-9);
    }
}
