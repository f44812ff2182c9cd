//! From correlation functions to coincidence histograms.
//!
//! Expected counts follow `C(τ) = G⁽²⁾(τ) · R · η · Δt · T + B` where `R` is
//! the pair rate feeding the correlation (pairs/s), `η` the joint detection
//! efficiency, `Δt` the bin width, `T` the acquisition time and `B` a flat
//! accidental floor per bin. Sampled histograms draw each bin independently
//! from a Poisson distribution using [`crate::rng`] substreams.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    /// Joint two-photon detection efficiency, in (0, 1].
    pub eta: f64,
    /// Coincidence bin width Δt in ns.
    pub bin_width_ns: f64,
    /// Acquisition time T in s.
    pub duration_s: f64,
    /// Flat accidental floor, counts per bin.
    #[serde(default)]
    pub background_per_bin: f64,
    /// Rate of pairs feeding the correlation, pairs/s.
    pub pair_rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            eta: 1e-2,
            bin_width_ns: 1.0,
            duration_s: 3900.0,
            background_per_bin: 0.0,
            pair_rate_hz: 310.0,
            seed: 2015,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} out of range: {v}")));
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta", self.eta);
        }
        if !(self.bin_width_ns.is_finite() && self.bin_width_ns > 0.0) {
            return bad("bin_width_ns", self.bin_width_ns);
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad("duration_s", self.duration_s);
        }
        if !(self.background_per_bin.is_finite() && self.background_per_bin >= 0.0) {
            return bad("background_per_bin", self.background_per_bin);
        }
        if !(self.pair_rate_hz.is_finite() && self.pair_rate_hz > 0.0) {
            return bad("pair_rate_hz", self.pair_rate_hz);
        }
        Ok(())
    }

    /// Counts per bin per unit of G⁽²⁾ (1/ns): `R η Δt T`.
    pub fn signal_scale(&self) -> f64 {
        self.pair_rate_hz * self.eta * self.bin_width_ns * self.duration_s
    }

    /// Detected pairs over the whole acquisition, `R η T`.
    pub fn detected_pairs(&self) -> f64 {
        self.pair_rate_hz * self.eta * self.duration_s
    }
}

/// Symmetric grid of bin centers `k Δt`, `k = -K..=K`.
pub fn tau_grid(tau_max_ns: f64, bin_width_ns: f64) -> Vec<f64> {
    let k = (tau_max_ns / bin_width_ns).round() as i64;
    (-k..=k).map(|i| i as f64 * bin_width_ns).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub tau_centers: Vec<f64>,
    /// Non-negative; integral for sampled histograms.
    pub counts: Vec<f64>,
    pub config: DetectionConfig,
}

impl CoincidenceHistogram {
    pub fn new(tau_centers: Vec<f64>, counts: Vec<f64>, config: DetectionConfig) -> Result<Self> {
        if tau_centers.len() != counts.len() {
            return Err(Error::Dimension {
                expected: tau_centers.len(),
                got: counts.len(),
            });
        }
        if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(Error::InvalidParameter(format!("invalid count {c}")));
        }
        Ok(CoincidenceHistogram {
            tau_centers,
            counts,
            config,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn same_grid(&self, other: &CoincidenceHistogram) -> bool {
        self.tau_centers.len() == other.tau_centers.len()
            && self
                .tau_centers
                .iter()
                .zip(&other.tau_centers)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
    }

    /// CSV with header `tau_ns,counts`; floats use shortest round-trip form.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["tau_ns", "counts"])?;
        for (t, c) in self.tau_centers.iter().zip(&self.counts) {
            wr.write_record([t.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads `tau_ns,counts`; the CSV carries no metadata so the config is supplied.
    pub fn read_csv<R: Read>(r: R, config: DetectionConfig) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["tau_ns", "counts"] {
            return Err(Error::Parse(format!("unexpected histogram header {headers:?}")));
        }
        let mut tau = Vec::new();
        let mut counts = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing column {i}", line + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
            };
            tau.push(parse(0)?);
            counts.push(parse(1)?);
        }
        Self::new(tau, counts, config)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HistogramFile::from(self))?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let f: HistogramFile = serde_json::from_str(s)?;
        Self::new(f.tau_ns, f.counts, f.config)
    }
}

/// On-disk JSON layout for a histogram with its acquisition metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramFile {
    pub generator: String,
    pub config: DetectionConfig,
    pub tau_ns: Vec<f64>,
    pub counts: Vec<f64>,
}

impl From<&CoincidenceHistogram> for HistogramFile {
    fn from(h: &CoincidenceHistogram) -> Self {
        HistogramFile {
            generator: rng::GENERATOR.to_string(),
            config: h.config,
            tau_ns: h.tau_centers.clone(),
            counts: h.counts.clone(),
        }
    }
}

/// `counts[i] = g2[i] · R η Δt T + B`
pub fn expected_counts(tau_centers: &[f64], g2: &[f64], cfg: &DetectionConfig) -> Result<CoincidenceHistogram> {
    cfg.validate()?;
    if let Some(v) = g2.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "negative or non-finite correlation value {v}"
        )));
    }
    let scale = cfg.signal_scale();
    let counts = g2.iter().map(|g| g * scale + cfg.background_per_bin).collect();
    CoincidenceHistogram::new(tau_centers.to_vec(), counts, *cfg)
}

/// Evaluates `g2` on the bin centers and converts to expected counts.
pub fn expected_from_curve(
    tau_centers: &[f64],
    g2: impl Fn(f64) -> f64 + Sync,
    cfg: &DetectionConfig,
) -> Result<CoincidenceHistogram> {
    let values: Vec<f64> = tau_centers.iter().map(|&t| g2(t)).collect();
    expected_counts(tau_centers, &values, cfg)
}

/// Poisson shot-noise realization; bin `i` uses substream `(seed, 0, i)`.
pub fn sample_histogram(expected: &CoincidenceHistogram, seed: u64) -> CoincidenceHistogram {
    sample_histogram_tagged(expected, seed, 0)
}

pub fn sample_histogram_tagged(expected: &CoincidenceHistogram, seed: u64, tag: u32) -> CoincidenceHistogram {
    let counts = expected
        .counts
        .par_iter()
        .enumerate()
        .map(|(i, &mean)| rng::poisson(seed, tag, i as u32, mean) as f64)
        .collect();
    CoincidenceHistogram {
        tau_centers: expected.tau_centers.clone(),
        counts,
        config: CoincidenceHistogram::config_with_seed(expected.config, seed),
    }
}

impl CoincidenceHistogram {
    fn config_with_seed(mut cfg: DetectionConfig, seed: u64) -> DetectionConfig {
        cfg.seed = seed;
        cfg
    }
}

/// Visibility of a sinusoid of visibility `v_signal` and peak `signal_peak`
/// sitting on a flat floor `background`.
pub fn visibility_degradation(v_signal: f64, signal_peak: f64, background: f64) -> f64 {
    if signal_peak <= 0.0 {
        return 0.0;
    }
    v_signal * signal_peak / (signal_peak + 2.0 * background)
}

/// Floor that degrades a unit-visibility fringe of peak `signal_peak` to `target`.
pub fn background_for_visibility(target: f64, signal_peak: f64) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target visibility {target} outside (0, 1]"
        )));
    }
    Ok(0.5 * signal_peak * (1.0 / target - 1.0))
}

/// Pearson χ² of a sample against its expectation over bins with positive
/// expectation; returns `(χ², dof)`.
pub fn chi_square(sampled: &CoincidenceHistogram, expected: &CoincidenceHistogram) -> (f64, usize) {
    let mut chi2 = 0.0;
    let mut dof = 0;
    for (s, e) in sampled.counts.iter().zip(&expected.counts) {
        if *e > 0.0 {
            chi2 += (s - e).powi(2) / e;
            dof += 1;
        }
    }
    (chi2, dof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::{beating_g2, BeatingParams, BiphotonEnvelope, TwoSidedEnvelope};
    use std::f64::consts::PI;

    fn flat(n: usize, mean: f64) -> CoincidenceHistogram {
        let tau = (0..n).map(|i| i as f64).collect();
        CoincidenceHistogram::new(tau, vec![mean; n], DetectionConfig::default()).unwrap()
    }

    #[test]
    fn zero_curve_gives_zero_histogram() {
        let tau = tau_grid(10.0, 1.0);
        let h = expected_counts(&tau, &vec![0.0; tau.len()], &DetectionConfig::default()).unwrap();
        assert!(h.counts.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn expected_counts_are_linear_in_duration_and_efficiency() {
        let env = TwoSidedEnvelope::symmetric(BiphotonEnvelope::default());
        let tau = tau_grid(200.0, 1.0);
        let g = |t: f64| env.forward.g2(t.abs());
        let base = DetectionConfig::default();
        let h1 = expected_from_curve(&tau, g, &base).unwrap();
        let h2 = expected_from_curve(
            &tau,
            g,
            &DetectionConfig {
                duration_s: 2.0 * base.duration_s,
                ..base
            },
        )
        .unwrap();
        let h3 = expected_from_curve(
            &tau,
            g,
            &DetectionConfig {
                eta: 2.0 * base.eta,
                ..base
            },
        )
        .unwrap();
        for i in 0..tau.len() {
            assert!((h2.counts[i] - 2.0 * h1.counts[i]).abs() <= 1e-12 * h1.counts[i].max(1.0));
            assert!((h3.counts[i] - 2.0 * h1.counts[i]).abs() <= 1e-12 * h1.counts[i].max(1.0));
        }
    }

    #[test]
    fn default_scale_puts_first_beat_peak_near_220() {
        let env = BiphotonEnvelope::default();
        let p = BeatingParams::antisymmetric(2.0 * PI * 0.1);
        let h = expected_counts(&[5.0], &[beating_g2(&env, &p, 5.0)], &DetectionConfig::default()).unwrap();
        assert!((h.counts[0] - 220.0).abs() < 5.0, "{}", h.counts[0]);
    }

    #[test]
    fn rejects_negative_correlation() {
        assert!(expected_counts(&[0.0], &[-1.0], &DetectionConfig::default()).is_err());
        let bad = DetectionConfig {
            eta: 0.0,
            ..DetectionConfig::default()
        };
        assert!(expected_counts(&[0.0], &[1.0], &bad).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_seed_dependent() {
        let e = flat(300, 40.0);
        let a = sample_histogram(&e, 11);
        assert_eq!(a, sample_histogram(&e, 11));
        assert_ne!(a.counts, sample_histogram(&e, 12).counts);
        assert!(a.counts.iter().all(|c| c.fract() == 0.0));
    }

    #[test]
    fn zero_mean_bins_stay_zero() {
        let e = flat(50, 0.0);
        for seed in 0..20 {
            assert!(sample_histogram(&e, seed).counts.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn large_mean_concentrates() {
        let e = flat(1, 1e6);
        for seed in 0..200 {
            let s = sample_histogram(&e, seed).counts[0];
            assert!((s - 1e6).abs() <= 5000.0, "seed {seed}: {s}");
        }
    }

    #[test]
    fn sample_mean_converges() {
        let e = flat(1, 50.0);
        let n = 10_000;
        let mean = (0..n).map(|seed| sample_histogram(&e, seed).counts[0]).sum::<f64>() / n as f64;
        assert!((mean - 50.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn exact_zeros_survive_sampling() {
        let env = TwoSidedEnvelope::symmetric(BiphotonEnvelope::default());
        let p = BeatingParams::antisymmetric(2.0 * PI * 0.1);
        let tau = tau_grid(200.0, 1.0);
        let e = expected_from_curve(&tau, |t| beating_g2(&env, &p, t), &DetectionConfig::default()).unwrap();
        let s = sample_histogram(&e, 99);
        for (i, &t) in tau.iter().enumerate() {
            if (t / 10.0).fract() == 0.0 {
                assert!(e.counts[i] < 1e-9, "tau {t}: {}", e.counts[i]);
                if e.counts[i] == 0.0 {
                    assert_eq!(s.counts[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn chi_square_is_poisson_consistent() {
        let tau = tau_grid(150.0, 1.0);
        let env = BiphotonEnvelope::default();
        let cfg = DetectionConfig {
            background_per_bin: 3.0,
            ..DetectionConfig::default()
        };
        let e = expected_from_curve(&tau, |t| env.g2(t.abs()), &cfg).unwrap();
        let seeds = 200;
        let mut inside = 0;
        for seed in 0..seeds {
            let (chi2, dof) = chi_square(&sample_histogram(&e, seed), &e);
            assert!(dof >= 200);
            let r = chi2 / dof as f64;
            if (0.7..=1.3).contains(&r) {
                inside += 1;
            }
        }
        assert!(inside as f64 >= 0.95 * seeds as f64, "{inside}/{seeds}");
    }

    #[test]
    fn visibility_degradation_formula() {
        assert_eq!(visibility_degradation(0.9, 100.0, 0.0), 0.9);
        assert!((visibility_degradation(1.0, 100.0, 50.0) - 0.5).abs() < 1e-15);
        assert!((visibility_degradation(1.0, 1.0, 0.125) - 0.8).abs() < 1e-15);
        let bg = background_for_visibility(0.8, 1.0).unwrap();
        assert!((bg - 0.125).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let env = BiphotonEnvelope::default();
        let tau = tau_grid(20.0, 1.0);
        let e = expected_from_curve(&tau, |t| env.g2(t.abs()) / 3.0, &DetectionConfig::default()).unwrap();
        let csv = e.to_csv_string();
        assert!(csv.starts_with("tau_ns,counts\n"));
        let back = CoincidenceHistogram::read_csv(csv.as_bytes(), e.config).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_csv_string(), csv);
        let json = e.to_json_string().unwrap();
        let back = CoincidenceHistogram::from_json_str(&json).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn csv_rejects_bad_header() {
        let bad = "t,c\n1,2\n";
        assert!(CoincidenceHistogram::read_csv(bad.as_bytes(), DetectionConfig::default()).is_err());
    }
}
