//! Sinusoid fits, beat normalization and phase extraction.
//!
//! All fits use the model `y = c + a cos ωx + b sin ωx`, i.e.
//! `c + A cos(ωx - φ)` with `A = √(a² + b²)`, `φ = atan2(b, a)`, and report
//! visibility `A / c`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::detection::CoincidenceHistogram;
use crate::error::{Error, Result};

/// Envelope bins below this many counts are excluded from normalization.
pub const ENVELOPE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    pub amplitude: f64,
    pub offset: f64,
    /// φ in `c + A cos(2πx/period - φ)`, wrapped to [0, 2π).
    pub phase: f64,
    pub visibility: f64,
    pub visibility_std: f64,
    pub chi2: f64,
    pub dof: usize,
    pub period: f64,
    pub phase_std: f64,
    /// Zero when the period was held fixed.
    pub period_std: f64,
}

impl SinusoidFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.offset + self.amplitude * (2.0 * PI * x / self.period - self.phase).cos()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Observation errors for a fit.
#[derive(Debug, Clone, Copy)]
pub enum Weighting<'a> {
    /// Poisson counts: weights from the fitted model, iterated to the
    /// Poisson maximum-likelihood fixed point.
    Poisson,
    /// Known per-point standard deviations.
    Sigma(&'a [f64]),
    /// Ratio `r = S / (p E)` of Poisson signal counts `S` to envelope counts
    /// `E`; the variance `(S + S²/E) / (p E)²` is evaluated at the fitted
    /// model and iterated like the Poisson case.
    Ratio { envelope: &'a [f64], prefactor: f64 },
}

impl Weighting<'_> {
    /// Variance of point `i` when its expectation is `mu`; `None` for fixed sigmas.
    fn variance(&self, i: usize, mu: f64) -> Option<f64> {
        match *self {
            Weighting::Poisson => Some(mu.max(0.5)),
            Weighting::Sigma(_) => None,
            Weighting::Ratio { envelope, prefactor } => {
                let e = envelope[i];
                let s = (prefactor * e * mu).max(0.0);
                Some((s.max(0.5) + s * s / e) / (prefactor * e).powi(2))
            }
        }
    }
}

pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

/// Smallest signed difference between two phases, in (-π, π].
pub fn phase_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Solves the symmetric positive definite system `m x = v` in place by
/// Gauss–Jordan elimination with partial pivoting; returns `None` if singular.
fn solve<const N: usize>(mut m: [[f64; N]; N], mut v: [f64; N]) -> Option<[f64; N]> {
    let scale = m.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    for col in 0..N {
        let p = (col..N).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() <= 1e-14 * scale {
            return None;
        }
        m.swap(col, p);
        v.swap(col, p);
        for r in 0..N {
            if r != col {
                let f = m[r][col] / m[col][col];
                let pivot = m[col];
                for (a, b) in m[r].iter_mut().zip(pivot).skip(col) {
                    *a -= f * b;
                }
                v[r] -= f * v[col];
            }
        }
    }
    let mut x = [0.0; N];
    for i in 0..N {
        x[i] = v[i] / m[i][i];
    }
    Some(x)
}

fn invert<const N: usize>(m: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut inv = [[0.0; N]; N];
    for j in 0..N {
        let mut e = [0.0; N];
        e[j] = 1.0;
        let col = solve(m, e)?;
        for i in 0..N {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

/// Weighted linear solve at fixed ω: returns `([c, a, b], χ²)`.
fn linear_fit(x: &[f64], y: &[f64], w: &[f64], omega: f64) -> Option<([f64; 3], f64)> {
    let mut m = [[0.0; 3]; 3];
    let mut v = [0.0; 3];
    for i in 0..x.len() {
        let (s, c) = (omega * x[i]).sin_cos();
        let f = [1.0, c, s];
        for r in 0..3 {
            v[r] += w[i] * f[r] * y[i];
            for k in 0..3 {
                m[r][k] += w[i] * f[r] * f[k];
            }
        }
    }
    let p = solve(m, v)?;
    let chi2 = (0..x.len())
        .map(|i| {
            let (s, c) = (omega * x[i]).sin_cos();
            w[i] * (y[i] - p[0] - p[1] * c - p[2] * s).powi(2)
        })
        .sum();
    Some((p, chi2))
}

fn model(p: &[f64; 3], omega: f64, x: f64) -> f64 {
    let (s, c) = (omega * x).sin_cos();
    p[0] + p[1] * c + p[2] * s
}

/// Fits a sinusoid plus offset to `(x, y)`.
///
/// With `fixed_period` the fit is linear; otherwise the period is found by
/// scanning ω from one cycle over the data span up to the sampling Nyquist
/// limit and refining the best χ² by golden-section search.
pub fn fit_sinusoid(x: &[f64], y: &[f64], fixed_period: Option<f64>) -> Result<SinusoidFit> {
    fit_sinusoid_weighted(x, y, Weighting::Poisson, fixed_period)
}

pub fn fit_sinusoid_weighted(
    x: &[f64],
    y: &[f64],
    weighting: Weighting<'_>,
    fixed_period: Option<f64>,
) -> Result<SinusoidFit> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: y.len(),
        });
    }
    match weighting {
        Weighting::Sigma(s) => {
            if s.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: s.len(),
                });
            }
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidParameter("standard deviations must be positive".into()));
            }
        }
        Weighting::Ratio { envelope, prefactor } => {
            if envelope.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: envelope.len(),
                });
            }
            if envelope.iter().any(|v| !(v.is_finite() && *v > 0.0)) || !(prefactor > 0.0) {
                return Err(Error::InvalidParameter(
                    "ratio weights need positive envelope counts".into(),
                ));
            }
        }
        Weighting::Poisson => {}
    }
    if n < 8 {
        return Err(Error::FitFailed(format!("need at least 8 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite data".into()));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if let Some(p) = fixed_period {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::InvalidParameter(format!("period must be positive, got {p}")));
        }
        if span < p * (1.0 - 1e-9) {
            return Err(Error::FitFailed(format!(
                "data span {span} shorter than one period {p}"
            )));
        }
    }

    let mut w: Vec<f64> = match weighting {
        Weighting::Poisson => y.iter().map(|v| 1.0 / v.max(1.0)).collect(),
        Weighting::Sigma(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        Weighting::Ratio { .. } => (0..n).map(|i| 1.0 / weighting.variance(i, y[i]).unwrap()).collect(),
    };

    let omega = match fixed_period {
        Some(p) => 2.0 * PI / p,
        None => scan_frequency(x, y, &w, span)?,
    };

    let mut p = linear_fit(x, y, &w, omega)
        .ok_or_else(|| Error::FitFailed("singular normal equations".into()))?
        .0;
    if weighting.variance(0, 1.0).is_some() {
        // Iteratively reweighted least squares with the variance evaluated
        // at the model: the Poisson maximum-likelihood fixed point.
        for _ in 0..100 {
            for i in 0..n {
                w[i] = 1.0 / weighting.variance(i, model(&p, omega, x[i])).unwrap();
            }
            let next = linear_fit(x, y, &w, omega)
                .ok_or_else(|| Error::FitFailed("singular normal equations".into()))?
                .0;
            let change = (0..3).map(|k| (next[k] - p[k]).abs()).fold(0.0, f64::max);
            p = next;
            if change <= 1e-12 * p[0].abs().max(1e-300) {
                break;
            }
        }
    }

    let [c, a, b] = p;
    if !(c > 0.0) {
        return Err(Error::FitFailed(format!("fitted offset {c} is not positive")));
    }
    let amp = a.hypot(b);
    let chi2: f64 = (0..n).map(|i| w[i] * (y[i] - model(&p, omega, x[i])).powi(2)).sum();

    // Covariance of (c, a, b[, ω]) from the weighted Jacobian.
    let free = fixed_period.is_none();
    let (cov3, var_omega) = if free {
        let mut m = [[0.0; 4]; 4];
        for i in 0..n {
            let (s, co) = (omega * x[i]).sin_cos();
            let j = [1.0, co, s, x[i] * (-a * s + b * co)];
            for r in 0..4 {
                for k in 0..4 {
                    m[r][k] += w[i] * j[r] * j[k];
                }
            }
        }
        let inv = invert(m).ok_or_else(|| Error::FitFailed("period unidentifiable".into()))?;
        let mut c3 = [[0.0; 3]; 3];
        for r in 0..3 {
            for k in 0..3 {
                c3[r][k] = inv[r][k];
            }
        }
        (c3, inv[3][3])
    } else {
        let mut m = [[0.0; 3]; 3];
        for i in 0..n {
            let (s, co) = (omega * x[i]).sin_cos();
            let j = [1.0, co, s];
            for r in 0..3 {
                for k in 0..3 {
                    m[r][k] += w[i] * j[r] * j[k];
                }
            }
        }
        (
            invert(m).ok_or_else(|| Error::FitFailed("singular normal equations".into()))?,
            0.0,
        )
    };

    let quad = |g: [f64; 3]| -> f64 {
        let mut s = 0.0;
        for r in 0..3 {
            for k in 0..3 {
                s += g[r] * cov3[r][k] * g[k];
            }
        }
        s.max(0.0).sqrt()
    };
    let (grad_v, grad_phi) = if amp > 0.0 {
        (
            [-amp / (c * c), a / (amp * c), b / (amp * c)],
            [0.0, -b / (amp * amp), a / (amp * amp)],
        )
    } else {
        ([-0.0, 1.0 / c, 1.0 / c], [0.0, 0.0, 0.0])
    };

    let period = 2.0 * PI / omega;
    Ok(SinusoidFit {
        amplitude: amp,
        offset: c,
        phase: wrap_phase(b.atan2(a)),
        visibility: amp / c,
        visibility_std: quad(grad_v),
        chi2,
        dof: n.saturating_sub(if free { 4 } else { 3 }),
        period,
        phase_std: if amp > 0.0 { quad(grad_phi) } else { PI },
        period_std: 2.0 * PI * var_omega.max(0.0).sqrt() / (omega * omega),
    })
}

fn scan_frequency(x: &[f64], y: &[f64], w: &[f64], span: f64) -> Result<f64> {
    let mut xs: Vec<f64> = x.to_vec();
    xs.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = xs.windows(2).map(|p| p[1] - p[0]).filter(|d| *d > 0.0).collect();
    if gaps.is_empty() || span <= 0.0 {
        return Err(Error::FitFailed("period unidentifiable: degenerate abscissae".into()));
    }
    gaps.sort_by(f64::total_cmp);
    let dx = gaps[gaps.len() / 2];
    let w_min = 2.0 * PI / span;
    let w_max = PI / dx;
    if w_max <= w_min {
        return Err(Error::FitFailed(
            "period unidentifiable: data span below one cycle".into(),
        ));
    }
    let step = 2.0 * PI / (8.0 * span);
    let chi = |om: f64| linear_fit(x, y, w, om).map(|r| r.1).unwrap_or(f64::INFINITY);
    let mut best = (w_min, chi(w_min));
    let mut om = w_min;
    while om <= w_max {
        let v = chi(om);
        if v < best.1 {
            best = (om, v);
        }
        om += step;
    }
    // Golden-section refinement around the best grid point.
    let (mut a, mut b) = ((best.0 - step).max(w_min * 0.5), best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (chi(c), chi(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = chi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = chi(d);
        }
    }
    let om = 0.5 * (a + b);
    if !chi(om).is_finite() {
        return Err(Error::FitFailed("period unidentifiable".into()));
    }
    Ok(om)
}

/// Beat signal divided by its envelope, on bins where the envelope is
/// well populated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBeat {
    pub tau: Vec<f64>,
    pub ratio: Vec<f64>,
    pub ratio_std: Vec<f64>,
    /// Envelope counts of the retained bins.
    pub envelope: Vec<f64>,
    pub prefactor: f64,
}

impl NormalizedBeat {
    pub fn weighting(&self) -> Weighting<'_> {
        Weighting::Ratio {
            envelope: &self.envelope,
            prefactor: self.prefactor,
        }
    }
}

/// `ratio = signal / (prefactor · envelope)`, so the ideal beat
/// `prefactor · G₀ · (1 ∓ cos)` maps onto `1 ∓ cos`. Bins with fewer than
/// [`ENVELOPE_THRESHOLD`] envelope counts are dropped. Errors propagate
/// Poisson variances of both histograms.
pub fn normalize_beating(
    hist: &CoincidenceHistogram,
    envelope: &CoincidenceHistogram,
    prefactor: f64,
) -> Result<NormalizedBeat> {
    if !hist.same_grid(envelope) {
        return Err(Error::GridMismatch(format!(
            "signal has {} bins, envelope {}",
            hist.len(),
            envelope.len()
        )));
    }
    if !(prefactor.is_finite() && prefactor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "prefactor must be positive, got {prefactor}"
        )));
    }
    let mut out = NormalizedBeat {
        tau: Vec::new(),
        ratio: Vec::new(),
        ratio_std: Vec::new(),
        envelope: Vec::new(),
        prefactor,
    };
    for i in 0..hist.len() {
        let e = envelope.counts[i];
        if e < ENVELOPE_THRESHOLD {
            continue;
        }
        let s = hist.counts[i];
        let denom = prefactor * e;
        out.tau.push(hist.tau_centers[i]);
        out.ratio.push(s / denom);
        out.ratio_std.push((s.max(1.0) + s * s / e).sqrt() / denom);
        out.envelope.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatPhase {
    /// θ in `1 + V cos(δτ - θ)`, wrapped to [0, 2π).
    pub theta: f64,
    pub theta_std: f64,
    pub visibility: f64,
    pub visibility_std: f64,
    pub fit: SinusoidFit,
}

/// Fits `c (1 + V cos(δτ - θ))` to a normalized beat with the period fixed
/// at `2π/δ`, weighting each bin by its shot-noise variance at the model.
pub fn beat_phase_extract(beat: &NormalizedBeat, delta: f64) -> Result<BeatPhase> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beat frequency must be positive, got {delta}"
        )));
    }
    let period = 2.0 * PI / delta;
    let (lo, hi) = beat
        .tau
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &t| (l.min(t), h.max(t)));
    if !(hi - lo >= 2.0 * period * (1.0 - 1e-9)) {
        return Err(Error::FitFailed(
            "phase extraction needs at least two beat periods".into(),
        ));
    }
    let fit = fit_sinusoid_weighted(&beat.tau, &beat.ratio, beat.weighting(), Some(period))?;
    Ok(BeatPhase {
        theta: fit.phase,
        theta_std: fit.phase_std,
        visibility: fit.visibility,
        visibility_std: fit.visibility_std,
        fit,
    })
}

/// Bins whose value is a local minimum over `±half_width` neighbours.
pub fn local_minima(x: &[f64], y: &[f64], half_width: usize) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .filter(|&i| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width).min(n - 1);
            i >= half_width && i + half_width < n && (lo..=hi).all(|j| y[j] >= y[i])
        })
        .map(|i| x[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    fn grid(n: usize, dx: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dx).collect()
    }

    fn poisson_curve(x: &[f64], f: impl Fn(f64) -> f64, seed: u64) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &t)| rng::poisson(seed, 7, i as u32, f(t)) as f64)
            .collect()
    }

    #[test]
    fn noiseless_unit_visibility() {
        let x = grid(60, 0.2);
        let y: Vec<f64> = x.iter().map(|t| 50.0 + 50.0 * t.cos()).collect();
        let f = fit_sinusoid(&x, &y, Some(2.0 * PI)).unwrap();
        assert!((f.visibility - 1.0).abs() < 1e-9, "{}", f.visibility);
        assert!(f.phase.min(2.0 * PI - f.phase) < 1e-9);
        assert!((f.eval(1.3) - (50.0 + 50.0 * 1.3f64.cos())).abs() < 1e-7);
    }

    #[test]
    fn free_period_recovered_exactly_without_noise() {
        let x = grid(200, 1.0);
        let om = 2.0 * PI * 0.1;
        let y: Vec<f64> = x.iter().map(|t| 100.0 + 60.0 * (om * t - 1.0).cos()).collect();
        let f = fit_sinusoid(&x, &y, None).unwrap();
        assert!((f.period - 10.0).abs() < 1e-6, "{}", f.period);
        assert!((f.visibility - 0.6).abs() < 1e-6);
        assert!((f.phase - 1.0).abs() < 1e-6);
        assert_eq!(f.dof, 196);
    }

    #[test]
    fn preconditions() {
        let x = grid(7, 1.0);
        assert!(fit_sinusoid(&x, &[1.0; 7], Some(2.0)).is_err());
        let x = grid(20, 0.1);
        let y: Vec<f64> = x.iter().map(|t| 10.0 + t.cos()).collect();
        assert!(matches!(fit_sinusoid(&x, &y, Some(2.0 * PI)), Err(Error::FitFailed(_))));
        let x = grid(20, 1.0);
        let y: Vec<f64> = x.iter().map(|t| -10.0 + t.cos()).collect();
        assert!(matches!(
            fit_sinusoid_weighted(&x, &y, Weighting::Sigma(&[1.0; 20]), Some(2.0 * PI)),
            Err(Error::FitFailed(_))
        ));
    }

    #[test]
    fn poisson_example_recovers_visibility_and_phase() {
        let x = grid(400, 1.0);
        let om = 2.0 * PI * 0.1;
        let seeds = 100;
        let mut vs = Vec::new();
        let mut ps = Vec::new();
        for seed in 0..seeds {
            let y = poisson_curve(&x, |t| 100.0 + 80.0 * (om * t - PI / 2.0).cos(), seed);
            let f = fit_sinusoid(&x, &y, Some(10.0)).unwrap();
            assert!((f.visibility - 0.8).abs() < 0.03, "seed {seed}: {}", f.visibility);
            assert!(
                phase_difference(f.phase, PI / 2.0).abs() < 0.05,
                "seed {seed}: {}",
                f.phase
            );
            vs.push(f.visibility);
            ps.push(f.visibility_std);
        }
        // Reported errors match the scatter.
        let mean = vs.iter().sum::<f64>() / seeds as f64;
        let sd = (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds as f64 - 1.0)).sqrt();
        let reported = ps.iter().sum::<f64>() / seeds as f64;
        assert!((sd / reported - 1.0).abs() < 0.25, "{sd} vs {reported}");
    }

    #[test]
    fn estimator_is_unbiased() {
        let x = grid(36, 10.0);
        let period = 180.0;
        for v in [0.5, 0.8, 1.0] {
            let n = 200;
            let fits: Vec<f64> = (0..n)
                .map(|seed| {
                    let y = poisson_curve(&x, |t| 50.0 * (1.0 + v * (2.0 * PI * t / period).cos()), seed + 1000);
                    fit_sinusoid(&x, &y, Some(period)).unwrap().visibility
                })
                .collect();
            let mean = fits.iter().sum::<f64>() / n as f64;
            let sd = (fits.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            let se = sd / (n as f64).sqrt();
            assert!((mean - v).abs() < 3.0 * se, "V={v}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn visibility_error_scales_with_counts() {
        let x = grid(36, 10.0);
        let f = |scale: f64| {
            let y: Vec<f64> = x
                .iter()
                .map(|t| scale * (1.0 + 0.8 * (2.0 * PI * t / 180.0).cos()))
                .collect();
            fit_sinusoid(&x, &y, Some(180.0)).unwrap().visibility_std
        };
        let ratio = f(20.0) / f(2000.0);
        assert!((ratio / 10.0 - 1.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn normalization_of_exact_beat() {
        let tau: Vec<f64> = (-200..=200).map(f64::from).collect();
        let d = 2.0 * PI * 0.1;
        let env: Vec<f64> = tau.iter().map(|t| 300.0 * (-t.abs() / 50.0).exp()).collect();
        let sig: Vec<f64> = tau
            .iter()
            .zip(&env)
            .map(|(t, e)| 0.5 * e * (1.0 - (d * t).cos()))
            .collect();
        let cfg = crate::detection::DetectionConfig::default();
        let eh = CoincidenceHistogram::new(tau.clone(), env.clone(), cfg).unwrap();
        let sh = CoincidenceHistogram::new(tau.clone(), sig, cfg).unwrap();
        let nb = normalize_beating(&sh, &eh, 0.5).unwrap();
        for (t, r) in nb.tau.iter().zip(&nb.ratio) {
            assert!((r - (1.0 - (d * t).cos())).abs() < 1e-12);
        }
        // Tails below the threshold are gone.
        assert!(nb
            .tau
            .iter()
            .all(|t| 300.0 * (-t.abs() / 50.0).exp() >= ENVELOPE_THRESHOLD));
        assert!(!nb.tau.contains(&180.0));
        let ph = beat_phase_extract(&nb, d).unwrap();
        assert!(phase_difference(ph.theta, PI).abs() < 1e-9);
        assert!((ph.visibility - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalization_rejects_mismatched_grids() {
        let cfg = crate::detection::DetectionConfig::default();
        let a = CoincidenceHistogram::new(vec![0.0, 1.0], vec![1.0, 1.0], cfg).unwrap();
        let b = CoincidenceHistogram::new(vec![0.0, 2.0], vec![1.0, 1.0], cfg).unwrap();
        assert!(matches!(normalize_beating(&a, &b, 0.5), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn phase_extraction_needs_two_periods() {
        let nb = NormalizedBeat {
            tau: grid(15, 1.0),
            ratio: vec![1.0; 15],
            ratio_std: vec![0.1; 15],
            envelope: vec![100.0; 15],
            prefactor: 0.5,
        };
        assert!(beat_phase_extract(&nb, 2.0 * PI * 0.1).is_err());
    }

    #[test]
    fn minima_detection() {
        let x = grid(50, 1.0);
        let y: Vec<f64> = x.iter().map(|t| 1.0 - (2.0 * PI * t / 10.0).cos()).collect();
        assert_eq!(local_minima(&x, &y, 2), vec![10.0, 20.0, 30.0, 40.0]);
    }

    proptest! {
        #[test]
        fn phases_wrap(theta in 0.0f64..(2.0 * PI)) {
            let x = grid(60, 1.0);
            let d = 2.0 * PI * 0.1;
            let make = |th: f64| NormalizedBeat {
                tau: x.clone(),
                ratio: x.iter().map(|t| 1.0 + 0.8 * (d * t - th).cos()).collect(),
                ratio_std: vec![0.05; 60],
                envelope: vec![400.0; 60],
                prefactor: 0.125,
            };
            let a = beat_phase_extract(&make(theta), d).unwrap();
            let b = beat_phase_extract(&make(theta + 2.0 * PI), d).unwrap();
            prop_assert!(phase_difference(a.theta, theta).abs() < 1e-9);
            prop_assert!(phase_difference(a.theta, b.theta).abs() < 1e-9);
            prop_assert!((a.visibility - 0.8).abs() < 1e-9);
        }
    }
}
