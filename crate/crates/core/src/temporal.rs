//! Biphoton waveform model and the two-photon correlation functions built on it.
//!
//! Times are in ns and angular frequencies in rad/ns, so `2π × 0.1 rad/ns`
//! is a 100 MHz shift.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex64 as FftC64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qalgebra::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeShape {
    Exponential,
    DampedOscillation,
}

/// Parametric relative waveform ψ₀(τ) of a Stokes/anti-Stokes pair.
///
/// `|ψ₀(τ)|² = A · e^{-τ/τd} (1 - e^{-τ/τr}) cos²(Ωτ/2) / N` for τ > 0 and
/// zero otherwise, with `N` chosen so the integral equals the amplitude
/// scale `A`. The exponential shape has Ω = 0; a zero rise time drops the
/// rise factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiphotonEnvelope {
    pub shape: EnvelopeShape,
    pub decay_time: f64,
    pub rise_time: f64,
    #[serde(default)]
    pub osc_freq: f64,
    #[serde(default = "one")]
    pub amplitude_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for BiphotonEnvelope {
    fn default() -> Self {
        BiphotonEnvelope {
            shape: EnvelopeShape::Exponential,
            decay_time: 50.0,
            rise_time: 1.0,
            osc_freq: 0.0,
            amplitude_scale: 1.0,
        }
    }
}

/// `∫₀^∞ e^{-aτ} cos²(Ωτ/2) dτ`
fn cos2_exp_integral(a: f64, omega: f64) -> f64 {
    0.5 * (1.0 / a + a / (a * a + omega * omega))
}

impl BiphotonEnvelope {
    pub fn exponential(decay_time: f64, rise_time: f64) -> Result<Self> {
        Self {
            shape: EnvelopeShape::Exponential,
            decay_time,
            rise_time,
            osc_freq: 0.0,
            amplitude_scale: 1.0,
        }
        .validated()
    }

    pub fn damped_oscillation(decay_time: f64, rise_time: f64, osc_freq: f64) -> Result<Self> {
        Self {
            shape: EnvelopeShape::DampedOscillation,
            decay_time,
            rise_time,
            osc_freq,
            amplitude_scale: 1.0,
        }
        .validated()
    }

    /// Pure exponential whose Lorentzian spectrum has the given FWHM.
    pub fn exponential_with_bandwidth(fwhm_mhz: f64) -> Result<Self> {
        if fwhm_mhz <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {fwhm_mhz}"
            )));
        }
        Self::exponential(1e3 / (2.0 * PI * fwhm_mhz), 0.0)
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.decay_time.is_finite() && self.decay_time > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "decay time must be positive, got {}",
                self.decay_time
            )));
        }
        if !(self.rise_time.is_finite() && self.rise_time >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rise time must be >= 0, got {}",
                self.rise_time
            )));
        }
        if !(self.osc_freq.is_finite() && self.osc_freq >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "oscillation frequency must be >= 0, got {}",
                self.osc_freq
            )));
        }
        if !(self.amplitude_scale.is_finite() && self.amplitude_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "amplitude scale must be positive, got {}",
                self.amplitude_scale
            )));
        }
        Ok(self)
    }

    fn omega(&self) -> f64 {
        match self.shape {
            EnvelopeShape::Exponential => 0.0,
            EnvelopeShape::DampedOscillation => self.osc_freq,
        }
    }

    fn norm(&self) -> f64 {
        let a = 1.0 / self.decay_time;
        let w = self.omega();
        if self.rise_time > 0.0 {
            cos2_exp_integral(a, w) - cos2_exp_integral(a + 1.0 / self.rise_time, w)
        } else {
            cos2_exp_integral(a, w)
        }
    }

    /// ψ₀(τ), real-valued; negative lobes appear only for the oscillating shape.
    pub fn amplitude(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 0.0;
        }
        let rise = if self.rise_time > 0.0 {
            -(-tau / self.rise_time).exp_m1()
        } else {
            1.0
        };
        let weight = self.amplitude_scale * (-tau / self.decay_time).exp() * rise / self.norm();
        weight.sqrt() * (0.5 * self.omega() * tau).cos()
    }

    /// `G⁽²⁾₀(τ) = |ψ₀(τ)|²` in 1/ns.
    pub fn g2(&self, tau: f64) -> f64 {
        let a = self.amplitude(tau);
        a * a
    }
}

/// Free-function form of [`BiphotonEnvelope::g2`].
pub fn envelope_eval(env: &BiphotonEnvelope, tau: f64) -> Result<f64> {
    let env = env.validated()?;
    Ok(env.g2(tau))
}

/// Anything that yields a correlation envelope over signed τ.
pub trait Envelope {
    fn g2(&self, tau: f64) -> f64;
    fn amplitude(&self, tau: f64) -> f64;
}

impl Envelope for BiphotonEnvelope {
    fn g2(&self, tau: f64) -> f64 {
        BiphotonEnvelope::g2(self, tau)
    }
    fn amplitude(&self, tau: f64) -> f64 {
        BiphotonEnvelope::amplitude(self, tau)
    }
}

/// Both time orderings: `forward` for τ > 0 (Stokes detected first at the
/// port-3 side), `backward` mirrored onto τ < 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedEnvelope {
    pub forward: BiphotonEnvelope,
    pub backward: BiphotonEnvelope,
}

impl TwoSidedEnvelope {
    pub fn symmetric(env: BiphotonEnvelope) -> Self {
        TwoSidedEnvelope {
            forward: env,
            backward: env,
        }
    }
}

impl Envelope for TwoSidedEnvelope {
    fn g2(&self, tau: f64) -> f64 {
        if tau > 0.0 {
            self.forward.g2(tau)
        } else {
            self.backward.g2(-tau)
        }
    }
    fn amplitude(&self, tau: f64) -> f64 {
        if tau > 0.0 {
            self.forward.amplitude(tau)
        } else {
            self.backward.amplitude(-tau)
        }
    }
}

/// FWHM in MHz of `|FT{ψ₀}|²`, measured on the main spectral lobe.
pub fn spectral_bandwidth(env: &BiphotonEnvelope) -> Result<f64> {
    let env = env.validated()?;
    let tau_d = env.decay_time;
    let mut dt = tau_d / 50.0;
    if env.rise_time > 0.0 {
        dt = dt.min(env.rise_time / 10.0);
    }
    let w = env.omega();
    if w > 0.0 {
        dt = dt.min(2.0 * PI / w / 40.0);
    }
    let span = 40.0 * tau_d;
    let samples = (span / dt).ceil() as usize;
    // Resolution well below the narrowest possible (Lorentzian) width.
    let lorentz_ghz = 1.0 / (2.0 * PI * tau_d);
    let needed = (500.0 / (lorentz_ghz * dt)).ceil() as usize;
    let n = needed.max(samples).next_power_of_two();

    let mut buf: Vec<FftC64> = (0..n)
        .map(|k| {
            if k < samples {
                FftC64::new(env.amplitude((k as f64 + 0.5) * dt) * dt, 0.0)
            } else {
                FftC64::new(0.0, 0.0)
            }
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    // Reorder to ascending frequency.
    let half = n / 2;
    let power: Vec<f64> = (0..n).map(|k| buf[(k + half) % n].norm_sqr()).collect();
    let df = 1.0 / (n as f64 * dt);
    let freq = |k: f64| (k - half as f64) * df;

    let (peak_idx, &peak) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    let half_max = 0.5 * peak;

    let mut hi = peak_idx;
    while hi + 1 < n && power[hi + 1] >= half_max {
        hi += 1;
    }
    let mut lo = peak_idx;
    while lo > 0 && power[lo - 1] >= half_max {
        lo -= 1;
    }
    if hi + 1 >= n || lo == 0 {
        return Err(Error::InvalidParameter("spectrum does not fall to half maximum".into()));
    }
    let right = hi as f64 + (power[hi] - half_max) / (power[hi] - power[hi + 1]);
    let left = lo as f64 - (power[lo] - half_max) / (power[lo] - power[lo - 1]);
    Ok((freq(right) - freq(left)) * 1e3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeatSign {
    /// `1 - cos(δτ - θ)`
    MinusCos,
    /// `1 + cos(δτ - θ)`
    PlusCosShifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatingParams {
    pub delta: f64,
    pub theta: f64,
    pub prefactor: f64,
    pub sign: BeatSign,
}

impl BeatingParams {
    /// Antisymmetric frequency Bell state behind a beam splitter:
    /// `½ G⁽²⁾₀(τ) [1 - cos δτ]`.
    pub fn antisymmetric(delta: f64) -> Self {
        BeatingParams {
            delta,
            theta: 0.0,
            prefactor: 0.5,
            sign: BeatSign::MinusCos,
        }
    }

    /// Phase-tunable frequency Bell state after the two analyzers:
    /// `⅛ G⁽²⁾₀(τ) [1 + cos(δτ - θ)]`.
    pub fn phase_shifted(delta: f64, theta: f64) -> Self {
        BeatingParams {
            delta,
            theta,
            prefactor: 0.125,
            sign: BeatSign::PlusCosShifted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.prefactor.is_finite() && self.prefactor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prefactor must be positive, got {}",
                self.prefactor
            )));
        }
        if !self.delta.is_finite() || !self.theta.is_finite() {
            return Err(Error::InvalidParameter("non-finite beat parameters".into()));
        }
        Ok(())
    }

    /// The bracket `1 ∓ cos(δτ - θ)`, in [0, 2].
    pub fn modulation(&self, tau: f64) -> f64 {
        let c = (self.delta * tau - self.theta).cos();
        match self.sign {
            BeatSign::MinusCos => 1.0 - c,
            BeatSign::PlusCosShifted => 1.0 + c,
        }
    }
}

/// Closed-form beating correlation `prefactor · G⁽²⁾₀(τ) · [1 ∓ cos(δτ - θ)]`.
pub fn beating_g2<E: Envelope + ?Sized>(env: &E, p: &BeatingParams, tau: f64) -> f64 {
    p.prefactor * env.g2(tau) * p.modulation(tau)
}

/// `i ψ₀(τ) sin(δτ/2)`, carrier phases dropped.
pub fn beating_wavefunction<E: Envelope + ?Sized>(env: &E, delta: f64, tau: f64) -> C64 {
    C64::new(0.0, env.amplitude(tau) * (0.5 * delta * tau).sin())
}

/// Cross-port correlation of a post-selected state given its frequency-qubit
/// amplitudes per polarization component:
/// `½ G⁽²⁾₀(τ) Σ_k |a_k0 + a_k1 e^{-iδτ}|²`.
///
/// The ½ is the beam-splitter post-selection loss. Pass a single component
/// after analyzer projection.
pub fn state_g2<E: Envelope + ?Sized>(env: &E, delta: f64, components: &[[C64; 2]], tau: f64) -> f64 {
    let phase = C64::from_polar(1.0, -delta * tau);
    let interference: f64 = components.iter().map(|a| (a[0] + a[1] * phase).norm_sqr()).sum();
    0.5 * env.g2(tau) * interference
}
