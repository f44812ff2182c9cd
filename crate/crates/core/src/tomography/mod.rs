//! Two-qubit polarization tomography: projective settings, count records,
//! maximum-likelihood reconstruction, CHSH analysis and bootstrap errors.

mod bootstrap;
mod chsh;
mod mle;

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::detection::DetectionConfig;
use crate::error::{Error, Result};
use crate::optics::PolarizerState;
use crate::qalgebra::{c, CMat, CVec, PolDensityMatrix};
use crate::rng;

pub use bootstrap::{tomo_error_bars, BootstrapSummary};
pub use chsh::{chsh_optimize, chsh_value, horodecki_s_max, Analyzer, ChshResult};
pub use mle::{design_rank, mle_reconstruct, mle_reconstruct_with, CholeskyParams, MleFit, MleOptions};

/// RNG tag for tomography count sampling.
const TOMO_TAG: u32 = 0x746f_6d6f;

/// Single-photon analyzer settings reachable with a quarter-wave plate,
/// half-wave plate and polarizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Basis {
    pub const ALL: [Basis; 6] = [Basis::H, Basis::V, Basis::D, Basis::A, Basis::R, Basis::L];

    pub fn state(self) -> PolarizerState {
        match self {
            Basis::H => PolarizerState::h(),
            Basis::V => PolarizerState::v(),
            Basis::D => PolarizerState::d(),
            Basis::A => PolarizerState::a(),
            Basis::R => PolarizerState::r(),
            Basis::L => PolarizerState::l(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::H => "H",
            Basis::V => "V",
            Basis::D => "D",
            Basis::A => "A",
            Basis::R => "R",
            Basis::L => "L",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Basis::ALL
            .into_iter()
            .find(|b| b.name() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown polarization setting {s:?}")))
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TomoSetting {
    pub analyzer3: Basis,
    pub analyzer4: Basis,
}

impl TomoSetting {
    pub fn new(analyzer3: Basis, analyzer4: Basis) -> Self {
        TomoSetting { analyzer3, analyzer4 }
    }

    /// `|s3> ⊗ |s4>` in the (HH, HV, VH, VV) basis.
    pub fn ket(&self) -> CVec {
        self.analyzer3.state().ket().tensor(self.analyzer4.state().ket())
    }
}

impl fmt::Display for TomoSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.analyzer3, self.analyzer4)
    }
}

/// The sixteen product settings {H, V, D, R} ⊗ {H, V, D, R}.
pub fn canonical_settings() -> Vec<TomoSetting> {
    let single = [Basis::H, Basis::V, Basis::D, Basis::R];
    let mut out = Vec::with_capacity(16);
    for a in single {
        for b in single {
            out.push(TomoSetting::new(a, b));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomoRecord {
    pub setting: TomoSetting,
    /// Coincidences; whole numbers for measured or sampled data, real-valued
    /// for noiseless expectations.
    pub counts: f64,
    pub exposure_s: f64,
}

impl TomoRecord {
    pub fn new(setting: TomoSetting, counts: f64, exposure_s: f64) -> Result<Self> {
        if !(counts.is_finite() && counts >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "counts must be non-negative, got {counts}"
            )));
        }
        if !(exposure_s.is_finite() && exposure_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exposure must be positive, got {exposure_s}"
            )));
        }
        Ok(TomoRecord {
            setting,
            counts,
            exposure_s,
        })
    }
}

/// `<s3 ⊗ s4|ρ|s3 ⊗ s4>`
pub fn born_probability(rho: &PolDensityMatrix, s: &TomoSetting) -> f64 {
    rho.expectation(&s.ket()).clamp(0.0, 1.0)
}

/// Noiseless records with `counts = n0 · p`.
pub fn expected_tomography(
    rho: &PolDensityMatrix,
    n0: f64,
    exposure_s: f64,
    settings: &[TomoSetting],
) -> Result<Vec<TomoRecord>> {
    settings
        .iter()
        .map(|s| TomoRecord::new(*s, n0 * born_probability(rho, s), exposure_s))
        .collect()
}

/// Poisson records with mean `N₀ p`, `N₀ = R η T`; setting `i` draws from
/// substream `(cfg.seed, tomo tag, i)`.
pub fn simulate_tomography(
    rho: &PolDensityMatrix,
    cfg: &DetectionConfig,
    settings: &[TomoSetting],
) -> Result<Vec<TomoRecord>> {
    cfg.validate()?;
    let n0 = cfg.detected_pairs();
    sample_records(rho, n0, cfg.duration_s, settings, cfg.seed)
}

/// Same as [`simulate_tomography`] with an explicit `n0` per setting.
pub fn sample_records(
    rho: &PolDensityMatrix,
    n0: f64,
    exposure_s: f64,
    settings: &[TomoSetting],
    seed: u64,
) -> Result<Vec<TomoRecord>> {
    settings
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mean = n0 * born_probability(rho, s);
            TomoRecord::new(*s, rng::poisson(seed, TOMO_TAG, i as u32, mean) as f64, exposure_s)
        })
        .collect()
}

/// CSV with header `setting3,setting4,counts,exposure_s`.
pub fn write_records_csv<W: Write>(records: &[TomoRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["setting3", "setting4", "counts", "exposure_s"])?;
    for r in records {
        wr.write_record([
            r.setting.analyzer3.name().to_string(),
            r.setting.analyzer4.name().to_string(),
            r.counts.to_string(),
            r.exposure_s.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<TomoRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["setting3", "setting4", "counts", "exposure_s"] {
        return Err(Error::Parse(format!("unexpected tomography header {headers:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = line + 2;
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing column {i}")))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {row}: {e}")))
        };
        let setting = TomoSetting::new(Basis::parse(field(0)?)?, Basis::parse(field(1)?)?);
        out.push(TomoRecord::new(setting, num(2)?, num(3)?)?);
    }
    Ok(out)
}

/// JSON layout for a reconstructed state: row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityMatrixFile {
    pub basis: [String; 4],
    pub rho: Vec<Vec<[f64; 2]>>,
}

impl DensityMatrixFile {
    pub fn from_density(rho: &PolDensityMatrix) -> Self {
        DensityMatrixFile {
            basis: ["HH", "HV", "VH", "VV"].map(String::from),
            rho: (0..4)
                .map(|i| {
                    (0..4)
                        .map(|j| {
                            let z = rho.get(i, j);
                            [z.re, z.im]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn to_density(&self) -> Result<PolDensityMatrix> {
        if self.rho.len() != 4 || self.rho.iter().any(|r| r.len() != 4) {
            return Err(Error::Parse("density matrix must be 4x4".into()));
        }
        let m = CMat::from_fn(4, 4, |i, j| c(self.rho[i][j][0], self.rho[i][j][1]));
        PolDensityMatrix::new(m)
    }
}
