use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{horodecki_s_max, mle_reconstruct, MleFit, TomoRecord};
use crate::error::{Error, Result};
use crate::rng;

/// Spread of reconstructions over Poisson resamples of a record set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub resamples: usize,
    /// Element-wise standard deviation of `Re ρ` and `Im ρ`.
    pub rho_std_re: [[f64; 4]; 4],
    pub rho_std_im: [[f64; 4]; 4],
    pub s_mean: f64,
    pub s_std: f64,
}

fn std_dev(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    (xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Parametric bootstrap: each resample redraws every record as Poisson
/// around its observed count (resample `k`, record `i` use substream
/// `(seed, k + 1, i)`), reconstructs, and evaluates the CHSH optimum.
/// Resamples run in parallel; the result is independent of thread count.
pub fn tomo_error_bars(records: &[TomoRecord], n_resamples: usize, seed: u64) -> Result<BootstrapSummary> {
    if n_resamples < 2 {
        return Err(Error::InvalidParameter("bootstrap needs at least two resamples".into()));
    }
    let fits: Vec<MleFit> = (0..n_resamples)
        .into_par_iter()
        .map(|k| {
            let resampled: Vec<TomoRecord> = records
                .iter()
                .enumerate()
                .map(|(i, r)| TomoRecord {
                    counts: rng::poisson(seed, k as u32 + 1, i as u32, r.counts) as f64,
                    ..*r
                })
                .collect();
            match mle_reconstruct(&resampled) {
                Ok(fit) => Ok(fit),
                Err(Error::NotConverged { best, .. }) => Ok(*best),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let s: Vec<f64> = fits.iter().map(|f| horodecki_s_max(&f.rho)).collect();
    let mut rho_std_re = [[0.0; 4]; 4];
    let mut rho_std_im = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho_std_re[i][j] = std_dev(fits.iter().map(|f| f.rho.get(i, j).re));
            rho_std_im[i][j] = std_dev(fits.iter().map(|f| f.rho.get(i, j).im));
        }
    }
    Ok(BootstrapSummary {
        resamples: n_resamples,
        rho_std_re,
        rho_std_im,
        s_mean: s.iter().sum::<f64>() / s.len() as f64,
        s_std: std_dev(s.iter().copied()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::singlet_density;
    use crate::tomography::{canonical_settings, sample_records};

    #[test]
    fn deterministic_for_fixed_seed() {
        let recs = sample_records(&singlet_density(), 1e4, 1.0, &canonical_settings(), 3).unwrap();
        let a = tomo_error_bars(&recs, 8, 42).unwrap();
        assert_eq!(a, tomo_error_bars(&recs, 8, 42).unwrap());
    }

    #[test]
    fn singlet_s_spread_is_small() {
        let recs = sample_records(&singlet_density(), 1e4, 1.0, &canonical_settings(), 3).unwrap();
        let b = tomo_error_bars(&recs, 60, 1).unwrap();
        assert!(b.s_std < 0.05, "{}", b.s_std);
    }

    #[test]
    fn error_bars_shrink_with_counts() {
        let rho = crate::fixtures::reference_density_matrix();
        let lo = sample_records(&rho, 1e3, 1.0, &canonical_settings(), 8).unwrap();
        let hi = sample_records(&rho, 1e5, 1.0, &canonical_settings(), 8).unwrap();
        let b_lo = tomo_error_bars(&lo, 80, 2).unwrap();
        let b_hi = tomo_error_bars(&hi, 80, 2).unwrap();
        let ratio = b_lo.rho_std_re[1][2] / b_hi.rho_std_re[1][2];
        assert!((6.0..16.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rejects_single_resample() {
        let recs = sample_records(&singlet_density(), 1e4, 1.0, &canonical_settings(), 3).unwrap();
        assert!(tomo_error_bars(&recs, 1, 0).is_err());
    }
}
