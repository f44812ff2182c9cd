use super::{born_probability, TomoRecord, TomoSetting};
use crate::error::{Error, Result};
use crate::optimize::{lbfgs, LbfgsOptions};
use crate::qalgebra::{c, CMat, CVec, PolDensityMatrix, C64};

/// Sixteen reals parametrizing a lower-triangular `T` with real diagonal:
/// entries 0..4 are the diagonal, then `(re, im)` of the strictly lower
/// entries in row-major order. `ρ = T†T / tr(T†T)` is physical for every
/// parameter vector except all-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CholeskyParams(pub [f64; 16]);

const LOWER: [(usize, usize); 6] = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];

impl CholeskyParams {
    /// `T = I/2`, the maximally mixed state.
    pub fn maximally_mixed() -> Self {
        let mut p = [0.0; 16];
        p[..4].fill(0.5);
        CholeskyParams(p)
    }

    pub fn tri(&self) -> [[C64; 4]; 4] {
        let p = &self.0;
        let mut t = [[C64::new(0.0, 0.0); 4]; 4];
        for k in 0..4 {
            t[k][k] = c(p[k], 0.0);
        }
        for (n, &(i, j)) in LOWER.iter().enumerate() {
            t[i][j] = c(p[4 + 2 * n], p[5 + 2 * n]);
        }
        t
    }

    pub fn density(&self) -> Result<PolDensityMatrix> {
        let t = self.tri();
        let norm: f64 = t.iter().flatten().map(|z| z.norm_sqr()).sum();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NotPhysical("zero Cholesky factor".into()));
        }
        // (T†T)_ij = Σ_k conj(T_ki) T_kj, then Hermitian-symmetrized.
        let m = CMat::from_fn(4, 4, |i, j| {
            let mut a = C64::new(0.0, 0.0);
            let mut b = C64::new(0.0, 0.0);
            for row in &t {
                a += row[i].conj() * row[j];
                b += row[j].conj() * row[i];
            }
            (a + b.conj()) * (0.5 / norm)
        });
        PolDensityMatrix::new(m)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MleOptions {
    pub optimizer: LbfgsOptions,
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub rho: PolDensityMatrix,
    pub params: CholeskyParams,
    /// Fitted counts scale `N₀` per setting at the mean exposure.
    pub n0: f64,
    /// `Σ [c log μ - μ]` at the optimum (count-factorial constant dropped).
    pub log_likelihood: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Profiled log-likelihood per count after each accepted iteration.
    pub trace: Vec<f64>,
}

/// Rank of the span of the setting projectors within the 16-dimensional
/// real space of 4x4 Hermitian matrices.
pub fn design_rank(settings: &[TomoSetting]) -> usize {
    let mut rows: Vec<[f64; 16]> = settings
        .iter()
        .map(|s| {
            let k = s.ket();
            let mut v = [0.0; 16];
            let mut n = 0;
            for i in 0..4 {
                for j in i..4 {
                    let z = k[i] * k[j].conj();
                    v[n] = z.re;
                    n += 1;
                    if i != j {
                        v[n] = z.im;
                        n += 1;
                    }
                }
            }
            v
        })
        .collect();
    let mut rank = 0;
    for col in 0..16 {
        let pivot = (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs()));
        let Some(p) = pivot else { break };
        if rows[p][col].abs() < 1e-10 {
            continue;
        }
        rows.swap(rank, p);
        let pr = rows[rank];
        for r in rows.iter_mut().skip(rank + 1) {
            let f = r[col] / pr[col];
            for k in col..16 {
                r[k] -= f * pr[k];
            }
        }
        rank += 1;
    }
    rank
}

struct Problem {
    kets: Vec<CVec>,
    counts: Vec<f64>,
    exposure: Vec<f64>,
    total: f64,
}

impl Problem {
    /// Negative profiled log-likelihood per count,
    /// `-(1/C) Σ cᵢ log uᵢ + log Σ eᵢ uᵢ` with `uᵢ = |T sᵢ|²`.
    fn objective(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut p = [0.0; 16];
        p.copy_from_slice(x);
        let t = CholeskyParams(p).tri();
        grad.fill(0.0);
        let mut du_sum = [0.0; 16];
        let mut u_sum = 0.0;
        let mut value = 0.0;
        let mut du = [0.0; 16];
        for ((s, &cnt), &e) in self.kets.iter().zip(&self.counts).zip(&self.exposure) {
            let mut w = [C64::new(0.0, 0.0); 4];
            for (j, wj) in w.iter_mut().enumerate() {
                for k in 0..=j {
                    *wj += t[j][k] * s[k];
                }
            }
            let u: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            for k in 0..4 {
                du[k] = 2.0 * (w[k].conj() * s[k]).re;
            }
            for (n, &(j, k)) in LOWER.iter().enumerate() {
                let g = w[j].conj() * s[k];
                du[4 + 2 * n] = 2.0 * g.re;
                du[5 + 2 * n] = -2.0 * g.im;
            }
            u_sum += e * u;
            for k in 0..16 {
                du_sum[k] += e * du[k];
            }
            if cnt > 0.0 {
                let u = u.max(1e-300);
                value -= cnt * u.ln() / self.total;
                for k in 0..16 {
                    grad[k] -= cnt * du[k] / (u * self.total);
                }
            }
        }
        value += u_sum.ln();
        for k in 0..16 {
            grad[k] += du_sum[k] / u_sum;
        }
        value
    }
}

/// Maximum-likelihood state from Poisson counts with default optimizer settings.
pub fn mle_reconstruct(records: &[TomoRecord]) -> Result<MleFit> {
    mle_reconstruct_with(records, &MleOptions::default())
}

/// Maximizes `Σ [cᵢ log μᵢ - μᵢ]`, `μᵢ = λ eᵢ pᵢ(ρ)`, over Cholesky
/// parameters. The flux `λ` enters linearly and is profiled out exactly
/// (`λ* = C / Σ eᵢ pᵢ`), which gives the same optimum as fitting it jointly.
pub fn mle_reconstruct_with(records: &[TomoRecord], opts: &MleOptions) -> Result<MleFit> {
    let settings: Vec<TomoSetting> = records.iter().map(|r| r.setting).collect();
    let rank = design_rank(&settings);
    if rank < 16 {
        return Err(Error::RankDeficient { rank, needed: 16 });
    }
    let total: f64 = records.iter().map(|r| r.counts).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParameter("tomography records contain no counts".into()));
    }
    let problem = Problem {
        kets: settings.iter().map(|s| s.ket()).collect(),
        counts: records.iter().map(|r| r.counts).collect(),
        exposure: records.iter().map(|r| r.exposure_s).collect(),
        total,
    };
    let start = CholeskyParams::maximally_mixed();
    let res = lbfgs(|x, g| problem.objective(x, g), &start.0, &opts.optimizer);

    let mut best = [0.0; 16];
    best.copy_from_slice(&res.x);
    let params = CholeskyParams(best);
    let rho = params.density()?;

    let mean_exposure = problem.exposure.iter().sum::<f64>() / records.len() as f64;
    let weighted: f64 = records
        .iter()
        .map(|r| r.exposure_s * born_probability(&rho, &r.setting))
        .sum();
    let lambda = total / weighted;
    let log_likelihood = records
        .iter()
        .map(|r| {
            let mu = lambda * r.exposure_s * born_probability(&rho, &r.setting);
            let term = if r.counts > 0.0 {
                r.counts * mu.max(1e-300).ln()
            } else {
                0.0
            };
            term - mu
        })
        .sum();

    let fit = MleFit {
        rho,
        params,
        n0: lambda * mean_exposure,
        log_likelihood,
        iterations: res.iterations,
        evaluations: res.evaluations,
        converged: res.converged,
        trace: res.trace.iter().map(|v| -v).collect(),
    };
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::NotConverged {
            evaluations: fit.evaluations,
            best: Box::new(fit),
        })
    }
}
