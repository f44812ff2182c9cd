//! Cyclic Jacobi eigensolver for small complex Hermitian matrices.
//!
//! Output is deterministic: eigenvalues descend, and each eigenvector is
//! phase-fixed so its first non-negligible component is real and positive.

use super::{re, CMat, C64};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct Eigh {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector of `values[i]`.
    pub vectors: CMat,
}

impl Eigh {
    /// `V diag(λ) V†`
    pub fn reconstruct(&self) -> CMat {
        self.map_values(|x| x)
    }

    /// Applies `f` to the spectrum: `V diag(f(λ)) V†`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> CMat {
        let n = self.values.len();
        let fl: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        CMat::from_fn(n, n, |i, j| {
            (0..n)
                .map(|k| self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)].conj())
                .sum()
        })
    }
}

pub fn eigh(m: &CMat) -> Result<Eigh> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.rows(),
            got: m.cols(),
        });
    }
    let scale = m.frobenius_norm().max(1.0);
    let dev = m.hermitian_deviation();
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }

    let n = m.rows();
    // Work on the Hermitian part so that tiny asymmetries cannot accumulate.
    let mut a = CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5);
    let mut q = CMat::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                rotate(&mut a, &mut q, p, r);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));

    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let phase = (0..n)
            .map(|i| q[(i, src)])
            .find(|z| z.norm() > 1e-12)
            .map(|z| z.conj() / z.norm())
            .unwrap_or(re(1.0));
        for i in 0..n {
            vectors[(i, col)] = q[(i, src)] * phase;
        }
    }
    Ok(Eigh { values, vectors })
}

/// One Jacobi rotation zeroing `a[p][r]`; accumulates into `q`.
fn rotate(a: &mut CMat, q: &mut CMat, p: usize, r: usize) {
    let b = a[(p, r)];
    let mag = b.norm();
    if mag < 1e-300 {
        return;
    }
    let app = a[(p, p)].re;
    let arr = a[(r, r)].re;
    // Strip the phase of the off-diagonal element, then do a real rotation.
    let phase = b / mag;
    let theta = (arr - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;

    // V restricted to (p, r): [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
    let vpp = re(cs);
    let vpr = re(sn);
    let vrp = -phase.conj() * sn;
    let vrr = phase.conj() * cs;

    let n = a.rows();
    for k in 0..n {
        let (akp, akr) = (a[(k, p)], a[(k, r)]);
        a[(k, p)] = akp * vpp + akr * vrp;
        a[(k, r)] = akp * vpr + akr * vrr;
    }
    for k in 0..n {
        let (apk, ark) = (a[(p, k)], a[(r, k)]);
        a[(p, k)] = vpp.conj() * apk + vrp.conj() * ark;
        a[(r, k)] = vpr.conj() * apk + vrr.conj() * ark;
    }
    a[(p, r)] = C64::new(0.0, 0.0);
    a[(r, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = re(a[(p, p)].re);
    a[(r, r)] = re(a[(r, r)].re);

    for k in 0..n {
        let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
        q[(k, p)] = qkp * vpp + qkr * vrp;
        q[(k, r)] = qkp * vpr + qkr * vrr;
    }
}

#[cfg(test)]
mod tests {
    use super::super::{c, CVec};
    use super::*;
    use proptest::prelude::*;

    const S2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn identity_has_unit_eigenvalues() {
        let e = eigh(&CMat::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);
        assert!(e.vectors.max_abs_diff(&CMat::identity(2)) < 1e-15);
    }

    #[test]
    fn diagonal_matrix_keeps_standard_basis() {
        let e = eigh(&CMat::diag(&[3.0, 1.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!(e.vectors.max_abs_diff(&CMat::identity(2)) < 1e-15);
    }

    #[test]
    fn ascending_diagonal_is_reordered() {
        let e = eigh(&CMat::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert!((e.vectors[(1, 0)] - re(1.0)).norm() < 1e-15);
    }

    #[test]
    fn pauli_x() {
        let x = CMat::from_row_major(2, 2, vec![re(0.0), re(1.0), re(1.0), re(0.0)]).unwrap();
        let e = eigh(&x).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
        let plus = CVec::from_real(&[S2, S2]);
        let minus = CVec::from_real(&[S2, -S2]);
        assert!(e.vectors.column(0).max_abs_diff(&plus) < 1e-12);
        assert!(e.vectors.column(1).max_abs_diff(&minus) < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMat::from_row_major(2, 2, vec![re(1.0), re(2.0), re(0.0), re(1.0)]).unwrap();
        assert!(matches!(eigh(&m), Err(Error::NotHermitian(_))));
    }

    fn hermitian(n: usize) -> impl Strategy<Value = CMat> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let g = CMat::from_row_major(n, n, v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap();
            (&g + &g.adjoint()).scale(re(0.5))
        })
    }

    proptest! {
        #[test]
        fn reconstruction_dim2(m in hermitian(2)) {
            check_decomposition(&m)?;
        }

        #[test]
        fn reconstruction_dim4(m in hermitian(4)) {
            check_decomposition(&m)?;
        }
    }

    fn check_decomposition(m: &CMat) -> std::result::Result<(), TestCaseError> {
        let e = eigh(m).unwrap();
        prop_assert!(e.reconstruct().max_abs_diff(m) < 1e-9);
        prop_assert!(e.vectors.is_unitary(1e-10));
        for w in e.values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        for k in 0..m.rows() {
            let v = e.vectors.column(k);
            let mv = m.mul_vec(&v);
            prop_assert!(mv.max_abs_diff(&v.scale(re(e.values[k]))) < 1e-9);
            let lead = v.iter().find(|z| z.norm() > 1e-12).unwrap();
            prop_assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
        }
        Ok(())
    }
}
