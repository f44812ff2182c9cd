use super::{eigh, re, CMat, CVec, C64, NORM_TOL};
use crate::error::{Error, Result};
use crate::optics::TwoPhotonState;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

/// Two-qubit polarization state in the basis order (HH, HV, VH, VV).
///
/// Construction validates Hermiticity, unit trace and positivity, so every
/// value of this type is a physical state.
#[derive(Clone, PartialEq)]
pub struct PolDensityMatrix {
    mat: CMat,
}

impl PolDensityMatrix {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.rows() != 4 || mat.cols() != 4 {
            return Err(Error::Dimension {
                expected: 16,
                got: mat.rows() * mat.cols(),
            });
        }
        let dev = mat.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NotPhysical(format!("trace {tr}")));
        }
        let e = eigh(&mat)?;
        let min = e.values[3];
        if min < -PSD_TOL {
            return Err(Error::NotPhysical(format!("negative eigenvalue {min:e}")));
        }
        Ok(PolDensityMatrix { mat })
    }

    /// Builds a density matrix from a row-major 4x4 array of (re, im) pairs.
    pub fn from_pairs(entries: &[[(f64, f64); 4]; 4]) -> Result<Self> {
        Self::new(CMat::from_fn(4, 4, |i, j| C64::new(entries[i][j].0, entries[i][j].1)))
    }

    pub fn pure(psi: &CVec) -> Result<Self> {
        if psi.dim() != 4 {
            return Err(Error::Dimension {
                expected: 4,
                got: psi.dim(),
            });
        }
        if !psi.is_normalized() {
            return Err(Error::NotNormalized(psi.norm_sqr()));
        }
        Self::new(psi.outer(psi))
    }

    pub fn maximally_mixed() -> Self {
        PolDensityMatrix {
            mat: CMat::identity(4).scale(re(0.25)),
        }
    }

    /// `p |psi><psi| + (1 - p) I/4`
    pub fn werner(psi: &CVec, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("Werner weight {p} outside [0, 1]")));
        }
        let pure = Self::pure(psi)?;
        let mixed = CMat::identity(4).scale(re((1.0 - p) / 4.0));
        Self::new(&pure.mat.scale(re(p)) + &mixed)
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// `<psi|rho|psi>`
    pub fn expectation(&self, psi: &CVec) -> f64 {
        self.mat.sandwich(psi, psi).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.mat).map(|e| e.values).unwrap_or_default()
    }

    pub fn sqrt(&self) -> CMat {
        eigh(&self.mat)
            .expect("density matrix is Hermitian by construction")
            .map_values(|x| x.max(0.0).sqrt())
    }
}

impl std::fmt::Debug for PolDensityMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PolDensityMatrix {:?}", self.mat)
    }
}

/// Root fidelity `sqrt(<psi|rho|psi>)` against a pure target state.
pub fn fidelity_pure(rho: &PolDensityMatrix, psi: &CVec) -> Result<f64> {
    if psi.dim() != 4 {
        return Err(Error::Dimension {
            expected: 4,
            got: psi.dim(),
        });
    }
    if (psi.norm_sqr() - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(psi.norm_sqr()));
    }
    Ok(rho.expectation(psi).clamp(0.0, 1.0).sqrt())
}

/// Uhlmann root fidelity `tr sqrt(sqrt(rho) sigma sqrt(rho))`.
///
/// Reduces to [`fidelity_pure`] when `sigma` is pure.
pub fn fidelity(rho: &PolDensityMatrix, sigma: &PolDensityMatrix) -> f64 {
    let s = rho.sqrt();
    let inner = &(&s * sigma.matrix()) * &s;
    let inner = CMat::from_fn(4, 4, |i, j| (inner[(i, j)] + inner[(j, i)].conj()) * 0.5);
    let e = eigh(&inner).expect("hermitized product");
    // Eigenvalues at rounding level would be inflated by the square root.
    let floor = 1e-14 * e.values[0].abs().max(f64::MIN_POSITIVE);
    e.values
        .iter()
        .filter(|&&x| x > floor)
        .map(|&x| x.sqrt())
        .sum::<f64>()
        .min(1.0)
}

/// `1/2 ||rho - sigma||_1`
pub fn trace_distance(rho: &PolDensityMatrix, sigma: &PolDensityMatrix) -> f64 {
    let d = rho.matrix() - sigma.matrix();
    let e = eigh(&d).expect("difference of Hermitian matrices");
    0.5 * e.values.iter().map(|x| x.abs()).sum::<f64>()
}

/// Traces out the frequency-branch index of a two-photon state.
///
/// Amplitudes are indexed `pol3 * 4 + pol4 * 2 + branch`; the two branches
/// are orthogonal frequency modes so they contribute incoherently.
pub fn partial_trace_frequency(state: &TwoPhotonState) -> Result<PolDensityMatrix> {
    let amps = state.amplitudes();
    let n2 = amps.norm_sqr();
    if (n2 - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(n2));
    }
    let mut m = CMat::zeros(4, 4);
    for row in 0..4 {
        for col in 0..4 {
            m[(row, col)] = (0..2).map(|b| amps[row * 2 + b] * amps[col * 2 + b].conj()).sum();
        }
    }
    PolDensityMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{reference_density_matrix, singlet};
    use crate::optics::{build_hyperentangled, Ordering, PolarizerState, SourceParams, TwoPhotonState};
    use proptest::prelude::*;

    #[test]
    fn fidelity_of_pure_state_with_itself() {
        let psi = singlet();
        let rho = PolDensityMatrix::pure(&psi).unwrap();
        assert!((fidelity_pure(&rho, &psi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_maximally_mixed_with_singlet() {
        let f = fidelity_pure(&PolDensityMatrix::maximally_mixed(), &singlet()).unwrap();
        assert!((f - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_reference_matrix() {
        let rho = reference_density_matrix();
        let overlap = rho.expectation(&singlet());
        assert!((overlap - 0.78).abs() < 1e-12);
        let f = fidelity_pure(&rho, &singlet()).unwrap();
        assert!((f - 0.883).abs() < 0.002, "{f}");
    }

    #[test]
    fn fidelity_rejects_unnormalized_target() {
        let psi = singlet().scale(re(1.1));
        assert!(matches!(
            fidelity_pure(&PolDensityMatrix::maximally_mixed(), &psi),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn uhlmann_agrees_with_pure_formula() {
        let rho = reference_density_matrix();
        let sigma = PolDensityMatrix::pure(&singlet()).unwrap();
        let a = fidelity(&rho, &sigma);
        let b = fidelity_pure(&rho, &singlet()).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn validation_rejects_unphysical() {
        let bad = CMat::diag(&[1.2, -0.2, 0.0, 0.0]);
        assert!(matches!(PolDensityMatrix::new(bad), Err(Error::NotPhysical(_))));
        let bad_trace = CMat::diag(&[0.5, 0.2, 0.0, 0.0]);
        assert!(PolDensityMatrix::new(bad_trace).is_err());
    }

    #[test]
    fn decoupled_state_traces_to_singlet() {
        let params = SourceParams::new(0.0, PolarizerState::h(), PolarizerState::v()).unwrap();
        let state = build_hyperentangled(&params).unwrap();
        let rho = partial_trace_frequency(&state).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        let target = PolDensityMatrix::pure(&singlet()).unwrap();
        assert!(rho.matrix().max_abs_diff(target.matrix()) < 1e-12);
    }

    #[test]
    fn coupled_state_traces_to_classical_mixture() {
        let params = SourceParams::new(0.2 * std::f64::consts::PI, PolarizerState::h(), PolarizerState::v()).unwrap();
        let state = build_hyperentangled(&params).unwrap();
        let rho = partial_trace_frequency(&state).unwrap();

        // Brute force: sum |a_b><a_b| over the branch index by explicit projection.
        let mut expected = CMat::zeros(4, 4);
        for b in 0..2 {
            let slice = CVec::new((0..4).map(|p| state.amplitudes()[p * 2 + b]).collect());
            expected = &expected + &slice.outer(&slice);
        }
        assert!(rho.matrix().max_abs_diff(&expected) < 1e-15);
        assert!(rho.matrix().max_abs_diff(&CMat::diag(&[0.0, 0.5, 0.5, 0.0])) < 1e-12);
        assert!((rho.purity() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_state_single_branch_is_pure() {
        let mut amps = CVec::zeros(8);
        amps[2] = re(1.0); // (H, V, branch 0)
        let state = TwoPhotonState::from_amplitudes(amps, Ordering::StokesAt3).unwrap();
        let rho = partial_trace_frequency(&state).unwrap();
        assert!(rho.matrix().max_abs_diff(&CMat::diag(&[0.0, 1.0, 0.0, 0.0])) < 1e-15);
    }

    fn random_state() -> impl Strategy<Value = CVec> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4).prop_filter_map("non-zero", |v| {
            CVec::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect()).normalized()
        })
    }

    proptest! {
        #[test]
        fn pure_state_fidelity_is_one(psi in random_state()) {
            let rho = PolDensityMatrix::pure(&psi).unwrap();
            prop_assert!((fidelity_pure(&rho, &psi).unwrap() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn fidelity_below_one_for_other_pure_state(psi in random_state(), phi in random_state()) {
            let rho = PolDensityMatrix::pure(&phi).unwrap();
            let f = fidelity_pure(&rho, &psi).unwrap();
            let diff = rho.matrix().max_abs_diff(&psi.outer(&psi));
            // F = 1 exactly when rho = |psi><psi|
            prop_assert_eq!(f > 1.0 - 1e-9, diff < 1e-4);
        }

        #[test]
        fn partial_trace_preserves_trace(v in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 8)) {
            let amps = CVec::new(v.into_iter().map(|(a, b)| C64::new(a, b)).collect());
            prop_assume!(amps.norm() > 1e-3);
            let amps = amps.normalized().unwrap();
            let state = TwoPhotonState::from_amplitudes(amps, Ordering::StokesAt3).unwrap();
            let rho = partial_trace_frequency(&state).unwrap();
            prop_assert!((rho.matrix().trace().re - state.amplitudes().norm_sqr()).abs() < 1e-12);
        }
    }
}
