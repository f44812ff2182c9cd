//! Reference states used across tests, the CLI, and the acceptance suite.

use crate::qalgebra::{CVec, PolDensityMatrix};

/// Measured-style reconstruction of the zero-shift source in the basis
/// (HH, HV, VH, VV), two decimal places. Singlet fidelity 0.883, CHSH 2.19.
pub const REFERENCE_DENSITY_MATRIX: [[(f64, f64); 4]; 4] = [
    [(0.02, 0.0), (0.04, 0.01), (0.00, 0.0), (0.01, 0.03)],
    [(0.04, -0.01), (0.46, 0.0), (-0.33, 0.05), (0.02, 0.05)],
    [(0.00, 0.0), (-0.33, -0.05), (0.44, 0.0), (0.0, -0.05)],
    [(0.01, -0.03), (0.02, -0.05), (0.0, 0.05), (0.08, 0.0)],
];

pub fn reference_density_matrix() -> PolDensityMatrix {
    PolDensityMatrix::from_pairs(&REFERENCE_DENSITY_MATRIX).expect("reference matrix is physical")
}

/// `(|HV> - |VH>)/sqrt(2)`
pub fn singlet() -> CVec {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVec::from_real(&[0.0, s, -s, 0.0])
}

pub fn singlet_density() -> PolDensityMatrix {
    PolDensityMatrix::pure(&singlet()).expect("normalized")
}
