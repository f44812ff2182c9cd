use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optics::PolarizerState;
use crate::optimize::nelder_mead;
use crate::qalgebra::{c, eigh, CMat, PolDensityMatrix};
use crate::rng;

/// Analyzer direction on the Poincaré sphere; transmits
/// `cos(polar/2)|H> + e^{i azimuth} sin(polar/2)|V>`. A linear polarizer at
/// angle α is `(2α, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Analyzer {
    pub polar: f64,
    pub azimuth: f64,
}

impl Analyzer {
    pub fn new(polar: f64, azimuth: f64) -> Self {
        Analyzer { polar, azimuth }
    }

    pub fn linear(angle: f64) -> Self {
        Analyzer {
            polar: 2.0 * angle,
            azimuth: 0.0,
        }
    }

    pub fn state(&self) -> PolarizerState {
        PolarizerState::elliptical(self.polar, self.azimuth)
    }

    pub fn orthogonal(&self) -> PolarizerState {
        PolarizerState::elliptical(PI - self.polar, self.azimuth + PI)
    }
}

/// Correlation from the four outcome probabilities, normalized by their sum.
fn correlation(rho: &PolDensityMatrix, a: &Analyzer, b: &Analyzer) -> f64 {
    let (ap, am) = (a.state(), a.orthogonal());
    let (bp, bm) = (b.state(), b.orthogonal());
    let p = |x: &PolarizerState, y: &PolarizerState| rho.expectation(&x.ket().tensor(y.ket()));
    let (pp, pm, mp, mm) = (p(&ap, &bp), p(&ap, &bm), p(&am, &bp), p(&am, &bm));
    let sum = pp + pm + mp + mm;
    if sum <= 0.0 {
        return 0.0;
    }
    (pp - pm - mp + mm) / sum
}

/// `S = E(a,b) - E(a,b') + E(a',b) + E(a',b')`
pub fn chsh_value(rho: &PolDensityMatrix, a: &Analyzer, a2: &Analyzer, b: &Analyzer, b2: &Analyzer) -> f64 {
    correlation(rho, a, b) - correlation(rho, a, b2) + correlation(rho, a2, b) + correlation(rho, a2, b2)
}

fn pauli(k: usize) -> CMat {
    let z = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let data = match k {
        0 => vec![z, one, one, z],
        1 => vec![z, c(0.0, -1.0), c(0.0, 1.0), z],
        _ => vec![one, z, z, -one],
    };
    CMat::from_row_major(2, 2, data).expect("2x2")
}

/// `2 sqrt(m1 + m2)` from the two largest eigenvalues of `TᵀT`, where
/// `T_ij = tr(ρ σ_i ⊗ σ_j)`.
pub fn horodecki_s_max(rho: &PolDensityMatrix) -> f64 {
    let mut t = [[0.0; 3]; 3];
    for (i, row) in t.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let op = pauli(i).kron(&pauli(j));
            *v = (rho.matrix() * &op).trace().re;
        }
    }
    let m = CMat::from_fn(3, 3, |i, j| c((0..3).map(|k| t[k][i] * t[k][j]).sum(), 0.0));
    let e = eigh(&m).expect("TᵀT is symmetric");
    2.0 * (e.values[0].max(0.0) + e.values[1].max(0.0)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    /// Analytic optimum over all projective analyzers.
    pub s_max: f64,
    /// Best `|S|` found by direct search over the analyzer angles.
    pub s_direct: f64,
    /// Signed `S` at `angles`.
    pub s_at_angles: f64,
    /// `[a, a', b, b']`
    pub angles: [Analyzer; 4],
}

impl ChshResult {
    pub fn violates_local_bound(&self) -> bool {
        self.s_max > 2.0
    }

    pub fn agreement(&self) -> f64 {
        (self.s_max - self.s_direct).abs()
    }
}

fn angles_from(x: &[f64]) -> [Analyzer; 4] {
    [
        Analyzer::new(x[0], x[1]),
        Analyzer::new(x[2], x[3]),
        Analyzer::new(x[4], x[5]),
        Analyzer::new(x[6], x[7]),
    ]
}

/// Maximizes `|S|`. The analytic bound and the direct search are computed
/// independently; compare them with [`ChshResult::agreement`].
pub fn chsh_optimize(rho: &PolDensityMatrix) -> ChshResult {
    let s_max = horodecki_s_max(rho);
    let neg_abs = |x: &[f64]| {
        let a = angles_from(x);
        -chsh_value(rho, &a[0], &a[1], &a[2], &a[3]).abs()
    };

    let mut starts: Vec<Vec<f64>> = vec![
        [
            0.0,
            0.0,
            2.0 * FRAC_PI_4,
            0.0,
            2.0 * FRAC_PI_8,
            0.0,
            6.0 * FRAC_PI_8,
            0.0,
        ]
        .to_vec(),
        [
            0.0,
            0.0,
            PI / 2.0,
            PI / 2.0,
            PI / 4.0,
            PI / 4.0,
            3.0 * PI / 4.0,
            PI / 4.0,
        ]
        .to_vec(),
    ];
    let mut gen = rng::substream(0x6368_7368, 0, 0);
    for _ in 0..6 {
        starts.push((0..8).map(|_| gen.random_range(0.0..2.0 * PI)).collect());
    }

    let mut best_x = starts[0].clone();
    let mut best_f = f64::INFINITY;
    for x0 in &starts {
        let mut r = nelder_mead(neg_abs, x0, 0.4, 6000, 1e-14);
        // Restarts shake the simplex out of premature collapse.
        for step in [0.1, 0.02, 0.005] {
            let again = nelder_mead(neg_abs, &r.x, step, 4000, 1e-15);
            if again.value < r.value {
                r = again;
            }
        }
        if r.value < best_f {
            best_f = r.value;
            best_x = r.x;
        }
    }
    let angles = angles_from(&best_x);
    ChshResult {
        s_max,
        s_direct: -best_f,
        s_at_angles: chsh_value(rho, &angles[0], &angles[1], &angles[2], &angles[3]),
        angles,
    }
}
