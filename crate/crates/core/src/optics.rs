//! Polarization optics and construction of the post-beam-splitter two-photon states.
//!
//! A two-photon state lives on port-3 polarization ⊗ port-4 polarization ⊗
//! frequency branch. Branch 0 means the photon leaving port 3 carries the
//! +δ shift, branch 1 means the photon leaving port 4 carries it. Both
//! branches therefore hold the same total shift; the index only records
//! which photon was shifted.
//!
//! With δ = 0 the two branches are the same frequency mode, so states built
//! from a zero-shift source are stored entirely in branch 0.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qalgebra::{c, re, CMat, CVec, C64};

pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pol {
    H,
    V,
}

impl Pol {
    pub const ALL: [Pol; 2] = [Pol::H, Pol::V];

    pub fn index(self) -> usize {
        match self {
            Pol::H => 0,
            Pol::V => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// The port-3 photon carries +δ.
    Port3Shifted,
    /// The port-4 photon carries +δ.
    Port4Shifted,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::Port3Shifted, Branch::Port4Shifted];

    pub fn index(self) -> usize {
        match self {
            Branch::Port3Shifted => 0,
            Branch::Port4Shifted => 1,
        }
    }

    /// Frequency shifts (port 3, port 4) relative to the unshifted pair.
    pub fn shifts(self, delta: f64) -> (f64, f64) {
        match self {
            Branch::Port3Shifted => (delta, 0.0),
            Branch::Port4Shifted => (0.0, delta),
        }
    }
}

/// Which photon of the pair exits port 3. Selected downstream by the sign of τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    StokesAt3,
    StokesAt4,
}

#[inline]
fn amp_index(p3: usize, p4: usize, branch: usize) -> usize {
    p3 * 4 + p4 * 2 + branch
}

/// 2x2 polarization transform in the (H, V) basis.
#[derive(Clone, PartialEq)]
pub struct JonesOperator {
    mat: CMat,
}

impl JonesOperator {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.rows() != 2 || mat.cols() != 2 {
            return Err(Error::Dimension {
                expected: 4,
                got: mat.rows() * mat.cols(),
            });
        }
        Ok(JonesOperator { mat })
    }

    pub fn identity() -> Self {
        JonesOperator { mat: CMat::identity(2) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn apply(&self, ket: &CVec) -> CVec {
        self.mat.mul_vec(ket)
    }

    /// `self` after `first`.
    pub fn then(&self, first: &JonesOperator) -> JonesOperator {
        JonesOperator {
            mat: &self.mat * &first.mat,
        }
    }

    pub fn is_unitary(&self) -> bool {
        self.mat.is_unitary(UNITARY_TOL)
    }

    /// Matrix rescaled by a global phase so the first non-zero entry is real positive.
    pub fn phase_normalized(&self) -> CMat {
        let lead = self
            .mat
            .as_slice()
            .iter()
            .find(|z| z.norm() > 1e-12)
            .copied()
            .unwrap_or(re(1.0));
        self.mat.scale(lead.conj() / lead.norm())
    }

    /// True when the two operators differ only by a global phase.
    pub fn equals_up_to_phase(&self, other: &JonesOperator, tol: f64) -> bool {
        self.phase_normalized().max_abs_diff(&other.phase_normalized()) <= tol
    }
}

impl fmt::Debug for JonesOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JonesOperator {:?}", self.mat)
    }
}

/// Half-wave plate with its fast axis at `theta` from horizontal.
pub fn hwp(theta: f64) -> JonesOperator {
    let (s, c2) = (2.0 * theta).sin_cos();
    JonesOperator {
        mat: CMat::from_row_major(2, 2, vec![re(c2), re(s), re(s), re(-c2)]).unwrap(),
    }
}

/// Quarter-wave plate with its fast axis at `theta` from horizontal.
pub fn qwp(theta: f64) -> JonesOperator {
    let (s, co) = theta.sin_cos();
    let i = c(0.0, 1.0);
    let off = c(1.0, -1.0) * (s * co);
    let global = C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
    let mat = CMat::from_row_major(
        2,
        2,
        vec![re(co * co) + i * (s * s), off, off, re(s * s) + i * (co * co)],
    )
    .unwrap()
    .scale(global);
    JonesOperator { mat }
}

/// Normalized analyzer ket: the polarization transmitted by a polarizer.
#[derive(Clone, PartialEq)]
pub struct PolarizerState {
    ket: CVec,
}

impl PolarizerState {
    pub fn new(ket: CVec) -> Result<Self> {
        if ket.dim() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                got: ket.dim(),
            });
        }
        if !ket.is_normalized() {
            return Err(Error::NotNormalized(ket.norm_sqr()));
        }
        Ok(PolarizerState { ket })
    }

    /// Normalizes `(h, v)`; fails on the zero vector.
    pub fn from_components(h: C64, v: C64) -> Result<Self> {
        let ket = CVec::new(vec![h, v])
            .normalized()
            .ok_or_else(|| Error::InvalidParameter("zero polarization vector".into()))?;
        Ok(PolarizerState { ket })
    }

    pub fn h() -> Self {
        Self::linear(0.0)
    }

    pub fn v() -> Self {
        PolarizerState {
            ket: CVec::from_real(&[0.0, 1.0]),
        }
    }

    pub fn d() -> Self {
        PolarizerState {
            ket: CVec::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
        }
    }

    pub fn a() -> Self {
        PolarizerState {
            ket: CVec::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]),
        }
    }

    /// Right circular, `(H - iV)/sqrt(2)`: what a quarter-wave plate at +45°
    /// makes of horizontal light.
    pub fn r() -> Self {
        PolarizerState {
            ket: CVec::new(vec![re(FRAC_1_SQRT_2), c(0.0, -FRAC_1_SQRT_2)]),
        }
    }

    /// Left circular, `(H + iV)/sqrt(2)`.
    pub fn l() -> Self {
        PolarizerState {
            ket: CVec::new(vec![re(FRAC_1_SQRT_2), c(0.0, FRAC_1_SQRT_2)]),
        }
    }

    /// Linear polarizer at `angle` from horizontal.
    pub fn linear(angle: f64) -> Self {
        let (s, co) = angle.sin_cos();
        PolarizerState {
            ket: CVec::from_real(&[co, s]),
        }
    }

    /// General elliptical analyzer at Poincaré-sphere angles:
    /// `cos(polar/2)|H> + e^{i azimuth} sin(polar/2)|V>`.
    pub fn elliptical(polar: f64, azimuth: f64) -> Self {
        let (s, co) = (0.5 * polar).sin_cos();
        PolarizerState {
            ket: CVec::new(vec![re(co), C64::from_polar(s, azimuth)]),
        }
    }

    /// `(H - e^{-i theta} V)/sqrt(2)`, the complex analyzer that transfers a
    /// polarization retardance onto the frequency qubit.
    pub fn phase_analyzer(theta: f64) -> Self {
        PolarizerState {
            ket: CVec::new(vec![re(FRAC_1_SQRT_2), -C64::from_polar(FRAC_1_SQRT_2, -theta)]),
        }
    }

    /// Analyzer realized by a quarter-wave plate, then a half-wave plate, then
    /// a polarizing beam splitter transmitting H.
    pub fn from_waveplates(qwp_angle: f64, hwp_angle: f64) -> Self {
        let chain = hwp(hwp_angle).then(&qwp(qwp_angle));
        // transmitted amplitude <H|J|psi> = <J^dagger H|psi>
        let ket = chain.matrix().adjoint().mul_vec(&CVec::from_real(&[1.0, 0.0]));
        PolarizerState::new(ket).expect("wave plates are unitary")
    }

    /// Parses one of `H, V, D, A, R, L`.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "H" => Ok(Self::h()),
            "V" => Ok(Self::v()),
            "D" => Ok(Self::d()),
            "A" => Ok(Self::a()),
            "R" => Ok(Self::r()),
            "L" => Ok(Self::l()),
            other => Err(Error::Parse(format!("unknown polarization setting {other:?}"))),
        }
    }

    pub fn ket(&self) -> &CVec {
        &self.ket
    }

    /// `<self|pol>`
    pub fn overlap(&self, pol: Pol) -> C64 {
        self.ket[pol.index()].conj()
    }

    /// True when the two analyzers transmit the same polarization.
    pub fn same_as(&self, other: &PolarizerState) -> bool {
        self.ket.inner(&other.ket).norm() > 1.0 - 1e-12
    }
}

impl fmt::Debug for PolarizerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PolarizerState {:?}", self.ket)
    }
}

/// Source configuration: AOM shift δ (rad/ns) and the collection polarizations
/// of the two paths.
#[derive(Debug, Clone)]
pub struct SourceParams {
    pub delta: f64,
    pub p1: PolarizerState,
    pub p2: PolarizerState,
}

impl SourceParams {
    pub fn new(delta: f64, p1: PolarizerState, p2: PolarizerState) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "frequency shift must be >= 0, got {delta}"
            )));
        }
        Ok(SourceParams { delta, p1, p2 })
    }

    pub fn is_decoupled_in_frequency(&self) -> bool {
        self.delta == 0.0
    }
}

/// Amplitudes over (pol3 ⊗ pol4 ⊗ branch) for one time-ordering sector.
#[derive(Clone, PartialEq)]
pub struct TwoPhotonState {
    amplitudes: CVec,
    ordering: Ordering,
}

impl TwoPhotonState {
    pub fn from_amplitudes(amplitudes: CVec, ordering: Ordering) -> Result<Self> {
        if amplitudes.dim() != 8 {
            return Err(Error::Dimension {
                expected: 8,
                got: amplitudes.dim(),
            });
        }
        Ok(TwoPhotonState { amplitudes, ordering })
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn ordering(&self) -> Ordering {
        self.ordering
    }

    pub fn amplitude(&self, p3: Pol, p4: Pol, branch: Branch) -> C64 {
        self.amplitudes[amp_index(p3.index(), p4.index(), branch.index())]
    }

    pub fn inner(&self, other: &TwoPhotonState) -> C64 {
        self.amplitudes.inner(&other.amplitudes)
    }

    /// Non-zero terms as (pol3, pol4, branch, amplitude).
    pub fn terms(&self) -> Vec<(Pol, Pol, Branch, C64)> {
        let mut out = Vec::new();
        for p3 in Pol::ALL {
            for p4 in Pol::ALL {
                for b in Branch::ALL {
                    let a = self.amplitude(p3, p4, b);
                    if a.norm() > 1e-14 {
                        out.push((p3, p4, b, a));
                    }
                }
            }
        }
        out
    }

    /// Per-polarization frequency amplitudes `[a(p3,p4,0), a(p3,p4,1)]`,
    /// indexed `p3 * 2 + p4`.
    pub fn frequency_amplitudes(&self) -> [[C64; 2]; 4] {
        let mut out = [[C64::new(0.0, 0.0); 2]; 4];
        for (k, slot) in out.iter_mut().enumerate() {
            slot[0] = self.amplitudes[k * 2];
            slot[1] = self.amplitudes[k * 2 + 1];
        }
        out
    }
}

impl fmt::Debug for TwoPhotonState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TwoPhotonState({:?}) {:?}", self.ordering, self.amplitudes)
    }
}

/// Stokes-at-port-3 state after the beam splitter,
/// `(|P1>3|P2>4 ⊗ |branch 0> - |P2>3|P1>4 ⊗ |branch 1>)/sqrt(2)`.
pub fn build_hyperentangled(params: &SourceParams) -> Result<TwoPhotonState> {
    build_hyperentangled_in(params, Ordering::StokesAt3)
}

/// Same construction for either ordering sector. Swapping which photon
/// reaches port 3 leaves the polarization/branch structure unchanged.
pub fn build_hyperentangled_in(params: &SourceParams, ordering: Ordering) -> Result<TwoPhotonState> {
    let first = params.p1.ket().tensor(params.p2.ket());
    let second = params.p2.ket().tensor(params.p1.ket());
    let mut amps = CVec::zeros(8);
    if params.is_decoupled_in_frequency() {
        for k in 0..4 {
            amps[k * 2] = (first[k] - second[k]) * FRAC_1_SQRT_2;
        }
        let n = amps.norm();
        if n < 1e-12 {
            return Err(Error::DegenerateSource(
                "identical collection polarizations with zero frequency shift cancel".into(),
            ));
        }
        // Post-selection on one photon per port.
        amps = amps.scale(re(1.0 / n));
    } else {
        for k in 0..4 {
            amps[k * 2] = first[k] * FRAC_1_SQRT_2;
            amps[k * 2 + 1] = -second[k] * FRAC_1_SQRT_2;
        }
    }
    TwoPhotonState::from_amplitudes(amps, ordering)
}

/// Applies `j3` to the port-3 polarization and `j4` to port 4.
pub fn apply_local(state: &TwoPhotonState, j3: &JonesOperator, j4: &JonesOperator) -> Result<TwoPhotonState> {
    for j in [j3, j4] {
        let dev = j.matrix().unitary_deviation();
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
    }
    let (m3, m4) = (j3.matrix(), j4.matrix());
    let a = state.amplitudes();
    let mut out = CVec::zeros(8);
    for q3 in 0..2 {
        for q4 in 0..2 {
            for b in 0..2 {
                let mut acc = C64::new(0.0, 0.0);
                for p3 in 0..2 {
                    for p4 in 0..2 {
                        acc += m3[(q3, p3)] * m4[(q4, p4)] * a[amp_index(p3, p4, b)];
                    }
                }
                out[amp_index(q3, q4, b)] = acc;
            }
        }
    }
    TwoPhotonState::from_amplitudes(out, state.ordering())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Psi1,
    Psi2,
    Phi1,
    Phi2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CatalogLabel {
    pub family: Family,
    pub plus: bool,
    pub ordering: Ordering,
}

impl fmt::Display for CatalogLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = match self.family {
            Family::Psi1 => "Psi1",
            Family::Psi2 => "Psi2",
            Family::Phi1 => "Phi1",
            Family::Phi2 => "Phi2",
        };
        let sector = match self.ordering {
            Ordering::StokesAt3 => "s3,as4",
            Ordering::StokesAt4 => "as3,s4",
        };
        write!(f, "{fam}{} [{sector}]", if self.plus { '+' } else { '-' })
    }
}

/// The two polarizations (port 3, port 4) of the branch-0 term of each family.
fn family_pols(family: Family) -> (Pol, Pol) {
    match family {
        Family::Psi1 => (Pol::H, Pol::V),
        Family::Psi2 => (Pol::V, Pol::H),
        Family::Phi1 => (Pol::H, Pol::H),
        Family::Phi2 => (Pol::V, Pol::V),
    }
}

fn flip(p: Pol) -> Pol {
    match p {
        Pol::H => Pol::V,
        Pol::V => Pol::H,
    }
}

/// One catalog state: `(|a,+δ>3|b>4 ± |ā>3|b̄,+δ>4)/sqrt(2)` with (a, b) set by the family.
pub fn catalog_state(label: CatalogLabel) -> TwoPhotonState {
    let (a, b) = family_pols(label.family);
    let s = FRAC_1_SQRT_2;
    let mut amps = CVec::zeros(8);
    amps[amp_index(a.index(), b.index(), 0)] = re(s);
    amps[amp_index(flip(a).index(), flip(b).index(), 1)] = re(if label.plus { s } else { -s });
    TwoPhotonState::from_amplitudes(amps, label.ordering).expect("dimension 8")
}

/// The eight hyperentangled states of one ordering sector.
pub fn catalog_states(ordering: Ordering) -> Vec<(CatalogLabel, TwoPhotonState)> {
    let mut out = Vec::with_capacity(8);
    for family in [Family::Psi1, Family::Psi2, Family::Phi1, Family::Phi2] {
        for plus in [true, false] {
            let label = CatalogLabel { family, plus, ordering };
            out.push((label, catalog_state(label)));
        }
    }
    out
}

/// All sixteen states, Stokes-at-3 sector first.
pub fn catalog_all() -> Vec<(CatalogLabel, TwoPhotonState)> {
    let mut all = catalog_states(Ordering::StokesAt3);
    all.extend(catalog_states(Ordering::StokesAt4));
    all
}

/// Projects both polarizations onto analyzers, leaving the (unnormalized)
/// frequency-qubit amplitudes and the projection success probability.
pub fn project_analyzers(state: &TwoPhotonState, p3: &PolarizerState, p4: &PolarizerState) -> (CVec, f64) {
    let mut freq = CVec::zeros(2);
    for b in Branch::ALL {
        let mut acc = C64::new(0.0, 0.0);
        for q3 in Pol::ALL {
            for q4 in Pol::ALL {
                acc += p3.overlap(q3) * p4.overlap(q4) * state.amplitude(q3, q4, b);
            }
        }
        freq[b.index()] = acc;
    }
    let prob = freq.norm_sqr();
    (freq, prob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalgebra::partial_trace_frequency;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const S2: f64 = FRAC_1_SQRT_2;
    const DELTA: f64 = 2.0 * PI * 0.1;

    fn hv(delta: f64) -> SourceParams {
        SourceParams::new(delta, PolarizerState::h(), PolarizerState::v()).unwrap()
    }

    #[test]
    fn hwp_special_angles() {
        assert!(hwp(0.0).matrix().max_abs_diff(&CMat::diag(&[1.0, -1.0])) < 1e-15);
        let swap = CMat::from_row_major(2, 2, vec![re(0.0), re(1.0), re(1.0), re(0.0)]).unwrap();
        assert!(hwp(PI / 4.0).matrix().max_abs_diff(&swap) < 1e-15);
        let out = hwp(PI / 8.0).apply(&CVec::from_real(&[1.0, 0.0]));
        assert!(out.max_abs_diff(&CVec::from_real(&[S2, S2])) < 1e-15);
    }

    #[test]
    fn qwp_special_angles() {
        let q0 = JonesOperator::new(CMat::from_row_major(2, 2, vec![re(1.0), re(0.0), re(0.0), c(0.0, 1.0)]).unwrap())
            .unwrap();
        assert!(qwp(0.0).equals_up_to_phase(&q0, 1e-15));
        let out = qwp(PI / 4.0).apply(&CVec::from_real(&[1.0, 0.0]));
        let r = PolarizerState::r();
        assert!((out.inner(r.ket()).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_quarter_waves_make_a_half_wave() {
        for k in 0..16 {
            let theta = k as f64 * PI / 16.0;
            let qq = qwp(theta).then(&qwp(theta));
            assert!(qq.equals_up_to_phase(&hwp(theta), 1e-14), "theta = {theta}");
        }
    }

    proptest! {
        #[test]
        fn wave_plates_are_unitary(theta in -7.0f64..7.0) {
            prop_assert!(hwp(theta).is_unitary());
            prop_assert!(qwp(theta).is_unitary());
        }

        #[test]
        fn apply_local_preserves_norm(t3 in -4.0f64..4.0, t4 in -4.0f64..4.0, k in 0usize..16) {
            let state = &catalog_all()[k].1;
            let out = apply_local(state, &qwp(t3).then(&hwp(t4)), &hwp(t3 - t4)).unwrap();
            prop_assert!((out.amplitudes().norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn waveplate_analyzers_reach_circular_states() {
        // QWP at 45° then a horizontal polarizer transmits one circular state.
        let p = PolarizerState::from_waveplates(PI / 4.0, 0.0);
        assert!(p.same_as(&PolarizerState::l()) || p.same_as(&PolarizerState::r()));
        let p = PolarizerState::from_waveplates(-PI / 4.0, 0.0);
        assert!(p.same_as(&PolarizerState::l()) || p.same_as(&PolarizerState::r()));
        // D is an eigenpolarization of a QWP at 45°.
        let p = PolarizerState::from_waveplates(PI / 4.0, PI / 8.0);
        assert!(p.same_as(&PolarizerState::d()));
    }

    #[test]
    fn hyperentangled_state_amplitudes() {
        let s = build_hyperentangled(&hv(DELTA)).unwrap();
        let mut expected = CVec::zeros(8);
        expected[amp_index(0, 1, 0)] = re(S2);
        expected[amp_index(1, 0, 1)] = re(-S2);
        assert!(s.amplitudes().max_abs_diff(&expected) < 1e-15);
        assert_eq!(s.ordering(), Ordering::StokesAt3);
    }

    #[test]
    fn zero_shift_collapses_to_singlet() {
        let s = build_hyperentangled(&hv(0.0)).unwrap();
        let rho = partial_trace_frequency(&s).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!((rho.expectation(&crate::fixtures::singlet()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_polarizations_give_frequency_bell_state() {
        let params = SourceParams::new(DELTA, PolarizerState::d(), PolarizerState::d()).unwrap();
        let s = build_hyperentangled(&params).unwrap();
        // |DD> ⊗ (|0> - |1>)/sqrt(2)
        let dd = PolarizerState::d().ket().tensor(PolarizerState::d().ket());
        let bell = CVec::from_real(&[S2, -S2]);
        let expected = dd.tensor(&bell);
        assert!(s.amplitudes().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn identical_polarizations_without_shift_are_rejected() {
        let params = SourceParams::new(0.0, PolarizerState::d(), PolarizerState::d()).unwrap();
        assert!(matches!(build_hyperentangled(&params), Err(Error::DegenerateSource(_))));
    }

    #[test]
    fn negative_shift_is_rejected() {
        assert!(SourceParams::new(-1.0, PolarizerState::h(), PolarizerState::v()).is_err());
    }

    #[test]
    fn both_branches_carry_the_full_shift() {
        for b in Branch::ALL {
            let (s3, s4) = b.shifts(DELTA);
            assert_eq!(s3 + s4, DELTA);
        }
        assert_ne!(Branch::Port3Shifted.shifts(DELTA), Branch::Port4Shifted.shifts(DELTA));
    }

    #[test]
    fn catalog_is_orthonormal() {
        for ordering in [Ordering::StokesAt3, Ordering::StokesAt4] {
            let states = catalog_states(ordering);
            assert_eq!(states.len(), 8);
            for (i, (_, a)) in states.iter().enumerate() {
                for (j, (_, b)) in states.iter().enumerate() {
                    let g = a.inner(b);
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((g - re(target)).norm() < 1e-12, "gram[{i}][{j}] = {g}");
                }
            }
        }
    }

    #[test]
    fn catalog_states_have_two_equal_weight_terms() {
        for (label, s) in catalog_all() {
            let terms = s.terms();
            assert_eq!(terms.len(), 2, "{label}");
            for (_, _, _, a) in terms {
                assert!((a.norm() - S2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn psi1_minus_is_the_source_state() {
        let label = CatalogLabel {
            family: Family::Psi1,
            plus: false,
            ordering: Ordering::StokesAt3,
        };
        let built = build_hyperentangled(&hv(DELTA)).unwrap();
        assert_eq!(catalog_state(label), built);
    }

    fn by_label(family: Family, plus: bool) -> TwoPhotonState {
        catalog_state(CatalogLabel {
            family,
            plus,
            ordering: Ordering::StokesAt3,
        })
    }

    #[test]
    fn half_wave_mappings_between_families() {
        let swap = hwp(PI / 4.0);
        let id = JonesOperator::identity();
        for plus in [true, false] {
            let psi1 = by_label(Family::Psi1, plus);
            let port3 = apply_local(&psi1, &swap, &id).unwrap();
            assert!(
                port3
                    .amplitudes()
                    .max_abs_diff(by_label(Family::Phi2, plus).amplitudes())
                    < 1e-15
            );
            let port4 = apply_local(&psi1, &id, &swap).unwrap();
            assert!(
                port4
                    .amplitudes()
                    .max_abs_diff(by_label(Family::Phi1, plus).amplitudes())
                    < 1e-15
            );
            let both = apply_local(&psi1, &swap, &swap).unwrap();
            assert!(
                both.amplitudes()
                    .max_abs_diff(by_label(Family::Psi2, plus).amplitudes())
                    < 1e-15
            );
        }
    }

    #[test]
    fn apply_local_identity_is_noop() {
        let s = build_hyperentangled(&hv(DELTA)).unwrap();
        let out = apply_local(&s, &JonesOperator::identity(), &JonesOperator::identity()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn apply_local_rejects_non_unitary() {
        let s = build_hyperentangled(&hv(DELTA)).unwrap();
        let bad = JonesOperator::new(CMat::diag(&[1.0, 0.5])).unwrap();
        assert!(matches!(
            apply_local(&s, &bad, &JonesOperator::identity()),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn coupled_catalog_states_have_no_polarization_coherence() {
        for (label, s) in catalog_all() {
            let rho = partial_trace_frequency(&s).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    if i != j {
                        assert!(rho.get(i, j).norm() < 1e-12, "{label}");
                    }
                }
            }
        }
    }

    #[test]
    fn phase_analyzer_projection() {
        let s = build_hyperentangled(&hv(DELTA)).unwrap();
        for k in 0..8 {
            let theta = k as f64 * PI / 4.0;
            let (f, p) = project_analyzers(&s, &PolarizerState::phase_analyzer(theta), &PolarizerState::d());
            let k0 = 1.0 / (2.0 * 2f64.sqrt());
            assert!((f[0] - re(k0)).norm() < 1e-15);
            assert!((f[1] - C64::from_polar(k0, theta)).norm() < 1e-15);
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn rectilinear_projections() {
        let s = build_hyperentangled(&hv(DELTA)).unwrap();
        let (f, p) = project_analyzers(&s, &PolarizerState::h(), &PolarizerState::h());
        assert_eq!(p, 0.0);
        assert!(f.norm() == 0.0);
        let (f, p) = project_analyzers(&s, &PolarizerState::h(), &PolarizerState::v());
        assert!((f[0] - re(S2)).norm() < 1e-15 && f[1].norm() < 1e-15);
        assert!((p - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn projection_probability_bounded(k in 0usize..16, a in -4.0f64..4.0, b in -4.0f64..4.0, ph in -4.0f64..4.0) {
            let s = &catalog_all()[k].1;
            let (f, p) = project_analyzers(s, &PolarizerState::elliptical(a, ph), &PolarizerState::linear(b));
            prop_assert!(p <= 1.0 + 1e-12);
            prop_assert!((p - f.norm_sqr()).abs() < 1e-15);
        }

        #[test]
        fn singlet_scan_follows_half_sine_squared(phi3 in -3.2f64..3.2, phi in -3.2f64..3.2) {
            let s = build_hyperentangled(&hv(0.0)).unwrap();
            let (_, p) = project_analyzers(&s, &PolarizerState::linear(phi3), &PolarizerState::linear(phi));
            prop_assert!((p - 0.5 * (phi - phi3).sin().powi(2)).abs() < 1e-12);
        }
    }
}
