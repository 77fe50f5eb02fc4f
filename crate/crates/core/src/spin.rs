//! Ground-state spin Hamiltonian of the NV center.
//!
//! Basis order is (|m_s = +1⟩, |0⟩, |−1⟩). The model keeps the secular terms
//! only: an axial magnetic offset δB_z (gyromagnetic ratio absorbed, MHz),
//! the electric couplings (Π_x, Π_y, Π_z) and the axial hyperfine shifts of
//! the host ¹⁴N and optionally one nearby ¹³C.
//!
//! The |0⟩ state decouples, so the {|±1⟩} block is solved in closed form.

use nalgebra::{Matrix3, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::NvConstants;
use crate::error::{Error, Result};

/// Electric and magnetic couplings acting on one NV, all in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalFields {
    pub pi_x: f64,
    pub pi_y: f64,
    pub pi_z: f64,
    /// Axial magnetic offset from the local spin bath.
    pub delta_bz: f64,
    /// Externally applied axial field (zero when absent).
    pub b_applied: f64,
}

impl LocalFields {
    pub fn from_pi(pi_x: f64, pi_y: f64, pi_z: f64) -> Self {
        Self {
            pi_x,
            pi_y,
            pi_z,
            ..Self::default()
        }
    }

    /// Transverse coupling magnitude Π_⊥ = √(Π_x² + Π_y²).
    pub fn pi_perp(&self) -> f64 {
        self.pi_x.hypot(self.pi_y)
    }

    /// Transverse field angle φ_E in degrees, wrapped to [0°, 360°).
    pub fn phi_e_deg(&self) -> f64 {
        wrap_deg_360(self.pi_y.atan2(self.pi_x).to_degrees())
    }

    /// Total S_z coefficient for a given nuclear configuration.
    pub fn sz_coefficient(&self, hf: &HyperfineState, consts: &NvConstants) -> f64 {
        self.delta_bz + self.b_applied + hf.axial_shift(consts)
    }
}

/// Secular coupling to one nearby ¹³C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct C13State {
    /// Secular hyperfine coupling, MHz.
    pub coupling: f64,
    /// Nuclear projection, ±½.
    pub m_c: SpinHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinHalf {
    Down,
    Up,
}

impl SpinHalf {
    pub fn value(self) -> f64 {
        match self {
            SpinHalf::Down => -0.5,
            SpinHalf::Up => 0.5,
        }
    }
}

/// Nuclear-spin configuration entering the Hamiltonian through A_zz I_z S_z.
///
/// A ¹³C projection is only meaningful together with its coupling, so both
/// live in [`C13State`]; `c13: None` means no resolved ¹³C.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperfineState {
    /// ¹⁴N projection m_I ∈ {−1, 0, +1}.
    pub m_i: i8,
    pub c13: Option<C13State>,
}

impl HyperfineState {
    pub fn new(m_i: i8) -> Result<Self> {
        if !(-1..=1).contains(&m_i) {
            return Err(Error::InvalidConfig(format!(
                "m_i must be in {{-1, 0, +1}}, got {m_i}"
            )));
        }
        Ok(Self { m_i, c13: None })
    }

    pub fn with_c13(mut self, coupling: f64, m_c: SpinHalf) -> Self {
        self.c13 = Some(C13State { coupling, m_c });
        self
    }

    /// m_I = 0, no ¹³C.
    pub fn bare() -> Self {
        Self { m_i: 0, c13: None }
    }

    /// Axial frequency shift A_zz·m_I + a_c13·m_c, MHz.
    pub fn axial_shift(&self, consts: &NvConstants) -> f64 {
        let mut shift = consts.a_zz_n14 * f64::from(self.m_i);
        if let Some(c) = self.c13 {
            shift += c.coupling * c.m_c.value();
        }
        shift
    }
}

/// Which of the two split resonances, ordered by frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Minus,
    Plus,
}

/// One microwave transition |0⟩ ↔ |±⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub frequency: f64,
    pub amplitude: f64,
    pub branch: Branch,
    pub hyperfine: HyperfineState,
}

/// Full 3×3 Hamiltonian in MHz, basis (|+1⟩, |0⟩, |−1⟩).
///
/// H = (D_gs+Π_z)S_z² + (δB_z + B + A_zz m_I + a₁₃ m_c)S_z
///   + Π_x(S_y²−S_x²) + Π_y(S_xS_y+S_yS_x)
pub fn build_hamiltonian(
    fields: &LocalFields,
    hf: &HyperfineState,
    consts: &NvConstants,
) -> Matrix3<Complex64> {
    let diag = consts.d_gs + fields.pi_z;
    let beta = fields.sz_coefficient(hf, consts);
    let zero = Complex64::new(0.0, 0.0);
    // ⟨+1|H|−1⟩ = −(Π_x + iΠ_y) from the transverse electric terms.
    let off = Complex64::new(-fields.pi_x, -fields.pi_y);
    Matrix3::new(
        Complex64::new(diag + beta, 0.0),
        zero,
        off,
        zero,
        zero,
        zero,
        off.conj(),
        zero,
        Complex64::new(diag - beta, 0.0),
    )
}

/// Resonance frequencies (f_−, f_+) of the |0⟩ ↔ {|±1⟩} transitions, MHz.
///
/// Closed form of the 2×2 block: f_± = D_gs + Π_z ± √(β² + Π_⊥²).
pub fn resonance_frequencies(
    fields: &LocalFields,
    hf: &HyperfineState,
    consts: &NvConstants,
) -> (f64, f64) {
    let beta = fields.sz_coefficient(hf, consts);
    let split = beta.hypot(fields.pi_perp());
    let center = consts.d_gs + fields.pi_z;
    (center - split, center + split)
}

/// Electric-field-mixed eigenstates over (|+1⟩, |−1⟩) for the pure-electric
/// regime (no axial magnetic or hyperfine term):
///
/// |±⟩ = (|+1⟩ ∓ e^{−iφ_E}|−1⟩)/√2
///
/// Returns (|+⟩, |−⟩); errors when Π_⊥ = 0 (mixing undefined).
pub fn dark_bright_states(
    fields: &LocalFields,
) -> Result<(Vector2<Complex64>, Vector2<Complex64>)> {
    if fields.pi_perp() == 0.0 {
        return Err(Error::DegenerateField);
    }
    let phi = fields.pi_y.atan2(fields.pi_x);
    let phase = Complex64::from_polar(1.0, -phi);
    let norm = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let plus = Vector2::new(norm, -phase * norm);
    let minus = Vector2::new(phase.conj() * norm, norm);
    Ok((plus, minus))
}

/// Mixing parameter ξ of the {|±1⟩} block for an axial term β and transverse
/// coupling Π_⊥: the |+⟩ eigenvector is ∝ (|+1⟩ − ξe^{−iφ_E}|−1⟩).
fn mixing_xi(beta: f64, pi_perp: f64) -> f64 {
    (beta.hypot(pi_perp) - beta) / pi_perp
}

/// Transition amplitudes (A_+, A_−) = |⟨0|S_x cosφ_MW + S_y sinφ_MW|±⟩|².
///
/// A_± = (1 + ξ² ∓ 2ξ cos(2φ_MW + φ_E)) / (2(1 + ξ²)), so A_+ + A_− = 1.
/// For a vanishing axial term ξ = 1 and A_± = ½ ∓ ½cos(2φ_MW + φ_E).
pub fn transition_amplitudes(
    fields: &LocalFields,
    hf: &HyperfineState,
    phi_mw_deg: f64,
    consts: &NvConstants,
) -> (f64, f64) {
    let pi_perp = fields.pi_perp();
    if pi_perp == 0.0 {
        // Unmixed |±1⟩ couple equally to any linear polarization.
        return (0.5, 0.5);
    }
    let beta = fields.sz_coefficient(hf, consts);
    let xi = mixing_xi(beta, pi_perp);
    let phase = (2.0 * phi_mw_deg.to_radians() + fields.pi_y.atan2(fields.pi_x)).cos();
    let denom = 2.0 * (1.0 + xi * xi);
    let cross = 2.0 * xi * phase;
    ((1.0 + xi * xi - cross) / denom, (1.0 + xi * xi + cross) / denom)
}

/// Resonance imbalance I = (A_+ − A_−)/(A_+ + A_−) ∈ [−1, 1].
///
/// Equals −cos(2φ_MW + φ_E) for the inner (m_I = 0) resonances and
/// −2ξcos(2φ_MW + φ_E)/(1 + ξ²) for the outer ones.
pub fn imbalance(
    fields: &LocalFields,
    hf: &HyperfineState,
    phi_mw_deg: f64,
    consts: &NvConstants,
) -> f64 {
    let (a_plus, a_minus) = transition_amplitudes(fields, hf, phi_mw_deg, consts);
    (a_plus - a_minus) / (a_plus + a_minus)
}

/// Both resonances of one hyperfine state with their transition amplitudes.
pub fn resonance_pair(
    fields: &LocalFields,
    hf: &HyperfineState,
    phi_mw_deg: f64,
    consts: &NvConstants,
) -> [Resonance; 2] {
    let (f_minus, f_plus) = resonance_frequencies(fields, hf, consts);
    let (a_plus, a_minus) = transition_amplitudes(fields, hf, phi_mw_deg, consts);
    [
        Resonance {
            frequency: f_minus,
            amplitude: a_minus,
            branch: Branch::Minus,
            hyperfine: *hf,
        },
        Resonance {
            frequency: f_plus,
            amplitude: a_plus,
            branch: Branch::Plus,
            hyperfine: *hf,
        },
    ]
}

pub(crate) fn wrap_deg_360(mut deg: f64) -> f64 {
    deg %= 360.0;
    if deg < 0.0 {
        deg += 360.0;
    }
    deg
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const C: NvConstants = NvConstants {
        d_gs: 2870.0,
        a_zz_n14: 2.16,
        d_par: 3.5e-3,
        d_perp: 0.17,
    };

    #[test]
    fn hamiltonian_identity_case() {
        let h = build_hamiltonian(&LocalFields::default(), &HyperfineState::bare(), &C);
        for (i, want) in [(0usize, 2870.0), (1, 0.0), (2, 2870.0)] {
            assert_relative_eq!(h[(i, i)].re, want);
            assert_eq!(h[(i, i)].im, 0.0);
        }
        for (i, j) in [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)] {
            assert_eq!(h[(i, j)].norm(), 0.0);
        }
    }

    #[test]
    fn hamiltonian_transverse_electric_term() {
        // Π_x(S_y²−S_x²) written out in the spin-1 basis puts −Π_x on ⟨+1|H|−1⟩.
        let fields = LocalFields::from_pi(0.65, 0.0, 0.0);
        let h = build_hamiltonian(&fields, &HyperfineState::bare(), &C);
        assert_relative_eq!(h[(0, 2)].re, -0.65);
        assert_eq!(h[(0, 2)].im, 0.0);
        assert_relative_eq!(h[(2, 0)].re, -0.65);
    }

    #[test]
    fn hamiltonian_axial_terms_add() {
        let fields = LocalFields {
            delta_bz: 1.0,
            ..Default::default()
        };
        let hf = HyperfineState::new(1).unwrap();
        let h = build_hamiltonian(&fields, &hf, &C);
        // S_z coefficient 1.0 + 2.16 = 3.16 on |±1⟩.
        assert_relative_eq!(h[(0, 0)].re, 2870.0 + 3.16);
        assert_relative_eq!(h[(2, 2)].re, 2870.0 - 3.16);
    }

    #[test]
    fn zero_field_frequencies_are_degenerate() {
        let (lo, hi) = resonance_frequencies(&LocalFields::default(), &HyperfineState::bare(), &C);
        assert_eq!((lo, hi), (2870.0, 2870.0));
    }

    #[test]
    fn nv1_like_splitting() {
        // Π_⊥ = 0.65 MHz, Π_z = 0.03 MHz: lines at 2870.03 ± 0.65.
        let fields = LocalFields::from_pi(0.65, 0.0, 0.03);
        let (lo, hi) = resonance_frequencies(&fields, &HyperfineState::bare(), &C);
        assert_relative_eq!(lo, 2869.38, epsilon = 1e-12);
        assert_relative_eq!(hi, 2870.68, epsilon = 1e-12);
    }

    #[test]
    fn mixed_axial_transverse_splitting() {
        let fields = LocalFields {
            pi_x: 0.5,
            delta_bz: 1.0,
            ..Default::default()
        };
        let (lo, hi) = resonance_frequencies(&fields, &HyperfineState::bare(), &C);
        // √(1 + 0.25) by hand.
        assert_relative_eq!(hi - 2870.0, 1.118_033_988_749_895, epsilon = 1e-12);
        assert_relative_eq!(2870.0 - lo, 1.118_033_988_749_895, epsilon = 1e-12);
    }

    #[test]
    fn dark_bright_at_phi_zero() {
        let (plus, _) = dark_bright_states(&LocalFields::from_pi(1.0, 0.0, 0.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(plus[0].re, s, epsilon = 1e-15);
        assert_relative_eq!(plus[1].re, -s, epsilon = 1e-15);
        assert_relative_eq!(plus[1].im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dark_bright_at_phi_ninety() {
        // φ_E = 90°: −e^{−iπ/2} = +i, so |+⟩ = (1, i)/√2.
        let (plus, _) = dark_bright_states(&LocalFields::from_pi(0.0, 1.0, 0.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(plus[0].re, s, epsilon = 1e-15);
        assert_relative_eq!(plus[1].re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(plus[1].im, s, epsilon = 1e-15);
    }

    #[test]
    fn dark_bright_requires_transverse_coupling() {
        assert!(matches!(
            dark_bright_states(&LocalFields::default()),
            Err(Error::DegenerateField)
        ));
    }

    #[test]
    fn fully_dark_and_balanced_amplitudes() {
        let hf = HyperfineState::bare();
        // φ_E = 0 (pi_x > 0), 2φ_MW + φ_E = 0 → (A_+, A_−) = (0, 1).
        let fields = LocalFields::from_pi(0.4, 0.0, 0.0);
        let (ap, am) = transition_amplitudes(&fields, &hf, 0.0, &C);
        assert_relative_eq!(ap, 0.0, epsilon = 1e-15);
        assert_relative_eq!(am, 1.0, epsilon = 1e-15);
        // 2φ_MW + φ_E = 90° → balanced.
        let (ap, am) = transition_amplitudes(&fields, &hf, 45.0, &C);
        assert_relative_eq!(ap, 0.5, epsilon = 1e-12);
        assert_relative_eq!(am, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn xi_at_matched_couplings() {
        // Π_⊥ = A_zz → ξ = √2 − 1.
        let xi = mixing_xi(C.a_zz_n14, C.a_zz_n14);
        assert_relative_eq!(xi, std::f64::consts::SQRT_2 - 1.0, epsilon = 1e-13);
    }

    #[test]
    fn inner_imbalance_is_cosine() {
        // φ_E = 124°, φ_MW = 28° → 2φ_MW + φ_E = 180° → I = +1.
        let phi_e = 124.0_f64.to_radians();
        let fields = LocalFields::from_pi(0.65 * phi_e.cos(), 0.65 * phi_e.sin(), 0.0);
        let i = imbalance(&fields, &HyperfineState::bare(), 28.0, &C);
        assert_relative_eq!(i, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn outer_imbalance_at_matched_couplings() {
        // Π_⊥ = A_zz, 2φ_MW + φ_E = 180° → I = 2(√2−1)/(1+(√2−1)²) = 1/√2.
        let fields = LocalFields::from_pi(C.a_zz_n14, 0.0, 0.0);
        let hf = HyperfineState::new(1).unwrap();
        let i = imbalance(&fields, &hf, 90.0, &C);
        assert_relative_eq!(i, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn outer_imbalance_maximum_small_ratio() {
        // Π_⊥/A_zz = 0.01 → max imbalance ≈ Π_⊥/A_zz within 1%.
        let ratio: f64 = 0.01;
        let fields = LocalFields::from_pi(C.a_zz_n14 * ratio, 0.0, 0.0);
        let hf = HyperfineState::new(1).unwrap();
        let max = (0..3600)
            .map(|k| imbalance(&fields, &hf, f64::from(k) * 0.05, &C).abs())
            .fold(0.0, f64::max);
        assert!((max - ratio).abs() / ratio < 0.01, "max {max}");
    }

    #[test]
    fn amplitudes_sum_to_one_for_all_states() {
        let fields = LocalFields::from_pi(0.3, -0.7, 0.1);
        for m_i in [-1i8, 0, 1] {
            let hf = HyperfineState::new(m_i).unwrap();
            for k in 0..36 {
                let (ap, am) = transition_amplitudes(&fields, &hf, f64::from(k) * 10.0, &C);
                assert_relative_eq!(ap + am, 1.0, epsilon = 1e-12);
                assert!((0.0..=2.0).contains(&ap) && (0.0..=2.0).contains(&am));
            }
        }
    }

    #[test]
    fn polarization_reversal_flips_imbalance() {
        let fields = LocalFields::from_pi(0.2, 0.9, -0.05);
        for m_i in [-1i8, 0, 1] {
            let hf = HyperfineState::new(m_i).unwrap();
            for k in 0..24 {
                let phi = f64::from(k) * 15.0;
                let a = imbalance(&fields, &hf, phi, &C);
                let b = imbalance(&fields, &hf, phi + 90.0, &C);
                assert_relative_eq!(a, -b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn outer_imbalance_reduces_to_inner_as_hyperfine_vanishes() {
        let fields = LocalFields::from_pi(0.65, 0.0, 0.0);
        let weak = NvConstants {
            a_zz_n14: 1e-6 * 0.65,
            ..C
        };
        let hf = HyperfineState::new(1).unwrap();
        for k in 0..24 {
            let phi = f64::from(k) * 15.0;
            let outer = imbalance(&fields, &hf, phi, &weak);
            let inner = imbalance(&fields, &HyperfineState::bare(), phi, &weak);
            assert!((outer - inner).abs() < 1e-4, "phi={phi}: {outer} vs {inner}");
        }
    }

    #[test]
    fn c13_adds_secular_shift() {
        let hf = HyperfineState::new(0).unwrap().with_c13(1.65, SpinHalf::Up);
        assert_relative_eq!(hf.axial_shift(&C), 0.825);
        let hf = HyperfineState::new(-1).unwrap().with_c13(1.65, SpinHalf::Down);
        assert_relative_eq!(hf.axial_shift(&C), -2.16 - 0.825);
    }

    #[test]
    fn rejects_invalid_nitrogen_projection() {
        assert!(HyperfineState::new(2).is_err());
    }

    #[test]
    fn phi_e_wraps_to_positive_degrees() {
        let f = LocalFields::from_pi(0.0, -1.0, 0.0);
        assert_relative_eq!(f.phi_e_deg(), 270.0);
        assert_eq!(LocalFields::default().phi_e_deg(), 0.0);
    }
}
