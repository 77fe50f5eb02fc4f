//! Physical constants of the NV ground state and of the diamond host.
//!
//! All couplings are ordinary frequencies in MHz (no 2π prefactors), lengths
//! are nm, electric fields MV/m and defect densities ppm of the diamond
//! atomic density.

use serde::{Deserialize, Serialize};

/// Ground-state constants of a single NV center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NvConstants {
    /// Zero-field splitting D_gs, MHz.
    pub d_gs: f64,
    /// Axial hyperfine coupling to the host ¹⁴N, MHz.
    pub a_zz_n14: f64,
    /// Axial electric susceptibility d_∥, MHz per (MV/m).
    pub d_par: f64,
    /// Transverse electric susceptibility d_⊥, MHz per (MV/m).
    pub d_perp: f64,
}

impl Default for NvConstants {
    fn default() -> Self {
        Self {
            d_gs: 2870.0,
            a_zz_n14: 2.16,
            // 0.35 and 17 Hz·cm/V expressed per MV/m.
            d_par: 3.5e-3,
            d_perp: 0.17,
        }
    }
}

/// Host-material constants used by the bath samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalConstants {
    /// Number density of 1 ppm of defects, (ppm·nm³)⁻¹.
    pub n0: f64,
    /// Relative permittivity of diamond.
    pub eps_r: f64,
    /// e/(4πε₀), V·nm.
    pub coulomb_k: f64,
    /// Dipolar coupling prefactor J₀, MHz·nm³.
    pub j0: f64,
    /// Ratio of electronic to nuclear dipolar coupling strengths.
    pub nuclear_suppression: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            n0: 1.76e-4,
            eps_r: 5.7,
            coulomb_k: 1.43996,
            j0: 52.0,
            nuclear_suppression: 2600.0,
        }
    }
}

impl PhysicalConstants {
    /// Effective electron-spin density equivalent to a nuclear bath density.
    pub fn effective_nuclear_density(&self, rho_nuclear_ppm: f64) -> f64 {
        rho_nuclear_ppm / self.nuclear_suppression
    }
}

/// 1 V/nm expressed in MV/m.
pub const V_PER_NM_IN_MV_PER_M: f64 = 1000.0;
