//! Measured parameters of the six reference diamond samples, usable as
//! simulation presets.

use serde::{Deserialize, Serialize};

/// Extracted parameters of one diamond sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePreset {
    pub name: &'static str,
    /// Charge density, ppm.
    pub rho_c: f64,
    pub rho_c_err: f64,
    /// Effective spin-bath density, ppm.
    pub rho_s: f64,
    pub rho_s_err: f64,
    /// Natural linewidth, MHz.
    pub gamma: f64,
    pub gamma_err: f64,
    /// Estimated NV density range, ppm (documentation only).
    pub rho_nv_range: (f64, f64),
    /// Electron-irradiated and annealed.
    pub treated: bool,
}

pub const PRESETS: [SamplePreset; 6] = [
    SamplePreset {
        name: "S1",
        rho_c: 1.35,
        rho_c_err: 0.05,
        rho_s: 70.0,
        rho_s_err: 5.0,
        gamma: 1.16,
        gamma_err: 0.02,
        rho_nv_range: (1.0, 10.0),
        treated: true,
    },
    SamplePreset {
        name: "S2",
        rho_c: 1.7,
        rho_c_err: 0.1,
        rho_s: 100.0,
        rho_s_err: 5.0,
        gamma: 0.78,
        gamma_err: 0.03,
        rho_nv_range: (1.0, 10.0),
        treated: true,
    },
    SamplePreset {
        name: "S3",
        rho_c: 0.06,
        rho_c_err: 0.02,
        rho_s: 12.0,
        rho_s_err: 3.0,
        gamma: 0.26,
        gamma_err: 0.02,
        rho_nv_range: (0.01, 0.1),
        treated: true,
    },
    SamplePreset {
        name: "S4",
        rho_c: 3.6,
        rho_c_err: 0.4,
        rho_s: 90.0,
        rho_s_err: 20.0,
        gamma: 1.0,
        gamma_err: 0.1,
        rho_nv_range: (0.001, 0.01),
        treated: false,
    },
    SamplePreset {
        name: "S5",
        rho_c: 0.9,
        rho_c_err: 0.2,
        rho_s: 130.0,
        rho_s_err: 30.0,
        gamma: 3.3,
        gamma_err: 0.1,
        rho_nv_range: (0.001, 0.01),
        treated: false,
    },
    SamplePreset {
        name: "S6",
        rho_c: 0.05,
        rho_c_err: 0.01,
        rho_s: 16.0,
        rho_s_err: 2.0,
        gamma: 0.08,
        gamma_err: 0.03,
        rho_nv_range: (0.001, 0.01),
        treated: false,
    },
];

/// Look a preset up by name (case-insensitive).
pub fn preset(name: &str) -> Option<&'static SamplePreset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(preset("s3").unwrap().rho_s, 12.0);
        assert_eq!(preset("S1").unwrap().gamma, 1.16);
        assert!(preset("S7").is_none());
    }

    #[test]
    fn treated_samples_are_the_first_three() {
        assert!(PRESETS[..3].iter().all(|p| p.treated));
        assert!(PRESETS[3..].iter().all(|p| !p.treated));
    }
}
