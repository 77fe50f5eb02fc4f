//! Simulation and inference toolkit for the local charge environment of
//! NV centers in diamond.
//!
//! The crate covers three workflows:
//!
//! * synthesis of ensemble and single-NV ODMR spectra from a microscopic
//!   model of random charges and magnetic impurities ([`synth`]),
//! * residual-scan fitting of measured spectra for charge density, spin-bath
//!   density and natural linewidth ([`fit`]),
//! * reconstruction of the local electric-field vector from dark-state
//!   spectroscopy and Monte Carlo localization of a single point charge
//!   ([`localize`]).

pub mod bath;
pub mod constants;
pub mod error;
pub mod fit;
pub mod localize;
pub mod presets;
pub mod spectrum;
pub mod spin;
pub mod synth;

pub use constants::{NvConstants, PhysicalConstants};
pub use error::{Error, Result};
pub use spectrum::{FrequencyGrid, Spectrum};
pub use spin::{HyperfineState, LocalFields, Resonance};
