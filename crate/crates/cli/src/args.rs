//! Command-line surface. Every subcommand's options can also be given in a
//! TOML config file (one section per subcommand); explicit flags win over
//! the file, which wins over built-in defaults.

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "nvcharge",
    version,
    about = "Simulate NV-center ODMR spectra from a microscopic charge model, \
             fit measured spectra, and localize single charges"
)]
pub struct Cli {
    /// TOML config file with one section per subcommand.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,

    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    pub print_config: bool,

    /// Record wall-clock timing in JSON outputs (off by default so reruns
    /// stay byte-identical).
    #[arg(long, global = true)]
    pub timing: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize an ensemble or single-NV ODMR spectrum.
    Simulate(SimulateArgs),
    /// Two-step ensemble fit: rho_s at high field, then rho_c and gamma.
    FitEnsemble(FitEnsembleArgs),
    /// Seven-parameter single-NV spectrum fit.
    FitSingle(FitSingleArgs),
    /// Extract the transverse field angle from an imbalance curve.
    Imbalance(ImbalanceArgs),
    /// Reconstruct the field and localize a single charge.
    Localize(LocalizeArgs),
    /// Microwave polarization angle from the wire geometry.
    MwAngle(MwAngleArgs),
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Sample preset S1..S6 supplying rho_c, rho_s and gamma.
    #[arg(long)]
    pub preset: Option<String>,

    /// Charge density, ppm.
    #[arg(long)]
    pub rho_c: Option<f64>,

    /// Effective spin-bath density, ppm.
    #[arg(long)]
    pub rho_s: Option<f64>,

    /// Natural linewidth (Lorentzian FWHM), MHz.
    #[arg(long)]
    pub gamma: Option<f64>,

    /// Applied axial field, MHz.
    #[arg(long, allow_negative_numbers = true)]
    pub b_applied: Option<f64>,

    /// Hyperfine lines: n14 | none.
    #[arg(long)]
    pub hyperfine: Option<String>,

    /// Frequency grid as start:stop:points, MHz.
    #[arg(long)]
    pub grid: Option<String>,

    /// Realization counts as CHARGExSPIN (one number sets both).
    #[arg(long)]
    pub realizations: Option<String>,

    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Gaussian noise to add, as a fraction of the dip depth.
    #[arg(long)]
    pub noise: Option<f64>,

    /// Synthesize a single-NV spectrum instead of an ensemble.
    #[arg(long, default_value_t = false)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub single_nv: bool,

    /// Electric field at the NV as EX,EY,EZ in MV/m (single-NV mode).
    #[arg(long, allow_hyphen_values = true)]
    pub e_field: Option<String>,

    /// Microwave polarization angle, degrees (single-NV mode).
    #[arg(long, allow_negative_numbers = true)]
    pub phi_mw: Option<f64>,

    /// Secular coupling of a resolved 13C, MHz (single-NV mode).
    #[arg(long)]
    pub c13: Option<f64>,

    /// Output spectrum CSV path.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,

    /// Also write tidy plot data (spectrum plus raw resonance histogram).
    #[arg(long)]
    pub plot_data: Option<std::path::PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitEnsembleArgs {
    /// High-field spectrum CSV.
    #[arg(long)]
    pub high_field: Option<std::path::PathBuf>,

    /// Zero-field spectrum CSV.
    #[arg(long)]
    pub zero_field: Option<std::path::PathBuf>,

    /// Applied axial field of the high-field data, MHz.
    #[arg(long, allow_negative_numbers = true)]
    pub b_applied: Option<f64>,

    /// rho_s scan grid: lo:hi:count (linear) or a comma list, ppm.
    #[arg(long)]
    pub rho_s_grid: Option<String>,

    /// rho_c scan grid: lo:hi:count (linear) or a comma list, ppm.
    #[arg(long)]
    pub rho_c_grid: Option<String>,

    /// Natural linewidth assumed for the high-field model, MHz.
    #[arg(long)]
    pub hf_gamma: Option<f64>,

    /// Linewidth search bounds lo:hi for the zero-field step, MHz.
    #[arg(long)]
    pub gamma_bounds: Option<String>,

    /// Fit-side realization counts as CHARGExSPIN.
    #[arg(long)]
    pub realizations: Option<String>,

    /// Spin realizations of the high-field model (it has no charge loop).
    #[arg(long)]
    pub hf_realizations: Option<usize>,

    /// Hyperfine lines: n14 | none.
    #[arg(long)]
    pub hyperfine: Option<String>,

    /// Half-range of the center-frequency search, MHz.
    #[arg(long)]
    pub max_center_shift: Option<f64>,

    /// Treat input contrast as raw fluorescence (invert dips).
    #[arg(long, default_value_t = false)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub invert_contrast: bool,

    /// Seed of the fit-side simulations (common random numbers).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output envelope JSON path.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSingleArgs {
    /// Single-NV spectrum CSV.
    #[arg(long)]
    pub data: Option<std::path::PathBuf>,

    /// Microwave polarization angle, degrees (from mw-angle).
    #[arg(long, allow_negative_numbers = true)]
    pub phi_mw: Option<f64>,

    /// Drop the 14N hyperfine triplet from the model.
    #[arg(long, default_value_t = false)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub no_n14: bool,

    /// Secular coupling of a resolved 13C, MHz.
    #[arg(long)]
    pub c13: Option<f64>,

    /// Ensemble-averaged D_gs reference for the axial shift, MHz.
    #[arg(long)]
    pub d_gs_ref: Option<f64>,

    /// Initial guess as PI_PERP,PHI_E_DEG,PI_Z,RHO_S,GAMMA (skips the
    /// coarse-start grid).
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<String>,

    /// Treat input contrast as raw fluorescence (invert dips).
    #[arg(long, default_value_t = false)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub invert_contrast: bool,

    /// Seed of the bath-distribution draws.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output envelope JSON path.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImbalanceArgs {
    /// Imbalance curve CSV (phi_mw_deg, imbalance[, sigma]).
    #[arg(long)]
    pub curve: Option<std::path::PathBuf>,

    /// Seed recorded in the output (the fit itself is closed-form).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output envelope JSON path.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeArgs {
    /// Axial coupling as VALUE[,SIGMA], MHz.
    #[arg(long, allow_hyphen_values = true)]
    pub pi_z: Option<String>,

    /// Transverse coupling as VALUE[,SIGMA], MHz.
    #[arg(long, allow_hyphen_values = true)]
    pub pi_perp: Option<String>,

    /// Transverse field angle as VALUE[,SIGMA], degrees.
    #[arg(long, allow_hyphen_values = true)]
    pub phi_e: Option<String>,

    /// Take phi_e from an imbalance envelope instead.
    #[arg(long)]
    pub from_imbalance: Option<std::path::PathBuf>,

    /// Take the full field vector from a fit-single envelope instead.
    #[arg(long)]
    pub from_single: Option<std::path::PathBuf>,

    /// Charge sign (+1 or -1).
    #[arg(long)]
    pub charge_sign: Option<i8>,

    /// Monte Carlo samples of the confidence cloud.
    #[arg(long)]
    pub n_mc: Option<usize>,

    /// Nested confidence levels, comma-separated fractions.
    #[arg(long)]
    pub levels: Option<String>,

    /// RNG seed of the confidence cloud.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output envelope JSON path.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,

    /// Also export the sampled positions with confidence labels.
    #[arg(long)]
    pub cloud: Option<std::path::PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MwAngleArgs {
    /// In-plane wire angle with respect to lab X, degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub phi_wire: Option<f64>,

    /// Wire height above the NV plane, um.
    #[arg(long)]
    pub height: Option<f64>,

    /// One-sigma height uncertainty, um.
    #[arg(long)]
    pub height_sigma: Option<f64>,

    /// In-plane NV-wire distance, um.
    #[arg(long)]
    pub distance: Option<f64>,

    /// Half-range of the out-of-plane tilt, degrees.
    #[arg(long)]
    pub tilt_sigma: Option<f64>,

    /// NV axis: 111 | -1-11 | -11-1 | 1-1-1.
    #[arg(long)]
    pub nv_axis: Option<String>,

    /// Monte Carlo samples of the angle distribution.
    #[arg(long)]
    pub n_mc: Option<usize>,

    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output envelope JSON path.
    #[arg(long)]
    pub out: Option<std::path::PathBuf>,
}
