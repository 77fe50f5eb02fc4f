use thiserror::Error;

/// Errors surfaced by the simulation and inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("density must be positive, got {0} ppm")]
    NonPositiveDensity(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point at {distance_nm} nm from the defect is inside the singular region")]
    SingularPosition { distance_nm: f64 },

    #[error("transverse coupling is zero; dark/bright states are undefined")]
    DegenerateField,

    #[error("grid spacing {spacing_mhz} MHz too coarse for linewidth {gamma_mhz} MHz (need <= gamma/2)")]
    GridTooCoarse { spacing_mhz: f64, gamma_mhz: f64 },

    #[error("data is degenerate (flat or empty); nothing to fit")]
    DegenerateData,

    #[error("singular design: model curve is constant, amplitude/offset are not identifiable")]
    SingularDesign,

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("imbalance curve needs >= {needed} points spanning >= {span_deg}° of phi_mw; got {got} points over {got_span_deg:.1}°")]
    InsufficientSpan {
        needed: usize,
        span_deg: f64,
        got: usize,
        got_span_deg: f64,
    },

    #[error("microwave field has no transverse projection on this NV orientation")]
    ZeroTransverseProjection,

    #[error("electric field is zero; charge distance is unbounded")]
    ZeroField,

    #[error("total spectral weight is zero; imbalance undefined")]
    ZeroTotalWeight,

    #[error("frequency {frequency_mhz} MHz lies outside the grid [{start_mhz}, {stop_mhz}]")]
    OutsideGrid {
        frequency_mhz: f64,
        start_mhz: f64,
        stop_mhz: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
