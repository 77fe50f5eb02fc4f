//! Monte Carlo synthesis of ensemble and single-NV ODMR spectra.
//!
//! The ensemble pipeline follows a two-stage average: for every charge
//! realization the electric couplings are fixed, then many spin-bath
//! realizations contribute axial offsets δB_z. Every resonance deposits one
//! count into a histogram on the output grid (equal weights: random field
//! orientations average transition amplitudes out in an ensemble), and the
//! histogram is convolved with the natural-linewidth Lorentzian.
//!
//! Single-NV spectra keep the amplitude information: each resonance is
//! weighted by its microwave transition amplitude at the given drive
//! polarization, with the δB_z distribution discretized into
//! probability-weighted bins.
//!
//! Counts are accumulated as integers, so parallel realization loops are
//! bit-reproducible regardless of the rayon schedule.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{
    delta_bz, electric_field, pi_from_field, sample_charges, sample_spin_bath, SamplerConfig,
};
use crate::constants::{NvConstants, PhysicalConstants};
use crate::error::{Error, Result};
use crate::spectrum::{lorentzian_convolve, FrequencyGrid, Spectrum};
use crate::spin::{resonance_frequencies, resonance_pair, HyperfineState, LocalFields, SpinHalf};

/// Which hyperfine lines enter an ensemble simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperfineInclude {
    /// Single m_I = 0 line.
    None,
    /// The three ¹⁴N lines, equally weighted.
    #[default]
    N14ThreeLines,
}

impl HyperfineInclude {
    fn states(self) -> Vec<HyperfineState> {
        match self {
            HyperfineInclude::None => vec![HyperfineState::bare()],
            HyperfineInclude::N14ThreeLines => [-1i8, 0, 1]
                .iter()
                .map(|&m| HyperfineState::new(m).expect("valid m_i"))
                .collect(),
        }
    }
}

/// Hyperfine content of a single-NV spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperfineModel {
    /// Include the three ¹⁴N lines.
    pub n14: bool,
    /// Secular coupling of one resolved ¹³C, MHz.
    pub c13_coupling: Option<f64>,
}

impl HyperfineModel {
    pub fn states(&self) -> Vec<HyperfineState> {
        let mis: &[i8] = if self.n14 { &[-1, 0, 1] } else { &[0] };
        let mut states = Vec::new();
        for &m_i in mis {
            let base = HyperfineState::new(m_i).expect("valid m_i");
            match self.c13_coupling {
                None => states.push(base),
                Some(a) => {
                    states.push(base.with_c13(a, SpinHalf::Down));
                    states.push(base.with_c13(a, SpinHalf::Up));
                }
            }
        }
        states
    }
}

/// Configuration of the ensemble Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSimConfig {
    /// Charge realizations (outer loop).
    pub n_charge_realizations: usize,
    /// Spin-bath realizations per charge realization (inner loop).
    pub n_spin_realizations: usize,
    /// Natural linewidth Γ (Lorentzian FWHM), MHz.
    pub gamma: f64,
    /// Applied axial field, MHz (gyromagnetic ratio absorbed).
    pub b_applied: f64,
    pub include_hyperfine: HyperfineInclude,
    /// Overall amplitude applied to the normalized spectrum.
    pub amplitude: f64,
    /// Vertical offset added after scaling.
    pub offset: f64,
    /// Rigid shift of all resonance frequencies, MHz.
    pub center_shift: f64,
    /// Defects per charge realization.
    pub n_charge_points: usize,
    /// Impurities per spin realization.
    pub n_spin_points: usize,
    /// Charge density used by [`high_field_spectrum`]; electric effects are
    /// suppressed at high field, so this defaults to zero.
    pub high_field_rho_c: f64,
    pub nv: NvConstants,
    pub phys: PhysicalConstants,
}

impl Default for EnsembleSimConfig {
    fn default() -> Self {
        Self {
            n_charge_realizations: 5000,
            n_spin_realizations: 5000,
            gamma: 1.0,
            b_applied: 0.0,
            include_hyperfine: HyperfineInclude::default(),
            amplitude: 1.0,
            offset: 0.0,
            center_shift: 0.0,
            n_charge_points: 100,
            n_spin_points: 100,
            high_field_rho_c: 0.0,
            nv: NvConstants::default(),
            phys: PhysicalConstants::default(),
        }
    }
}

impl EnsembleSimConfig {
    fn validate(&self, grid: &FrequencyGrid) -> Result<()> {
        if self.n_charge_realizations == 0 || self.n_spin_realizations == 0 {
            return Err(Error::InvalidConfig(
                "realization counts must be >= 1".into(),
            ));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if self.gamma > 0.0 && grid.spacing() > self.gamma / 2.0 {
            return Err(Error::GridTooCoarse {
                spacing_mhz: grid.spacing(),
                gamma_mhz: self.gamma,
            });
        }
        Ok(())
    }
}

/// Raw resonance-count histogram of the ensemble Monte Carlo (before
/// Lorentzian convolution). Exposed so fitting can reuse one histogram for
/// many trial linewidths.
pub fn ensemble_histogram(
    rho_c: f64,
    rho_s: f64,
    cfg: &EnsembleSimConfig,
    grid: &FrequencyGrid,
    seed: u64,
) -> Result<Vec<u64>> {
    if rho_c < 0.0 {
        return Err(Error::NonPositiveDensity(rho_c));
    }
    if rho_s < 0.0 {
        return Err(Error::NonPositiveDensity(rho_s));
    }
    let sampler = SamplerConfig {
        rho_c,
        rho_s,
        n_charge: cfg.n_charge_points,
        n_spin: cfg.n_spin_points,
        seed,
    };
    sampler.validate()?;
    let states = cfg.include_hyperfine.states();
    let n_spin_real = cfg.n_spin_realizations;

    (0..cfg.n_charge_realizations)
        .into_par_iter()
        .map(|i| -> Result<Vec<u64>> {
            let mut local = vec![0u64; grid.n_points];
            let (pi_x, pi_y, pi_z) = if rho_c > 0.0 {
                let charges =
                    sample_charges(&sampler, &cfg.phys, &mut sampler.charge_rng(i as u64))?;
                let e = electric_field(&charges, &cfg.phys)?;
                pi_from_field(&e, &cfg.nv)
            } else {
                (0.0, 0.0, 0.0)
            };
            for j in 0..n_spin_real {
                let dbz = if rho_s > 0.0 {
                    let stream = (i * n_spin_real + j) as u64;
                    let bath =
                        sample_spin_bath(&sampler, &cfg.phys, &mut sampler.spin_rng(stream))?;
                    delta_bz(&bath, &cfg.phys)?
                } else {
                    0.0
                };
                let fields = LocalFields {
                    pi_x,
                    pi_y,
                    pi_z,
                    delta_bz: dbz,
                    b_applied: cfg.b_applied,
                };
                for hf in &states {
                    let (lo, hi) = resonance_frequencies(&fields, hf, &cfg.nv);
                    for f in [lo, hi] {
                        if let Some(b) = grid.nearest_bin(f + cfg.center_shift) {
                            local[b] += 1;
                        }
                    }
                }
            }
            Ok(local)
        })
        .try_reduce(
            || vec![0u64; grid.n_points],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )
}

/// Normalize an integer histogram, convolve with the linewidth and apply the
/// amplitude/offset nuisances.
pub fn histogram_to_spectrum(
    hist: &[u64],
    cfg: &EnsembleSimConfig,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    let total: u64 = hist.iter().sum();
    let norm = if total > 0 { 1.0 / total as f64 } else { 0.0 };
    let raw: Vec<f64> = hist.iter().map(|&c| c as f64 * norm).collect();
    let conv = lorentzian_convolve(&Spectrum::new(*grid, raw)?, cfg.gamma)?;
    let contrast = conv
        .contrast
        .into_iter()
        .map(|y| cfg.amplitude * y + cfg.offset)
        .collect();
    Spectrum::new(*grid, contrast)
}

/// Zero- or applied-field ensemble spectrum at the given densities.
pub fn ensemble_spectrum(
    rho_c: f64,
    rho_s: f64,
    cfg: &EnsembleSimConfig,
    grid: &FrequencyGrid,
    seed: u64,
) -> Result<Spectrum> {
    cfg.validate(grid)?;
    let hist = ensemble_histogram(rho_c, rho_s, cfg, grid, seed)?;
    histogram_to_spectrum(&hist, cfg, grid)
}

/// Ensemble spectrum at a large applied axial field, where electric effects
/// are suppressed and magnetic broadening dominates.
///
/// The identical full-Hamiltonian pipeline runs underneath; charges enter
/// only if `cfg.high_field_rho_c > 0`. A field smaller than 10× the median
/// transverse coupling is accepted with a warning.
pub fn high_field_spectrum(
    rho_s: f64,
    b_applied: f64,
    cfg: &EnsembleSimConfig,
    grid: &FrequencyGrid,
    seed: u64,
) -> Result<Spectrum> {
    let rho_c = cfg.high_field_rho_c;
    if rho_c > 0.0 {
        let median = median_pi_perp(rho_c, cfg, seed)?;
        if b_applied.abs() < 10.0 * median {
            log::warn!(
                "applied field {b_applied} MHz is below 10x the median transverse \
                 coupling {median:.3} MHz; electric effects are not fully suppressed"
            );
        }
    } else if b_applied == 0.0 {
        log::warn!("high-field spectrum requested with zero applied field");
    }
    let mut c = *cfg;
    c.b_applied = b_applied;
    ensemble_spectrum(rho_c, rho_s, &c, grid, seed)
}

fn median_pi_perp(rho_c: f64, cfg: &EnsembleSimConfig, seed: u64) -> Result<f64> {
    let sampler = SamplerConfig {
        rho_c,
        rho_s: 0.0,
        n_charge: cfg.n_charge_points,
        n_spin: cfg.n_spin_points,
        // Diagnostic draws only; keep them off the synthesis streams.
        seed: seed ^ 0x9e37_79b9_7f4a_7c15,
    };
    let mut values: Vec<f64> = (0..201u64)
        .map(|i| -> Result<f64> {
            let charges = sample_charges(&sampler, &cfg.phys, &mut sampler.charge_rng(i))?;
            let e = electric_field(&charges, &cfg.phys)?;
            let (px, py, _) = pi_from_field(&e, &cfg.nv);
            Ok(px.hypot(py))
        })
        .collect::<Result<_>>()?;
    values.sort_by(f64::total_cmp);
    Ok(values[values.len() / 2])
}

/// Empirical δB_z distribution sampled once at a reference density of 1 ppm.
///
/// A realization scales exactly linearly with density (positions scale as
/// ρ^{-1/3} and the dipolar sum as the inverse cube), so one set of base
/// draws serves every density. This keeps fitted spectra smooth in ρ_s and
/// lets residual scans reuse common random numbers.
#[derive(Debug, Clone)]
pub struct DeltaBzSampler {
    /// Sorted δB_z draws at 1 ppm.
    base: Vec<f64>,
}

impl DeltaBzSampler {
    pub fn sample(
        n_samples: usize,
        n_spin_points: usize,
        phys: &PhysicalConstants,
        seed: u64,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be >= 1".into()));
        }
        let sampler = SamplerConfig {
            rho_c: 0.0,
            rho_s: 1.0,
            n_charge: 2,
            n_spin: n_spin_points,
            seed,
        };
        let mut base: Vec<f64> = (0..n_samples)
            .into_par_iter()
            .map(|i| -> Result<f64> {
                let bath = sample_spin_bath(&sampler, phys, &mut sampler.spin_rng(i as u64))?;
                delta_bz(&bath, phys)
            })
            .collect::<Result<_>>()?;
        base.sort_by(f64::total_cmp);
        Ok(Self { base })
    }

    fn quantile(&self, q: f64) -> f64 {
        let n = self.base.len();
        let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 >= n {
            self.base[n - 1]
        } else {
            self.base[lo] * (1.0 - frac) + self.base[lo + 1] * frac
        }
    }

    /// Probability-weighted δB_z bins at density `rho_s`: quantile midpoints
    /// with equal mass 1/n_bins.
    pub fn bins(&self, rho_s: f64, n_bins: usize) -> Vec<(f64, f64)> {
        if rho_s == 0.0 {
            return vec![(0.0, 1.0)];
        }
        let w = 1.0 / n_bins as f64;
        (0..n_bins)
            .map(|k| (self.quantile((k as f64 + 0.5) * w) * rho_s, w))
            .collect()
    }
}

/// Discretize the δB_z distribution at density `rho_s` into `n_bins`
/// probability-weighted bins, sampling `n_samples` bath realizations.
pub fn discretize_deltabz(
    rho_s: f64,
    n_bins: usize,
    n_samples: usize,
    phys: &PhysicalConstants,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if n_bins == 0 {
        return Err(Error::InvalidConfig("n_bins must be >= 1".into()));
    }
    if rho_s < 0.0 {
        return Err(Error::NonPositiveDensity(rho_s));
    }
    if rho_s == 0.0 {
        return Ok(vec![(0.0, 1.0)]);
    }
    let sampler = SamplerConfig {
        rho_c: 0.0,
        rho_s,
        n_charge: 2,
        n_spin: SamplerConfig::default().n_spin,
        seed,
    };
    let mut draws: Vec<f64> = (0..n_samples.max(1))
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let bath = sample_spin_bath(&sampler, phys, &mut sampler.spin_rng(i as u64))?;
            delta_bz(&bath, phys)
        })
        .collect::<Result<_>>()?;
    draws.sort_by(f64::total_cmp);
    let basis = DeltaBzSampler { base: draws };
    Ok(basis.bins(1.0, n_bins))
}

/// Numerical knobs of the single-NV forward model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SingleNvConfig {
    /// δB_z bins (step 2 of the forward model).
    pub deltabz_bins: usize,
    /// Bath realizations behind the δB_z distribution.
    pub deltabz_samples: usize,
    /// Impurities per bath realization.
    pub n_spin_points: usize,
    pub amplitude: f64,
    pub offset: f64,
    pub nv: NvConstants,
    pub phys: PhysicalConstants,
}

impl Default for SingleNvConfig {
    fn default() -> Self {
        Self {
            deltabz_bins: 61,
            deltabz_samples: 20_000,
            n_spin_points: 100,
            amplitude: 1.0,
            offset: 0.0,
            nv: NvConstants::default(),
            phys: PhysicalConstants::default(),
        }
    }
}

/// Amplitude-weighted single-NV spectrum for a definite electric field.
///
/// For every δB_z bin the Hamiltonian is solved in closed form and each
/// resonance enters with weight P(δB_z) × |⟨0|S_x cosφ_MW + S_y sinφ_MW|±⟩|²,
/// then everything is Lorentzian-broadened.
pub fn single_nv_spectrum(
    e_field: &Vector3<f64>,
    rho_s: f64,
    gamma: f64,
    phi_mw_deg: f64,
    hyperfine: &HyperfineModel,
    cfg: &SingleNvConfig,
    grid: &FrequencyGrid,
    seed: u64,
) -> Result<Spectrum> {
    let basis = if rho_s > 0.0 {
        DeltaBzSampler::sample(cfg.deltabz_samples, cfg.n_spin_points, &cfg.phys, seed)?
    } else {
        DeltaBzSampler { base: vec![0.0] }
    };
    single_nv_spectrum_with_basis(&basis, e_field, rho_s, gamma, phi_mw_deg, hyperfine, cfg, grid)
}

/// Single-NV forward model reusing a pre-sampled δB_z basis (common random
/// numbers across many parameter evaluations).
#[allow(clippy::too_many_arguments)]
pub fn single_nv_spectrum_with_basis(
    basis: &DeltaBzSampler,
    e_field: &Vector3<f64>,
    rho_s: f64,
    gamma: f64,
    phi_mw_deg: f64,
    hyperfine: &HyperfineModel,
    cfg: &SingleNvConfig,
    grid: &FrequencyGrid,
) -> Result<Spectrum> {
    if rho_s < 0.0 {
        return Err(Error::NonPositiveDensity(rho_s));
    }
    if gamma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "gamma must be non-negative, got {gamma}"
        )));
    }
    let (pi_x, pi_y, pi_z) = pi_from_field(e_field, &cfg.nv);
    let states = hyperfine.states();
    let state_weight = 1.0 / states.len() as f64;
    let mut hist = vec![0.0; grid.n_points];
    let spacing = grid.spacing();
    // Resonances are split linearly between the two straddling bins, so the
    // spectrum is continuous in the line positions (the fitters rely on it).
    let mut deposit = |f: f64, w: f64| {
        let pos = (f - grid.start) / spacing;
        if !(-1.0..grid.n_points as f64).contains(&pos) {
            return;
        }
        let lo = pos.floor();
        let frac = pos - lo;
        let lo = lo as isize;
        if lo >= 0 {
            hist[lo as usize] += w * (1.0 - frac);
        }
        if lo + 1 < grid.n_points as isize {
            hist[(lo + 1) as usize] += w * frac;
        }
    };
    for (dbz, prob) in basis.bins(rho_s, cfg.deltabz_bins) {
        let fields = LocalFields {
            pi_x,
            pi_y,
            pi_z,
            delta_bz: dbz,
            b_applied: 0.0,
        };
        for hf in &states {
            for res in resonance_pair(&fields, hf, phi_mw_deg, &cfg.nv) {
                deposit(res.frequency, prob * state_weight * res.amplitude);
            }
        }
    }
    let conv = lorentzian_convolve(&Spectrum::new(*grid, hist)?, gamma)?;
    let contrast = conv
        .contrast
        .into_iter()
        .map(|y| cfg.amplitude * y + cfg.offset)
        .collect();
    Spectrum::new(*grid, contrast)
}
