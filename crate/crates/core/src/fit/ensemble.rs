//! Two-step ensemble fits: spin-bath density from a high-field spectrum,
//! then charge density and natural linewidth at zero field.
//!
//! Parameters are grid-scanned rather than gradient-descended: every grid
//! point re-simulates with the same seeds (common random numbers), so
//! residual differences reflect the parameter, not Monte Carlo noise. The
//! expensive resonance histogram is built once per density; the linewidth
//! and the center/amplitude/offset nuisances only touch the cheap
//! convolution and linear algebra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    golden_section, interp, nuisance_optimize, FitResult, NuisanceValues, ResidualScan,
};
use crate::error::{Error, Result};
use crate::spectrum::{lorentzian_convolve, FrequencyGrid, Spectrum};
use crate::synth::{ensemble_histogram, EnsembleSimConfig};

/// Configuration shared by both ensemble fit steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleFitConfig {
    pub sim: EnsembleSimConfig,
    /// Seed reused for every grid point (common random numbers).
    pub seed: u64,
    /// Half-range of the center-frequency search, MHz.
    pub max_center_shift: f64,
    /// Linewidth search range for the zero-field step, MHz.
    pub gamma_bounds: (f64, f64),
    /// Absolute tolerance of the linewidth search, MHz.
    pub gamma_tolerance: f64,
}

impl Default for EnsembleFitConfig {
    fn default() -> Self {
        Self {
            sim: EnsembleSimConfig::default(),
            seed: 0,
            max_center_shift: 2.0,
            gamma_bounds: (0.02, 8.0),
            gamma_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighFieldFit {
    pub rho_s: FitResult,
    pub scan: ResidualScan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroFieldFit {
    pub rho_c: FitResult,
    pub gamma: FitResult,
    pub scan: ResidualScan,
    /// Best linewidth found at each scanned charge density.
    pub gamma_per_point: Vec<f64>,
}

fn validate_data(data: &Spectrum) -> Result<()> {
    if data.grid.n_points < 10 {
        return Err(Error::InvalidConfig(format!(
            "need at least 10 data points, got {}",
            data.grid.n_points
        )));
    }
    let min = data.contrast.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data
        .contrast
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Err(Error::DegenerateData);
    }
    Ok(())
}

/// Grid the model is synthesized on: the data grid padded by the center
/// search range, so shifted models never clamp inside the data window.
fn padded_grid(data: &FrequencyGrid, max_shift: f64) -> Result<(FrequencyGrid, usize)> {
    let dg = data.spacing();
    let pad = (max_shift / dg).ceil() as usize + 1;
    let grid = FrequencyGrid::new(
        data.start - pad as f64 * dg,
        data.stop + pad as f64 * dg,
        data.n_points + 2 * pad,
    )?;
    Ok((grid, pad))
}

/// Best (shift, amplitude, offset, residual) aligning `model` (on the padded
/// grid) against the data: coarse scan plus golden-section refinement of the
/// shift, closed-form amplitude/offset at every trial.
fn optimize_alignment(
    model: &[f64],
    model_start: f64,
    data: &Spectrum,
    max_shift: f64,
) -> Result<(f64, f64, f64, f64)> {
    let spacing = data.grid.spacing();
    let freqs = data.grid.values();
    let sigma = data.sigma.as_deref();
    let mut shifted = vec![0.0; freqs.len()];
    let mut eval = |shift: f64| -> Result<(f64, f64, f64)> {
        for (s, f) in shifted.iter_mut().zip(&freqs) {
            *s = interp(model_start, spacing, model, f - shift);
        }
        nuisance_optimize(&shifted, &data.contrast, sigma)
    };

    let n_coarse = 33;
    let step = 2.0 * max_shift / (n_coarse - 1) as f64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..n_coarse {
        let shift = -max_shift + step * k as f64;
        let (_, _, r) = eval(shift)?;
        if r < best.1 {
            best = (shift, r);
        }
    }
    let mut failure: Option<Error> = None;
    let (shift, _) = golden_section(
        |s| match eval(s) {
            Ok((_, _, r)) => r,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        best.0 - step,
        best.0 + step,
        1e-4 * spacing.max(1e-6),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (a, b, r) = eval(shift)?;
    Ok((shift, a, b, r))
}

/// Step one: scan the spin-bath density against a high-field spectrum.
///
/// For every `rho_s` the high-field pipeline re-simulates with common seeds,
/// and center frequency, amplitude and offset are optimized out. The best
/// value refines the argmin parabolically; errors span the grid values whose
/// residuals stay within 10% of the minimum.
pub fn fit_high_field(
    data: &Spectrum,
    rho_s_grid: &[f64],
    cfg: &EnsembleFitConfig,
) -> Result<HighFieldFit> {
    validate_data(data)?;
    if rho_s_grid.is_empty() {
        return Err(Error::InvalidConfig("rho_s grid is empty".into()));
    }
    let (grid, _) = padded_grid(&data.grid, cfg.max_center_shift)?;
    let evaluations: Vec<(f64, NuisanceValues)> = rho_s_grid
        .par_iter()
        .map(|&rho_s| -> Result<(f64, NuisanceValues)> {
            let hist = ensemble_histogram(
                cfg.sim.high_field_rho_c,
                rho_s,
                &cfg.sim,
                &grid,
                cfg.seed,
            )?;
            let model = normalized_convolved(&hist, cfg.sim.gamma, &grid)?;
            let (shift, a, b, r) =
                optimize_alignment(&model, grid.start, data, cfg.max_center_shift)?;
            Ok((
                r,
                NuisanceValues {
                    center_shift: shift,
                    amplitude: a,
                    offset: b,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let residuals: Vec<f64> = evaluations.iter().map(|(r, _)| *r).collect();
    let scan = ResidualScan::new(rho_s_grid.to_vec(), residuals)?;
    let argmin = scan.argmin();
    if scan.at_edge {
        log::warn!(
            "rho_s best value {} is at the scan edge; widen the grid",
            rho_s_grid[argmin]
        );
    }
    let rho_s = FitResult {
        parameter: "rho_s".into(),
        best: scan.refined_best(),
        lower: scan.interval.0,
        upper: scan.interval.1,
        min_residual: scan.min_residual(),
        nuisance: evaluations[argmin].1,
        at_edge: scan.at_edge,
    };
    Ok(HighFieldFit { rho_s, scan })
}

fn normalized_convolved(hist: &[u64], gamma: f64, grid: &FrequencyGrid) -> Result<Vec<f64>> {
    let total: u64 = hist.iter().sum();
    let norm = if total > 0 { 1.0 / total as f64 } else { 0.0 };
    let raw: Vec<f64> = hist.iter().map(|&c| c as f64 * norm).collect();
    Ok(lorentzian_convolve(&Spectrum::new(*grid, raw)?, gamma)?.contrast)
}

/// Step two: scan the charge density against a zero-field spectrum with the
/// spin-bath density frozen from step one.
///
/// Per density the resonance histogram is built once; the linewidth is then
/// optimized by golden section over re-convolutions, with the center and the
/// linear nuisances optimized at every trial. The charge-density error comes
/// from the 10% residual interval, the linewidth error from the local
/// quadratic curvature of the residual (standard error with
/// n_points − 5 degrees of freedom).
pub fn fit_zero_field(
    data: &Spectrum,
    rho_s_fixed: f64,
    rho_c_grid: &[f64],
    cfg: &EnsembleFitConfig,
) -> Result<ZeroFieldFit> {
    validate_data(data)?;
    if rho_c_grid.is_empty() {
        return Err(Error::InvalidConfig("rho_c grid is empty".into()));
    }
    let (grid, _) = padded_grid(&data.grid, cfg.max_center_shift)?;
    let (lo, hi) = cfg.gamma_bounds;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidConfig(format!(
            "gamma bounds must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }

    struct PointFit {
        residual: f64,
        gamma: f64,
        nuisance: NuisanceValues,
        hist: Vec<u64>,
    }

    let points: Vec<PointFit> = rho_c_grid
        .par_iter()
        .map(|&rho_c| -> Result<PointFit> {
            let mut sim = cfg.sim;
            sim.b_applied = 0.0;
            let hist = ensemble_histogram(rho_c, rho_s_fixed, &sim, &grid, cfg.seed)?;
            let mut failure: Option<Error> = None;
            let mut eval = |gamma: f64| -> f64 {
                let out = normalized_convolved(&hist, gamma, &grid).and_then(|model| {
                    optimize_alignment(&model, grid.start, data, cfg.max_center_shift)
                });
                match out {
                    Ok((_, _, _, r)) => r,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::INFINITY
                    }
                }
            };
            // Coarse log-spaced bracket, then golden section.
            let n_coarse = 13;
            let ratio = (hi / lo).powf(1.0 / (n_coarse - 1) as f64);
            let mut best = (lo, f64::INFINITY);
            for k in 0..n_coarse {
                let g = lo * ratio.powi(k);
                let r = eval(g);
                if r < best.1 {
                    best = (g, r);
                }
            }
            let (gamma, _) = golden_section(
                &mut eval,
                (best.0 / ratio).max(lo),
                (best.0 * ratio).min(hi),
                cfg.gamma_tolerance,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let model = normalized_convolved(&hist, gamma, &grid)?;
            let (shift, a, b, residual) =
                optimize_alignment(&model, grid.start, data, cfg.max_center_shift)?;
            Ok(PointFit {
                residual,
                gamma,
                nuisance: NuisanceValues {
                    center_shift: shift,
                    amplitude: a,
                    offset: b,
                },
                hist,
            })
        })
        .collect::<Result<_>>()?;

    let residuals: Vec<f64> = points.iter().map(|p| p.residual).collect();
    let scan = ResidualScan::new(rho_c_grid.to_vec(), residuals)?;
    let argmin = scan.argmin();
    let best_point = &points[argmin];
    if scan.at_edge {
        log::warn!(
            "rho_c best value {} is at the scan edge; widen the grid",
            rho_c_grid[argmin]
        );
    }

    let rho_c = FitResult {
        parameter: "rho_c".into(),
        best: scan.refined_best(),
        lower: scan.interval.0,
        upper: scan.interval.1,
        min_residual: scan.min_residual(),
        nuisance: best_point.nuisance,
        at_edge: scan.at_edge,
    };

    // Linewidth standard error from the local curvature of the residual.
    let gamma_best = best_point.gamma;
    let delta = (0.05 * gamma_best).max(2.0 * cfg.gamma_tolerance);
    let residual_at = |gamma: f64| -> Result<f64> {
        let model = normalized_convolved(&best_point.hist, gamma, &grid)?;
        Ok(optimize_alignment(&model, grid.start, data, cfg.max_center_shift)?.3)
    };
    let r0 = best_point.residual;
    let r_minus = residual_at((gamma_best - delta).max(lo * 0.5))?;
    let r_plus = residual_at(gamma_best + delta)?;
    let curvature = (r_minus - 2.0 * r0 + r_plus) / (delta * delta);
    let dof = (data.grid.n_points as f64 - 5.0).max(1.0);
    let noise_var = r0 / dof;
    let sigma_local = if curvature > 0.0 {
        (2.0 * noise_var / curvature).sqrt()
    } else {
        log::warn!("residual curvature in gamma is non-positive; quoting the probe step");
        delta
    };
    // The linewidth rides a correlation ridge with the charge density: add
    // the spread of the per-point optima across the rho_c confidence
    // interval to the local curvature error.
    let ridge: Vec<f64> = rho_c_grid
        .iter()
        .zip(&points)
        .filter(|(&v, _)| (scan.interval.0..=scan.interval.1).contains(&v))
        .map(|(_, p)| p.gamma)
        .collect();
    let sigma_ridge = if ridge.len() > 1 {
        let mean = ridge.iter().sum::<f64>() / ridge.len() as f64;
        (ridge.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (ridge.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let sigma_gamma = sigma_local.hypot(sigma_ridge);
    let gamma = FitResult {
        parameter: "gamma".into(),
        best: gamma_best,
        lower: gamma_best - sigma_gamma,
        upper: gamma_best + sigma_gamma,
        min_residual: r0,
        nuisance: best_point.nuisance,
        at_edge: gamma_best <= lo * 1.01 || gamma_best >= hi * 0.99,
    };

    Ok(ZeroFieldFit {
        rho_c,
        gamma,
        scan,
        gamma_per_point: points.iter().map(|p| p.gamma).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ensemble_spectrum, HyperfineInclude};
    use approx::assert_relative_eq;

    fn quick_sim() -> EnsembleSimConfig {
        EnsembleSimConfig {
            n_charge_realizations: 1,
            n_spin_realizations: 1500,
            gamma: 0.3,
            b_applied: 126.0,
            include_hyperfine: HyperfineInclude::None,
            ..Default::default()
        }
    }

    #[test]
    fn high_field_scan_recovers_truth_on_grid() {
        let grid = FrequencyGrid::new(2990.0, 3002.0, 241).unwrap();
        let sim = quick_sim();
        let data = ensemble_spectrum(0.0, 20.0, &sim, &grid, 101).unwrap();
        let cfg = EnsembleFitConfig {
            sim,
            seed: 202,
            max_center_shift: 1.0,
            ..Default::default()
        };
        let fit = fit_high_field(&data, &[10.0, 15.0, 20.0, 27.0, 36.0], &cfg).unwrap();
        assert!(
            (fit.rho_s.best - 20.0).abs() / 20.0 < 0.25,
            "best {}",
            fit.rho_s.best
        );
        assert!(!fit.rho_s.at_edge);
    }

    #[test]
    fn grid_excluding_truth_flags_the_edge() {
        let grid = FrequencyGrid::new(2990.0, 3002.0, 241).unwrap();
        let sim = quick_sim();
        let data = ensemble_spectrum(0.0, 40.0, &sim, &grid, 7).unwrap();
        let cfg = EnsembleFitConfig {
            sim,
            seed: 8,
            max_center_shift: 1.0,
            ..Default::default()
        };
        let fit = fit_high_field(&data, &[5.0, 8.0, 12.0], &cfg).unwrap();
        assert!(fit.rho_s.at_edge);
        assert_relative_eq!(fit.rho_s.best, 12.0);
    }

    #[test]
    fn degenerate_data_is_rejected() {
        let grid = FrequencyGrid::new(0.0, 1.0, 50).unwrap();
        let flat = Spectrum::new(grid, vec![1.0; 50]).unwrap();
        let cfg = EnsembleFitConfig::default();
        assert!(matches!(
            fit_high_field(&flat, &[1.0], &cfg),
            Err(Error::DegenerateData)
        ));
    }

    #[test]
    fn alignment_recovers_planted_shift_and_scale() {
        let grid = FrequencyGrid::new(-5.0, 5.0, 201).unwrap();
        let (padded, _) = padded_grid(&grid, 1.0).unwrap();
        // Model: Gaussian bump on the padded grid.
        let model: Vec<f64> = padded
            .values()
            .iter()
            .map(|f| (-f * f / 0.8).exp())
            .collect();
        // Data: the same bump shifted by +0.37, scaled and offset.
        let data_y: Vec<f64> = grid
            .values()
            .iter()
            .map(|f| 2.5 * (-(f - 0.37).powi(2) / 0.8).exp() + 0.1)
            .collect();
        let data = Spectrum::new(grid, data_y).unwrap();
        let (shift, a, b, r) = optimize_alignment(&model, padded.start, &data, 1.0).unwrap();
        // Linear interpolation of the model biases the optimum slightly.
        assert_relative_eq!(shift, 0.37, epsilon = 5e-3);
        assert_relative_eq!(a, 2.5, epsilon = 5e-3);
        assert_relative_eq!(b, 0.1, epsilon = 5e-3);
        assert!(r < 1e-3, "residual {r}");
    }
}
