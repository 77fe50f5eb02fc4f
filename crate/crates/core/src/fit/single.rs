//! Seven-parameter fit of a single-NV spectrum: the three electric-field
//! components, the spin-bath density and the natural linewidth, plus a
//! global amplitude and offset handled in closed form.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::simplex::{nelder_mead, SimplexOptions};
use super::{nuisance_optimize, FitResult, NuisanceValues};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use crate::synth::{single_nv_spectrum_with_basis, DeltaBzSampler, HyperfineModel, SingleNvConfig};

/// Configuration of the single-NV fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SingleNvFitConfig {
    pub sim: SingleNvConfig,
    /// Ensemble-averaged zero-field splitting the axial shift Π_z is
    /// referenced to, MHz.
    pub d_gs_reference: f64,
    /// Seed of the δB_z basis shared by every model evaluation.
    pub seed: u64,
    pub simplex: SimplexOptions,
    /// Coarse-start grids over the transverse coupling (MHz), its angle
    /// (degrees) and the axial coupling (MHz).
    pub coarse_pi_perp: Vec<f64>,
    pub coarse_phi_e_deg: Vec<f64>,
    pub coarse_pi_z: Vec<f64>,
    pub rho_s_init: f64,
    pub gamma_init: f64,
}

impl Default for SingleNvFitConfig {
    fn default() -> Self {
        Self {
            sim: SingleNvConfig::default(),
            d_gs_reference: 2870.25,
            seed: 0,
            simplex: SimplexOptions {
                max_iterations: 4000,
                x_tolerance: 1e-7,
                f_tolerance: 1e-14,
            },
            coarse_pi_perp: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 1.6],
            coarse_phi_e_deg: (0..8).map(|k| f64::from(k) * 45.0).collect(),
            coarse_pi_z: vec![-0.2, 0.0, 0.2],
            rho_s_init: 0.1,
            gamma_init: 0.3,
        }
    }
}

/// Explicit starting point, bypassing the coarse grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleNvGuess {
    pub pi_perp: f64,
    pub phi_e_deg: f64,
    pub pi_z: f64,
    pub rho_s: f64,
    pub gamma: f64,
}

/// Fitted electric field, bath density and linewidth of one NV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleNvFit {
    /// Field components in MV/m (Π_z referenced to `d_gs_reference`).
    pub e_x: FitResult,
    pub e_y: FitResult,
    pub e_z: FitResult,
    pub rho_s: FitResult,
    pub gamma: FitResult,
    pub nuisance: NuisanceValues,
    pub min_residual: f64,
    /// Parameters pinned at a physical bound (non-negativity).
    pub at_bound: Vec<String>,
}

impl SingleNvFit {
    pub fn pi_perp(&self, d_perp: f64) -> f64 {
        (self.e_x.best * d_perp).hypot(self.e_y.best * d_perp)
    }

    pub fn pi_z(&self, d_par: f64) -> f64 {
        self.e_z.best * d_par
    }
}

const PENALTY: f64 = 1e30;

/// Fit the five physical parameters of a single-NV zero-field spectrum.
///
/// The forward model is the amplitude-weighted single-NV spectrum; the
/// microwave angle must be known (from the wire geometry). Note that a
/// single spectrum constrains the transverse angle only through
/// cos(2φ_MW + φ_E), so two mirror solutions for (E_x, E_y) fit equally
/// well; the imbalance curve over several polarizations resolves the
/// ambiguity.
pub fn fit_single_nv(
    data: &Spectrum,
    phi_mw_deg: f64,
    hyperfine: &HyperfineModel,
    cfg: &SingleNvFitConfig,
    initial: Option<SingleNvGuess>,
) -> Result<SingleNvFit> {
    if data.grid.n_points < 10 {
        return Err(Error::InvalidConfig(format!(
            "need at least 10 data points, got {}",
            data.grid.n_points
        )));
    }
    let mut sim = cfg.sim;
    sim.nv.d_gs = cfg.d_gs_reference;
    sim.amplitude = 1.0;
    sim.offset = 0.0;

    let basis = DeltaBzSampler::sample(sim.deltabz_samples, sim.n_spin_points, &sim.phys, cfg.seed)?;
    let sigma = data.sigma.as_deref();

    // θ = (Π_x, Π_y, Π_z, ρ_s, Γ); amplitude and offset are closed-form.
    let objective = |theta: &[f64]| -> f64 {
        let (pi_x, pi_y, pi_z, rho_s, gamma) =
            (theta[0], theta[1], theta[2], theta[3], theta[4]);
        if rho_s < 0.0 || gamma <= 0.0 {
            return PENALTY * (1.0 + rho_s.min(0.0).abs() + (-gamma).max(0.0));
        }
        let e = Vector3::new(pi_x / sim.nv.d_perp, pi_y / sim.nv.d_perp, pi_z / sim.nv.d_par);
        let model = match single_nv_spectrum_with_basis(
            &basis, &e, rho_s, gamma, phi_mw_deg, hyperfine, &sim, &data.grid,
        ) {
            Ok(m) => m,
            Err(_) => return PENALTY,
        };
        match nuisance_optimize(&model.contrast, &data.contrast, sigma) {
            Ok((_, _, r)) => r,
            Err(_) => PENALTY,
        }
    };

    let start = match initial {
        Some(g) => {
            let phi = g.phi_e_deg.to_radians();
            vec![
                g.pi_perp * phi.cos(),
                g.pi_perp * phi.sin(),
                g.pi_z,
                g.rho_s,
                g.gamma,
            ]
        }
        None => {
            let mut best = (f64::INFINITY, vec![0.0; 5]);
            for &pp in &cfg.coarse_pi_perp {
                for &phi_deg in &cfg.coarse_phi_e_deg {
                    let phi = phi_deg.to_radians();
                    for &pz in &cfg.coarse_pi_z {
                        let theta = vec![
                            pp * phi.cos(),
                            pp * phi.sin(),
                            pz,
                            cfg.rho_s_init,
                            cfg.gamma_init,
                        ];
                        let f = objective(&theta);
                        if f < best.0 {
                            best = (f, theta);
                        }
                    }
                }
            }
            best.1
        }
    };

    let scale = vec![0.05, 0.05, 0.02, (start[3] * 0.3).max(0.02), 0.05];
    let result = nelder_mead(objective, &start, &scale, &cfg.simplex);
    if !result.converged {
        return Err(Error::NonConvergence(format!(
            "simplex hit the iteration cap ({} iterations, residual {:.3e})",
            result.iterations, result.f
        )));
    }

    let theta = result.x;
    let min_residual = result.f;
    let mut at_bound = Vec::new();
    if theta[3] < 1e-6 {
        at_bound.push("rho_s".to_string());
    }
    if theta[4] < 1e-6 {
        at_bound.push("gamma".to_string());
    }
    for p in &at_bound {
        log::warn!("fitted {p} is pinned at its lower bound");
    }

    // Per-parameter standard errors from the local curvature.
    let dof = (data.grid.n_points as f64 - 7.0).max(1.0);
    let noise_var = min_residual / dof;
    let mut sigmas = [0.0; 5];
    for k in 0..5 {
        let delta = (0.02 * theta[k].abs()).max(2e-3);
        let probe = |offset: f64| {
            let mut t = theta.clone();
            t[k] += offset;
            objective(&t)
        };
        let curvature = (probe(-delta) - 2.0 * min_residual + probe(delta)) / (delta * delta);
        sigmas[k] = if curvature > 0.0 {
            (2.0 * noise_var / curvature).sqrt()
        } else {
            delta
        };
    }

    // Recover the nuisances at the optimum.
    let e_best = Vector3::new(
        theta[0] / sim.nv.d_perp,
        theta[1] / sim.nv.d_perp,
        theta[2] / sim.nv.d_par,
    );
    let model = single_nv_spectrum_with_basis(
        &basis,
        &e_best,
        theta[3].max(0.0),
        theta[4],
        phi_mw_deg,
        hyperfine,
        &sim,
        &data.grid,
    )?;
    let (amp, off, _) = nuisance_optimize(&model.contrast, &data.contrast, sigma)?;
    let nuisance = NuisanceValues {
        center_shift: 0.0,
        amplitude: amp,
        offset: off,
    };

    let field = |name: &str, value: f64, sigma: f64, susceptibility: f64| FitResult {
        parameter: name.to_string(),
        best: value / susceptibility,
        lower: (value - sigma) / susceptibility,
        upper: (value + sigma) / susceptibility,
        min_residual,
        nuisance,
        at_edge: false,
    };

    Ok(SingleNvFit {
        e_x: field("e_x", theta[0], sigmas[0], sim.nv.d_perp),
        e_y: field("e_y", theta[1], sigmas[1], sim.nv.d_perp),
        e_z: field("e_z", theta[2], sigmas[2], sim.nv.d_par),
        rho_s: FitResult {
            parameter: "rho_s".into(),
            best: theta[3],
            lower: theta[3] - sigmas[3],
            upper: theta[3] + sigmas[3],
            min_residual,
            nuisance,
            at_edge: at_bound.iter().any(|p| p == "rho_s"),
        },
        gamma: FitResult {
            parameter: "gamma".into(),
            best: theta[4],
            lower: theta[4] - sigmas[4],
            upper: theta[4] + sigmas[4],
            min_residual,
            nuisance,
            at_edge: at_bound.iter().any(|p| p == "gamma"),
        },
        nuisance,
        min_residual,
        at_bound,
    })
}
