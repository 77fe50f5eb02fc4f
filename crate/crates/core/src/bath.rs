//! Random charge and spin-bath configurations in a density-matched sphere,
//! and the electric field / axial magnetic offset they produce at the NV.
//!
//! The NV sits at the origin. Point defects are placed uniformly inside a
//! sphere whose radius matches the requested density; positions are sampled
//! as radius ∝ u^{1/3} with an isotropic direction, which is exactly uniform
//! without rejection. Points landing within one bond length of the origin
//! are redrawn to avoid unphysical divergences (affects < 10⁻⁶ of draws at
//! ppm densities).

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{NvConstants, PhysicalConstants, V_PER_NM_IN_MV_PER_M};
use crate::error::{Error, Result};

/// Minimum defect–NV distance, nm (one carbon bond length).
pub const EXCLUSION_RADIUS_NM: f64 = 0.15;

/// Densities, point counts and RNG seed for the bath samplers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Charge density, ppm.
    pub rho_c: f64,
    /// Effective electron-spin-bath density, ppm.
    pub rho_s: f64,
    /// Points per charge realization; must be even (half +e, half −e).
    pub n_charge: usize,
    /// Points per spin realization.
    pub n_spin: usize,
    /// Base seed; together with a realization index it determines all draws.
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            rho_c: 0.0,
            rho_s: 0.0,
            n_charge: 100,
            n_spin: 100,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_c < 0.0 || self.rho_s < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "densities must be non-negative, got rho_c={}, rho_s={}",
                self.rho_c, self.rho_s
            )));
        }
        if self.n_charge % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "n_charge must be even for charge neutrality, got {}",
                self.n_charge
            )));
        }
        Ok(())
    }

    /// Independent stream for charge realization `index`.
    ///
    /// Charge and spin streams interleave across the 64-bit stream space, so
    /// realizations can be generated in parallel in any schedule and still
    /// reproduce bit-identically.
    pub fn charge_rng(&self, index: u64) -> ChaCha8Rng {
        stream_rng(self.seed, index << 1)
    }

    /// Independent stream for spin realization `index`.
    pub fn spin_rng(&self, index: u64) -> ChaCha8Rng {
        stream_rng(self.seed, (index << 1) | 1)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Positions (nm) and signs (±1) of one charge realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargeConfiguration {
    pub positions: Vec<Vector3<f64>>,
    pub signs: Vec<i8>,
}

/// Positions (nm) and polarizations (±½) of one spin-bath realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinBathConfiguration {
    pub positions: Vec<Vector3<f64>>,
    pub polarizations: Vec<f64>,
}

/// Radius of the sphere holding `n_points` defects at density `rho` ppm:
/// R = (3N / (4π n₀ ρ))^{1/3}, nm.
pub fn sphere_radius(n_points: usize, rho: f64, consts: &PhysicalConstants) -> Result<f64> {
    if rho <= 0.0 {
        return Err(Error::NonPositiveDensity(rho));
    }
    if n_points == 0 {
        return Err(Error::InvalidConfig("n_points must be >= 1".into()));
    }
    Ok((3.0 * n_points as f64 / (4.0 * std::f64::consts::PI * consts.n0 * rho)).cbrt())
}

fn sample_point_in_sphere<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Vector3<f64> {
    loop {
        let r = radius * rng.gen::<f64>().cbrt();
        let cos_t: f64 = rng.gen_range(-1.0..=1.0);
        let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let sin_t = (1.0 - cos_t * cos_t).sqrt();
        let p = Vector3::new(r * sin_t * phi.cos(), r * sin_t * phi.sin(), r * cos_t);
        if p.norm() >= EXCLUSION_RADIUS_NM {
            return p;
        }
    }
}

/// Draw one charge realization: `n_charge` uniform points, half +e half −e.
pub fn sample_charges<R: Rng + ?Sized>(
    cfg: &SamplerConfig,
    consts: &PhysicalConstants,
    rng: &mut R,
) -> Result<ChargeConfiguration> {
    cfg.validate()?;
    let radius = sphere_radius(cfg.n_charge, cfg.rho_c, consts)?;
    let positions: Vec<_> = (0..cfg.n_charge)
        .map(|_| sample_point_in_sphere(radius, rng))
        .collect();
    let mut signs = vec![1i8; cfg.n_charge / 2];
    signs.extend(std::iter::repeat(-1i8).take(cfg.n_charge / 2));
    Ok(ChargeConfiguration { positions, signs })
}

/// Electric field at the origin in MV/m.
///
/// E = Σᵢ signᵢ (k/ε_r) r̂ᵢ/rᵢ², with r̂ᵢ the unit vector from the NV to
/// charge i. Under this sign convention the field of a positive charge
/// points from the NV toward the charge, which is what
/// [`crate::localize::localize_charge`] inverts.
pub fn electric_field(
    charges: &ChargeConfiguration,
    consts: &PhysicalConstants,
) -> Result<Vector3<f64>> {
    let mut field = Vector3::zeros();
    for (pos, sign) in charges.positions.iter().zip(&charges.signs) {
        let r = pos.norm();
        if r < EXCLUSION_RADIUS_NM {
            return Err(Error::SingularPosition { distance_nm: r });
        }
        field += f64::from(*sign) * pos / (r * r * r);
    }
    Ok(field * consts.coulomb_k / consts.eps_r * V_PER_NM_IN_MV_PER_M)
}

/// Electric couplings (Π_x, Π_y, Π_z) in MHz for a field in MV/m.
pub fn pi_from_field(e_field: &Vector3<f64>, consts: &NvConstants) -> (f64, f64, f64) {
    (
        consts.d_perp * e_field.x,
        consts.d_perp * e_field.y,
        consts.d_par * e_field.z,
    )
}

/// Draw one spin-bath realization: uniform positions, polarizations ±½.
pub fn sample_spin_bath<R: Rng + ?Sized>(
    cfg: &SamplerConfig,
    consts: &PhysicalConstants,
    rng: &mut R,
) -> Result<SpinBathConfiguration> {
    cfg.validate()?;
    let radius = sphere_radius(cfg.n_spin, cfg.rho_s, consts)?;
    let mut positions = Vec::with_capacity(cfg.n_spin);
    let mut polarizations = Vec::with_capacity(cfg.n_spin);
    for _ in 0..cfg.n_spin {
        positions.push(sample_point_in_sphere(radius, rng));
        polarizations.push(if rng.gen::<bool>() { 0.5 } else { -0.5 });
    }
    Ok(SpinBathConfiguration {
        positions,
        polarizations,
    })
}

/// Axial magnetic offset of the secular dipolar coupling, MHz:
/// δB_z = Σᵢ −(J₀/rᵢ³)(3(ẑ·r̂ᵢ)² − 1) pᵢ.
pub fn delta_bz(bath: &SpinBathConfiguration, consts: &PhysicalConstants) -> Result<f64> {
    let mut sum = 0.0;
    for (pos, p) in bath.positions.iter().zip(&bath.polarizations) {
        let r = pos.norm();
        if r < EXCLUSION_RADIUS_NM {
            return Err(Error::SingularPosition { distance_nm: r });
        }
        let nz = pos.z / r;
        sum += -(consts.j0 / (r * r * r)) * (3.0 * nz * nz - 1.0) * p;
    }
    Ok(sum)
}
