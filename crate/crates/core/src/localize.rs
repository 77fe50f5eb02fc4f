//! Dark-state spectroscopy pipeline: microwave polarization from the wire
//! geometry, imbalance estimation, transverse-angle extraction, electric
//! field reconstruction and single-charge localization with a Monte Carlo
//! confidence cloud.
//!
//! Frames: the lab frame (X̂, Ŷ, Ẑ) is set by the diamond's ⟨100⟩ faces with
//! Ẑ along the surface normal; the NV frame has ẑ along one of the four
//! ⟨111⟩ axes and x̂ chosen so a carbon-vacancy bond lies in the x–z plane.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{NvConstants, PhysicalConstants, V_PER_NM_IN_MV_PER_M};
use crate::error::{Error, Result};
use crate::spectrum::Spectrum;
use crate::spin::wrap_deg_360;

/// A value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// Geometry of the microwave delivery wire relative to the NV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WireGeometry {
    /// In-plane wire angle with respect to lab X̂, degrees.
    pub phi_wire_deg: f64,
    /// Height of the wire plane above the NV, µm.
    pub height_um: f64,
    /// One-sigma uncertainty of the height, µm.
    pub height_sigma_um: f64,
    /// In-plane NV–wire distance, µm.
    pub in_plane_distance_um: f64,
    /// Half-range of the out-of-plane wire tilt, degrees.
    pub tilt_sigma_deg: f64,
}

impl Default for WireGeometry {
    fn default() -> Self {
        Self {
            phi_wire_deg: 0.0,
            height_um: 550.0,
            height_sigma_um: 100.0,
            in_plane_distance_um: 0.0,
            tilt_sigma_deg: 10.0,
        }
    }
}

impl WireGeometry {
    fn validate(&self) -> Result<()> {
        if self.height_um <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "wire height must be positive, got {}",
                self.height_um
            )));
        }
        if self.tilt_sigma_deg < 0.0 || self.height_sigma_um < 0.0 {
            return Err(Error::InvalidConfig("uncertainties must be >= 0".into()));
        }
        Ok(())
    }
}

/// The four ⟨111⟩ NV orientations.
///
/// For each axis, x̂ is the projection of a fixed carbon-vacancy bond into
/// the plane normal to ẑ, and ŷ = ẑ × x̂ completes a right-handed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NvAxis {
    /// ẑ ∥ [111]
    #[default]
    Axis111,
    /// ẑ ∥ [1̄1̄1]
    AxisM1M11,
    /// ẑ ∥ [1̄11̄]
    AxisM11M1,
    /// ẑ ∥ [11̄1̄]
    Axis1M1M1,
}

impl NvAxis {
    pub const ALL: [NvAxis; 4] = [
        NvAxis::Axis111,
        NvAxis::AxisM1M11,
        NvAxis::AxisM11M1,
        NvAxis::Axis1M1M1,
    ];

    fn axes(self) -> (Vector3<f64>, Vector3<f64>) {
        // (z, x) pairs; x ⊥ z by construction.
        let (z, x) = match self {
            NvAxis::Axis111 => ([1.0, 1.0, 1.0], [1.0, 1.0, -2.0]),
            NvAxis::AxisM1M11 => ([-1.0, -1.0, 1.0], [-1.0, -1.0, -2.0]),
            NvAxis::AxisM11M1 => ([-1.0, 1.0, -1.0], [-1.0, 1.0, 2.0]),
            NvAxis::Axis1M1M1 => ([1.0, -1.0, -1.0], [1.0, -1.0, 2.0]),
        };
        (
            Vector3::from(z).normalize(),
            Vector3::from(x).normalize(),
        )
    }
}

/// NV orientation in the lab frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NvOrientation {
    pub axis: NvAxis,
}

impl NvOrientation {
    pub fn new(axis: NvAxis) -> Self {
        Self { axis }
    }

    /// Rotation taking lab-frame vectors to NV-frame components; rows are
    /// (x̂, ŷ, ẑ) in lab coordinates.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (z, x) = self.axis.axes();
        let y = z.cross(&x);
        Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
    }
}

fn wire_direction(phi_wire_deg: f64, tilt_deg: f64) -> Vector3<f64> {
    let phi = phi_wire_deg.to_radians();
    let tilt = tilt_deg.to_radians();
    Vector3::new(
        phi.cos() * tilt.cos(),
        phi.sin() * tilt.cos(),
        tilt.sin(),
    )
}

fn mw_field_direction(wire: &WireGeometry, tilt_deg: f64, height_um: f64) -> Vector3<f64> {
    // A wire is headless: φ and φ+180° describe the same line.
    let phi_deg = wire.phi_wire_deg.rem_euclid(180.0);
    let w = wire_direction(phi_deg, tilt_deg);
    // In-plane normal to the wire; the wire passes through r·n̂ + h·Ẑ.
    let phi = phi_deg.to_radians();
    let normal = Vector3::new(-phi.sin(), phi.cos(), 0.0);
    let anchor = wire.in_plane_distance_um * normal + height_um * Vector3::z();
    // Perpendicular displacement from the wire axis to the NV at the origin.
    let delta = -anchor + anchor.dot(&w) * w;
    w.cross(&delta.normalize())
}

/// Transverse microwave polarization angle φ_MW in the NV frame, degrees in
/// [0°, 360°). Only the field direction matters; the current magnitude (and
/// its sign, since linear polarization is headless) cancels.
pub fn microwave_polarization(wire: &WireGeometry, nv: &NvOrientation) -> Result<f64> {
    wire.validate()?;
    let b_lab = mw_field_direction(wire, 0.0, wire.height_um);
    let b_nv = nv.rotation() * b_lab;
    let transverse = b_nv.x.hypot(b_nv.y);
    if transverse < 1e-12 * b_nv.norm().max(1e-300) {
        return Err(Error::ZeroTransverseProjection);
    }
    Ok(wrap_deg_360(b_nv.y.atan2(b_nv.x).to_degrees()))
}

/// Monte Carlo distribution of φ_MW under wire tilt and height uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MwAngleDistribution {
    pub mean_deg: f64,
    pub std_deg: f64,
    pub samples_deg: Vec<f64>,
}

/// Propagate the wire-geometry uncertainty into φ_MW: tilt uniform in
/// ±tilt_sigma, height normal around its nominal value.
pub fn mw_angle_uncertainty<R: Rng + ?Sized>(
    wire: &WireGeometry,
    nv: &NvOrientation,
    n_mc: usize,
    rng: &mut R,
) -> Result<MwAngleDistribution> {
    wire.validate()?;
    if n_mc < 100 {
        return Err(Error::InvalidConfig(format!(
            "need at least 100 Monte Carlo samples, got {n_mc}"
        )));
    }
    let nominal = microwave_polarization(wire, nv)?;
    let rotation = nv.rotation();
    let height = Normal::new(wire.height_um, wire.height_sigma_um.max(f64::MIN_POSITIVE))
        .expect("finite parameters");
    let mut samples = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let tilt = if wire.tilt_sigma_deg > 0.0 {
            rng.gen_range(-wire.tilt_sigma_deg..=wire.tilt_sigma_deg)
        } else {
            0.0
        };
        let h = if wire.height_sigma_um > 0.0 {
            height.sample(rng).max(1e-3)
        } else {
            wire.height_um
        };
        let b_nv = rotation * mw_field_direction(wire, tilt, h);
        let raw = wrap_deg_360(b_nv.y.atan2(b_nv.x).to_degrees());
        // Polarization is headless: fold into ±90° of the nominal angle.
        let mut folded = raw;
        while folded - nominal > 90.0 {
            folded -= 180.0;
        }
        while folded - nominal < -90.0 {
            folded += 180.0;
        }
        samples.push(folded);
    }
    let mean = samples.iter().sum::<f64>() / n_mc as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n_mc as f64;
    Ok(MwAngleDistribution {
        mean_deg: mean,
        std_deg: var.sqrt(),
        samples_deg: samples,
    })
}

/// Measured imbalance versus microwave polarization.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ImbalanceCurve {
    pub phi_mw_deg: Vec<f64>,
    pub imbalance: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl ImbalanceCurve {
    pub fn new(phi_mw_deg: Vec<f64>, imbalance: Vec<f64>) -> Result<Self> {
        if phi_mw_deg.len() != imbalance.len() {
            return Err(Error::InvalidConfig("curve columns differ in length".into()));
        }
        if imbalance.iter().any(|i| !(-1.0..=1.0).contains(i)) {
            return Err(Error::InvalidConfig(
                "imbalance values must lie in [-1, 1]".into(),
            ));
        }
        Ok(Self {
            phi_mw_deg,
            imbalance,
            sigma: None,
        })
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.phi_mw_deg.len() {
            return Err(Error::InvalidConfig("sigma length mismatch".into()));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }
}

/// Result of fitting I(φ_MW) = −A·cos(2φ_MW + φ_E).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceFit {
    pub phi_e: Measured,
    pub amplitude: Measured,
    /// Amplitude consistent with zero: φ_E is unconstrained.
    pub amplitude_warning: bool,
}

/// Extract the transverse field angle from an imbalance curve.
///
/// The model is linear in (A cosφ_E, A sinφ_E), so the fit is closed-form;
/// parameter covariance comes from the residuals (or the supplied per-point
/// uncertainties). The 180°-periodicity in φ_MW leaves φ_E unambiguous in
/// [0°, 360°).
pub fn fit_imbalance_curve(curve: &ImbalanceCurve) -> Result<ImbalanceFit> {
    let n = curve.phi_mw_deg.len();
    let span = curve
        .phi_mw_deg
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        - curve
            .phi_mw_deg
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
    if n < 4 || span < 90.0 {
        return Err(Error::InsufficientSpan {
            needed: 4,
            span_deg: 90.0,
            got: n,
            got_span_deg: if span.is_finite() { span } else { 0.0 },
        });
    }

    // I = c·cos(2φ) + s·sin(2φ) with c = −A cosφ_E, s = A sinφ_E.
    let weights: Vec<f64> = match &curve.sigma {
        Some(sig) => sig.iter().map(|&x| 1.0 / (x * x)).collect(),
        None => vec![1.0; n],
    };
    let mut scc = 0.0;
    let mut sss = 0.0;
    let mut scs = 0.0;
    let mut syc = 0.0;
    let mut sys = 0.0;
    for ((&phi, &y), &w) in curve.phi_mw_deg.iter().zip(&curve.imbalance).zip(&weights) {
        let arg = 2.0 * phi.to_radians();
        let (sn, cs) = arg.sin_cos();
        scc += w * cs * cs;
        sss += w * sn * sn;
        scs += w * cs * sn;
        syc += w * y * cs;
        sys += w * y * sn;
    }
    let det = scc * sss - scs * scs;
    if det.abs() < 1e-12 * (scc * sss).max(1e-300) {
        return Err(Error::SingularDesign);
    }
    let c = (sss * syc - scs * sys) / det;
    let s = (scc * sys - scs * syc) / det;

    let amplitude = c.hypot(s);
    let phi_e_deg = wrap_deg_360(s.atan2(-c).to_degrees());

    // Covariance of (c, s): σ²·(XᵀWX)⁻¹, with σ² from the residuals when no
    // per-point uncertainties are given.
    let ssr: f64 = curve
        .phi_mw_deg
        .iter()
        .zip(&curve.imbalance)
        .zip(&weights)
        .map(|((&phi, &y), &w)| {
            let arg = 2.0 * phi.to_radians();
            let r = y - c * arg.cos() - s * arg.sin();
            w * r * r
        })
        .sum();
    let scale = if curve.sigma.is_some() {
        1.0
    } else {
        ssr / (n as f64 - 2.0).max(1.0)
    };
    let var_c = scale * sss / det;
    let var_s = scale * scc / det;
    let cov_cs = -scale * scs / det;

    let (sigma_a, sigma_phi_deg) = if amplitude > 0.0 {
        let da = [c / amplitude, s / amplitude];
        let a2 = amplitude * amplitude;
        let dphi = [s / a2, -c / a2];
        let var_a =
            da[0] * da[0] * var_c + da[1] * da[1] * var_s + 2.0 * da[0] * da[1] * cov_cs;
        let var_phi =
            dphi[0] * dphi[0] * var_c + dphi[1] * dphi[1] * var_s + 2.0 * dphi[0] * dphi[1] * cov_cs;
        (var_a.max(0.0).sqrt(), var_phi.max(0.0).sqrt().to_degrees())
    } else {
        (var_c.max(var_s).sqrt(), 180.0)
    };

    let amplitude_warning = amplitude < 2.0 * sigma_a || amplitude < 1e-12;
    if amplitude_warning {
        log::warn!("imbalance amplitude {amplitude:.3e} consistent with zero; phi_E unconstrained");
    }
    Ok(ImbalanceFit {
        phi_e: Measured::new(phi_e_deg, sigma_phi_deg),
        amplitude: Measured::new(amplitude, sigma_a),
        amplitude_warning,
    })
}

/// The six-point sampling scheme: two contrast values on each inner
/// resonance and two on the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SixPointSample {
    /// Contrast on the lower-frequency (|−⟩) resonance.
    pub lower_resonance: [f64; 2],
    /// Contrast on the upper-frequency (|+⟩) resonance.
    pub upper_resonance: [f64; 2],
    /// Contrast far from the resonances.
    pub baseline: [f64; 2],
}

/// Imbalance from six spectral points: resonance amplitudes are the mean
/// contrast on each line minus the mean baseline.
pub fn six_point_imbalance(sample: &SixPointSample) -> Result<f64> {
    let base = 0.5 * (sample.baseline[0] + sample.baseline[1]);
    let a_minus = 0.5 * (sample.lower_resonance[0] + sample.lower_resonance[1]) - base;
    let a_plus = 0.5 * (sample.upper_resonance[0] + sample.upper_resonance[1]) - base;
    if a_plus < 0.0 || a_minus < 0.0 {
        log::warn!("baseline above a resonance (A+ = {a_plus:.3e}, A- = {a_minus:.3e})");
    }
    let total = a_plus + a_minus;
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    Ok((a_plus - a_minus) / total)
}

/// Imbalance from the baseline-subtracted contrast integrated on either side
/// of the center frequency.
pub fn integrated_imbalance(spectrum: &Spectrum, center_freq: f64) -> Result<f64> {
    let grid = &spectrum.grid;
    if !grid.contains(center_freq) {
        return Err(Error::OutsideGrid {
            frequency_mhz: center_freq,
            start_mhz: grid.start,
            stop_mhz: grid.stop,
        });
    }
    // Baseline: the quieter of the two grid edges.
    let m = (grid.n_points / 10).max(1);
    let head: f64 = spectrum.contrast[..m].iter().sum::<f64>() / m as f64;
    let tail: f64 = spectrum.contrast[grid.n_points - m..].iter().sum::<f64>() / m as f64;
    let baseline = head.min(tail);

    let dg = grid.spacing();
    let mut below = 0.0;
    let mut above = 0.0;
    for i in 0..grid.n_points - 1 {
        let (f0, f1) = (grid.value(i), grid.value(i + 1));
        let (y0, y1) = (
            spectrum.contrast[i] - baseline,
            spectrum.contrast[i + 1] - baseline,
        );
        if f1 <= center_freq {
            below += 0.5 * (y0 + y1) * dg;
        } else if f0 >= center_freq {
            above += 0.5 * (y0 + y1) * dg;
        } else {
            // Split the straddling cell at the center frequency.
            let frac = (center_freq - f0) / dg;
            let yc = y0 + (y1 - y0) * frac;
            below += 0.5 * (y0 + yc) * (center_freq - f0);
            above += 0.5 * (yc + y1) * (f1 - center_freq);
        }
    }
    let total = above + below;
    if total <= 0.0 {
        return Err(Error::ZeroTotalWeight);
    }
    Ok((above - below) / total)
}

/// Reconstructed electric-field vector with per-component uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EVector {
    /// MV/m.
    pub e: Vector3<f64>,
    /// One-sigma per-component uncertainties, MV/m.
    pub sigma: Vector3<f64>,
}

/// Electric field from the measured couplings:
/// E_x = (Π_⊥/d_⊥)cosφ_E, E_y = (Π_⊥/d_⊥)sinφ_E, E_z = Π_z/d_∥,
/// with first-order error propagation.
pub fn reconstruct_field(
    pi_z: Measured,
    pi_perp: Measured,
    phi_e_deg: Measured,
    consts: &NvConstants,
) -> Result<EVector> {
    if pi_perp.value < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "pi_perp must be >= 0, got {}",
            pi_perp.value
        )));
    }
    let phi = phi_e_deg.value.to_radians();
    let sigma_phi = phi_e_deg.sigma.to_radians();
    let (sin, cos) = phi.sin_cos();
    let e_perp = pi_perp.value / consts.d_perp;
    let e = Vector3::new(e_perp * cos, e_perp * sin, pi_z.value / consts.d_par);
    let sigma_perp = pi_perp.sigma / consts.d_perp;
    let sigma = Vector3::new(
        (cos * sigma_perp).hypot(e_perp * sin * sigma_phi),
        (sin * sigma_perp).hypot(e_perp * cos * sigma_phi),
        pi_z.sigma / consts.d_par,
    );
    Ok(EVector { e, sigma })
}

/// Position of a localized point charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargePosition {
    pub distance_nm: f64,
    pub position_nm: Vector3<f64>,
}

/// Invert the Coulomb law for a single fundamental charge.
///
/// d = √(k/(ε_r·|E|)), and the charge sits along the field direction:
/// under the sign convention of [`crate::bath::electric_field`] the field of
/// a positive charge points from the NV toward the charge, so
///
/// ```text
///   NV ●────E───▶ ⊕   position = sign · d · Ê
/// ```
///
/// (a negative charge at the same field sits on the opposite side).
pub fn localize_charge(
    e_field: &Vector3<f64>,
    charge_sign: i8,
    consts: &PhysicalConstants,
) -> Result<ChargePosition> {
    let magnitude = e_field.norm();
    if magnitude <= 0.0 {
        return Err(Error::ZeroField);
    }
    let e_v_per_nm = magnitude / V_PER_NM_IN_MV_PER_M;
    let distance = (consts.coulomb_k / (consts.eps_r * e_v_per_nm)).sqrt();
    Ok(ChargePosition {
        distance_nm: distance,
        position_nm: f64::from(charge_sign) * distance * e_field / magnitude,
    })
}

/// Monte Carlo confidence cloud of charge positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceCloud {
    pub positions: Vec<Vector3<f64>>,
    /// Nested probability levels, ascending.
    pub levels: Vec<f64>,
    /// For each position, the index of the smallest level containing it
    /// (levels.len() = outside all levels).
    pub labels: Vec<usize>,
    pub center: Vector3<f64>,
    /// Mahalanobis-distance² threshold per level.
    thresholds: Vec<f64>,
    precision: Matrix3<f64>,
}

impl ConfidenceCloud {
    /// Whether `point` falls inside the confidence region at `level_index`.
    pub fn contains(&self, level_index: usize, point: &Vector3<f64>) -> bool {
        self.mahalanobis_sq(point) <= self.thresholds[level_index]
    }

    fn mahalanobis_sq(&self, point: &Vector3<f64>) -> f64 {
        let d = point - self.center;
        (d.transpose() * self.precision * d)[(0, 0)]
    }
}

/// Sample the field components from independent normals, localize each draw
/// and rank the cloud by Mahalanobis distance to assign nested confidence
/// regions (default levels 68% and 95%).
pub fn confidence_region<R: Rng + ?Sized>(
    e_vector: &EVector,
    charge_sign: i8,
    levels: &[f64],
    n_mc: usize,
    consts: &PhysicalConstants,
    rng: &mut R,
) -> Result<ConfidenceCloud> {
    if n_mc < 1000 {
        return Err(Error::InvalidConfig(format!(
            "need at least 1000 Monte Carlo samples, got {n_mc}"
        )));
    }
    let mut levels = levels.to_vec();
    if levels.is_empty() {
        levels = vec![0.68, 0.95];
    }
    levels.sort_by(f64::total_cmp);
    if levels.iter().any(|l| !(0.0..1.0).contains(l)) {
        return Err(Error::InvalidConfig(
            "confidence levels must lie in [0, 1)".into(),
        ));
    }

    let mut positions = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let mut e = e_vector.e;
        for k in 0..3 {
            if e_vector.sigma[k] > 0.0 {
                e[k] += Normal::new(0.0, e_vector.sigma[k])
                    .expect("positive sigma")
                    .sample(rng);
            }
        }
        if e.norm() == 0.0 {
            continue;
        }
        positions.push(localize_charge(&e, charge_sign, consts)?.position_nm);
    }
    if positions.is_empty() {
        return Err(Error::ZeroField);
    }

    let n = positions.len() as f64;
    let center = positions.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for p in &positions {
        let d = p - center;
        cov += d * d.transpose();
    }
    cov /= n;
    // Ridge keeps the inverse finite when the cloud collapses to a point.
    let ridge = 1e-12 * cov.trace().max(1e-12);
    cov += Matrix3::identity() * ridge;
    let precision = cov.try_inverse().ok_or(Error::DegenerateData)?;

    let mut d2: Vec<f64> = positions
        .iter()
        .map(|p| {
            let d = p - center;
            (d.transpose() * precision * d)[(0, 0)]
        })
        .collect();
    let mut sorted = d2.clone();
    sorted.sort_by(f64::total_cmp);
    let thresholds: Vec<f64> = levels
        .iter()
        .map(|&l| sorted[((l * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1)])
        .collect();
    let labels: Vec<usize> = d2
        .iter_mut()
        .map(|d| thresholds.iter().position(|&t| *d <= t).unwrap_or(levels.len()))
        .collect();

    Ok(ConfidenceCloud {
        positions,
        levels,
        labels,
        center,
        thresholds,
        precision,
    })
}
