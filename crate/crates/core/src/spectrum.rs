//! Frequency grids and ODMR spectra.
//!
//! Contrast is stored dip-positive: larger values mean a deeper ODMR dip.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform frequency grid in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub start: f64,
    pub stop: f64,
    pub n_points: usize,
}

impl FrequencyGrid {
    pub fn new(start: f64, stop: f64, n_points: usize) -> Result<Self> {
        if !(stop > start) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid must be strictly increasing, got [{start}, {stop}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self {
            start,
            stop,
            n_points,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.stop - self.start) / (self.n_points - 1) as f64
    }

    pub fn value(&self, index: usize) -> f64 {
        self.start + self.spacing() * index as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.value(i)).collect()
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.stop)
    }

    /// Index of the bin nearest to `frequency`, if inside the grid.
    pub fn nearest_bin(&self, frequency: f64) -> Option<usize> {
        let idx = ((frequency - self.start) / self.spacing()).round();
        if idx < 0.0 || idx > (self.n_points - 1) as f64 {
            None
        } else {
            Some(idx as usize)
        }
    }

    pub fn contains(&self, frequency: f64) -> bool {
        (self.start..=self.stop).contains(&frequency)
    }
}

/// A spectrum on a uniform grid with optional per-point uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    pub contrast: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, contrast: Vec<f64>) -> Result<Self> {
        if contrast.len() != grid.n_points {
            return Err(Error::InvalidConfig(format!(
                "contrast length {} does not match grid ({} points)",
                contrast.len(),
                grid.n_points
            )));
        }
        if contrast.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("contrast must be finite".into()));
        }
        Ok(Self {
            grid,
            contrast,
            sigma: None,
        })
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != self.grid.n_points {
            return Err(Error::InvalidConfig(format!(
                "sigma length {} does not match grid ({} points)",
                sigma.len(),
                self.grid.n_points
            )));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self {
            contrast: vec![0.0; grid.n_points],
            grid,
            sigma: None,
        }
    }

    /// Trapezoidal integral of the contrast over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.contrast) * self.grid.spacing()
    }

    /// Contrast-weighted mean frequency.
    pub fn weighted_mean_frequency(&self) -> Result<f64> {
        let total: f64 = self.contrast.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroTotalWeight);
        }
        let mut mean = 0.0;
        for (i, c) in self.contrast.iter().enumerate() {
            mean += c * self.grid.value(i);
        }
        Ok(mean / total)
    }

    /// Add iid Gaussian noise of absolute standard deviation `sigma` to each
    /// point and record it in the uncertainty column.
    pub fn add_noise<R: Rng + ?Sized>(&mut self, sigma: f64, rng: &mut R) {
        if sigma <= 0.0 {
            return;
        }
        let normal = Normal::new(0.0, sigma).expect("sigma is positive");
        for c in &mut self.contrast {
            *c += normal.sample(rng);
        }
        self.sigma = Some(vec![sigma; self.grid.n_points]);
    }

    /// Indices of local maxima with prominence above `prominence_frac` of the
    /// global maximum.
    pub fn local_maxima(&self, prominence_frac: f64) -> Vec<usize> {
        local_maxima(&self.contrast, prominence_frac)
    }
}

pub(crate) fn trapezoid(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    inner + 0.5 * (values[0] + values[values.len() - 1])
}

pub(crate) fn local_maxima(y: &[f64], prominence_frac: f64) -> Vec<usize> {
    let n = y.len();
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut peaks = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(y[i] > y[i - 1] && y[i] >= y[i + 1]) {
            continue;
        }
        // Prominence: lowest descent before re-ascending above y[i], each side.
        let mut left_min = y[i];
        for j in (0..i).rev() {
            left_min = left_min.min(y[j]);
            if y[j] > y[i] {
                break;
            }
        }
        let mut right_min = y[i];
        for j in i + 1..n {
            right_min = right_min.min(y[j]);
            if y[j] > y[i] {
                break;
            }
        }
        if y[i] - left_min.max(right_min) > prominence_frac * ymax {
            peaks.push(i);
        }
    }
    peaks
}

/// Convolve a histogram spectrum with a unit-area Lorentzian of FWHM `gamma`.
///
/// The kernel weight between two bins is the analytic integral of the
/// Lorentzian over the destination bin, so the discrete kernel carries
/// exactly the continuous line-shape mass and heavy tails are not truncated
/// inside the grid. `gamma = 0` is the identity.
pub fn lorentzian_convolve(histogram: &Spectrum, gamma: f64) -> Result<Spectrum> {
    if gamma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "linewidth must be non-negative, got {gamma}"
        )));
    }
    if gamma == 0.0 {
        return Ok(histogram.clone());
    }
    let n = histogram.grid.n_points;
    let dg = histogram.grid.spacing();
    let half = 0.5 * gamma;
    // kernel[k + n - 1] = mass of the Lorentzian in a bin offset by k.
    let kernel: Vec<f64> = (-(n as isize - 1)..n as isize)
        .map(|k| {
            let x = k as f64 * dg;
            (((x + 0.5 * dg) / half).atan() - ((x - 0.5 * dg) / half).atan())
                / std::f64::consts::PI
        })
        .collect();
    let mut out = vec![0.0; n];
    for (j, &w) in histogram.contrast.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += w * kernel[i + n - 1 - j];
        }
    }
    Spectrum::new(histogram.grid, out)
}
