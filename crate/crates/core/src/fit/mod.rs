//! Residual-scan and nonlinear least-squares fitting of spectra.
//!
//! The ensemble fits follow a two-step flow: `rho_s` from a high-field
//! spectrum, then `rho_c` and the natural linewidth at zero field, scanning
//! a parameter grid and re-simulating at every point with common random
//! numbers. Errors come from the interval where residuals stay within 10%
//! of the minimum.

mod ensemble;
mod simplex;
mod single;

pub use ensemble::{fit_high_field, fit_zero_field, EnsembleFitConfig, HighFieldFit, ZeroFieldFit};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};
pub use single::{fit_single_nv, SingleNvFit, SingleNvFitConfig, SingleNvGuess};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold factor of the residual interval: residuals within 10% of the
/// minimum define the error bars.
pub const RESIDUAL_INTERVAL_FACTOR: f64 = 1.1;

/// Closed-form amplitude/offset solution attached to a fit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NuisanceValues {
    /// Rigid frequency shift applied to the model, MHz.
    pub center_shift: f64,
    pub amplitude: f64,
    pub offset: f64,
}

/// Best value of one fitted parameter with its uncertainty interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameter: String,
    pub best: f64,
    /// Lower edge of the uncertainty interval (lower <= best <= upper).
    pub lower: f64,
    pub upper: f64,
    pub min_residual: f64,
    pub nuisance: NuisanceValues,
    /// Set when the best value sits on the edge of the scanned grid.
    pub at_edge: bool,
}

impl FitResult {
    pub fn contains(&self, value: f64) -> bool {
        (self.lower..=self.upper).contains(&value)
    }
}

/// Residuals over a scanned parameter grid with the 10% interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualScan {
    pub values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// 1.1 × minimum residual.
    pub threshold: f64,
    /// Extremal grid values whose residual stays under the threshold.
    pub interval: (f64, f64),
    /// The argmin or the interval touches the grid boundary.
    pub at_edge: bool,
}

impl ResidualScan {
    pub fn new(values: Vec<f64>, residuals: Vec<f64>) -> Result<Self> {
        if values.len() != residuals.len() || values.is_empty() {
            return Err(Error::InvalidConfig(
                "scan needs matching, non-empty grids".into(),
            ));
        }
        let (argmin, _) = residuals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        let threshold = RESIDUAL_INTERVAL_FACTOR * residuals[argmin];
        let inside: Vec<usize> = (0..values.len())
            .filter(|&i| residuals[i] <= threshold)
            .collect();
        let lo = *inside.first().expect("argmin is inside");
        let hi = *inside.last().expect("argmin is inside");
        let at_edge = argmin == 0 || argmin == values.len() - 1 || lo == 0 || hi == values.len() - 1;
        Ok(Self {
            interval: (values[lo], values[hi]),
            at_edge,
            threshold,
            values,
            residuals,
        })
    }

    pub fn argmin(&self) -> usize {
        self.residuals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty")
            .0
    }

    pub fn min_residual(&self) -> f64 {
        self.residuals[self.argmin()]
    }

    /// Best parameter value: parabolic refinement of the argmin through its
    /// neighbors when interior, the raw grid point otherwise.
    pub fn refined_best(&self) -> f64 {
        let i = self.argmin();
        if i == 0 || i + 1 == self.values.len() {
            return self.values[i];
        }
        let (x0, x1, x2) = (self.values[i - 1], self.values[i], self.values[i + 1]);
        let (y0, y1, y2) = (
            self.residuals[i - 1],
            self.residuals[i],
            self.residuals[i + 1],
        );
        let denom = (y0 - 2.0 * y1 + y2).max(f64::MIN_POSITIVE);
        let shift = 0.5 * (y0 - y2) / denom;
        // Keep the vertex inside the bracketing cell.
        let half = 0.5 * (x2 - x0);
        x1 + (shift * half).clamp(x0 - x1, x2 - x1)
    }
}

/// Extremal grid values whose residual lies within 10% of the minimum.
pub fn error_from_interval(scan: &ResidualScan) -> (f64, f64) {
    scan.interval
}

/// Closed-form least squares of data ≈ a·model + b.
///
/// Returns (a, b, residual); weighted by 1/σ² when `sigma` is given.
/// A constant model makes a and b degenerate and is rejected.
pub fn nuisance_optimize(
    model: &[f64],
    data: &[f64],
    sigma: Option<&[f64]>,
) -> Result<(f64, f64, f64)> {
    if model.len() != data.len() || model.is_empty() {
        return Err(Error::InvalidConfig(
            "model and data must share a grid".into(),
        ));
    }
    let weights: Vec<f64> = match sigma {
        Some(s) => {
            if s.len() != data.len() {
                return Err(Error::InvalidConfig("sigma length mismatch".into()));
            }
            s.iter().map(|&x| 1.0 / (x * x)).collect()
        }
        None => vec![1.0; data.len()],
    };
    let mut sw = 0.0;
    let mut swm = 0.0;
    let mut swd = 0.0;
    let mut swmm = 0.0;
    let mut swmd = 0.0;
    for ((&m, &d), &w) in model.iter().zip(data).zip(&weights) {
        sw += w;
        swm += w * m;
        swd += w * d;
        swmm += w * m * m;
        swmd += w * m * d;
    }
    let det = sw * swmm - swm * swm;
    // Scale-aware singularity check: det vanishes iff the model is constant.
    if det.abs() <= 1e-12 * sw * swmm.max(1e-300) {
        return Err(Error::SingularDesign);
    }
    let a = (sw * swmd - swm * swd) / det;
    let b = (swmm * swd - swm * swmd) / det;
    let residual = model
        .iter()
        .zip(data)
        .zip(&weights)
        .map(|((&m, &d), &w)| {
            let r = d - a * m - b;
            w * r * r
        })
        .sum();
    Ok((a, b, residual))
}

/// Linear interpolation of `values` (on `grid`) at `x`, clamping to the ends.
pub(crate) fn interp(grid_start: f64, spacing: f64, values: &[f64], x: f64) -> f64 {
    let pos = (x - grid_start) / spacing;
    if pos <= 0.0 {
        return values[0];
    }
    let max = (values.len() - 1) as f64;
    if pos >= max {
        return values[values.len() - 1];
    }
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    values[lo] * (1.0 - frac) + values[lo + 1] * frac
}

/// Golden-section minimization of a 1-D unimodal function on [lo, hi].
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nuisance_identity() {
        let data = [1.0, 2.0, 5.0, 3.0];
        let (a, b, r) = nuisance_optimize(&data, &data, None).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 0.0, epsilon = 1e-12);
        assert!(r < 1e-24);
    }

    #[test]
    fn nuisance_affine_recovery() {
        // model = 2·data − 3 → data = 0.5·model + 1.5.
        let data = [1.0, 2.0, 5.0, 3.0, -1.0];
        let model: Vec<f64> = data.iter().map(|d| 2.0 * d - 3.0).collect();
        let (a, b, r) = nuisance_optimize(&model, &data, None).unwrap();
        assert_relative_eq!(a, 0.5, epsilon = 1e-12);
        assert_relative_eq!(b, 1.5, epsilon = 1e-12);
        assert!(r < 1e-24);
    }

    #[test]
    fn constant_model_is_singular() {
        let data = [1.0, 2.0, 3.0];
        let model = [4.0, 4.0, 4.0];
        assert!(matches!(
            nuisance_optimize(&model, &data, None),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn weighted_nuisance_prefers_tight_points() {
        let model = [0.0, 1.0, 2.0];
        let data = [0.0, 1.0, 10.0];
        let sigma = [0.01, 0.01, 100.0];
        let (a, b, _) = nuisance_optimize(&model, &data, Some(&sigma)).unwrap();
        // The outlier carries negligible weight.
        assert_relative_eq!(a, 1.0, epsilon = 1e-3);
        assert_relative_eq!(b, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn parabolic_interval_from_scan() {
        // r(x) = (x−2)² + 10 on 0..4 step 0.1: threshold 11 → interval [1, 3].
        let values: Vec<f64> = (0..=40).map(|i| i as f64 * 0.1).collect();
        let residuals: Vec<f64> = values.iter().map(|x| (x - 2.0).powi(2) + 10.0).collect();
        let scan = ResidualScan::new(values, residuals).unwrap();
        assert_relative_eq!(scan.threshold, 11.0, epsilon = 1e-9);
        assert_relative_eq!(scan.interval.0, 1.0, epsilon = 1e-9);
        assert_relative_eq!(scan.interval.1, 3.0, epsilon = 1e-9);
        assert!(!scan.at_edge);
        assert_relative_eq!(scan.refined_best(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn flat_scan_spans_the_grid() {
        let values = vec![0.0, 1.0, 2.0];
        let residuals = vec![5.0, 5.0, 5.0];
        let scan = ResidualScan::new(values, residuals).unwrap();
        assert_eq!(scan.interval, (0.0, 2.0));
        assert!(scan.at_edge);
    }

    #[test]
    fn monotone_scan_is_edge_flagged() {
        let values = vec![0.0, 1.0, 2.0, 3.0];
        let residuals = vec![4.0, 3.0, 2.0, 1.0];
        let scan = ResidualScan::new(values, residuals).unwrap();
        assert!(scan.at_edge);
        assert_eq!(scan.refined_best(), 3.0);
    }

    #[test]
    fn golden_section_finds_quadratic_minimum() {
        let (x, f) = golden_section(|x| (x - 1.3).powi(2) + 0.5, -4.0, 6.0, 1e-10);
        assert_relative_eq!(x, 1.3, epsilon = 1e-8);
        assert_relative_eq!(f, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interp_is_exact_on_nodes_and_clamps() {
        let vals = [0.0, 1.0, 4.0];
        assert_relative_eq!(interp(0.0, 1.0, &vals, 1.0), 1.0);
        assert_relative_eq!(interp(0.0, 1.0, &vals, 1.5), 2.5);
        assert_relative_eq!(interp(0.0, 1.0, &vals, -3.0), 0.0);
        assert_relative_eq!(interp(0.0, 1.0, &vals, 7.0), 4.0);
    }
}
