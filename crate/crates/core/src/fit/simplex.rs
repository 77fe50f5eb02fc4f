//! Derivative-free Nelder–Mead simplex minimizer.
//!
//! The single-NV forward model is Monte-Carlo-discretized, so gradients are
//! unreliable; a simplex search over a handful of parameters is the right
//! tool and small enough to own.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop when the simplex diameter falls below this.
    pub x_tolerance: f64,
    /// Stop when the function spread over the simplex falls below this.
    pub f_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            x_tolerance: 1e-8,
            f_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize `f` from `start`, building the initial simplex with per-axis
/// steps `scale`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    scale: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let n = start.len();
    assert_eq!(scale.len(), n, "one scale per dimension");
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += scale[i];
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let diameter = simplex
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let spread = values[worst] - values[best];
        if diameter < opts.x_tolerance || spread.abs() < opts.f_tolerance {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for (k, v) in simplex.iter().enumerate() {
            if k == worst {
                continue;
            }
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let point_at = |t: f64, c: &[f64], w: &[f64]| -> Vec<f64> {
            c.iter().zip(w).map(|(&ci, &wi)| ci + t * (ci - wi)).collect()
        };

        let reflected = point_at(1.0, &centroid, &simplex[worst]);
        let f_r = f(&reflected);
        if f_r < values[best] {
            let expanded = point_at(2.0, &centroid, &simplex[worst]);
            let f_e = f(&expanded);
            if f_e < f_r {
                simplex[worst] = expanded;
                values[worst] = f_e;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_r;
            }
        } else if f_r < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_r;
        } else {
            let contracted = if f_r < values[worst] {
                point_at(0.5, &centroid, &simplex[worst])
            } else {
                point_at(-0.5, &centroid, &simplex[worst])
            };
            let f_c = f(&contracted);
            if f_c < values[worst].min(f_r) {
                simplex[worst] = contracted;
                values[worst] = f_c;
            } else {
                // Shrink toward the best vertex.
                let best_point = simplex[best].clone();
                for (k, v) in simplex.iter_mut().enumerate() {
                    if k == best {
                        continue;
                    }
                    for (x, b) in v.iter_mut().zip(&best_point) {
                        *x = b + 0.5 * (*x - b);
                    }
                    values[k] = f(v);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty simplex")
        .0;
    SimplexResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}
