//! Scaling of the quadratic seminorm of steep ramps under the fractional
//! kernel on `[-1, 1]`.
//!
//! For `s > 1/2` the seminorm of a ramp of half-width `delta` grows like
//! `delta^{1-2s}`, so steps are not limits of smooth functions in that
//! seminorm; for `s < 1/2` it converges.

use crate::error::{invalid, Error, Result};
use crate::space_kernel::{fractional_rate, Mask};
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_DELTA_RANGE: (f64, f64) = (1e-3, 1e-1);
pub const DEFAULT_DELTA_COUNT: usize = 9;

/// `count` log-spaced values between `lo` and `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// 0 on `[-1, -delta]`, linear on `[-delta, delta]`, 1 on `[delta, 1]`.
pub fn ramp(x: f64, delta: f64) -> f64 {
    if delta == 0.0 {
        return if x < 0.0 { 0.0 } else { 1.0 };
    }
    (0.5 * (x / delta + 1.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    pub s: f64,
    pub n: usize,
    pub deltas: Vec<f64>,
    pub seminorms: Vec<f64>,
    /// Least-squares slope of `log seminorm` against `log delta`.
    pub slope: f64,
    pub expected_slope: f64,
    /// Relative change of the seminorm between the two smallest deltas.
    pub smallest_pair_change: f64,
    /// Seminorm of the step under the mask punctured at 0.
    pub punctured_step_seminorm: f64,
}

/// Midpoint grid of `n` cells on `[-1, 1]`; pair weights depend only on
/// `|i - j|` so the full double sum runs off one table.
struct UniformGrid {
    x: Vec<f64>,
    weight: Vec<f64>,
}

impl UniformGrid {
    fn new(n: usize, s: f64) -> Self {
        let h = 2.0 / n as f64;
        let x = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
        // theta_ij = pi_i kappa_ij with pi_i = h.
        let weight = (0..n)
            .map(|k| if k == 0 { 0.0 } else { h * fractional_rate(k as f64 * h, s, h) })
            .collect();
        Self { x, weight }
    }

    /// `sum_{i != j} a(x_i, x_j) (f_j - f_i)^2 theta_ij`; rows in parallel,
    /// summed in order so the result is deterministic.
    fn seminorm(&self, f: &[f64], mask: Mask) -> f64 {
        let n = f.len();
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..n {
                    let d = f[j] - f[i];
                    if d != 0.0 {
                        acc += mask.a(self.x[i], self.x[j]) * d * d * self.weight[i.abs_diff(j)];
                    }
                }
                acc
            })
            .collect();
        rows.iter().sum()
    }
}

fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn density_gap_probe(s: f64, n: usize, deltas: &[f64]) -> Result<ProbeResult> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("fractional order {s} must lie in (0, 1)")));
    }
    if deltas.len() < 2 || deltas.iter().any(|d| !(d.is_finite() && *d > 0.0 && *d < 1.0)) {
        return Err(invalid("need at least two ramp widths in (0, 1)"));
    }
    let h = 2.0 / n as f64;
    let smallest = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    if smallest < h {
        return Err(Error::GridTooCoarse { h, delta: smallest });
    }
    let grid = UniformGrid::new(n, s);
    let seminorms: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let f: Vec<f64> = grid.x.iter().map(|&x| ramp(x, d)).collect();
            grid.seminorm(&f, Mask::Full)
        })
        .collect();
    let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = seminorms.iter().map(|v| v.ln()).collect();
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].total_cmp(&deltas[b]));
    let (a, b) = (seminorms[order[0]], seminorms[order[1]]);
    let step: Vec<f64> = grid.x.iter().map(|&x| ramp(x, 0.0)).collect();
    Ok(ProbeResult {
        s,
        n,
        deltas: deltas.to_vec(),
        slope: fit_slope(&lx, &ly),
        expected_slope: -(2.0 * s - 1.0),
        smallest_pair_change: (a - b).abs() / b,
        punctured_step_seminorm: grid.seminorm(&step, Mask::Punctured { split: 0.0 }),
        seminorms,
    })
}
