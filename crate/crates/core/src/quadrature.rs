//! Cumulative composite Simpson quadrature on nonuniform grids.
//!
//! `L[k]` approximates `∫_{t_0}^{t_k} f`. Even `k` use whole Simpson panels;
//! odd `k` add the integral of the panel's quadratic interpolant over its
//! first sub-interval (or, at the final point of an even-length grid, over the
//! second sub-interval of the last panel). Interval integrals are then
//! `L[t] - L[s]`, so they are additive exactly.

use serde::Serialize;

/// Result of [`cumulative`].
#[derive(Debug, Clone, Serialize)]
pub struct Cumulative {
    #[serde(with = "crate::extreal::vec")]
    pub values: Vec<f64>,
    /// `f(t_0)` was infinite while every other sample is finite; the first
    /// panel was replaced by a rectangle rule anchored at `t_1`.
    pub endpoint_singular: bool,
}

fn panel(h0: f64, h1: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h = h0 + h1;
    h / 6.0 * ((2.0 - h1 / h0) * f0 + h * h / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2)
}

/// Integral over `[t0, t1]` of the quadratic through `(t0, t1, t2)`.
fn first_half(h0: f64, h1: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h = h0 + h1;
    h0 * (3.0 * h - h0) / (6.0 * h) * f0 + h0 * (3.0 * h - 2.0 * h0) / (6.0 * h1) * f1
        - h0 * h0 * h0 / (6.0 * h * h1) * f2
}

/// Integral over `[t1, t2]` of the quadratic through `(t0, t1, t2)`.
fn second_half(h0: f64, h1: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    first_half(h1, h0, f2, f1, f0)
}

/// Cumulative integral of samples `f` on the increasing grid `t`.
///
/// Non-finite samples make the affected and all later values non-finite,
/// except for the endpoint case described on [`Cumulative`].
pub fn cumulative(t: &[f64], f: &[f64]) -> Cumulative {
    assert_eq!(t.len(), f.len(), "grid and samples differ in length");
    let n = t.len();
    let mut values = vec![0.0; n];
    if n < 2 {
        return Cumulative { values, endpoint_singular: false };
    }
    let endpoint_singular = n >= 3 && f[0] == f64::INFINITY && f[1..].iter().all(|x| x.is_finite());
    if n == 2 {
        values[1] = 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
        return Cumulative { values, endpoint_singular: false };
    }
    let h = |k: usize| t[k + 1] - t[k];
    let mut k = 0;
    while k + 2 < n {
        let (h0, h1) = (h(k), h(k + 1));
        if k == 0 && endpoint_singular {
            values[1] = h0 * f[1];
            values[2] = (h0 + h1) * f[1];
        } else {
            let (f0, f1, f2) = (f[k], f[k + 1], f[k + 2]);
            values[k + 1] = values[k] + first_half(h0, h1, f0, f1, f2);
            values[k + 2] = values[k] + panel(h0, h1, f0, f1, f2);
        }
        k += 2;
    }
    if k + 1 == n - 1 {
        let (h0, h1) = (h(k - 1), h(k));
        values[k + 1] = values[k] + second_half(h0, h1, f[k - 1], f[k], f[k + 1]);
    }
    Cumulative { values, endpoint_singular }
}
