//! Discrete measures on a finite atom universe `{0, .., n-1}` and on the edge
//! space `V x V`.
//!
//! A signed measure is stored as its Jordan pair `(pos, neg)` of mutually
//! singular nonnegative measures. Every constructor and every operation
//! normalizes eagerly, so on each atom at most one component is nonzero.

use crate::error::{invalid, Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Nonnegative measure with dense per-atom weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosMeasure {
    weights: Vec<f64>,
}

impl PosMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(invalid(format!("positive measure weight {w} is not finite and >= 0")));
        }
        Ok(Self { weights })
    }

    pub fn zeros(n: usize) -> Self {
        Self { weights: vec![0.0; n] }
    }

    pub fn dirac(n: usize, atom: usize, mass: f64) -> Self {
        let mut weights = vec![0.0; n];
        weights[atom] = mass;
        Self { weights }
    }

    /// Size of the atom universe.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    /// Atoms carrying positive mass, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Jordan pair `(pos, neg)` with disjoint supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasurePair {
    pos: PosMeasure,
    neg: PosMeasure,
}

impl SignedMeasurePair {
    /// Builds a pair and normalizes it: where both components are positive the
    /// common minimum is subtracted from both.
    pub fn new(pos: PosMeasure, neg: PosMeasure) -> Result<Self> {
        if pos.len() != neg.len() {
            return Err(universe_mismatch(pos.len(), neg.len()));
        }
        let mut p = pos.weights;
        let mut q = neg.weights;
        for (a, b) in p.iter_mut().zip(q.iter_mut()) {
            if *a > 0.0 && *b > 0.0 {
                let m = a.min(*b);
                *a -= m;
                *b -= m;
            }
        }
        Ok(Self {
            pos: PosMeasure { weights: p },
            neg: PosMeasure { weights: q },
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            pos: PosMeasure::zeros(n),
            neg: PosMeasure::zeros(n),
        }
    }

    fn from_values_unchecked(values: &[f64]) -> Self {
        let pos = values.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let neg = values.iter().map(|&v| if v < 0.0 { -v } else { 0.0 }).collect();
        Self {
            pos: PosMeasure { weights: pos },
            neg: PosMeasure { weights: neg },
        }
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    pub fn pos(&self) -> &PosMeasure {
        &self.pos
    }

    pub fn neg(&self) -> &PosMeasure {
        &self.neg
    }

    /// Signed mass of a single atom.
    pub fn atom(&self, i: usize) -> f64 {
        self.pos.weights[i] - self.neg.weights[i]
    }

    /// Signed per-atom values.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.atom(i)).collect()
    }

    /// `mu(B)`, summed atom by atom in the order of `set`.
    pub fn evaluate(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.atom(i)).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.pos.weights.iter().chain(&self.neg.weights).all(|&w| w == 0.0)
    }

    pub fn is_mutually_singular(&self) -> bool {
        self.pos
            .weights
            .iter()
            .zip(&self.neg.weights)
            .all(|(&a, &b)| a == 0.0 || b == 0.0)
    }

    pub fn negate(&self) -> Self {
        Self {
            pos: self.neg.clone(),
            neg: self.pos.clone(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(universe_mismatch(self.len(), other.len()));
        }
        let values: Vec<f64> = (0..self.len()).map(|i| self.atom(i) + other.atom(i)).collect();
        Ok(Self::from_values_unchecked(&values))
    }

    /// `f nu = (f+ nu+ + f- nu-, f- nu+ + f+ nu-)`.
    pub fn scale_by_function(&self, f: &[f64]) -> Result<Self> {
        if f.len() != self.len() {
            return Err(universe_mismatch(self.len(), f.len()));
        }
        let mut p = vec![0.0; self.len()];
        let mut q = vec![0.0; self.len()];
        for i in 0..self.len() {
            let (a, b) = (self.pos.weights[i], self.neg.weights[i]);
            if a == 0.0 && b == 0.0 {
                continue;
            }
            if !f[i].is_finite() {
                return Err(invalid(format!("scaling function is not finite at atom {i}")));
            }
            let fp = f[i].max(0.0);
            let fm = (-f[i]).max(0.0);
            p[i] = fp * a + fm * b;
            q[i] = fm * a + fp * b;
        }
        Self::new(PosMeasure { weights: p }, PosMeasure { weights: q })
    }

    /// `(mu restricted to B)(A) = mu(A ∩ B)`.
    pub fn restrict(&self, set: &[usize]) -> Self {
        let mut out = Self::zero(self.len());
        for &i in set {
            out.pos.weights[i] = self.pos.weights[i];
            out.neg.weights[i] = self.neg.weights[i];
        }
        out
    }

    /// `|mu|(B) = pos(B) + neg(B)`.
    pub fn total_variation(&self, set: &[usize]) -> f64 {
        self.pos.mass(set) + self.neg.mass(set)
    }

    /// Lebesgue decomposition with respect to `gamma`: returns the density on
    /// the support of `gamma` (zero elsewhere) and the singular part, which
    /// lives exactly where `gamma` vanishes.
    pub fn lebesgue_decompose(&self, gamma: &PosMeasure) -> Result<(Vec<f64>, Self)> {
        if gamma.len() != self.len() {
            return Err(universe_mismatch(self.len(), gamma.len()));
        }
        let mut density = vec![0.0; self.len()];
        let mut singular = Self::zero(self.len());
        for (i, &g) in gamma.weights.iter().enumerate() {
            if g > 0.0 {
                density[i] = self.atom(i) / g;
            } else {
                singular.pos.weights[i] = self.pos.weights[i];
                singular.neg.weights[i] = self.neg.weights[i];
            }
        }
        Ok((density, singular))
    }

    /// Weighted total-variation distance `sum_i w_i |mu_i - nu_i|`, used as
    /// the finite stand-in for setwise convergence.
    pub fn weighted_tv_distance(&self, other: &Self, weights: &[f64]) -> Result<f64> {
        if self.len() != other.len() || weights.len() != self.len() {
            return Err(universe_mismatch(self.len(), other.len().min(weights.len())));
        }
        Ok((0..self.len())
            .map(|i| weights[i] * (self.atom(i) - other.atom(i)).abs())
            .sum())
    }
}

/// Jordan decomposition of a finite set function given by its atom values.
pub fn jordan_from_setfunction(values: &[f64]) -> Result<SignedMeasurePair> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("set-function value at atom {i} is not finite")));
    }
    Ok(SignedMeasurePair::from_values_unchecked(values))
}

fn universe_mismatch(a: usize, b: usize) -> Error {
    invalid(format!("atom universes differ: {a} vs {b}"))
}

/// Signed measure on ordered pairs `(i, j)`, `i != j`. The diagonal is kept at
/// zero by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMeasure {
    weights: Array2<f64>,
}

impl EdgeMeasure {
    pub fn new(mut weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() != weights.ncols() {
            return Err(invalid("edge measure must be square"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("edge measure weights must be finite"));
        }
        weights.diag_mut().fill(0.0);
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    /// Push-forward under the symmetry map `(x, y) -> (y, x)`.
    pub fn swap_pushforward(&self) -> Self {
        Self {
            weights: self.weights.t().to_owned(),
        }
    }

    /// The same measure as a Jordan pair over the `n * n` edge atoms,
    /// indexed row-major.
    pub fn as_pair(&self) -> SignedMeasurePair {
        let flat: Vec<f64> = self.weights.iter().copied().collect();
        SignedMeasurePair::from_values_unchecked(&flat)
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights == self.weights.t()
    }
}
