//! Finite state spaces `(V, d, pi)`, jump kernels and their couplings.
//!
//! Grids and tori keep coordinates and evaluate the metric on demand; general
//! graphs carry an explicit metric table. Kernels are dense rate matrices with
//! a zero diagonal. The coupling `theta_ij = pi_i kappa_ij` is symmetrized
//! once, and every downstream computation reads rates back from it, so
//! detailed balance holds exactly.

use crate::densities::FluxDensity;
use crate::error::{invalid, Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
enum Geometry {
    Line { coords: Vec<f64>, domain: (f64, f64) },
    Torus { coords: Vec<f64> },
    Table { metric: Array2<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    geometry: Geometry,
    pi: Vec<f64>,
}

impl StateSpace {
    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().sum()
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match &self.geometry {
            Geometry::Line { coords, .. } | Geometry::Torus { coords } => Some(coords),
            Geometry::Table { .. } => None,
        }
    }

    /// Interval hosting the points, if any.
    pub fn domain(&self) -> Option<(f64, f64)> {
        match &self.geometry {
            Geometry::Line { domain, .. } => Some(*domain),
            Geometry::Torus { .. } => Some((0.0, 1.0)),
            Geometry::Table { .. } => None,
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.geometry {
            Geometry::Line { coords, .. } => (coords[i] - coords[j]).abs(),
            Geometry::Torus { coords } => {
                let d = (coords[i] - coords[j]).abs();
                d.min(1.0 - d)
            }
            Geometry::Table { metric } => metric[[i, j]],
        }
    }

    pub fn metric_table(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.n(), self.n()), |(i, j)| self.dist(i, j))
    }

    /// `1 ∧ d^2`.
    pub fn clamp_sq(&self, i: usize, j: usize) -> f64 {
        let d = self.dist(i, j);
        (d * d).min(1.0)
    }

    pub fn to_descriptor(&self) -> SpaceDescriptor {
        let (geometry, points, domain, metric) = match &self.geometry {
            Geometry::Line { coords, domain } => ("line", Some(coords.clone()), Some([domain.0, domain.1]), None),
            Geometry::Torus { coords } => ("torus", Some(coords.clone()), None, None),
            Geometry::Table { metric } => (
                "table",
                None,
                None,
                Some(metric.outer_iter().map(|r| r.to_vec()).collect()),
            ),
        };
        SpaceDescriptor {
            schema: 1,
            geometry: geometry.to_string(),
            points,
            domain,
            metric,
            pi: self.pi.clone(),
        }
    }

    pub fn from_descriptor(d: &SpaceDescriptor) -> Result<Self> {
        if d.schema != 1 {
            return Err(Error::Schema(format!("unsupported space schema {}", d.schema)));
        }
        let need = |o: &Option<Vec<f64>>, what: &str| {
            o.clone().ok_or_else(|| Error::Schema(format!("{} space needs `points`", what)))
        };
        let space = match d.geometry.as_str() {
            "line" => {
                let coords = need(&d.points, "line")?;
                let dom = d.domain.ok_or_else(|| Error::Schema("line space needs `domain`".into()))?;
                Self {
                    geometry: Geometry::Line { coords, domain: (dom[0], dom[1]) },
                    pi: d.pi.clone(),
                }
            }
            "torus" => Self {
                geometry: Geometry::Torus { coords: need(&d.points, "torus")? },
                pi: d.pi.clone(),
            },
            "table" => {
                let rows = d.metric.as_ref().ok_or_else(|| Error::Schema("table space needs `metric`".into()))?;
                return graph(rows_to_array(rows)?, d.pi.clone());
            }
            other => return Err(Error::Schema(format!("unknown geometry {other:?}"))),
        };
        if space.coords().map(|c| c.len()) != Some(space.pi.len()) {
            return Err(Error::Schema("points and pi differ in length".into()));
        }
        check_pi(&space.pi)?;
        Ok(space)
    }
}

/// JSON form of a [`StateSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDescriptor {
    pub schema: u32,
    pub geometry: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
    pub pi: Vec<f64>,
}

fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::Schema("matrix must be square".into()));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
}

fn check_pi(pi: &[f64]) -> Result<()> {
    if pi.is_empty() {
        return Err(invalid("state space must have at least one point"));
    }
    if pi.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(invalid("reference weights must be finite and positive"));
    }
    Ok(())
}

/// Uniform midpoint grid on `[a, b]` with cell weights `pi_i = h`.
pub fn build_grid(a: f64, b: f64, n: usize) -> Result<StateSpace> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(invalid(format!("grid interval [{a}, {b}] is empty or not finite")));
    }
    if n < 2 {
        return Err(invalid("grid needs at least two points"));
    }
    let h = (b - a) / n as f64;
    let coords = (0..n).map(|i| a + h * (i as f64 + 0.5)).collect();
    Ok(StateSpace {
        geometry: Geometry::Line { coords, domain: (a, b) },
        pi: vec![h; n],
    })
}

/// Periodic grid on the unit circle, points `k/n`, weights `1/n`.
pub fn build_torus(n: usize) -> Result<StateSpace> {
    if n < 2 {
        return Err(invalid("torus needs at least two points"));
    }
    let coords = (0..n).map(|k| k as f64 / n as f64).collect();
    Ok(StateSpace {
        geometry: Geometry::Torus { coords },
        pi: vec![1.0 / n as f64; n],
    })
}

/// Finite metric graph given by an explicit distance table.
///
/// Symmetry, zero diagonal and nonnegativity are checked exactly; the triangle
/// inequality on every triple for `n <= 64`, otherwise on 10^4 seeded triples.
pub fn graph(metric: Array2<f64>, pi: Vec<f64>) -> Result<StateSpace> {
    let n = pi.len();
    check_pi(&pi)?;
    if metric.dim() != (n, n) {
        return Err(invalid("metric table does not match the number of points"));
    }
    for i in 0..n {
        if metric[[i, i]] != 0.0 {
            return Err(invalid(format!("metric diagonal is nonzero at {i}")));
        }
        for j in 0..n {
            let d = metric[[i, j]];
            if !(d.is_finite() && d >= 0.0) || d != metric[[j, i]] {
                return Err(invalid(format!("metric entry ({i}, {j}) is not a symmetric finite distance")));
            }
        }
    }
    let tri = |i: usize, j: usize, k: usize| metric[[i, k]] <= metric[[i, j]] + metric[[j, k]] + 1e-12;
    let ok = if n <= 64 {
        (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| tri(i, j, k))))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        (0..10_000).all(|_| tri(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)))
    };
    if !ok {
        return Err(invalid("metric table violates the triangle inequality"));
    }
    Ok(StateSpace {
        geometry: Geometry::Table { metric },
        pi,
    })
}

/// Modulation `a(x, y)` of a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mask {
    Full,
    /// `a ≡ value`, with `value` in `[0, 1]`.
    Constant { value: f64 },
    /// `1` iff both points lie on the same side of `split`.
    Punctured { split: f64 },
}

impl Mask {
    pub fn a(&self, x: f64, y: f64) -> f64 {
        match self {
            Mask::Full => 1.0,
            Mask::Constant { value } => *value,
            Mask::Punctured { split } => {
                if (x < *split) == (y < *split) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Index sets of the two sides for a punctured mask.
    pub fn components(&self, space: &StateSpace) -> Option<[Vec<usize>; 2]> {
        let Mask::Punctured { split } = self else { return None };
        let coords = space.coords()?;
        let left = (0..space.n()).filter(|&i| coords[i] < *split).collect();
        let right = (0..space.n()).filter(|&i| coords[i] >= *split).collect();
        Some([left, right])
    }
}

pub fn punctured_mask(space: &StateSpace, split: f64) -> Result<Mask> {
    let (a, b) = space
        .domain()
        .ok_or_else(|| invalid("punctured mask needs a space with coordinates"))?;
    if !(split > a && split < b) {
        return Err(invalid(format!("split {split} lies outside the domain ({a}, {b})")));
    }
    Ok(Mask::Punctured { split })
}

/// How a kernel was assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelOrigin {
    Matrix,
    Fractional { s: f64, mask: Mask },
    Cutoff { eps: f64, base: Box<KernelOrigin> },
    Lifted { particles: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    rates: Array2<f64>,
    origin: KernelOrigin,
}

impl Kernel {
    pub fn from_matrix(mut rates: Array2<f64>) -> Result<Self> {
        if rates.nrows() != rates.ncols() {
            return Err(invalid("rate matrix must be square"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(invalid("rates must be finite and nonnegative"));
        }
        rates.diag_mut().fill(0.0);
        Ok(Self { rates, origin: KernelOrigin::Matrix })
    }

    pub(crate) fn with_origin(mut rates: Array2<f64>, origin: KernelOrigin) -> Self {
        rates.diag_mut().fill(0.0);
        Self { rates, origin }
    }

    pub fn rates(&self) -> &Array2<f64> {
        &self.rates
    }

    pub fn origin(&self) -> &KernelOrigin {
        &self.origin
    }

    pub fn n(&self) -> usize {
        self.rates.nrows()
    }

    pub fn to_descriptor(&self) -> KernelDescriptor {
        KernelDescriptor {
            schema: 1,
            origin: self.origin.clone(),
            rates: self.rates.outer_iter().map(|r| r.to_vec()).collect(),
        }
    }

    pub fn from_descriptor(d: &KernelDescriptor) -> Result<Self> {
        if d.schema != 1 {
            return Err(Error::Schema(format!("unsupported kernel schema {}", d.schema)));
        }
        let mut k = Self::from_matrix(rows_to_array(&d.rates)?)?;
        k.origin = d.origin.clone();
        Ok(k)
    }
}

/// JSON form of a [`Kernel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDescriptor {
    pub schema: u32,
    pub origin: KernelOrigin,
    pub rates: Vec<Vec<f64>>,
}

/// Rate of the midpoint-discretized fractional kernel between two points.
pub fn fractional_rate(dist: f64, s: f64, cell: f64) -> f64 {
    dist.powf(-(1.0 + 2.0 * s)) * cell
}

/// `kappa_ij = a(x_i, x_j) |x_i - x_j|^{-(1+2s)} pi_j`, zero diagonal.
pub fn fractional_kernel(space: &StateSpace, s: f64, mask: Mask) -> Result<Kernel> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid(format!("fractional exponent s = {s} must lie in (0, 1)")));
    }
    if let Mask::Constant { value } = mask {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid(format!("mask value {value} must lie in [0, 1]")));
        }
    }
    let coords = space
        .coords()
        .ok_or_else(|| invalid("fractional kernel needs a space with coordinates"))?;
    let n = space.n();
    let pi = space.pi();
    let rates = Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            return 0.0;
        }
        let a = mask.a(coords[i], coords[j]);
        if a == 0.0 {
            0.0
        } else {
            a * fractional_rate(space.dist(i, j), s, pi[j])
        }
    });
    Ok(Kernel::with_origin(rates, KernelOrigin::Fractional { s, mask }))
}

/// `a_eps(d) = (1 ∧ d^2) / (eps + 1 ∧ d^2)`.
pub fn cutoff_factor(clamped_sq: f64, eps: f64) -> f64 {
    clamped_sq / (eps + clamped_sq)
}

/// Regularized kernel `kappa_ij a_eps(d_ij)`, bounded by `c_kappa / eps`.
pub fn cutoff(space: &StateSpace, kernel: &Kernel, eps: f64) -> Result<Kernel> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("cutoff eps = {eps} must be positive")));
    }
    let rates = Array2::from_shape_fn(kernel.rates.dim(), |(i, j)| {
        let k = kernel.rates[[i, j]];
        if k == 0.0 {
            0.0
        } else {
            k * cutoff_factor(space.clamp_sq(i, j), eps)
        }
    });
    let origin = KernelOrigin::Cutoff {
        eps,
        base: Box::new(kernel.origin.clone()),
    };
    Ok(Kernel::with_origin(rates, origin))
}

/// Symmetric coupling `theta = pi ⊗ kappa`, together with `pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    theta: Array2<f64>,
    pi: Vec<f64>,
    detailed_balance_residual: f64,
}

impl Coupling {
    /// Builds a coupling directly from a symmetric edge weight matrix.
    pub fn from_theta(theta: Array2<f64>, pi: Vec<f64>) -> Result<Self> {
        check_pi(&pi)?;
        if theta.dim() != (pi.len(), pi.len()) {
            return Err(invalid("coupling and reference measure differ in size"));
        }
        if theta.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("coupling weights must be finite and nonnegative"));
        }
        let residual = max_asymmetry(&theta);
        let theta = symmetrize(&theta);
        Ok(Self {
            theta,
            pi,
            detailed_balance_residual: residual,
        })
    }

    pub fn theta(&self) -> &Array2<f64> {
        &self.theta
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    /// `max |theta_ij - theta_ji|` before symmetrization.
    pub fn detailed_balance_residual(&self) -> f64 {
        self.detailed_balance_residual
    }

    /// Rates `theta_ij / pi_i` read back from the symmetric coupling.
    pub fn rates(&self) -> Array2<f64> {
        let mut k = self.theta.clone();
        for (i, mut row) in k.outer_iter_mut().enumerate() {
            row /= self.pi[i];
        }
        k
    }

    /// `max_i sum_j theta_ij / pi_i`.
    pub fn max_exit_rate(&self) -> f64 {
        self.theta
            .outer_iter()
            .enumerate()
            .map(|(i, r)| r.sum() / self.pi[i])
            .fold(0.0, f64::max)
    }
}

fn max_asymmetry(theta: &Array2<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for ((i, j), &t) in theta.indexed_iter() {
        worst = worst.max((t - theta[[j, i]]).abs());
    }
    worst
}

fn symmetrize(theta: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(theta.dim(), |(i, j)| {
        if i == j {
            0.0
        } else {
            0.5 * (theta[[i, j]] + theta[[j, i]])
        }
    })
}

/// `theta_ij = pi_i kappa_ij`, symmetrized; the residual is measured before
/// symmetrization.
pub fn coupling(space: &StateSpace, kernel: &Kernel) -> Result<Coupling> {
    if kernel.n() != space.n() {
        return Err(invalid("kernel and space differ in size"));
    }
    let pi = space.pi();
    let raw = Array2::from_shape_fn(kernel.rates.dim(), |(i, j)| pi[i] * kernel.rates[[i, j]]);
    Coupling::from_theta(raw, pi.to_vec())
}

/// `c_kappa = max_i sum_j (1 ∧ d_ij^2) kappa_ij`.
pub fn taming_bound(space: &StateSpace, kernel: &Kernel) -> f64 {
    kernel
        .rates
        .outer_iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, &k)| if k == 0.0 { 0.0 } else { space.clamp_sq(i, j) * k })
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `(theta_rho^-, theta_rho^+)` with `theta^-_ij = u_i theta_ij` and
/// `theta^+` its swap.
pub fn theta_rho(coupling: &Coupling, u: &[f64]) -> (Array2<f64>, Array2<f64>) {
    let th = coupling.theta();
    let minus = Array2::from_shape_fn(th.dim(), |(i, j)| u[i] * th[[i, j]]);
    let plus = minus.t().to_owned();
    (minus, plus)
}

/// `nu_ij = alpha(u_i, u_j) theta_ij`.
pub fn nu_rho(coupling: &Coupling, flux: FluxDensity, u: &[f64]) -> Array2<f64> {
    let th = coupling.theta();
    Array2::from_shape_fn(th.dim(), |(i, j)| {
        let t = th[[i, j]];
        if t == 0.0 {
            0.0
        } else {
            flux.alpha(u[i], u[j]) * t
        }
    })
}
