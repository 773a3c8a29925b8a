//! Entropy, dissipation potentials, Fisher information and the trajectory
//! functional `L_t`, plus convex functionals of measures and the seminorms
//! used to describe admissible test functions.
//!
//! Fluxes are stored as edge densities `w` with `2j = w theta`, so the primal
//! dissipation is `R = 1/2 sum psi^(w_ij, alpha_ij) theta_ij` with `psi^` the
//! perspective of `psi`. Infinite values saturate; nothing here returns an
//! error for an infinite functional.

use crate::densities::{perspective_psi, DissipationPair, EntropyDensity, FluxDensity, Triple};
use crate::error::{invalid, Error, Result};
use crate::evolution::Trajectory;
use crate::measure::{PosMeasure, SignedMeasurePair};
use crate::quadrature;
use crate::space_kernel::Coupling;
use ndarray::Array2;
use serde::Serialize;

/// `sum_i phi(u_i) pi_i`.
pub fn entropy(u: &[f64], pi: &[f64], phi: EntropyDensity) -> f64 {
    u.iter().zip(pi).map(|(&x, &p)| phi.value(x) * p).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    #[serde(with = "crate::extreal")]
    pub value: f64,
    /// Contribution of the edges leaving each atom.
    #[serde(with = "crate::extreal::vec")]
    pub breakdown: Vec<f64>,
    /// Some edge was charged by the recession function (value `+inf`).
    pub recession_active: bool,
    /// Number of edges with `theta > 0` and `alpha = 0`.
    pub degenerate_edges: usize,
}

fn report(breakdown: Vec<f64>, recession_active: bool, degenerate_edges: usize) -> FunctionalReport {
    let value = breakdown.iter().sum();
    FunctionalReport {
        value,
        breakdown,
        recession_active,
        degenerate_edges,
    }
}

/// Primal dissipation `R(u, w)`.
pub fn action_r(u: &[f64], w: &Array2<f64>, triple: &Triple, coupling: &Coupling) -> FunctionalReport {
    let th = coupling.theta();
    let n = coupling.n();
    let mut rows = vec![0.0; n];
    let mut recession = false;
    let mut degenerate = 0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let (t, wij) = (th[[i, j]], w[[i, j]]);
            // Edges without coupling carry no flux measure.
            if i == j || t == 0.0 {
                continue;
            }
            let a = triple.flux.alpha(u[i], u[j]);
            if a == 0.0 {
                degenerate += 1;
                if wij != 0.0 {
                    recession = true;
                }
            }
            acc += 0.5 * perspective_psi(triple.pair, wij, a) * t;
        }
        rows[i] = acc;
    }
    report(rows, recession, degenerate)
}

/// Dual dissipation `R*(u, xi) = 1/2 sum psi*(xi_ij) alpha_ij theta_ij`.
pub fn dual_r_star(u: &[f64], xi: &Array2<f64>, triple: &Triple, coupling: &Coupling) -> f64 {
    let th = coupling.theta();
    let n = coupling.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = th[[i, j]];
            if i == j || t == 0.0 {
                continue;
            }
            let a = triple.flux.alpha(u[i], u[j]);
            if a == 0.0 {
                continue;
            }
            total += 0.5 * triple.pair.psi_star(xi[[i, j]]) * a * t;
        }
    }
    total
}

/// Fisher information `D(u) = 1/2 sum D_phi(u_i, u_j) theta_ij`.
pub fn fisher_d(u: &[f64], triple: &Triple, coupling: &Coupling) -> FunctionalReport {
    let th = coupling.theta();
    let n = coupling.n();
    let mut rows = vec![0.0; n];
    let mut recession = false;
    let mut degenerate = 0;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            let t = th[[i, j]];
            if i == j || t == 0.0 {
                continue;
            }
            if triple.flux.alpha(u[i], u[j]) == 0.0 && u[i] != u[j] {
                degenerate += 1;
            }
            let d = triple.d(u[i], u[j]);
            if d == f64::INFINITY {
                recession = true;
            }
            acc += 0.5 * d * t;
        }
        rows[i] = acc;
    }
    report(rows, recession, degenerate)
}

/// Nonlocal gradient `(grad f)_ij = f_j - f_i`.
pub fn gradient(f: &[f64]) -> Array2<f64> {
    let n = f.len();
    Array2::from_shape_fn((n, n), |(i, j)| f[j] - f[i])
}

/// `-grad phi'(u)`, the driving force; entries are `-Lambda(u_i, u_j)`.
pub fn driving_force(u: &[f64], entropy: EntropyDensity) -> Array2<f64> {
    let n = u.len();
    Array2::from_shape_fn((n, n), |(i, j)| -crate::densities::lambda_phi(entropy, u[i], u[j]))
}

/// A bounded function on the atoms, used as a test function in the
/// continuity equation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    pub label: String,
    pub values: Vec<f64>,
}

impl TestFunction {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("test functions must be bounded"));
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Membership in the nonlocal Sobolev space: bounded with finite
    /// quadratic seminorm.
    pub fn in_x2(&self, coupling: &Coupling) -> bool {
        gagliardo_seminorm(self, coupling).is_finite()
    }
}

/// `sum_{i != j} (phi_j - phi_i)^2 theta_ij`.
pub fn gagliardo_seminorm(phi: &TestFunction, coupling: &Coupling) -> f64 {
    let th = coupling.theta();
    let v = &phi.values;
    let mut total = 0.0;
    for ((i, j), &t) in th.indexed_iter() {
        if i != j && t != 0.0 {
            let d = v[j] - v[i];
            total += d * d * t;
        }
    }
    total
}

/// Luxemburg norm `inf { l > 0 : sum Y(zeta/l) theta <= 1 }` for an even,
/// convex, superlinear Young function with `Y(0) = 0`; bisection to 1e-13
/// relative.
pub fn luxemburg_norm(zeta: &Array2<f64>, young: impl Fn(f64) -> f64, theta: &Array2<f64>) -> f64 {
    let g = |l: f64| -> f64 {
        zeta.iter()
            .zip(theta)
            .filter(|(z, t)| **z != 0.0 && **t != 0.0)
            .map(|(&z, &t)| young(z / l) * t)
            .sum()
    };
    if zeta.iter().zip(theta).all(|(z, t)| *z == 0.0 || *t == 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (1.0, 1.0);
    while g(hi) > 1.0 {
        hi *= 2.0;
    }
    while g(lo) <= 1.0 && lo > 1e-300 {
        lo *= 0.5;
    }
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Two-sided comparison between `sum |grad phi|^2 theta` and
/// `sum psi*(beta grad phi) theta` with the explicit constants
/// `C_{M,beta} = K_{beta,M} g(M)/M^2` and `c_M = K_M`, `M = max |grad phi|`.
#[derive(Debug, Clone, Serialize)]
pub struct SeminormEquivalence {
    pub m: f64,
    pub beta: f64,
    pub quadratic: f64,
    pub psi_star_sum: f64,
    pub psi_star_beta_sum: f64,
    pub upper_constant: f64,
    pub lower_constant: f64,
    pub upper_holds: bool,
    pub lower_holds: bool,
    pub finite_quadratic: bool,
    pub finite_psi_star: bool,
}

impl SeminormEquivalence {
    pub fn holds(&self) -> bool {
        self.upper_holds && self.lower_holds && self.finite_quadratic == self.finite_psi_star
    }
}

pub fn seminorm_equivalence_check(
    phi: &TestFunction,
    pair: DissipationPair,
    coupling: &Coupling,
    beta: f64,
) -> SeminormEquivalence {
    let th = coupling.theta();
    let v = &phi.values;
    let (mut q, mut s, mut sb, mut m) = (0.0, 0.0, 0.0, 0.0_f64);
    for ((i, j), &t) in th.indexed_iter() {
        if i == j || t == 0.0 {
            continue;
        }
        let eta = v[j] - v[i];
        m = m.max(eta.abs());
        q += eta * eta * t;
        s += pair.psi_star(eta) * t;
        sb += pair.psi_star(beta * eta) * t;
    }
    let (upper_constant, lower_constant) = if m > 0.0 {
        (pair.k_beta_m(beta, m) * pair.bound_g(m) / (m * m), pair.k_m(m))
    } else {
        (0.0, 0.0)
    };
    let slack = |x: f64| 1e-12 * x.abs();
    SeminormEquivalence {
        m,
        beta,
        quadratic: q,
        psi_star_sum: s,
        psi_star_beta_sum: sb,
        upper_constant,
        lower_constant,
        upper_holds: sb <= upper_constant * q + slack(sb),
        lower_holds: q <= lower_constant * s + slack(q),
        finite_quadratic: q.is_finite(),
        finite_psi_star: s.is_finite(),
    }
}

/// Time series of the energy-dissipation functional.
#[derive(Debug, Clone, Serialize)]
pub struct LSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `R(u_t, j_t) + D(u_t)` at each checkpoint.
    #[serde(with = "crate::extreal::vec")]
    pub dissipation_rate: Vec<f64>,
    /// `∫_0^t (R + D)`.
    #[serde(with = "crate::extreal::vec")]
    pub dissipation: Vec<f64>,
    /// `L_t = E(u_t) - E(u_0) + ∫_0^t (R + D)`.
    #[serde(with = "crate::extreal::vec")]
    pub l: Vec<f64>,
    pub endpoint_singular: bool,
}

/// `L_t` on the checkpoint grid, with the time integral by cumulative
/// composite Simpson.
pub fn trajectory_l(traj: &Trajectory, triple: &Triple, coupling: &Coupling) -> Result<LSeries> {
    if !traj.has_flux() {
        return Err(Error::MissingFlux);
    }
    let pi = coupling.pi();
    let energy: Vec<f64> = traj.densities().iter().map(|u| entropy(u, pi, triple.entropy)).collect();
    let mut rate = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let u = traj.density(k);
        let w = traj.flux_at(k).ok_or(Error::MissingFlux)?;
        rate.push(action_r(u, &w, triple, coupling).value + fisher_d(u, triple, coupling).value);
    }
    let cum = quadrature::cumulative(traj.times(), &rate);
    let l = (0..traj.len()).map(|k| energy[k] - energy[0] + cum.values[k]).collect();
    Ok(LSeries {
        times: traj.times().to_vec(),
        energy,
        dissipation_rate: rate,
        dissipation: cum.values,
        l,
        endpoint_singular: cum.endpoint_singular,
    })
}

/// A convex integrand `Upsilon: R^d -> [0, inf]` with its recession function.
pub trait ConvexIntegrand {
    fn dim(&self) -> usize;
    fn value(&self, z: &[f64]) -> f64;
    fn recession(&self, z: &[f64]) -> f64;

    /// Perspective `t Upsilon(z/t)`, recession at `t = 0`.
    fn perspective(&self, z: &[f64], t: f64) -> f64 {
        if t > 0.0 {
            let scaled: Vec<f64> = z.iter().map(|x| x / t).collect();
            t * self.value(&scaled)
        } else {
            self.recession(z)
        }
    }
}

/// `|z|^2`; superlinear, so its recession is `+inf` off the origin.
pub struct SquaredNorm {
    pub dim: usize,
}

impl ConvexIntegrand for SquaredNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &[f64]) -> f64 {
        z.iter().map(|x| x * x).sum()
    }
    fn recession(&self, z: &[f64]) -> f64 {
        if z.iter().all(|&x| x == 0.0) {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `|z|_1`; 1-homogeneous, its own recession.
pub struct AbsNorm {
    pub dim: usize,
}

impl ConvexIntegrand for AbsNorm {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, z: &[f64]) -> f64 {
        z.iter().map(|x| x.abs()).sum()
    }
    fn recession(&self, z: &[f64]) -> f64 {
        self.value(z)
    }
}

/// `Upsilon(u, v, w) = psi^(w, alpha(u, v))` on `u, v >= 0`, `+inf` elsewhere.
/// This is the integrand whose functional against `Theta` gives `2R`.
pub struct ActionIntegrand {
    pub pair: DissipationPair,
    pub flux: FluxDensity,
}

impl ConvexIntegrand for ActionIntegrand {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> f64 {
        if z[0] < 0.0 || z[1] < 0.0 {
            return f64::INFINITY;
        }
        perspective_psi(self.pair, z[2], self.flux.alpha(z[0], z[1]))
    }
    fn recession(&self, z: &[f64]) -> f64 {
        self.value(z)
    }
}

/// `F(mu | nu) = sum_a Upsilon(dmu/dnu) nu_a + sum_a Upsilon^inf(mu^perp_a)`.
pub fn f_upsilon(mu: &[SignedMeasurePair], nu: &PosMeasure, ups: &dyn ConvexIntegrand) -> Result<f64> {
    check_components(mu, nu, ups)?;
    let mut total = 0.0;
    let mut z = vec![0.0; mu.len()];
    for a in 0..nu.len() {
        for (c, m) in mu.iter().enumerate() {
            z[c] = m.atom(a);
        }
        total += ups.perspective(&z, nu.weight(a));
    }
    Ok(total)
}

/// Both sides of Jensen's inequality on the atom set `b`:
/// `Upsilon^(mu^a(B), nu(B)) + Upsilon^inf(mu^perp(B)) <= F(mu|_B | nu|_B)`.
pub fn jensen_sides(
    mu: &[SignedMeasurePair],
    nu: &PosMeasure,
    ups: &dyn ConvexIntegrand,
    b: &[usize],
) -> Result<(f64, f64)> {
    check_components(mu, nu, ups)?;
    let d = mu.len();
    let mut abs_part = vec![0.0; d];
    let mut sing_part = vec![0.0; d];
    let mut nu_b = 0.0;
    for &a in b {
        let w = nu.weight(a);
        nu_b += w;
        for c in 0..d {
            if w > 0.0 {
                abs_part[c] += mu[c].atom(a);
            } else {
                sing_part[c] += mu[c].atom(a);
            }
        }
    }
    let lhs = ups.perspective(&abs_part, nu_b) + ups.recession(&sing_part);
    let restricted: Vec<SignedMeasurePair> = mu.iter().map(|m| m.restrict(b)).collect();
    let mut nu_w = vec![0.0; nu.len()];
    for &a in b {
        nu_w[a] = nu.weight(a);
    }
    let rhs = f_upsilon(&restricted, &PosMeasure::new(nu_w)?, ups)?;
    Ok((lhs, rhs))
}

fn check_components(mu: &[SignedMeasurePair], nu: &PosMeasure, ups: &dyn ConvexIntegrand) -> Result<()> {
    if mu.len() != ups.dim() {
        return Err(invalid(format!(
            "integrand has dimension {} but {} measures were given",
            ups.dim(),
            mu.len()
        )));
    }
    if mu.iter().any(|m| m.len() != nu.len()) {
        return Err(invalid("measures live on different atom universes"));
    }
    Ok(())
}
