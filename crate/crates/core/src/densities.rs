//! Density triples `(phi, psi*, alpha)` and the maps derived from them.
//!
//! * `phi`   entropy density, convex with minimum 0 at `s = 1`.
//! * `psi*`  even, convex, superlinear dual dissipation density; `psi` is its
//!   Legendre transform.
//! * `alpha` concave, symmetric, 1-homogeneous flux density.
//!
//! Derived maps: `Lambda(u, v) = phi'(v) - phi'(u)`, the flux map
//! `F(u, v) = (psi*)'(Lambda) alpha(u, v)` and the Fisher-information density
//! `D(u, v)`. A triple is *compatible* when `F(u, v) = v - u`, which turns the
//! gradient-flow equation into the linear forward Kolmogorov equation.
//!
//! Boundary values (`phi'(0) = -inf` for the Boltzmann entropy) are returned
//! as `f64` infinities instead of errors.

use crate::error::{invalid, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyDensity {
    /// `s log s - s + 1`.
    Boltzmann,
    /// `(s - 1)^2 / 2`, with finite slope at the origin.
    Quadratic,
}

impl EntropyDensity {
    /// `phi(s)`; `+inf` for negative arguments.
    pub fn value(self, s: f64) -> f64 {
        if s < 0.0 {
            return f64::INFINITY;
        }
        match self {
            EntropyDensity::Boltzmann => {
                if s == 0.0 {
                    1.0
                } else {
                    s * s.ln() - s + 1.0
                }
            }
            EntropyDensity::Quadratic => 0.5 * (s - 1.0) * (s - 1.0),
        }
    }

    /// `phi'(s)` for `s > 0`; at `s = 0` the one-sided limit.
    pub fn derivative(self, s: f64) -> f64 {
        if s == 0.0 {
            return self.boundary_derivative();
        }
        match self {
            EntropyDensity::Boltzmann => s.ln(),
            EntropyDensity::Quadratic => s - 1.0,
        }
    }

    pub fn boundary_derivative(self) -> f64 {
        match self {
            EntropyDensity::Boltzmann => f64::NEG_INFINITY,
            EntropyDensity::Quadratic => -1.0,
        }
    }

    /// Sampled check of convexity, `min phi = 0` and superlinear growth on a
    /// grid of nonnegative points.
    pub fn check_assumptions(self, grid: &[f64]) -> bool {
        let mut g: Vec<f64> = grid.iter().copied().filter(|s| *s >= 0.0).collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        if g.len() < 3 {
            return false;
        }
        let vals: Vec<f64> = g.iter().map(|&s| self.value(s)).collect();
        let convex = g.windows(3).zip(vals.windows(3)).all(|(x, f)| {
            let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
            let interp = (f[0] * h1 + f[2] * h0) / (h0 + h1);
            f[1] <= interp + 1e-12 * (1.0 + interp.abs())
        });
        let nonneg = vals.iter().all(|&v| v >= -1e-15);
        let min_zero = self.value(1.0) == 0.0;
        let last = *g.last().unwrap();
        let superlinear = last > 1.0 && self.value(4.0 * last) / (4.0 * last) > self.value(last) / last;
        convex && nonneg && min_zero && superlinear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissipationPair {
    /// `psi*(xi) = xi^2 / 2`.
    Quadratic,
    /// `psi*(xi) = 4 (cosh(xi/2) - 1)`.
    Cosh,
}

impl DissipationPair {
    pub fn psi_star(self, xi: f64) -> f64 {
        match self {
            DissipationPair::Quadratic => 0.5 * xi * xi,
            DissipationPair::Cosh => {
                // 8 sinh^2(xi/4) avoids the cancellation in cosh - 1 near 0.
                let s = (0.25 * xi).sinh();
                8.0 * s * s
            }
        }
    }

    pub fn psi_star_prime(self, xi: f64) -> f64 {
        match self {
            DissipationPair::Quadratic => xi,
            DissipationPair::Cosh => 2.0 * (0.5 * xi).sinh(),
        }
    }

    /// Closed-form Legendre transform `psi(w)`.
    pub fn psi(self, w: f64) -> f64 {
        match self {
            DissipationPair::Quadratic => 0.5 * w * w,
            DissipationPair::Cosh => {
                if !w.is_finite() {
                    return f64::INFINITY;
                }
                // 2w asinh(w/2) - 2 sqrt(4 + w^2) + 4, with the last two terms
                // rewritten to avoid cancellation at small w.
                let root = (4.0 + w * w).sqrt();
                2.0 * w * (0.5 * w).asinh() - 2.0 * w * w / (2.0 + root)
            }
        }
    }

    /// `lim psi*(xi) / xi^2` as `xi -> 0`.
    pub fn c0(self) -> f64 {
        0.5
    }

    /// Radius `r` with `c0/2 xi^2 <= psi*(xi) <= 3c0/2 xi^2` on `[-r, r]`.
    pub fn quadratic_radius(self) -> f64 {
        match self {
            // Both bounds hold on all of R; any radius works.
            DissipationPair::Quadratic => 1.0,
            DissipationPair::Cosh => {
                // psi*(x)/x^2 increases in |x| from c0, so the upper bound is
                // the binding one: solve psi*(r) = 3c0/2 r^2.
                let target = 1.5 * self.c0();
                let (mut lo, mut hi) = (1e-3, 64.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.psi_star(mid) / (mid * mid) <= target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        }
    }

    /// `g(zeta) = 3c0/2 zeta^2 + zeta^2/r^2 psi*(zeta)`, which satisfies
    /// `psi*(eta zeta) <= eta^2 g(zeta)` for `|eta| <= 1`.
    pub fn bound_g(self, zeta: f64) -> f64 {
        let r = self.quadratic_radius();
        let z2 = zeta * zeta;
        1.5 * self.c0() * z2 + z2 / (r * r) * self.psi_star(zeta)
    }

    fn bound_g_prime(self, zeta: f64) -> f64 {
        let r = self.quadratic_radius();
        let r2 = r * r;
        3.0 * self.c0() * zeta
            + 2.0 * zeta / r2 * self.psi_star(zeta)
            + zeta * zeta / r2 * self.psi_star_prime(zeta)
    }

    /// `f = g*`, evaluated numerically.
    pub fn bound_f(self, w: f64) -> f64 {
        conjugate_even(|z| self.bound_g(z), |z| self.bound_g_prime(z), w)
    }

    /// `K_M = 2/c0 + M^2 / psi*(r)`: `|xi|^2 <= K_M psi*(xi)` on `[-M, M]`.
    pub fn k_m(self, m: f64) -> f64 {
        2.0 / self.c0() + m * m / self.psi_star(self.quadratic_radius())
    }

    /// `K_{beta,M}` with `psi*(beta xi) <= K_{beta,M} psi*(xi)` on `[-M, M]`.
    pub fn k_beta_m(self, beta: f64, m: f64) -> f64 {
        let b = beta.abs();
        if b <= 1.0 {
            return 1.0;
        }
        let r = self.quadratic_radius();
        (3.0 * b * b).max(self.psi_star(b * m) / self.psi_star(r / b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxDensity {
    /// Logarithmic mean `(v - u) / (log v - log u)`.
    LogMean,
    /// Geometric mean `sqrt(uv)`.
    GeoMean,
}

impl FluxDensity {
    pub fn alpha(self, u: f64, v: f64) -> f64 {
        match self {
            FluxDensity::LogMean => {
                if u == v {
                    u
                } else if u == 0.0 || v == 0.0 {
                    0.0
                } else {
                    (v - u) / log_ratio(u, v)
                }
            }
            FluxDensity::GeoMean => (u * v).sqrt(),
        }
    }

    /// Recession function; both means are 1-homogeneous, so it is `alpha`.
    pub fn alpha_inf(self, u: f64, v: f64) -> f64 {
        self.alpha(u, v)
    }

    /// `alpha(u, v) <= c_alpha (1 + u + v)`.
    pub fn c_alpha(self) -> f64 {
        0.5
    }
}

/// A density triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub entropy: EntropyDensity,
    pub pair: DissipationPair,
    pub flux: FluxDensity,
}

impl Triple {
    pub fn new(entropy: EntropyDensity, pair: DissipationPair, flux: FluxDensity) -> Self {
        Self { entropy, pair, flux }
    }

    pub fn linear_quadratic() -> Self {
        Self::new(EntropyDensity::Boltzmann, DissipationPair::Quadratic, FluxDensity::LogMean)
    }

    pub fn linear_cosh() -> Self {
        Self::new(EntropyDensity::Boltzmann, DissipationPair::Cosh, FluxDensity::GeoMean)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear_quadratic" => Ok(Self::linear_quadratic()),
            "linear_cosh" => Ok(Self::linear_cosh()),
            other => Err(invalid(format!(
                "unknown triple {other:?}; expected \"linear_quadratic\" or \"linear_cosh\""
            ))),
        }
    }

    /// True for the two triples whose Fisher information is known in closed form.
    pub fn is_canonical(&self) -> bool {
        *self == Self::linear_quadratic() || *self == Self::linear_cosh()
    }

    pub fn lambda(&self, u: f64, v: f64) -> f64 {
        lambda_phi(self.entropy, u, v)
    }

    pub fn f(&self, u: f64, v: f64) -> f64 {
        f_map(self, u, v)
    }

    pub fn d(&self, u: f64, v: f64) -> f64 {
        d_phi(self, u, v)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::linear_quadratic() {
            f.write_str("linear_quadratic")
        } else if *self == Self::linear_cosh() {
            f.write_str("linear_cosh")
        } else {
            write!(f, "{:?}/{:?}/{:?}", self.entropy, self.pair, self.flux)
        }
    }
}

/// Boltzmann entropy density.
pub fn phi_boltzmann(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(invalid(format!("entropy argument {s} must be nonnegative")));
    }
    Ok(EntropyDensity::Boltzmann.value(s))
}

pub fn psi_star(pair: DissipationPair, xi: f64) -> f64 {
    pair.psi_star(xi)
}

pub fn alpha(flux: FluxDensity, u: f64, v: f64) -> f64 {
    flux.alpha(u, v)
}

/// Legendre transform `psi(w) = sup_xi (w xi - psi*(xi))` in closed form.
pub fn legendre(pair: DissipationPair, w: f64) -> f64 {
    pair.psi(w)
}

/// Legendre transform computed numerically from `psi*` alone.
pub fn legendre_numeric(pair: DissipationPair, w: f64) -> f64 {
    conjugate_even(|x| pair.psi_star(x), |x| pair.psi_star_prime(x), w)
}

/// `sup_z (w z - f(z))` for even, strictly convex, superlinear `f` with
/// `f(0) = 0`. The maximizer solves `f'(z) = |w|`; it is bracketed by
/// doubling and then located by safeguarded secant steps.
fn conjugate_even(f: impl Fn(f64) -> f64, fp: impl Fn(f64) -> f64, w: f64) -> f64 {
    let a = w.abs();
    if a == 0.0 {
        return 0.0;
    }
    if !a.is_finite() {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while fp(hi) < a {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let (mut glo, mut ghi) = (fp(lo) - a, fp(hi) - a);
    for _ in 0..200 {
        let mut z = lo - glo * (hi - lo) / (ghi - glo);
        if !(z > lo && z < hi) || (z - lo).min(hi - z) < 1e-3 * (hi - lo) {
            z = 0.5 * (lo + hi);
        }
        let gz = fp(z) - a;
        if gz == 0.0 {
            lo = z;
            hi = z;
            break;
        }
        if gz < 0.0 {
            lo = z;
            glo = gz;
        } else {
            hi = z;
            ghi = gz;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let z = 0.5 * (lo + hi);
    a * z - f(z)
}

/// `log(v/u)` for positive `u != v`, via `ln_1p` of a ratio that is always
/// nonnegative so `1 + x` never cancels.
fn log_ratio(u: f64, v: f64) -> f64 {
    if v >= u {
        ((v - u) / u).ln_1p()
    } else {
        -((u - v) / v).ln_1p()
    }
}

/// `Lambda(u, v) = phi'(v) - phi'(u)`, with `Lambda(u, u) = 0` (including
/// `u = 0`) and the boundary slope substituted at zero.
pub fn lambda_phi(entropy: EntropyDensity, u: f64, v: f64) -> f64 {
    if u == v {
        return 0.0;
    }
    match entropy {
        EntropyDensity::Boltzmann => {
            if u == 0.0 {
                f64::INFINITY
            } else if v == 0.0 {
                f64::NEG_INFINITY
            } else {
                log_ratio(u, v)
            }
        }
        EntropyDensity::Quadratic => v - u,
    }
}

/// `F(u, v) = (psi*)'(Lambda(u, v)) alpha(u, v)`, extended by its limits where
/// `Lambda` is infinite.
pub fn f_map(triple: &Triple, u: f64, v: f64) -> f64 {
    if u == v {
        return 0.0;
    }
    let lam = triple.lambda(u, v);
    if lam.is_finite() {
        let a = triple.flux.alpha(u, v);
        if a == 0.0 {
            return 0.0;
        }
        return triple.pair.psi_star_prime(lam) * a;
    }
    // Exactly one of u, v vanishes under the Boltzmann entropy.
    match (triple.pair, triple.flux) {
        (DissipationPair::Cosh, FluxDensity::GeoMean)
        | (DissipationPair::Quadratic, FluxDensity::LogMean) => v - u,
        (DissipationPair::Cosh, FluxDensity::LogMean) => f64::INFINITY.copysign(v - u),
        (DissipationPair::Quadratic, FluxDensity::GeoMean) => 0.0,
    }
}

/// `max |F(u, v) - (v - u)|` over `samples` seeded draws, log-uniform in
/// `(1e-6, 10)` in each coordinate.
pub fn compat_check(triple: &Triple, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (1e-6_f64.ln(), 10_f64.ln());
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let u = rng.random_range(lo..hi).exp();
        let v = rng.random_range(lo..hi).exp();
        let r = (f_map(triple, u, v) - (v - u)).abs();
        worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
    }
    worst
}

/// Fisher-information density.
///
/// The two canonical triples use the lower semicontinuous envelope in closed
/// form. Any other triple gets `psi*(Lambda) alpha` (infinite where `Lambda`
/// is), which is not the envelope; see [`d_phi_is_envelope`].
pub fn d_phi(triple: &Triple, u: f64, v: f64) -> f64 {
    if u == v {
        return 0.0;
    }
    if *triple == Triple::linear_quadratic() {
        if u == 0.0 || v == 0.0 {
            return f64::INFINITY;
        }
        return 0.5 * (v - u) * triple.lambda(u, v);
    }
    if *triple == Triple::linear_cosh() {
        let d = v.sqrt() - u.sqrt();
        return 2.0 * d * d;
    }
    let lam = triple.lambda(u, v);
    if !lam.is_finite() {
        return f64::INFINITY;
    }
    let a = triple.flux.alpha(u, v);
    if a == 0.0 {
        0.0
    } else {
        triple.pair.psi_star(lam) * a
    }
}

pub fn d_phi_is_envelope(triple: &Triple) -> bool {
    triple.is_canonical()
}

/// Random midpoint-convexity test of `f` on `(1e-3, 10)^2`. Returns `false`
/// as soon as a violation beyond rounding is found.
pub fn convexity_check(f: impl Fn(f64, f64) -> f64, samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let (a, b) = (rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
        let (c, d) = (rng.random_range(1e-3..10.0), rng.random_range(1e-3..10.0));
        let mid = f(0.5 * (a + c), 0.5 * (b + d));
        let avg = 0.5 * (f(a, b) + f(c, d));
        if mid > avg + 1e-12 * (1.0 + avg.abs()) {
            return false;
        }
    }
    true
}

/// Perspective `s psi(w/s)`, with the recession value at `s = 0`.
pub fn perspective_psi(pair: DissipationPair, w: f64, s: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else if s > 0.0 {
        s * pair.psi(w / s)
    } else {
        f64::INFINITY
    }
}

/// Outcome of [`psistar_bounds_check`]. Violations are `lhs - rhs`; a value
/// `<= 0` means the inequality holds at every sample.
#[derive(Debug, Clone, Serialize)]
pub struct PsiStarBounds {
    pub c0: f64,
    pub r: f64,
    pub m: f64,
    pub k_m: f64,
    pub evenness_max: f64,
    pub monotone: bool,
    pub quadratic_lower_violation: f64,
    pub control_violation: f64,
    pub dual_control_violation: f64,
    pub passed: bool,
}

/// Grid verification of the growth bounds of `psi*`:
/// evenness, monotonicity on `[0, inf)`, `|xi|^2 <= K_M psi*(xi)` on
/// `[-M, M]`, `psi*(eta zeta) <= eta^2 g(zeta)` for `|eta| <= 1`, and the
/// dual form `f(w) <= psi(delta w)/delta^2` for `delta in (0, 1]`.
pub fn psistar_bounds_check(pair: DissipationPair, m: f64) -> PsiStarBounds {
    let k = 400;
    let xs: Vec<f64> = (0..=k).map(|i| -m + 2.0 * m * i as f64 / k as f64).collect();
    let k_m = pair.k_m(m);
    let rel = |lhs: f64, rhs: f64| lhs - rhs - 1e-12 * rhs.abs().max(lhs.abs());

    let evenness_max = xs
        .iter()
        .map(|&x| (pair.psi_star(x) - pair.psi_star(-x)).abs())
        .fold(0.0, f64::max);
    let pos: Vec<f64> = xs.iter().copied().filter(|x| *x >= 0.0).collect();
    let monotone = pos.windows(2).all(|w| pair.psi_star(w[1]) >= pair.psi_star(w[0]));

    let quadratic_lower_violation = xs
        .iter()
        .map(|&x| rel(x * x, k_m * pair.psi_star(x)))
        .fold(f64::NEG_INFINITY, f64::max);

    let etas: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 / 20.0).collect();
    let zetas: Vec<f64> = (0..=200).map(|i| -2.0 * m + 4.0 * m * i as f64 / 200.0).collect();
    let mut control_violation = f64::NEG_INFINITY;
    for &eta in &etas {
        for &zeta in &zetas {
            let v = rel(pair.psi_star(eta * zeta), eta * eta * pair.bound_g(zeta));
            control_violation = control_violation.max(v);
        }
    }

    let mut dual_control_violation = f64::NEG_INFINITY;
    for i in 0..=40 {
        let w = -4.0 * m + 8.0 * m * i as f64 / 40.0;
        let fw = pair.bound_f(w);
        for j in 1..=10 {
            let delta = j as f64 / 10.0;
            let v = rel(fw, pair.psi(delta * w) / (delta * delta));
            dual_control_violation = dual_control_violation.max(v);
        }
    }

    let passed = evenness_max == 0.0
        && monotone
        && quadratic_lower_violation <= 0.0
        && control_violation <= 0.0
        && dual_control_violation <= 1e-9;
    PsiStarBounds {
        c0: pair.c0(),
        r: pair.quadratic_radius(),
        m,
        k_m,
        evenness_max,
        monotone,
        quadratic_lower_violation,
        control_violation,
        dual_control_violation,
        passed,
    }
}
