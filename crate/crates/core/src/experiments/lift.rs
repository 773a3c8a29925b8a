//! Lift of a jump process to `N`-point empirical measures.
//!
//! A configuration is a count vector `c` with `sum c = N`, i.e. the empirical
//! measure `(1/N) sum_x c_x delta_x`. One particle at a time jumps, so the
//! rate of `c -> c - e_x + e_y` is `c_x kappa(x, y) / N`, and the reference
//! measure is the multinomial pushforward
//! `pi^(c) = N!/prod c_x! prod pi_x^{c_x}`.

use super::transport::w2_squared_exact;
use crate::error::{invalid, Error, Result};
use crate::space_kernel::{graph, taming_bound, Kernel, KernelOrigin, StateSpace};
use ndarray::Array2;
use serde::Serialize;

pub const MAX_BASE_ATOMS: usize = 6;
pub const MAX_PARTICLES: usize = 5;

#[derive(Debug, Clone)]
pub struct LiftedSpace {
    pub base: StateSpace,
    pub base_kernel: Kernel,
    pub particles: usize,
    /// Count vectors in lexicographic order (largest count at atom 0 first).
    pub configurations: Vec<Vec<usize>>,
    /// The lifted system, with the `W_2` metric between configurations.
    pub space: StateSpace,
    pub kernel: Kernel,
}

impl LiftedSpace {
    pub fn index_of(&self, counts: &[usize]) -> Option<usize> {
        self.configurations.iter().position(|c| c == counts)
    }

    /// The empirical measure of configuration `k` as atom weights.
    pub fn empirical(&self, k: usize) -> Vec<f64> {
        let n = self.particles as f64;
        self.configurations[k].iter().map(|&c| c as f64 / n).collect()
    }
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn build_lift(base: &StateSpace, base_kernel: &Kernel, particles: usize) -> Result<LiftedSpace> {
    let m = base.n();
    if m > MAX_BASE_ATOMS || particles > MAX_PARTICLES {
        return Err(Error::SizeCap(format!(
            "lift is limited to {MAX_BASE_ATOMS} base atoms and {MAX_PARTICLES} particles, got {m} and {particles}"
        )));
    }
    if particles == 0 {
        return Err(invalid("at least one particle is required"));
    }
    if base_kernel.n() != m {
        return Err(invalid("kernel and space differ in size"));
    }
    let configurations = compositions(particles, m);
    let pi = base.pi();
    let pi_hat: Vec<f64> = configurations
        .iter()
        .map(|c| {
            let coef = factorial(particles) / c.iter().map(|&k| factorial(k)).product::<f64>();
            coef * c.iter().zip(pi).map(|(&k, &p)| p.powi(k as i32)).product::<f64>()
        })
        .collect();
    let d = base.metric_table();
    let big = configurations.len();
    let nf = particles as f64;
    let weights: Vec<Vec<f64>> = configurations
        .iter()
        .map(|c| c.iter().map(|&k| k as f64 / nf).collect())
        .collect();
    let mut metric = Array2::zeros((big, big));
    for a in 0..big {
        for b in a + 1..big {
            let w = w2_squared_exact(&weights[a], &weights[b], &d)?.sqrt();
            metric[[a, b]] = w;
            metric[[b, a]] = w;
        }
    }
    let mut rates = Array2::zeros((big, big));
    let kappa = base_kernel.rates();
    for (a, c) in configurations.iter().enumerate() {
        for x in 0..m {
            if c[x] == 0 {
                continue;
            }
            for y in 0..m {
                if y == x || kappa[[x, y]] == 0.0 {
                    continue;
                }
                let mut target = c.clone();
                target[x] -= 1;
                target[y] += 1;
                let b = configurations.iter().position(|t| *t == target).expect("enumerated");
                rates[[a, b]] += c[x] as f64 * kappa[[x, y]] / nf;
            }
        }
    }
    Ok(LiftedSpace {
        base: base.clone(),
        base_kernel: base_kernel.clone(),
        particles,
        configurations,
        space: graph(metric, pi_hat)?,
        kernel: Kernel::with_origin(rates, KernelOrigin::Lifted { particles }),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KeyEstimateReport {
    pub jumps_checked: usize,
    /// `max (W_2^2(nu, eta) - d^2(x, y)/N)` over admissible jumps.
    pub max_excess: f64,
    /// Jumps where the estimate is an equality to 1e-12.
    pub equalities: usize,
    pub base_taming: f64,
    pub lifted_taming: f64,
    pub passed: bool,
}

/// Checks `W_2^2(nu, eta) <= d^2(x, y)/N` for every configuration `nu` and
/// every jump of one particle from `x` to `y` with `kappa(x, y) > 0`, and
/// that the lifted kernel is tamed by the base constant.
pub fn key_estimate_check(lift: &LiftedSpace) -> Result<KeyEstimateReport> {
    let d = lift.base.metric_table();
    let kappa = lift.base_kernel.rates();
    let m = lift.base.n();
    let nf = lift.particles as f64;
    let (mut jumps, mut worst, mut equalities) = (0, f64::NEG_INFINITY, 0);
    for (a, c) in lift.configurations.iter().enumerate() {
        let nu = lift.empirical(a);
        for x in (0..m).filter(|&x| c[x] > 0) {
            for y in (0..m).filter(|&y| y != x && kappa[[x, y]] > 0.0) {
                let mut eta = nu.clone();
                eta[x] -= 1.0 / nf;
                eta[y] += 1.0 / nf;
                let w2 = w2_squared_exact(&nu, &eta, &d)?;
                let bound = d[[x, y]] * d[[x, y]] / nf;
                let excess = w2 - bound;
                worst = worst.max(excess);
                if excess.abs() <= 1e-12 {
                    equalities += 1;
                }
                jumps += 1;
            }
        }
    }
    let base_taming = taming_bound(&lift.base, &lift.base_kernel);
    let lifted_taming = taming_bound(&lift.space, &lift.kernel);
    Ok(KeyEstimateReport {
        jumps_checked: jumps,
        max_excess: worst,
        equalities,
        base_taming,
        lifted_taming,
        passed: worst <= 1e-12 && lifted_taming <= base_taming + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space_kernel::coupling;

    fn two_atoms(p: f64, dist: f64) -> (StateSpace, Kernel) {
        let s = graph(Array2::from_shape_vec((2, 2), vec![0.0, dist, dist, 0.0]).unwrap(), vec![p, 1.0 - p]).unwrap();
        // Detailed balance: p k01 = (1 - p) k10.
        let k = Kernel::from_matrix(Array2::from_shape_vec((2, 2), vec![0.0, 1.0 - p, p, 0.0]).unwrap()).unwrap();
        (s, k)
    }

    #[test]
    fn single_particle_is_the_base_system() {
        let (s, k) = two_atoms(0.3, 0.7);
        let lift = build_lift(&s, &k, 1).unwrap();
        assert_eq!(lift.configurations, vec![vec![1, 0], vec![0, 1]]);
        assert_eq!(lift.kernel.rates(), k.rates());
        assert_eq!(lift.space.pi(), s.pi());
        assert!((lift.space.dist(0, 1) - 0.7).abs() < 1e-15);
        let r = key_estimate_check(&lift).unwrap();
        assert_eq!(r.equalities, r.jumps_checked);
    }

    #[test]
    fn two_particles_on_two_atoms() {
        let p = 0.3;
        let (s, k) = two_atoms(p, 1.0);
        let lift = build_lift(&s, &k, 2).unwrap();
        assert_eq!(lift.configurations.len(), 3);
        let q = 1.0 - p;
        for (got, want) in lift.space.pi().iter().zip([p * p, 2.0 * p * q, q * q]) {
            assert!((got - want).abs() < 1e-15);
        }
        let total: f64 = lift.space.pi().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        let mid = lift.index_of(&[1, 1]).unwrap();
        let right = lift.index_of(&[0, 2]).unwrap();
        let w2 = w2_squared_exact(&lift.empirical(mid), &lift.empirical(right), &s.metric_table()).unwrap();
        assert!((w2 - 0.5).abs() < 1e-15);
        let r = key_estimate_check(&lift).unwrap();
        assert!(r.passed && r.equalities == r.jumps_checked);
        let c = coupling(&lift.space, &lift.kernel).unwrap();
        assert!(c.detailed_balance_residual() <= 1e-12);
    }

    #[test]
    fn size_caps() {
        let (s, k) = two_atoms(0.5, 1.0);
        assert!(matches!(build_lift(&s, &k, 6), Err(Error::SizeCap(_))));
    }

    #[test]
    fn compositions_are_counted() {
        // C(N + m - 1, m - 1)
        assert_eq!(compositions(4, 4).len(), 35);
        assert_eq!(compositions(5, 6).len(), 252);
        assert!(compositions(3, 3).iter().all(|c| c.iter().sum::<usize>() == 3));
    }
}
