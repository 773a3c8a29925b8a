//! Exact discrete optimal transport by successive shortest paths.

use crate::error::{invalid, Error, Result};
use ndarray::Array2;

/// Relative mass below which the remaining supply counts as shipped.
const MASS_EPS: f64 = 1e-14;

/// Largest support handled; enough for the lifts used here.
pub const MAX_ATOMS: usize = 128;

struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
}

struct Network {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Network {
    fn new(nodes: usize) -> Self {
        Self {
            edges: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(Edge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    }

    /// Bellman-Ford from `src`; returns the predecessor edge of every node.
    /// Improvements below `slack` are ignored so rounding cannot create
    /// spurious negative cycles.
    fn shortest_path(&self, src: usize, floor: f64, slack: f64) -> Vec<Option<usize>> {
        let n = self.adj.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred = vec![None; n];
        dist[src] = 0.0;
        for _ in 0..n {
            let mut changed = false;
            for v in 0..n {
                if dist[v] == f64::INFINITY {
                    continue;
                }
                for &e in &self.adj[v] {
                    let edge = &self.edges[e];
                    let cand = dist[v] + edge.cost;
                    let cur = dist[edge.to];
                    if edge.cap > floor && (cur == f64::INFINITY || cand < cur - slack) {
                        dist[edge.to] = cand;
                        pred[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        pred
    }
}

/// Minimal `sum_ij cost_ij gamma_ij` over couplings of `mu` and `nu`.
pub fn transport_cost(mu: &[f64], nu: &[f64], cost: &Array2<f64>) -> Result<f64> {
    let (m, n) = (mu.len(), nu.len());
    if cost.dim() != (m, n) {
        return Err(invalid("cost matrix does not match the marginals"));
    }
    if m > MAX_ATOMS || n > MAX_ATOMS {
        return Err(Error::SizeCap(format!("transport limited to {MAX_ATOMS} atoms per side")));
    }
    if mu.iter().chain(nu).any(|x| !(x.is_finite() && *x >= 0.0)) || cost.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(invalid("masses and costs must be finite and nonnegative"));
    }
    let (left, right): (f64, f64) = (mu.iter().sum(), nu.iter().sum());
    if (left - right).abs() > 1e-12 * left.max(right).max(1.0) {
        return Err(Error::MassMismatch { left, right });
    }
    let (src, sink) = (m + n, m + n + 1);
    let mut net = Network::new(m + n + 2);
    for (i, &a) in mu.iter().enumerate() {
        if a > 0.0 {
            net.add(src, i, a, 0.0);
        }
    }
    for (j, &b) in nu.iter().enumerate() {
        if b > 0.0 {
            net.add(m + j, sink, b, 0.0);
        }
    }
    for i in 0..m {
        for j in 0..n {
            if mu[i] > 0.0 && nu[j] > 0.0 {
                net.add(i, m + j, f64::INFINITY, cost[[i, j]]);
            }
        }
    }
    let floor = MASS_EPS * left.max(right);
    let slack = 1e-13 * cost.iter().fold(0.0_f64, |m, &c| m.max(c)).max(f64::MIN_POSITIVE);
    let mut shipped = 0.0;
    let mut total = 0.0;
    while shipped < left.min(right) - floor {
        let pred = net.shortest_path(src, floor, slack);
        if pred[sink].is_none() {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        let mut hops = 0;
        while v != src {
            hops += 1;
            assert!(hops <= m + n + 2, "shortest-path tree contains a cycle");
            let e = pred[v].expect("path");
            push = push.min(net.edges[e].cap);
            v = net.edges[e ^ 1].to;
        }
        let mut v = sink;
        while v != src {
            let e = pred[v].expect("path");
            net.edges[e].cap -= push;
            net.edges[e ^ 1].cap += push;
            total += push * net.edges[e].cost;
            v = net.edges[e ^ 1].to;
        }
        shipped += push;
    }
    Ok(total.max(0.0))
}

/// `W_2^2(mu, nu)` for measures on one metric space with distance table `d`.
pub fn w2_squared_exact(mu: &[f64], nu: &[f64], d: &Array2<f64>) -> Result<f64> {
    transport_cost(mu, nu, &d.mapv(|x| x * x))
}

/// `W_2(mu, nu)`.
pub fn w2_exact(mu: &[f64], nu: &[f64], d: &Array2<f64>) -> Result<f64> {
    w2_squared_exact(mu, nu, d).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn simple_cases() {
        let d = Array2::from_shape_vec((2, 2), vec![0.0, 3.0, 3.0, 0.0]).unwrap();
        assert_eq!(w2_squared_exact(&[0.3, 0.7], &[0.3, 0.7], &d).unwrap(), 0.0);
        assert_eq!(w2_squared_exact(&[1.0, 0.0], &[0.0, 1.0], &d).unwrap(), 9.0);
        assert!((w2_squared_exact(&[0.5, 0.5], &[0.0, 1.0], &d).unwrap() - 4.5).abs() < 1e-15);
        assert!(matches!(w2_exact(&[1.0, 0.0], &[0.0, 2.0], &d), Err(Error::MassMismatch { .. })));
    }

    #[test]
    fn matches_assignment_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let n = rng.random_range(2..=6);
            let pts: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let qts: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let cost = Array2::from_shape_fn((n, n), |(i, j)| (pts[i] - qts[j]).abs());
            let w = vec![1.0 / n as f64; n];
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            let lp = transport_cost(&w, &w, &cost).unwrap();
            assert!((lp - best).abs() < 1e-12, "{lp} vs {best}");
        }
    }

    #[test]
    fn unequal_weights_match_one_dimensional_quantiles() {
        // On the line with convex cost the monotone coupling is optimal.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..30 {
            let x: Vec<f64> = {
                let mut v: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let mut a: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let mut b: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..1.0)).collect();
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            a.iter_mut().for_each(|v| *v /= sa);
            b.iter_mut().for_each(|v| *v /= sb);
            let d = Array2::from_shape_fn((5, 5), |(i, j)| (x[i] - x[j]).abs());
            let (mut i, mut j, mut ra, mut rb, mut exact) = (0, 0, a[0], b[0], 0.0);
            while i < 5 && j < 5 {
                let m = ra.min(rb);
                exact += m * (x[i] - x[j]).powi(2);
                ra -= m;
                rb -= m;
                if ra <= 1e-15 {
                    i += 1;
                    ra = a.get(i).copied().unwrap_or(0.0);
                } else {
                    j += 1;
                    rb = b.get(j).copied().unwrap_or(0.0);
                }
            }
            let lp = w2_squared_exact(&a, &b, &d).unwrap();
            assert!((lp - exact).abs() < 1e-12, "{lp} vs {exact}");
        }
    }
}
