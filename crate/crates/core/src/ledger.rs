//! Energy-dissipation bookkeeping along a trajectory.
//!
//! `L_t = E(u_t) - E(u_0) + ∫_0^t (R + D)` is evaluated on the checkpoint
//! lattice; the residual of a pair `[s, t]` is `L_t - L_s`, so interval
//! residuals are additive by construction.

use crate::densities::{DissipationPair, Triple};
use crate::error::{invalid, Result};
use crate::evolution::{continuity_residual, Trajectory};
use crate::functionals::{action_r, entropy, fisher_d, trajectory_l, LSeries, TestFunction};
use crate::quadrature;
use crate::space_kernel::{Coupling, Kernel, KernelOrigin, Mask, StateSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::fmt;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// EDB residual relative to `E(u_0)`.
    pub edb_rel: f64,
    /// Absolute continuity-equation defect.
    pub continuity: f64,
    /// Chain-rule residual relative to `E(u_0)`.
    pub chain_rule_rel: f64,
    pub mass_rel: f64,
    pub max_principle: f64,
    pub entropy_slack: f64,
    pub component_mass: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            edb_rel: 1e-6,
            continuity: 1e-8,
            chain_rule_rel: 1e-6,
            mass_rel: 1e-10,
            max_principle: 1e-10,
            entropy_slack: 1e-10,
            component_mass: 1e-12,
        }
    }
}

impl Tolerances {
    /// Stiff cutoff kernels (`eps <= 1e-3`) get the looser EDB tolerance 1e-4.
    pub fn for_kernel(kernel: &Kernel) -> Self {
        let mut t = Self::default();
        if let Some(eps) = cutoff_eps(kernel.origin()) {
            if eps <= 1e-3 {
                t.edb_rel = 1e-4;
                t.chain_rule_rel = 1e-4;
            }
        }
        t
    }
}

fn cutoff_eps(origin: &KernelOrigin) -> Option<f64> {
    match origin {
        KernelOrigin::Cutoff { eps, .. } => Some(*eps),
        _ => None,
    }
}

fn punctured(origin: &KernelOrigin) -> Option<Mask> {
    match origin {
        KernelOrigin::Fractional { mask: m @ Mask::Punctured { .. }, .. } => Some(*m),
        KernelOrigin::Cutoff { base, .. } => punctured(base),
        _ => None,
    }
}

fn energy_scale(e0: f64) -> f64 {
    if e0 > 0.0 {
        e0
    } else {
        1.0
    }
}

fn spread(xs: &[f64]) -> f64 {
    if xs.iter().any(|x| x.is_nan()) {
        return f64::NAN;
    }
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo
}

#[derive(Debug, Clone, Serialize)]
pub struct EdbReport {
    pub series: LSeries,
    /// `L_{t_{k+1}} - L_{t_k}`.
    #[serde(with = "crate::extreal::vec")]
    pub interval_residuals: Vec<f64>,
    /// `max_{s<t} |L_t - L_s|`.
    #[serde(with = "crate::extreal")]
    pub max_pairwise: f64,
    #[serde(with = "crate::extreal")]
    pub relative: f64,
    /// `max_t L_t`; positive values break the energy-dissipation inequality.
    #[serde(with = "crate::extreal")]
    pub edi_excess: f64,
    pub energy_initial: f64,
}

pub fn edb_report(traj: &Trajectory, triple: &Triple, coupling: &Coupling) -> Result<EdbReport> {
    let series = trajectory_l(traj, triple, coupling)?;
    let interval_residuals = series.l.windows(2).map(|w| w[1] - w[0]).collect();
    let max_pairwise = spread(&series.l);
    let energy_initial = series.energy[0];
    let edi_excess = series.l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(EdbReport {
        relative: max_pairwise / energy_scale(energy_initial),
        interval_residuals,
        max_pairwise,
        edi_excess,
        energy_initial,
        series,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainRuleReport {
    /// `E(u_t) - E(u_0) - ∫_0^t 1/2 sum Lambda(u_i, u_j) w_ij theta_ij`.
    #[serde(with = "crate::extreal::vec")]
    pub residuals: Vec<f64>,
    #[serde(with = "crate::extreal")]
    pub max_pairwise: f64,
    /// The integrand is extended-valued here, so no verdict is drawn.
    pub inconclusive: bool,
}

pub fn chain_rule_residual(traj: &Trajectory, triple: &Triple, coupling: &Coupling) -> Result<ChainRuleReport> {
    if !traj.has_flux() {
        return Err(crate::Error::MissingFlux);
    }
    let pi = coupling.pi();
    let th = coupling.theta();
    let n = coupling.n();
    let mut integrand = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let u = traj.density(k);
        let w = traj.flux_at(k).expect("flux present");
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (t, wij) = (th[[i, j]], w[[i, j]]);
                if i != j && t != 0.0 && wij != 0.0 {
                    total += 0.5 * triple.lambda(u[i], u[j]) * wij * t;
                }
            }
        }
        integrand.push(total);
    }
    let cum = quadrature::cumulative(traj.times(), &integrand);
    let e0 = entropy(traj.density(0), pi, triple.entropy);
    let residuals: Vec<f64> = (0..traj.len())
        .map(|k| entropy(traj.density(k), pi, triple.entropy) - e0 - cum.values[k])
        .collect();
    let vacuum = traj.densities().iter().any(|u| u.contains(&0.0));
    let inconclusive =
        residuals.iter().any(|r| !r.is_finite()) || (triple.pair == DissipationPair::Quadratic && vacuum);
    Ok(ChainRuleReport {
        max_pairwise: spread(&residuals),
        residuals,
        inconclusive,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PointwiseReport {
    /// `R + D + dE/dt` at interior checkpoints, with `dE/dt` from the
    /// three-point nonuniform central difference.
    #[serde(with = "crate::extreal::vec")]
    pub residuals: Vec<f64>,
    #[serde(with = "crate::extreal")]
    pub max_abs: f64,
}

pub fn pointwise_edb(traj: &Trajectory, triple: &Triple, coupling: &Coupling) -> Result<PointwiseReport> {
    if !traj.has_flux() {
        return Err(crate::Error::MissingFlux);
    }
    let t = traj.times();
    let pi = coupling.pi();
    let e: Vec<f64> = traj.densities().iter().map(|u| entropy(u, pi, triple.entropy)).collect();
    let mut residuals = Vec::new();
    for k in 1..traj.len().saturating_sub(1) {
        let (h0, h1) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        let de = -h1 / (h0 * (h0 + h1)) * e[k - 1] + (h1 - h0) / (h0 * h1) * e[k] + h0 / (h1 * (h0 + h1)) * e[k + 1];
        let u = traj.density(k);
        let w = traj.flux_at(k).expect("flux present");
        let rate = action_r(u, &w, triple, coupling).value + fisher_d(u, triple, coupling).value;
        residuals.push(rate + de);
    }
    let max_abs = residuals.iter().fold(0.0_f64, |m, r| if r.is_nan() { f64::NAN } else { m.max(r.abs()) });
    Ok(PointwiseReport { residuals, max_abs })
}

/// A member of the test-function battery; `reflecting_only` marks functions
/// that are discontinuous across a puncture.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryEntry {
    pub function: TestFunction,
    pub reflecting_only: bool,
}

/// Constants, a clamped coordinate, seeded random Lipschitz functions
/// `sum_r c_r (1 ∧ d(., z_r))`, and the component step when `mask` is
/// punctured.
pub fn test_battery(space: &StateSpace, mask: Option<Mask>, seed: u64, random_count: usize) -> Vec<BatteryEntry> {
    let n = space.n();
    let mut out = Vec::new();
    let mut push = |label: String, values: Vec<f64>, reflecting_only: bool| {
        out.push(BatteryEntry {
            function: TestFunction { label, values },
            reflecting_only,
        });
    };
    push("constant".into(), vec![1.0; n], false);
    let coord = match (space.coords(), space.domain()) {
        (Some(x), Some(_)) if !is_torus(space) => x.iter().map(|v| v.clamp(-1.0, 1.0)).collect(),
        _ => (0..n).map(|i| space.dist(0, i).min(1.0)).collect(),
    };
    push("coordinate".into(), coord, false);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in 0..random_count {
        let mut v = vec![0.0; n];
        for _ in 0..3 {
            let c: f64 = rng.random_range(-1.0..1.0);
            let z = rng.random_range(0..n);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi += c * space.dist(i, z).min(1.0);
            }
        }
        push(format!("lipschitz_{r}"), v, false);
    }
    if let Some(m) = mask {
        if let Some([left, _]) = m.components(space) {
            let mut v = vec![0.0; n];
            for i in left {
                v[i] = 1.0;
            }
            push("component_step".into(), v, true);
        }
    }
    out
}

fn is_torus(space: &StateSpace) -> bool {
    space.to_descriptor().geometry == "torus"
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuitySummary {
    pub label: String,
    pub reflecting_only: bool,
    #[serde(with = "crate::extreal")]
    pub max_interval: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantChecks {
    pub mass_drift_rel: f64,
    pub mass_ok: bool,
    pub max_principle_violation: f64,
    pub max_principle_ok: bool,
    pub entropy_increase: f64,
    pub entropy_ok: bool,
    pub component_mass_drift: Option<f64>,
    pub component_mass_ok: Option<bool>,
}

impl InvariantChecks {
    pub fn all_ok(&self) -> bool {
        self.mass_ok && self.max_principle_ok && self.entropy_ok && self.component_mass_ok.unwrap_or(true)
    }
}

pub fn invariant_checks(
    traj: &Trajectory,
    triple: &Triple,
    space: &StateSpace,
    mask: Option<Mask>,
    tol: &Tolerances,
) -> InvariantChecks {
    let pi = space.pi();
    let masses = traj.masses(pi);
    let m0 = masses[0];
    let mass_drift_rel = masses.iter().fold(0.0_f64, |m, x| m.max((x - m0).abs())) / if m0 > 0.0 { m0 } else { 1.0 };
    let u0 = traj.density(0);
    let lo = u0.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_principle_violation = traj
        .densities()
        .iter()
        .flat_map(|u| u.iter())
        .fold(0.0_f64, |m, &x| m.max(lo - x).max(x - hi));
    let e: Vec<f64> = traj.densities().iter().map(|u| entropy(u, pi, triple.entropy)).collect();
    let entropy_increase = e.windows(2).fold(0.0_f64, |m, w| m.max(w[1] - w[0]));
    let components = mask.and_then(|m| m.components(space));
    let component_mass_drift = components.map(|parts| {
        let mut worst = 0.0_f64;
        for part in parts.iter() {
            let mass = |u: &[f64]| -> f64 { part.iter().map(|&i| u[i] * pi[i]).sum() };
            let c0 = mass(u0);
            for u in traj.densities() {
                worst = worst.max((mass(u) - c0).abs());
            }
        }
        worst
    });
    InvariantChecks {
        mass_ok: mass_drift_rel <= tol.mass_rel,
        mass_drift_rel,
        max_principle_ok: max_principle_violation <= tol.max_principle,
        max_principle_violation,
        entropy_ok: entropy_increase <= tol.entropy_slack,
        entropy_increase,
        component_mass_ok: component_mass_drift.map(|d| d <= tol.component_mass * m0.max(1.0)),
        component_mass_drift,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BalancedReflecting,
    Dissipative,
    Neither,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BalancedReflecting => "Balanced/Reflecting",
            Self::Dissipative => "Dissipative",
            Self::Neither => "Neither",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerReport {
    pub schema: u32,
    pub triple: String,
    pub n: usize,
    pub checkpoints: usize,
    pub t_final: f64,
    pub tolerances: Tolerances,
    pub edb: EdbReport,
    pub chain_rule: ChainRuleReport,
    pub pointwise: PointwiseReport,
    pub continuity: Vec<ContinuitySummary>,
    /// Worst defect over the battery without reflecting-only functions.
    #[serde(with = "crate::extreal")]
    pub ce_residual: f64,
    /// Worst defect over the full battery.
    #[serde(with = "crate::extreal")]
    pub rce_residual: f64,
    pub invariants: InvariantChecks,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy)]
pub struct LedgerOptions {
    pub seed: u64,
    pub random_test_functions: usize,
    pub tolerances: Option<Tolerances>,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            random_test_functions: 3,
            tolerances: None,
        }
    }
}

/// Full ledger for a trajectory on `space` driven by `kernel`.
pub fn ledger(
    traj: &Trajectory,
    triple: &Triple,
    space: &StateSpace,
    kernel: &Kernel,
    coupling: &Coupling,
    opts: &LedgerOptions,
) -> Result<LedgerReport> {
    if traj.n() != space.n() || coupling.n() != space.n() {
        return Err(invalid("trajectory, space and coupling differ in size"));
    }
    let tol = opts.tolerances.unwrap_or_else(|| Tolerances::for_kernel(kernel));
    let mask = punctured(kernel.origin());
    let edb = edb_report(traj, triple, coupling)?;
    let chain_rule = chain_rule_residual(traj, triple, coupling)?;
    let pointwise = pointwise_edb(traj, triple, coupling)?;
    let mut continuity = Vec::new();
    for entry in test_battery(space, mask, opts.seed, opts.random_test_functions) {
        let r = continuity_residual(traj, &entry.function, coupling)?;
        continuity.push(ContinuitySummary {
            label: entry.function.label,
            reflecting_only: entry.reflecting_only,
            max_interval: r.max_interval,
        });
    }
    let worst = |pred: &dyn Fn(&ContinuitySummary) -> bool| {
        continuity.iter().filter(|c| pred(c)).map(|c| c.max_interval).fold(0.0_f64, |m, x| {
            if x.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(x)
            }
        })
    };
    let ce_residual = worst(&|c| !c.reflecting_only);
    let rce_residual = worst(&|_| true);
    let invariants = invariant_checks(traj, triple, space, mask, &tol);
    let mut report = LedgerReport {
        schema: SCHEMA_VERSION,
        triple: triple.to_string(),
        n: traj.n(),
        checkpoints: traj.len(),
        t_final: traj.t_final(),
        tolerances: tol,
        edb,
        chain_rule,
        pointwise,
        continuity,
        ce_residual,
        rce_residual,
        invariants,
        verdict: Verdict::Neither,
    };
    report.verdict = upgrade_verdict(&report);
    Ok(report)
}

/// Balanced/Reflecting when every interval balances and the full battery
/// (step functions included) satisfies the continuity equation; Dissipative
/// when the inequality holds and the continuity equation holds for the
/// continuous battery.
pub fn upgrade_verdict(report: &LedgerReport) -> Verdict {
    let tol = &report.tolerances;
    let scale = energy_scale(report.edb.energy_initial);
    let balanced = report.edb.relative <= tol.edb_rel;
    let reflecting = report.rce_residual <= tol.continuity;
    let edi = report.edb.edi_excess <= tol.edb_rel * scale;
    let ce = report.ce_residual <= tol.continuity;
    if balanced && reflecting {
        Verdict::BalancedReflecting
    } else if edi && ce {
        Verdict::Dissipative
    } else {
        Verdict::Neither
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{evolve, generator, FluxRecord, IntegratorConfig};
    use crate::space_kernel::{build_grid, coupling, fractional_kernel, graph};
    use ndarray::Array2;

    fn two_point_space() -> (StateSpace, Kernel, Coupling) {
        let space = graph(Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap(), vec![0.5, 0.5]).unwrap();
        let kernel = Kernel::from_matrix(Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap();
        let c = coupling(&space, &kernel).unwrap();
        (space, kernel, c)
    }

    fn two_point_run(checkpoints: usize) -> (Trajectory, StateSpace, Kernel, Coupling) {
        let (s, k, c) = two_point_space();
        let g = generator(&c, &Triple::linear_cosh()).unwrap();
        let cfg = IntegratorConfig {
            checkpoints: Some(checkpoints),
            ..Default::default()
        };
        (evolve(&g, &[1.8, 0.2], 1.0, &cfg).unwrap(), s, k, c)
    }

    #[test]
    fn stationary_is_balanced_with_zero_residuals() {
        let g = build_grid(-1.0, 1.0, 16).unwrap();
        let k = fractional_kernel(&g, 0.6, Mask::Punctured { split: 0.0 }).unwrap();
        let c = coupling(&g, &k).unwrap();
        let t = Triple::linear_cosh();
        let tr = evolve(&generator(&c, &t).unwrap(), &[1.5; 16], 0.25, &IntegratorConfig::default()).unwrap();
        let r = ledger(&tr, &t, &g, &k, &c, &LedgerOptions::default()).unwrap();
        assert_eq!(r.edb.max_pairwise, 0.0);
        assert_eq!(r.chain_rule.max_pairwise, 0.0);
        assert_eq!(r.pointwise.max_abs, 0.0);
        assert_eq!(r.verdict, Verdict::BalancedReflecting);
    }

    #[test]
    fn two_point_balance_and_additivity() {
        let (tr, s, k, c) = two_point_run(512);
        let t = Triple::linear_cosh();
        let r = ledger(&tr, &t, &s, &k, &c, &LedgerOptions::default()).unwrap();
        assert!(r.edb.relative <= 1e-8, "{}", r.edb.relative);
        assert!(r.chain_rule.max_pairwise <= 1e-8 && !r.chain_rule.inconclusive);
        assert_eq!(r.verdict, Verdict::BalancedReflecting);
        let l = &r.edb.series.l;
        for (a, b, c) in [(0, 100, 300), (17, 18, 512), (5, 250, 251)] {
            let direct = l[c] - l[a];
            let split = (l[b] - l[a]) + (l[c] - l[b]);
            assert!((direct - split).abs() <= 1e-12);
        }
    }

    #[test]
    fn refinement_improves_edb_by_simpson_order() {
        let t = Triple::linear_cosh();
        let res = |k: usize| {
            let (tr, _, _, c) = two_point_run(k);
            edb_report(&tr, &t, &c).unwrap().max_pairwise
        };
        let (coarse, fine) = (res(16), res(32));
        assert!(coarse / fine >= 8.0, "{coarse} / {fine}");
    }

    #[test]
    fn pointwise_balance_is_second_order() {
        let t = Triple::linear_cosh();
        let at_half = |k: usize| {
            let (tr, _, _, c) = two_point_run(k);
            pointwise_edb(&tr, &t, &c).unwrap().residuals[k / 2 - 1].abs()
        };
        let ratio = at_half(32) / at_half(64);
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zeroed_flux_breaks_balance() {
        let (tr, s, k, c) = two_point_run(128);
        let t = Triple::linear_cosh();
        let zero = tr.with_flux(FluxRecord::Stored(vec![Array2::zeros((2, 2)); tr.len()])).unwrap();
        let r = ledger(&zero, &t, &s, &k, &c, &LedgerOptions::default()).unwrap();
        assert!(r.edb.relative > 1e-2);
        assert_eq!(r.verdict, Verdict::Neither);
    }

    #[test]
    fn quadratic_with_vacuum_is_inconclusive() {
        let (s, k, c) = two_point_space();
        let t = Triple::linear_quadratic();
        let tr = evolve(&generator(&c, &t).unwrap(), &[2.0, 0.0], 0.5, &IntegratorConfig::default()).unwrap();
        assert!(chain_rule_residual(&tr, &t, &c).unwrap().inconclusive);
        let _ = (s, k);
    }

    #[test]
    fn punctured_exact_run_is_reflecting() {
        let g = build_grid(-1.0, 1.0, 40).unwrap();
        let k = fractional_kernel(&g, 0.75, Mask::Punctured { split: 0.0 }).unwrap();
        let c = coupling(&g, &k).unwrap();
        let t = Triple::linear_cosh();
        let u0: Vec<f64> = g.coords().unwrap().iter().map(|x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos()).collect();
        let tr = evolve(&generator(&c, &t).unwrap(), &u0, 0.1, &IntegratorConfig { checkpoints: Some(256), ..Default::default() }).unwrap();
        let r = ledger(&tr, &t, &g, &k, &c, &LedgerOptions::default()).unwrap();
        assert!(r.continuity.iter().any(|c| c.reflecting_only));
        assert!(r.invariants.all_ok(), "{:?}", r.invariants);
        assert_eq!(r.verdict, Verdict::BalancedReflecting, "{} {}", r.edb.relative, r.rce_residual);
    }
}
