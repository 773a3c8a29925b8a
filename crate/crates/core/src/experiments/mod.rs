//! Numerical scenarios built on the core modules: the cutoff robustness
//! sweep, the reflecting punctured domain, the ramp density-gap probe, the
//! configuration-space lift and the two-integrator uniqueness probe.

pub mod lift;
pub mod probe;
pub mod transport;

pub use lift::{build_lift, key_estimate_check, KeyEstimateReport, LiftedSpace};
pub use probe::{density_gap_probe, log_spaced, ProbeResult};
pub use transport::{transport_cost, w2_exact, w2_squared_exact};

use crate::densities::Triple;
use crate::error::{invalid, Result};
use crate::evolution::{evolve, generator, IntegratorConfig, Method, Trajectory};
use crate::functionals::entropy;
use crate::ledger::{edb_report, ledger, LedgerOptions, Verdict};
use crate::space_kernel::{coupling, cutoff, fractional_kernel, Kernel, Mask, StateSpace};
use rayon::prelude::*;
use serde::Serialize;

/// One run per cutoff level.
#[derive(Debug, Clone, Serialize)]
pub struct SweepLeg {
    pub eps: f64,
    pub terminal: Vec<f64>,
    pub entropy: Vec<f64>,
    pub edb_relative: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub times: Vec<f64>,
    pub legs: Vec<SweepLeg>,
    /// `||u_T^{eps_k} - u_T^{eps_{k+1}}||_{L^1(pi)}`.
    pub gaps: Vec<f64>,
    /// `gaps[k] / gaps[k+1]`.
    pub gap_ratios: Vec<f64>,
    pub strictly_decreasing: bool,
}

impl SweepResult {
    /// Every successive gap shrinks by at least `factor`.
    pub fn decreases_by(&self, factor: f64) -> bool {
        self.gaps.windows(2).all(|w| w[0] >= factor * w[1])
    }
}

/// Evolves `u0` under `cutoff(kernel, eps)` for each `eps` (strictly
/// decreasing) and compares terminal densities. Legs run in parallel.
pub fn robustness_sweep(
    space: &StateSpace,
    kernel: &Kernel,
    eps: &[f64],
    u0: &[f64],
    t_final: f64,
    triple: &Triple,
    cfg: &IntegratorConfig,
) -> Result<SweepResult> {
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("cutoff levels must be strictly decreasing"));
    }
    let legs: Vec<(SweepLeg, Vec<f64>)> = eps
        .par_iter()
        .map(|&e| -> Result<(SweepLeg, Vec<f64>)> {
            let k = cutoff(space, kernel, e)?;
            let c = coupling(space, &k)?;
            let traj = evolve(&generator(&c, triple)?, u0, t_final, cfg)?;
            let edb = edb_report(&traj, triple, &c)?;
            let leg = SweepLeg {
                eps: e,
                terminal: traj.density(traj.len() - 1).to_vec(),
                entropy: edb.series.energy.clone(),
                edb_relative: edb.relative,
            };
            Ok((leg, traj.times().to_vec()))
        })
        .collect::<Result<_>>()?;
    let times = legs[0].1.clone();
    let legs: Vec<SweepLeg> = legs.into_iter().map(|(l, _)| l).collect();
    let pi = space.pi();
    let gaps: Vec<f64> = legs
        .windows(2)
        .map(|w| {
            w[0].terminal
                .iter()
                .zip(&w[1].terminal)
                .zip(pi)
                .map(|((a, b), p)| (a - b).abs() * p)
                .sum()
        })
        .collect();
    let gap_ratios = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let strictly_decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Ok(SweepResult {
        times,
        legs,
        gaps,
        gap_ratios,
        strictly_decreasing,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ReflectingReport {
    pub s: f64,
    pub split: f64,
    pub t_final: f64,
    pub initial_component_masses: [f64; 2],
    pub final_component_masses: [f64; 2],
    pub component_mass_drift: f64,
    /// `mass_c / pi(Omega_c)` on each component.
    pub equilibrium_levels: [f64; 2],
    /// `max |u_T - equilibrium|`.
    pub terminal_gap: f64,
    pub entropy_final: f64,
    pub entropy_equilibrium: f64,
    pub verdict: Verdict,
}

/// Runs the fractional kernel punctured at `split` and compares the terminal
/// profile with the componentwise constant of the same component masses.
pub fn reflecting_scenario(
    space: &StateSpace,
    s: f64,
    split: f64,
    u0: &[f64],
    t_final: f64,
    triple: &Triple,
    cfg: &IntegratorConfig,
) -> Result<ReflectingReport> {
    let mask = crate::space_kernel::punctured_mask(space, split)?;
    let kernel = fractional_kernel(space, s, mask)?;
    let c = coupling(space, &kernel)?;
    let traj = evolve(&generator(&c, triple)?, u0, t_final, cfg)?;
    let report = ledger(&traj, triple, space, &kernel, &c, &LedgerOptions::default())?;
    let [left, right] = mask.components(space).expect("punctured mask has components");
    let pi = space.pi();
    let mass = |u: &[f64], part: &[usize]| -> f64 { part.iter().map(|&i| u[i] * pi[i]).sum() };
    let weight = |part: &[usize]| -> f64 { part.iter().map(|&i| pi[i]).sum() };
    let last = traj.density(traj.len() - 1);
    let initial = [mass(u0, &left), mass(u0, &right)];
    let fin = [mass(last, &left), mass(last, &right)];
    let levels = [initial[0] / weight(&left), initial[1] / weight(&right)];
    let mut eq = vec![0.0; space.n()];
    for &i in &left {
        eq[i] = levels[0];
    }
    for &i in &right {
        eq[i] = levels[1];
    }
    let drift = component_drift(&traj, pi, &left, &right);
    Ok(ReflectingReport {
        s,
        split,
        t_final,
        initial_component_masses: initial,
        final_component_masses: fin,
        component_mass_drift: drift,
        equilibrium_levels: levels,
        terminal_gap: last.iter().zip(&eq).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())),
        entropy_final: entropy(last, pi, triple.entropy),
        entropy_equilibrium: entropy(&eq, pi, triple.entropy),
        verdict: report.verdict,
    })
}

fn component_drift(traj: &Trajectory, pi: &[f64], left: &[usize], right: &[usize]) -> f64 {
    let mut worst = 0.0_f64;
    for part in [left, right] {
        let mass = |u: &[f64]| -> f64 { part.iter().map(|&i| u[i] * pi[i]).sum() };
        let m0 = mass(traj.density(0));
        for u in traj.densities() {
            worst = worst.max((mass(u) - m0).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub euler_dt: f64,
    pub max_linf_gap: f64,
    pub terminal_linf_gap: f64,
}

/// Solves the same problem with explicit Euler and the matrix exponential on
/// a shared checkpoint grid and reports the largest `L^inf` disagreement.
pub fn uniqueness_probe(
    coupling: &crate::space_kernel::Coupling,
    triple: &Triple,
    u0: &[f64],
    t_final: f64,
    checkpoints: Option<usize>,
    euler_dt: Option<f64>,
) -> Result<UniquenessReport> {
    let g = generator(coupling, triple)?;
    let base = IntegratorConfig {
        checkpoints,
        ..Default::default()
    };
    let expm = evolve(&g, u0, t_final, &base)?;
    let euler = evolve(
        &g,
        u0,
        t_final,
        &IntegratorConfig {
            method: Method::ExplicitEuler,
            dt: euler_dt,
            ..base
        },
    )?;
    let gap = |k: usize| -> f64 {
        expm.density(k)
            .iter()
            .zip(euler.density(k))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    };
    Ok(UniquenessReport {
        euler_dt: euler.meta().dt.unwrap_or(f64::NAN),
        max_linf_gap: (0..expm.len()).map(gap).fold(0.0, f64::max),
        terminal_linf_gap: gap(expm.len() - 1),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LiftedRunReport {
    pub mass_drift_rel: f64,
    pub edb_relative: f64,
}

/// Evolves a positive, non-constant density on the lifted system and returns
/// its mass drift and EDB residual.
pub fn lifted_run(lift: &LiftedSpace, triple: &Triple, t_final: f64, cfg: &IntegratorConfig) -> Result<LiftedRunReport> {
    let c = coupling(&lift.space, &lift.kernel)?;
    let n = lift.space.n();
    let u0: Vec<f64> = (0..n).map(|k| 1.0 + 0.5 * (1.7 * k as f64).cos()).collect();
    let traj = evolve(&generator(&c, triple)?, &u0, t_final, cfg)?;
    let masses = traj.masses(lift.space.pi());
    let drift = masses.iter().fold(0.0_f64, |m, x| m.max((x - masses[0]).abs())) / masses[0];
    Ok(LiftedRunReport {
        mass_drift_rel: drift,
        edb_relative: edb_report(&traj, triple, &c)?.relative,
    })
}

/// Default initial profile on `[-1, 1]` grids: smooth, in `[1/2, 3/2]`.
pub fn cosine_profile(space: &StateSpace) -> Result<Vec<f64>> {
    let x = space.coords().ok_or_else(|| invalid("cosine profile needs point coordinates"))?;
    Ok(x.iter().map(|x| 1.0 + 0.5 * (std::f64::consts::PI * x).cos()).collect())
}

/// Default mask for experiments: punctured at the domain midpoint.
pub fn midpoint_puncture(space: &StateSpace) -> Result<Mask> {
    let (a, b) = space.domain().ok_or_else(|| invalid("puncture needs an interval domain"))?;
    crate::space_kernel::punctured_mask(space, 0.5 * (a + b))
}
