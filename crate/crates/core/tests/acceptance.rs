//! Acceptance gate. Prints one PASS/FAIL line per criterion with the measured
//! value and its pinned threshold, then exits nonzero if any criterion fails.

use jumpflow::densities::{compat_check, Triple};
use jumpflow::evolution::{evolve, generator, IntegratorConfig, Trajectory};
use jumpflow::experiments::{
    build_lift, density_gap_probe, key_estimate_check, lifted_run, log_spaced, robustness_sweep, uniqueness_probe,
    w2_squared_exact,
};
use jumpflow::functionals::{entropy, jensen_sides, ActionIntegrand, AbsNorm, ConvexIntegrand, SquaredNorm};
use jumpflow::ledger::{edb_report, ledger, LedgerOptions};
use jumpflow::measure::{jordan_from_setfunction, PosMeasure, SignedMeasurePair};
use jumpflow::space_kernel::{build_grid, coupling, cutoff, fractional_kernel, graph, Coupling, Kernel, Mask, StateSpace};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// A finished run kept for the invariant criteria.
struct Run {
    label: &'static str,
    traj: Trajectory,
    pi: Vec<f64>,
    triple: Triple,
}

fn mass_drift(run: &Run) -> f64 {
    let m = run.traj.masses(&run.pi);
    m.iter().fold(0.0_f64, |a, x| a.max((x - m[0]).abs())) / m[0]
}

fn max_principle_excess(run: &Run) -> f64 {
    let u0 = run.traj.density(0);
    let lo = u0.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = u0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    run.traj
        .densities()
        .iter()
        .flatten()
        .fold(0.0_f64, |a, &x| a.max(lo - x).max(x - hi))
}

fn entropy_increase(run: &Run) -> f64 {
    let e: Vec<f64> = run.traj.densities().iter().map(|u| entropy(u, &run.pi, run.triple.entropy)).collect();
    e.windows(2).fold(0.0_f64, |a, w| a.max(w[1] - w[0]))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let q = compat_check(&Triple::linear_quadratic(), 10_000, 0);
    let c = compat_check(&Triple::linear_cosh(), 10_000, 0);
    let t = start.elapsed();
    outcome(
        "1 compatibility identity",
        q <= 1e-12 && c <= 1e-12 && t < Duration::from_secs(1),
        format!("max residual quadratic {q:.2e}, cosh {c:.2e} (<= 1e-12); {:.3} s (< 1 s)", secs(t)),
    )
}

fn criterion_2(runs: &mut Vec<Run>) -> Outcome {
    let start = Instant::now();
    let k = 1.0;
    let space = graph(Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap(), vec![0.5, 0.5]).unwrap();
    let kernel = Kernel::from_matrix(Array2::from_shape_vec((2, 2), vec![0.0, k, k, 0.0]).unwrap()).unwrap();
    let c = coupling(&space, &kernel).unwrap();
    let triple = Triple::linear_cosh();
    // The action is log-singular at t = 0 where u_b = 0; graded checkpoints
    // resolve it.
    let cfg = IntegratorConfig {
        checkpoints: Some(1024),
        grading: 4.0,
        ..Default::default()
    };
    let traj = evolve(&generator(&c, &triple).unwrap(), &[2.0, 0.0], 2.0, &cfg).unwrap();
    let oracle_gap = traj
        .times()
        .iter()
        .zip(traj.densities())
        .map(|(t, u)| {
            let e = (-2.0 * k * t).exp();
            (u[0] - (1.0 + e)).abs().max((u[1] - (1.0 - e)).abs())
        })
        .fold(0.0, f64::max);
    let edb = edb_report(&traj, &triple, &c).unwrap();
    let rel = edb.series.l.iter().fold(0.0_f64, |a, l| a.max(l.abs())) / edb.energy_initial;
    let t = start.elapsed();
    runs.push(Run {
        label: "two-point",
        traj,
        pi: c.pi().to_vec(),
        triple,
    });
    outcome(
        "2 two-point EDB oracle",
        rel <= 1e-8 && oracle_gap <= 1e-12 && t < Duration::from_secs(1),
        format!(
            "max |L_t|/E(u0) {rel:.2e} (<= 1e-8); closed-form gap {oracle_gap:.1e}; {:.3} s (< 1 s)",
            secs(t)
        ),
    )
}

fn grid_s06_cutoff(n: usize) -> (StateSpace, Kernel, Coupling) {
    let g = build_grid(-1.0, 1.0, n).unwrap();
    let base = fractional_kernel(&g, 0.6, Mask::Full).unwrap();
    let k = cutoff(&g, &base, 1e-3).unwrap();
    let c = coupling(&g, &k).unwrap();
    (g, k, c)
}

fn cosine(g: &StateSpace) -> Vec<f64> {
    g.coords().unwrap().iter().map(|x| 1.0 + 0.5 * (PI * x).cos()).collect()
}

fn criterion_3(runs: &mut Vec<Run>) -> Outcome {
    let start = Instant::now();
    let (g, _, c) = grid_s06_cutoff(200);
    let triple = Triple::linear_cosh();
    let traj = evolve(&generator(&c, &triple).unwrap(), &cosine(&g), 0.5, &IntegratorConfig::default()).unwrap();
    let edb = edb_report(&traj, &triple, &c).unwrap();
    let rel = edb.series.l.last().unwrap().abs() / edb.energy_initial;
    let t = start.elapsed();
    runs.push(Run {
        label: "grid n=200",
        traj,
        pi: c.pi().to_vec(),
        triple,
    });
    outcome(
        "3 grid EDB",
        rel <= 1e-4 && t < Duration::from_secs(60),
        format!("|L_T|/E(u0) {rel:.2e} (<= 1e-4); {:.2} s (< 60 s)", secs(t)),
    )
}

fn criterion_4(runs: &[Run]) -> Outcome {
    let worst = runs.iter().map(mass_drift).fold(0.0, f64::max);
    let labels: Vec<&str> = runs.iter().map(|r| r.label).collect();
    outcome(
        "4 mass conservation",
        worst <= 1e-10,
        format!("max relative drift {worst:.2e} (<= 1e-10) over {labels:?}"),
    )
}

fn criterion_5(runs: &[Run]) -> Outcome {
    let worst = runs.iter().map(max_principle_excess).fold(0.0, f64::max);
    outcome(
        "5 maximum principle",
        worst <= 1e-10,
        format!("max excursion outside [min u0, max u0] {worst:.2e} (<= 1e-10) over {} runs", runs.len()),
    )
}

fn criterion_6(runs: &[Run]) -> Outcome {
    let worst = runs.iter().map(entropy_increase).fold(0.0, f64::max);
    outcome(
        "6 entropy monotone",
        worst <= 1e-10,
        format!("max increase between checkpoints {worst:.2e} (<= 1e-10) over {} runs", runs.len()),
    )
}

fn asymmetric(g: &StateSpace) -> Vec<f64> {
    g.coords()
        .unwrap()
        .iter()
        .map(|&x| if x < 0.0 { 1.5 + 0.5 * (3.0 * PI * x).cos() } else { 0.5 + 0.3 * x })
        .collect()
}

fn criterion_7(runs: &mut Vec<Run>) -> Outcome {
    let start = Instant::now();
    let g = build_grid(-1.0, 1.0, 200).unwrap();
    let k = fractional_kernel(&g, 0.75, Mask::Punctured { split: 0.0 }).unwrap();
    let u0 = asymmetric(&g);
    let eps = [1e-1, 1e-2, 1e-3, 1e-4];
    let triple = Triple::linear_cosh();
    let r = robustness_sweep(&g, &k, &eps, &u0, 0.5, &triple, &IntegratorConfig::default()).unwrap();
    let t = start.elapsed();
    // Keep the stiffest leg for the invariant criteria.
    let stiff = cutoff(&g, &k, 1e-4).unwrap();
    let c = coupling(&g, &stiff).unwrap();
    let traj = evolve(&generator(&c, &triple).unwrap(), &u0, 0.5, &IntegratorConfig::default()).unwrap();
    runs.push(Run {
        label: "punctured eps=1e-4",
        traj,
        pi: c.pi().to_vec(),
        triple,
    });
    outcome(
        "7 robustness sweep",
        r.strictly_decreasing && r.decreases_by(2.0) && t < Duration::from_secs(300),
        format!(
            "gaps {:?}, ratios {:?} (each >= 2); {:.1} s (< 300 s)",
            r.gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>(),
            r.gap_ratios.iter().map(|g| format!("{g:.2}")).collect::<Vec<_>>(),
            secs(t)
        ),
    )
}

fn criterion_8() -> Outcome {
    let g = build_grid(-1.0, 1.0, 200).unwrap();
    let mask = Mask::Punctured { split: 0.0 };
    let triple = Triple::linear_cosh();
    let mut worst = 0.0_f64;
    for kernel in [
        fractional_kernel(&g, 0.75, mask).unwrap(),
        cutoff(&g, &fractional_kernel(&g, 0.6, mask).unwrap(), 1e-3).unwrap(),
    ] {
        let c = coupling(&g, &kernel).unwrap();
        let traj = evolve(&generator(&c, &triple).unwrap(), &asymmetric(&g), 0.5, &IntegratorConfig::default()).unwrap();
        let [left, right] = mask.components(&g).unwrap();
        for part in [left, right] {
            let mass = |u: &[f64]| -> f64 { part.iter().map(|&i| u[i] * g.pi()[i]).sum() };
            let m0 = mass(traj.density(0));
            for u in traj.densities() {
                worst = worst.max((mass(u) - m0).abs());
            }
        }
    }
    outcome(
        "8 component masses",
        worst <= 1e-12,
        format!("max component mass drift {worst:.2e} (<= 1e-12)"),
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let deltas = log_spaced(1e-3, 1e-1, 9);
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [0.6, 0.75, 0.9] {
        let r = density_gap_probe(s, 4096, &deltas).unwrap();
        let ok = (r.slope - r.expected_slope).abs() <= 0.1;
        pass &= ok;
        parts.push(format!(
            "s={s}: slope {:.3} vs {:.3} ±0.1 [{}]",
            r.slope,
            r.expected_slope,
            if ok { "ok" } else { "miss" }
        ));
    }
    let r = density_gap_probe(0.25, 4096, &deltas).unwrap();
    let ok = r.smallest_pair_change <= 0.1;
    pass &= ok;
    parts.push(format!(
        "s=0.25: change {:.2}% (<= 10%) [{}]",
        100.0 * r.smallest_pair_change,
        if ok { "ok" } else { "miss" }
    ));
    let t = start.elapsed();
    pass &= t < Duration::from_secs(120);
    outcome("9 density-gap probe", pass, format!("{}; {:.1} s (< 120 s)", parts.join("; "), secs(t)))
}

fn criterion_10() -> Outcome {
    let triple = Triple::linear_cosh();
    let (mut jumps, mut excess, mut taming_gap, mut edb) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0_f64);
    for m in 2..=4 {
        let base = build_grid(0.0, 1.0, m).unwrap();
        let k = fractional_kernel(&base, 0.6, Mask::Full).unwrap();
        for n in 1..=4 {
            let lift = build_lift(&base, &k, n).unwrap();
            let r = key_estimate_check(&lift).unwrap();
            jumps += r.jumps_checked;
            excess = excess.max(r.max_excess);
            taming_gap = taming_gap.max(r.lifted_taming - r.base_taming);
            edb = edb.max(lifted_run(&lift, &triple, 0.5, &IntegratorConfig::default()).unwrap().edb_relative);
        }
    }
    // The two-atom, two-particle jump from (d0 + d1)/2 to d1 attains d^2/N.
    let d = Array2::from_shape_vec((2, 2), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
    let equality = (w2_squared_exact(&[0.5, 0.5], &[0.0, 1.0], &d).unwrap() - 0.5).abs();
    outcome(
        "10 configuration-space lift",
        excess <= 1e-12 && taming_gap <= 1e-12 && edb <= 1e-6 && equality <= 1e-15,
        format!(
            "{jumps} jumps, max W2^2 - d^2/N {excess:.2e} (<= 1e-12); lifted - base taming {taming_gap:.2e} (<= 1e-12); lifted EDB {edb:.2e} (<= 1e-6)"
        ),
    )
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize, nonneg: bool) -> SignedMeasurePair {
    let v: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else if nonneg {
                rng.random_range(0.0..2.0)
            } else {
                rng.random_range(-2.0..2.0)
            }
        })
        .collect();
    jordan_from_setfunction(&v).unwrap()
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let action = ActionIntegrand {
        pair: Triple::linear_cosh().pair,
        flux: Triple::linear_cosh().flux,
    };
    let (sq, abs) = (SquaredNorm { dim: 2 }, AbsNorm { dim: 2 });
    let mut worst = f64::NEG_INFINITY;
    let mut checks = 0usize;
    for instance in 0..1000 {
        let ups: &dyn ConvexIntegrand = match instance % 3 {
            0 => &sq,
            1 => &abs,
            _ => &action,
        };
        let mu: Vec<SignedMeasurePair> = if ups.dim() == 3 {
            vec![random_pair(&mut rng, 8, true), random_pair(&mut rng, 8, true), random_pair(&mut rng, 8, false)]
        } else {
            vec![random_pair(&mut rng, 8, false), random_pair(&mut rng, 8, false)]
        };
        let nu: Vec<f64> = (0..8)
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..2.0) })
            .collect();
        let nu = PosMeasure::new(nu).unwrap();
        for mask in 0u32..256 {
            let b: Vec<usize> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
            let (lhs, rhs) = jensen_sides(&mu, &nu, ups, &b).unwrap();
            checks += 1;
            if rhs == f64::INFINITY {
                continue;
            }
            worst = worst.max((lhs - rhs) / rhs.abs().max(1.0));
        }
    }
    outcome(
        "11 Jensen inequality",
        worst <= 1e-12,
        format!("{checks} subset checks, max scaled violation {worst:.2e} (<= 1e-12)"),
    )
}

fn criterion_12() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 8;
    let mut eval_mismatch = 0usize;
    let mut singular_violations = 0usize;
    for _ in 0..10_000 {
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut mu = jordan_from_setfunction(&values).unwrap();
        let set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        let direct: f64 = set.iter().map(|&i| values[i]).sum();
        if mu.evaluate(&set) != direct {
            eval_mismatch += 1;
        }
        for _ in 0..8 {
            mu = match rng.random_range(0..5) {
                0 => mu.add(&random_pair(&mut rng, n, false)).unwrap(),
                1 => mu.negate(),
                2 => {
                    let f: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                    mu.scale_by_function(&f).unwrap()
                }
                3 => {
                    let s: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
                    mu.restrict(&s)
                }
                _ => {
                    let g: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { 1.0 }).collect();
                    mu.lebesgue_decompose(&PosMeasure::new(g).unwrap()).unwrap().1
                }
            };
            if !mu.is_mutually_singular() {
                singular_violations += 1;
            }
        }
    }
    outcome(
        "12 signed-measure round trips",
        eval_mismatch == 0 && singular_violations == 0,
        format!("evaluation mismatches {eval_mismatch} (== 0); singularity violations {singular_violations} (== 0) over 10^4 sequences"),
    )
}

fn criterion_13() -> Outcome {
    let g = build_grid(-1.0, 1.0, 200).unwrap();
    let base = fractional_kernel(&g, 0.75, Mask::Punctured { split: 0.0 }).unwrap();
    let k = cutoff(&g, &base, 1e-3).unwrap();
    let c = coupling(&g, &k).unwrap();
    let triple = Triple::linear_cosh();
    // Defects converge at fourth order in the checkpoint spacing; 1024 per
    // unit time resolves the initial transient of the discontinuous profile.
    let cfg = IntegratorConfig {
        checkpoints: Some(512),
        ..Default::default()
    };
    let traj = evolve(&generator(&c, &triple).unwrap(), &asymmetric(&g), 0.5, &cfg).unwrap();
    let r = ledger(&traj, &triple, &g, &k, &c, &LedgerOptions::default()).unwrap();
    let has_step = r.continuity.iter().any(|c| c.reflecting_only);
    outcome(
        "13 characterization (RCE)",
        has_step && r.rce_residual <= 1e-8,
        format!(
            "{:?} RCE residual {:.2e} (<= 1e-8) over {} test functions incl. step: {has_step}; verdict {}",
            r.continuity.iter().map(|c| format!("{}={:.1e}", c.label, c.max_interval)).collect::<Vec<_>>(),
            r.rce_residual,
            r.continuity.len(),
            r.verdict
        ),
    )
}

fn criterion_14() -> Outcome {
    let (g, _, c) = grid_s06_cutoff(100);
    let r = uniqueness_probe(&c, &Triple::linear_cosh(), &cosine(&g), 0.5, None, Some(5e-6)).unwrap();
    outcome(
        "14 uniqueness probe",
        r.max_linf_gap <= 1e-5,
        format!("Euler (dt {:.1e}) vs expm max L-inf gap {:.2e} (<= 1e-5)", r.euler_dt, r.max_linf_gap),
    )
}

fn main() {
    let mut runs = Vec::new();
    let outcomes = vec![
        criterion_1(),
        criterion_2(&mut runs),
        criterion_3(&mut runs),
        criterion_7(&mut runs),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
        criterion_13(),
        criterion_14(),
    ];
    let mut outcomes = outcomes;
    outcomes.insert(3, criterion_4(&runs[..2]));
    outcomes.insert(4, criterion_5(&runs));
    outcomes.insert(5, criterion_6(&runs));
    let mut failed = 0;
    for o in &outcomes {
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
