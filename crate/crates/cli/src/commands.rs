use crate::config::{self, KernelSpec, RunConfig, Setup};
use crate::error::CliError;
use crate::output::{num, Artifacts};
use jumpflow::densities::Triple;
use jumpflow::evolution::{
    evolve, generator, read_density_csv, read_flux_csv, write_density_csv, write_flux_csv, FluxRecord, IntegratorConfig,
    Method, Trajectory,
};
use jumpflow::experiments::{
    build_lift, density_gap_probe, key_estimate_check, lifted_run, log_spaced, robustness_sweep, KeyEstimateReport,
    LiftedRunReport,
};
use jumpflow::experiments::probe::{DEFAULT_DELTA_COUNT, DEFAULT_DELTA_RANGE};
use jumpflow::ledger::{ledger, LedgerOptions, LedgerReport};
use jumpflow::space_kernel::{build_grid, coupling, fractional_kernel, Mask};
use serde::Serialize;
use std::fmt::Write as _;
use std::io::BufReader;
use std::path::{Path, PathBuf};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub checkpoints: Option<usize>,
    pub method: Option<Method>,
}

const DEFAULT_SWEEP_EPS: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

/// A finished command: the files it wants written and its stdout summary.
pub struct Outcome {
    pub artifacts: Artifacts,
    pub out_dir: PathBuf,
    pub summary: String,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn envelope<T: Serialize>(body: &T) -> Envelope<'_, T> {
    Envelope {
        schema: config::SCHEMA_VERSION,
        body,
    }
}

struct Loaded {
    cfg: RunConfig,
    setup: Setup,
    integrator: IntegratorConfig,
    out_dir: PathBuf,
}

fn load(path: &Path, ov: &Overrides) -> Result<Loaded, CliError> {
    let mut cfg = config::load(path)?;
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    let mut integrator = cfg.integrator;
    if let Some(k) = ov.checkpoints {
        integrator.checkpoints = Some(k);
    }
    if let Some(m) = ov.method {
        integrator.method = m;
    }
    integrator
        .validate(cfg.t_final)
        .map_err(|e| CliError::Schema(format!("`integrator`: {e}")))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let setup = cfg.setup(base)?;
    let out_dir = ov
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(Loaded {
        cfg,
        setup,
        integrator,
        out_dir,
    })
}

fn options(cfg: &RunConfig) -> LedgerOptions {
    LedgerOptions {
        seed: cfg.seed,
        ..Default::default()
    }
}

fn ledger_json(report: &LedgerReport) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(report).map_err(|e| CliError::Io(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn ledger_table(report: &LedgerReport) -> String {
    let mut s = String::new();
    let rows = [
        ("triple", report.triple.clone()),
        ("states", report.n.to_string()),
        ("checkpoints", report.checkpoints.to_string()),
        ("T", report.t_final.to_string()),
        ("EDB residual (rel)", format!("{:.3e}", report.edb.relative)),
        ("chain rule residual", format!("{:.3e}", report.chain_rule.max_pairwise)),
        ("CE residual", format!("{:.3e}", report.ce_residual)),
        ("RCE residual", format!("{:.3e}", report.rce_residual)),
        ("mass drift (rel)", format!("{:.3e}", report.invariants.mass_drift_rel)),
        ("invariants", if report.invariants.all_ok() { "ok" } else { "violated" }.to_string()),
        ("verdict", report.verdict.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<22}{v}");
    }
    s
}

pub fn run(config: &Path, ov: &Overrides) -> Result<Outcome, CliError> {
    let Loaded {
        cfg,
        setup,
        integrator,
        out_dir,
    } = load(config, ov)?;
    let c = coupling(&setup.space, &setup.kernel)?;
    let traj = evolve(&generator(&c, &setup.triple)?, &setup.u0, cfg.t_final, &integrator)?;
    let report = ledger(&traj, &setup.triple, &setup.space, &setup.kernel, &c, &options(&cfg))?;

    let stem = format!("run_{}", cfg.tag());
    let mut artifacts = Artifacts::default();
    let mut csv = Vec::new();
    write_density_csv(&traj, &mut csv)?;
    artifacts.add(format!("{stem}.csv"), csv);
    if cfg.write_flux {
        let mut flux = Vec::new();
        write_flux_csv(&traj, &c, &mut flux)?;
        artifacts.add(format!("{stem}_flux.csv"), flux);
    }
    artifacts.add(format!("{stem}.json"), ledger_json(&report)?);
    Ok(Outcome {
        artifacts,
        out_dir,
        summary: ledger_table(&report),
    })
}

pub fn verify(config: &Path, trajectory: &Path, flux: Option<&Path>, ov: &Overrides) -> Result<Outcome, CliError> {
    let Loaded {
        cfg,
        setup,
        integrator,
        out_dir,
    } = load(config, ov)?;
    let open = |p: &Path| {
        std::fs::File::open(p)
            .map(BufReader::new)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
    };
    let (times, densities) = read_density_csv(open(trajectory)?)?;
    let n = setup.space.n();
    if densities[0].len() != n {
        return Err(CliError::Schema(format!(
            "trajectory has {} states but the config describes {n}",
            densities[0].len()
        )));
    }
    // A file cut at a line boundary still parses; the checkpoint grid exposes it.
    let expected = integrator.times(cfg.t_final);
    if times != expected {
        return Err(CliError::Schema(format!(
            "trajectory has {} checkpoints ending at {}; the config expects {} ending at {}",
            times.len(),
            times.last().copied().unwrap_or(f64::NAN),
            expected.len(),
            cfg.t_final
        )));
    }
    let record = match flux {
        Some(p) => FluxRecord::Stored(read_flux_csv(open(p)?, &times, n)?),
        None => FluxRecord::Derived {
            triple: setup.triple,
            scale: vec![1.0; times.len()],
        },
    };
    let traj = Trajectory::new(times, densities, record)?;
    let c = coupling(&setup.space, &setup.kernel)?;
    let report = ledger(&traj, &setup.triple, &setup.space, &setup.kernel, &c, &options(&cfg))?;
    let mut artifacts = Artifacts::default();
    artifacts.add(format!("verify_{}.json", cfg.tag()), ledger_json(&report)?);
    Ok(Outcome {
        artifacts,
        out_dir,
        summary: ledger_table(&report),
    })
}

pub fn sweep(config: &Path, ov: &Overrides) -> Result<Outcome, CliError> {
    let Loaded {
        cfg,
        setup,
        integrator,
        out_dir,
    } = load(config, ov)?;
    let has_cutoff = match &cfg.kernel {
        KernelSpec::Fractional { cutoff, .. } | KernelSpec::Matrix { cutoff, .. } => cutoff.is_some(),
    };
    if has_cutoff {
        return Err(CliError::Schema("`kernel.cutoff`: the sweep applies its own cutoffs; use `sweep.eps`".into()));
    }
    let eps = cfg.sweep.as_ref().map(|s| s.eps.clone()).unwrap_or_else(|| DEFAULT_SWEEP_EPS.to_vec());
    let r = robustness_sweep(
        &setup.space,
        &setup.kernel,
        &eps,
        &setup.u0,
        cfg.t_final,
        &setup.triple,
        &integrator,
    )
    .map_err(|e| CliError::from_core(e).in_field("sweep.eps"))?;

    let mut csv = String::from("eps,edb_relative,entropy_final,gap_to_next,gap_ratio\n");
    let mut table = format!("{:<12}{:<14}{:<14}{:<14}{}\n", "eps", "EDB (rel)", "entropy(T)", "L1 gap", "ratio");
    for (k, leg) in r.legs.iter().enumerate() {
        let gap = r.gaps.get(k).copied();
        let ratio = r.gap_ratios.get(k).copied();
        let entropy = *leg.entropy.last().expect("nonempty leg");
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(leg.eps),
            num(leg.edb_relative),
            num(entropy),
            opt(gap),
            opt(ratio)
        );
        let show = |x: Option<f64>, p: usize| x.map(|v| format!("{v:.p$e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            table,
            "{:<12}{:<14}{:<14}{:<14}{}",
            format!("{:.0e}", leg.eps),
            format!("{:.3e}", leg.edb_relative),
            format!("{entropy:.6}"),
            show(gap, 3),
            show(ratio, 2)
        );
    }
    let _ = writeln!(table, "gaps strictly decreasing: {}", r.strictly_decreasing);

    let stem = format!("sweep_{}", cfg.tag());
    let mut artifacts = Artifacts::default();
    artifacts.add(format!("{stem}.csv"), csv.into_bytes());
    artifacts.add_json(format!("{stem}.json"), &envelope(&r))?;
    Ok(Outcome {
        artifacts,
        out_dir,
        summary: table,
    })
}

pub fn probe(s: f64, n: usize, deltas: Option<Vec<f64>>, ov: &Overrides) -> Result<Outcome, CliError> {
    let deltas = deltas.unwrap_or_else(|| log_spaced(DEFAULT_DELTA_RANGE.0, DEFAULT_DELTA_RANGE.1, DEFAULT_DELTA_COUNT));
    let r = density_gap_probe(s, n, &deltas)?;
    let mut csv = String::from("delta,seminorm\n");
    let mut table = format!("{:<14}{}\n", "delta", "seminorm");
    for (d, v) in r.deltas.iter().zip(&r.seminorms) {
        let _ = writeln!(csv, "{},{}", num(*d), num(*v));
        let _ = writeln!(table, "{:<14}{:.6e}", format!("{d:.3e}"), v);
    }
    let _ = writeln!(table, "fitted slope {:.4} (expected {:.4})", r.slope, r.expected_slope);
    let _ = writeln!(table, "change between the two smallest deltas {:.3e}", r.smallest_pair_change);
    let _ = writeln!(table, "step seminorm under the midpoint puncture {:.6e}", r.punctured_step_seminorm);

    let stem = format!("probe_s{s}_n{n}");
    let mut artifacts = Artifacts::default();
    artifacts.add(format!("{stem}.csv"), csv.into_bytes());
    artifacts.add_json(format!("{stem}.json"), &envelope(&r))?;
    Ok(Outcome {
        artifacts,
        out_dir: ov.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        summary: table,
    })
}

#[derive(Serialize)]
struct LiftSummary {
    base_atoms: usize,
    particles: usize,
    s: f64,
    triple: String,
    t_final: f64,
    configurations: usize,
    key_estimate: KeyEstimateReport,
    run: LiftedRunReport,
}

pub struct LiftArgs {
    pub m: usize,
    pub particles: usize,
    pub s: f64,
    pub triple: String,
    pub t_final: f64,
}

pub fn lift(args: &LiftArgs, ov: &Overrides) -> Result<Outcome, CliError> {
    let triple = Triple::from_name(&args.triple).map_err(|e| CliError::from_core(e).in_field("--triple"))?;
    let base = build_grid(0.0, 1.0, args.m).map_err(|e| CliError::from_core(e).in_field("--m"))?;
    let k = fractional_kernel(&base, args.s, Mask::Full).map_err(|e| CliError::from_core(e).in_field("--s"))?;
    let lift = build_lift(&base, &k, args.particles)?;
    let key = key_estimate_check(&lift)?;
    let mut integrator = IntegratorConfig::default();
    integrator.checkpoints = ov.checkpoints.or(integrator.checkpoints);
    if let Some(m) = ov.method {
        integrator.method = m;
    }
    let run = lifted_run(&lift, &triple, args.t_final, &integrator)?;

    let m = args.m;
    let mut csv = String::from("index");
    for x in 0..m {
        let _ = write!(csv, ",c_{x}");
    }
    csv.push_str(",pi_hat\n");
    for (idx, counts) in lift.configurations.iter().enumerate() {
        let _ = write!(csv, "{idx}");
        for c in counts {
            let _ = write!(csv, ",{c}");
        }
        let _ = writeln!(csv, ",{}", num(lift.space.pi()[idx]));
    }
    let summary = LiftSummary {
        base_atoms: m,
        particles: args.particles,
        s: args.s,
        triple: triple.to_string(),
        t_final: args.t_final,
        configurations: lift.configurations.len(),
        key_estimate: key,
        run,
    };
    let mut table = String::new();
    let rows = [
        ("configurations", summary.configurations.to_string()),
        ("jumps checked", summary.key_estimate.jumps_checked.to_string()),
        ("max W2^2 - d^2/N", format!("{:.3e}", summary.key_estimate.max_excess)),
        ("equality cases", summary.key_estimate.equalities.to_string()),
        ("base taming", format!("{:.6e}", summary.key_estimate.base_taming)),
        ("lifted taming", format!("{:.6e}", summary.key_estimate.lifted_taming)),
        ("key estimate", if summary.key_estimate.passed { "pass" } else { "fail" }.to_string()),
        ("lifted mass drift", format!("{:.3e}", summary.run.mass_drift_rel)),
        ("lifted EDB (rel)", format!("{:.3e}", summary.run.edb_relative)),
    ];
    for (k, v) in rows {
        let _ = writeln!(table, "{k:<20}{v}");
    }

    let stem = format!("lift_m{m}_N{}_s{}", args.particles, args.s);
    let mut artifacts = Artifacts::default();
    artifacts.add(format!("{stem}.csv"), csv.into_bytes());
    artifacts.add_json(format!("{stem}.json"), &envelope(&summary))?;
    Ok(Outcome {
        artifacts,
        out_dir: ov.out.clone().unwrap_or_else(|| PathBuf::from(".")),
        summary: table,
    })
}
