//! Time integration of the linear forward Kolmogorov equation and the
//! trajectory type consumed by the ledger.
//!
//! Only compatible triples are integrated: then `F(u, v) = v - u` and the
//! evolution is `u' = Qu` with `(Qu)_i = sum_j (u_j - u_i) theta_ij / pi_i`.
//! The matrix exponential is the reference integrator; explicit Euler is a
//! cross-check.

use crate::densities::{compat_check, Triple};
use crate::error::{invalid, Error, Result};
use crate::functionals::TestFunction;
use crate::quadrature;
use crate::space_kernel::Coupling;
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// Residual above which a triple is treated as incompatible.
pub const COMPAT_TOL: f64 = 1e-10;

/// Default checkpoint density (intervals per unit time).
pub const CHECKPOINTS_PER_UNIT_TIME: f64 = 512.0;

/// The generator `Q` of the jump process, as a dense matrix.
#[derive(Debug, Clone)]
pub struct Generator {
    q: Array2<f64>,
    pi: Vec<f64>,
    triple: Triple,
    max_exit_rate: f64,
}

/// Builds `Q` from a coupling; refuses triples that fail the compatibility
/// check, since their evolution is not linear.
pub fn generator(coupling: &Coupling, triple: &Triple) -> Result<Generator> {
    let residual = compat_check(triple, 2000, 0);
    if !(residual <= COMPAT_TOL) {
        return Err(Error::IncompatibleTriple { residual });
    }
    let n = coupling.n();
    let mut q = coupling.rates();
    for i in 0..n {
        let exit: f64 = q.row(i).sum();
        q[[i, i]] = -exit;
    }
    Ok(Generator {
        q,
        pi: coupling.pi().to_vec(),
        triple: *triple,
        max_exit_rate: coupling.max_exit_rate(),
    })
}

impl Generator {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn triple(&self) -> &Triple {
        &self.triple
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.max_exit_rate
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        off_diagonal_increment(&self.q, u, &mut out);
        out
    }
}

/// `out_i = sum_{j != i} m_ij (u_j - u_i)`. For a generator this is `Qu`, and
/// for a transition matrix `P` it is `(P - I)u`; either way constants map to
/// zero exactly, not just up to rounding.
fn off_diagonal_increment(m: &Array2<f64>, u: &[f64], out: &mut [f64]) {
    for (i, row) in m.outer_iter().enumerate() {
        let ui = u[i];
        let mut acc = 0.0;
        for (j, (&mij, &uj)) in row.iter().zip(u).enumerate() {
            if j != i {
                acc += mij * (uj - ui);
            }
        }
        out[i] = acc;
    }
}

/// `exp(a)` for a generator matrix (nonnegative off-diagonal, zero row sums
/// up to rounding). Uses the uniformized Taylor series, whose terms are all
/// nonnegative, with scaling and squaring.
pub fn expm_generator(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let diag_max = a.diag().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mut squarings = 0;
    let mut scale = 1.0;
    while diag_max * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let shift = diag_max * scale;
    let mut p = a * scale;
    for i in 0..n {
        p[[i, i]] += shift;
    }
    let eye = Array2::<f64>::eye(n);
    let mut s = eye.clone();
    for k in (1..=18).rev() {
        s = &eye + &(p.dot(&s) / k as f64);
    }
    s *= (-shift).exp();
    for _ in 0..squarings {
        s = s.dot(&s);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExplicitEuler,
    MatrixExponential,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit_euler" | "euler" => Ok(Self::ExplicitEuler),
            "matrix_exponential" | "expm" => Ok(Self::MatrixExponential),
            other => Err(invalid(format!(
                "unknown method {other:?}; expected explicit_euler or matrix_exponential"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Number of checkpoint intervals; `ceil(512 T)` when absent.
    pub checkpoints: Option<usize>,
    /// Checkpoints sit at `T (k/K)^grading`.
    pub grading: f64,
    /// Euler step; the largest stable step when absent.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::MatrixExponential,
            checkpoints: None,
            grading: 1.0,
            dt: None,
            cfl_safety: 0.9,
        }
    }
}

impl IntegratorConfig {
    pub fn interval_count(&self, t_final: f64) -> usize {
        self.checkpoints
            .unwrap_or_else(|| (CHECKPOINTS_PER_UNIT_TIME * t_final).ceil() as usize)
            .max(2)
    }

    /// Checkpoint times, with `t_0 = 0` and `t_K = T` exactly.
    pub fn times(&self, t_final: f64) -> Vec<f64> {
        let k = self.interval_count(t_final);
        (0..=k)
            .map(|i| {
                if i == k {
                    t_final
                } else if self.grading == 1.0 {
                    i as f64 * t_final / k as f64
                } else {
                    t_final * (i as f64 / k as f64).powf(self.grading)
                }
            })
            .collect()
    }

    /// Rejects bad parameters before any work is done.
    pub fn validate(&self, t_final: f64) -> Result<()> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(invalid(format!("final time {t_final} must be positive and finite")));
        }
        if !(self.grading.is_finite() && self.grading >= 1.0) {
            return Err(invalid("checkpoint grading must be at least 1"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(invalid("CFL safety factor must lie in (0, 1]"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(invalid("dt must be positive"));
            }
        }
        if self.checkpoints == Some(0) {
            return Err(invalid("at least one checkpoint interval is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorMeta {
    pub method: Option<Method>,
    pub grading: f64,
    /// Euler steps, or matrix-vector products for the exponential.
    pub steps: usize,
    pub dt: Option<f64>,
    pub expm_evaluations: usize,
}

impl IntegratorMeta {
    fn imported() -> Self {
        Self {
            method: None,
            grading: 1.0,
            steps: 0,
            dt: None,
            expm_evaluations: 0,
        }
    }
}

/// How fluxes are attached to a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum FluxRecord {
    Missing,
    /// `w_ij = -F(u_i, u_j) * scale[k]` at snapshot `k`.
    Derived { triple: Triple, scale: Vec<f64> },
    Stored(Vec<Array2<f64>>),
}

/// Density and flux snapshots on a checkpoint grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    densities: Vec<Vec<f64>>,
    flux: FluxRecord,
    meta: IntegratorMeta,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, densities: Vec<Vec<f64>>, flux: FluxRecord) -> Result<Self> {
        Self::with_meta(times, densities, flux, IntegratorMeta::imported())
    }

    fn with_meta(times: Vec<f64>, densities: Vec<Vec<f64>>, flux: FluxRecord, meta: IntegratorMeta) -> Result<Self> {
        if times.is_empty() || times.len() != densities.len() {
            return Err(invalid("times and density snapshots must be nonempty and of equal length"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("times must be finite and strictly increasing"));
        }
        let n = densities[0].len();
        for (k, u) in densities.iter().enumerate() {
            if u.len() != n {
                return Err(invalid("density snapshots differ in size"));
            }
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { t: times[k] });
            }
            if u.iter().any(|&x| x < 0.0) {
                return Err(invalid(format!("negative density at t = {}", times[k])));
            }
        }
        match &flux {
            FluxRecord::Derived { scale, .. } if scale.len() != times.len() => {
                return Err(invalid("flux scale has the wrong length"));
            }
            FluxRecord::Stored(ws) if ws.len() != times.len() || ws.iter().any(|w| w.dim() != (n, n)) => {
                return Err(invalid("stored fluxes do not match the snapshots"));
            }
            _ => {}
        }
        Ok(Self {
            times,
            densities,
            flux,
            meta,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn densities(&self) -> &[Vec<f64>] {
        &self.densities
    }

    pub fn density(&self, k: usize) -> &[f64] {
        &self.densities[k]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.densities[0].len()
    }

    pub fn t_final(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn flux(&self) -> &FluxRecord {
        &self.flux
    }

    pub fn meta(&self) -> &IntegratorMeta {
        &self.meta
    }

    pub fn has_flux(&self) -> bool {
        !matches!(self.flux, FluxRecord::Missing)
    }

    /// Flux edge density at snapshot `k`.
    pub fn flux_at(&self, k: usize) -> Option<Array2<f64>> {
        match &self.flux {
            FluxRecord::Missing => None,
            FluxRecord::Derived { triple, scale } => Some(flux_from_density(&self.densities[k], triple) * scale[k]),
            FluxRecord::Stored(ws) => Some(ws[k].clone()),
        }
    }

    /// Same snapshots with a different flux record.
    pub fn with_flux(&self, flux: FluxRecord) -> Result<Self> {
        Self::with_meta(self.times.clone(), self.densities.clone(), flux, self.meta.clone())
    }

    /// Mass `sum u pi` of every snapshot.
    pub fn masses(&self, pi: &[f64]) -> Vec<f64> {
        self.densities
            .iter()
            .map(|u| u.iter().zip(pi).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn stored_fluxes(&self) -> Option<Vec<Array2<f64>>> {
        (0..self.len()).map(|k| self.flux_at(k)).collect()
    }
}

/// Integrates `u' = Qu` from `u0` over `[0, t_final]`.
pub fn evolve(gen: &Generator, u0: &[f64], t_final: f64, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate(t_final)?;
    if u0.len() != gen.n() {
        return Err(invalid("initial density has the wrong size"));
    }
    if u0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("initial density must be finite and nonnegative"));
    }
    let times = cfg.times(t_final);
    let mut densities = Vec::with_capacity(times.len());
    densities.push(u0.to_vec());
    let mut u = u0.to_vec();
    let mut du = vec![0.0; u.len()];
    let mut meta = IntegratorMeta {
        method: Some(cfg.method),
        grading: cfg.grading,
        steps: 0,
        dt: None,
        expm_evaluations: 0,
    };
    match cfg.method {
        Method::MatrixExponential => {
            let mut cache: HashMap<u64, Array2<f64>> = HashMap::new();
            for w in times.windows(2) {
                let h = w[1] - w[0];
                let e = cache.entry(h.to_bits()).or_insert_with(|| {
                    meta.expm_evaluations += 1;
                    expm_generator(&(gen.matrix() * h))
                });
                off_diagonal_increment(e, &u, &mut du);
                for (x, d) in u.iter_mut().zip(&du) {
                    *x += d;
                }
                meta.steps += 1;
                push_checked(&mut densities, &u, w[1])?;
            }
        }
        Method::ExplicitEuler => {
            let rate = gen.max_exit_rate();
            let limit = if rate > 0.0 { cfg.cfl_safety / rate } else { f64::INFINITY };
            let dt = cfg.dt.unwrap_or(limit);
            if dt > limit {
                return Err(Error::Cfl { dt, limit });
            }
            meta.dt = Some(dt);
            for w in times.windows(2) {
                let span = w[1] - w[0];
                let m = if dt.is_finite() { (span / dt).ceil().max(1.0) as usize } else { 1 };
                let h = span / m as f64;
                for _ in 0..m {
                    off_diagonal_increment(gen.matrix(), &u, &mut du);
                    for (x, d) in u.iter_mut().zip(&du) {
                        *x += h * d;
                    }
                }
                meta.steps += m;
                push_checked(&mut densities, &u, w[1])?;
            }
        }
    }
    let scale = vec![1.0; times.len()];
    let flux = FluxRecord::Derived {
        triple: gen.triple,
        scale,
    };
    Trajectory::with_meta(times, densities, flux, meta)
}

fn push_checked(densities: &mut Vec<Vec<f64>>, u: &[f64], t: f64) -> Result<()> {
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    // Rounding can leave -1e-300 where an atom is empty; the exact solution is nonnegative.
    densities.push(u.iter().map(|&x| x.max(0.0)).collect());
    Ok(())
}

/// `w_ij = -F(u_i, u_j)`, zero on the diagonal.
pub fn flux_from_density(u: &[f64], triple: &Triple) -> Array2<f64> {
    let n = u.len();
    Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { -triple.f(u[i], u[j]) })
}

/// Continuity-equation defects of a trajectory against one test function.
#[derive(Debug, Clone, Serialize)]
pub struct ContinuityReport {
    pub label: String,
    /// `D_k = <phi, u_k - u_0>_pi - ∫_0^{t_k} 1/2 sum (phi_j - phi_i) w theta`.
    #[serde(with = "crate::extreal::vec")]
    pub defects: Vec<f64>,
    /// `max_{s<t} |D_t - D_s|`, the worst interval defect.
    #[serde(with = "crate::extreal")]
    pub max_interval: f64,
}

/// Edge pairing `1/2 sum_ij (phi_j - phi_i) w_ij theta_ij`.
pub fn edge_pairing(phi: &[f64], w: &Array2<f64>, theta: &Array2<f64>) -> f64 {
    let n = phi.len();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let t = theta[[i, j]];
            if t != 0.0 {
                row += (phi[j] - phi[i]) * w[[i, j]] * t;
            }
        }
        total += row;
    }
    0.5 * total
}

pub fn continuity_residual(traj: &Trajectory, phi: &TestFunction, coupling: &Coupling) -> Result<ContinuityReport> {
    if !traj.has_flux() {
        return Err(Error::MissingFlux);
    }
    if phi.values.len() != traj.n() || coupling.n() != traj.n() {
        return Err(invalid("test function, coupling and trajectory differ in size"));
    }
    let pi = coupling.pi();
    let pairing = |u: &[f64]| -> f64 { u.iter().zip(pi).zip(&phi.values).map(|((a, p), f)| a * p * f).sum() };
    let a0 = pairing(traj.density(0));
    let g: Vec<f64> = (0..traj.len())
        .map(|k| edge_pairing(&phi.values, &traj.flux_at(k).expect("flux present"), coupling.theta()))
        .collect();
    let cum = quadrature::cumulative(traj.times(), &g);
    let defects: Vec<f64> = (0..traj.len())
        .map(|k| pairing(traj.density(k)) - a0 - cum.values[k])
        .collect();
    let hi = defects.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = defects.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_interval = if defects.iter().any(|d| d.is_nan()) { f64::NAN } else { hi - lo };
    Ok(ContinuityReport {
        label: phi.label.clone(),
        defects,
        max_interval,
    })
}

/// Runs `first` then `second`; the second leg's clock is shifted to start at
/// the end of the first.
pub fn concatenate(first: &Trajectory, second: &Trajectory) -> Result<Trajectory> {
    let end = first.density(first.len() - 1);
    let start = second.density(0);
    if end.len() != start.len() {
        return Err(invalid("trajectories live on different spaces"));
    }
    let gap = end.iter().zip(start).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    if gap > 1e-12 * end.iter().fold(1.0_f64, |m, a| m.max(a.abs())) {
        return Err(Error::EndpointMismatch { gap });
    }
    let offset = first.t_final() - second.times[0];
    let mut times = first.times.clone();
    times.extend(second.times[1..].iter().map(|t| t + offset));
    let mut densities = first.densities.clone();
    densities.extend(second.densities[1..].iter().cloned());
    let flux = match (&first.flux, &second.flux) {
        (FluxRecord::Missing, _) | (_, FluxRecord::Missing) => FluxRecord::Missing,
        (FluxRecord::Derived { triple: a, scale: s1 }, FluxRecord::Derived { triple: b, scale: s2 }) if a == b => {
            let mut scale = s1.clone();
            scale.extend_from_slice(&s2[1..]);
            FluxRecord::Derived { triple: *a, scale }
        }
        _ => {
            let mut ws = first.stored_fluxes().expect("flux present");
            ws.extend(second.stored_fluxes().expect("flux present").into_iter().skip(1));
            FluxRecord::Stored(ws)
        }
    };
    Trajectory::with_meta(times, densities, flux, first.meta.clone())
}

/// A strictly increasing change of clock `t -> m(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeMap {
    Identity,
    Linear { slope: f64 },
    /// Knots `(t, m(t))`, strictly increasing in both coordinates and covering
    /// the trajectory's time range.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

impl TimeMap {
    /// `(m(t), m'(t))`, using the slope of the segment to the right of a knot
    /// except at the last one.
    fn eval(&self, t: f64) -> Result<(f64, f64)> {
        match self {
            Self::Identity => Ok((t, 1.0)),
            Self::Linear { slope } => Ok((slope * t, *slope)),
            Self::PiecewiseLinear { knots } => {
                let seg = knots
                    .windows(2)
                    .position(|w| t >= w[0][0] && t < w[1][0])
                    .or_else(|| (knots.len() >= 2 && t == knots[knots.len() - 1][0]).then(|| knots.len() - 2))
                    .ok_or_else(|| invalid(format!("time {t} lies outside the time map")))?;
                let (a, b) = (knots[seg], knots[seg + 1]);
                let slope = (b[1] - a[1]) / (b[0] - a[0]);
                Ok((a[1] + slope * (t - a[0]), slope))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Identity => Ok(()),
            Self::Linear { slope } if slope.is_finite() && *slope > 0.0 => Ok(()),
            Self::Linear { .. } => Err(invalid("time map slope must be positive")),
            Self::PiecewiseLinear { knots } => {
                let ok = knots.len() >= 2
                    && knots.iter().all(|k| k[0].is_finite() && k[1].is_finite())
                    && knots.windows(2).all(|w| w[1][0] > w[0][0] && w[1][1] > w[0][1]);
                if ok {
                    Ok(())
                } else {
                    Err(invalid("time map knots must be strictly increasing"))
                }
            }
        }
    }
}

/// Reparametrizes time: snapshot `k` moves to `m(t_k)` and its flux is
/// divided by `m'(t_k)`.
pub fn rescale_time(traj: &Trajectory, map: &TimeMap) -> Result<Trajectory> {
    map.validate()?;
    let mut times = Vec::with_capacity(traj.len());
    let mut inv_slope = Vec::with_capacity(traj.len());
    for &t in &traj.times {
        let (m, dm) = map.eval(t)?;
        times.push(m);
        inv_slope.push(1.0 / dm);
    }
    let flux = match &traj.flux {
        FluxRecord::Missing => FluxRecord::Missing,
        FluxRecord::Derived { triple, scale } => FluxRecord::Derived {
            triple: *triple,
            scale: scale.iter().zip(&inv_slope).map(|(s, r)| s * r).collect(),
        },
        FluxRecord::Stored(ws) => FluxRecord::Stored(ws.iter().zip(&inv_slope).map(|(w, r)| w * *r).collect()),
    };
    Trajectory::with_meta(times, traj.densities.clone(), flux, traj.meta.clone())
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_num(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Schema(format!("line {line}: {s:?} is not a number")))
}

/// Writes `t,u_0,...,u_{n-1}` rows.
pub fn write_density_csv(traj: &Trajectory, mut out: impl Write) -> Result<()> {
    let mut header = String::from("t");
    for i in 0..traj.n() {
        header.push_str(&format!(",u_{i}"));
    }
    writeln!(out, "{header}")?;
    for (t, u) in traj.times.iter().zip(&traj.densities) {
        let mut line = fmt_num(*t);
        for x in u {
            line.push(',');
            line.push_str(&fmt_num(*x));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Writes `t,i,j,w` rows for every edge with positive coupling.
pub fn write_flux_csv(traj: &Trajectory, coupling: &Coupling, mut out: impl Write) -> Result<()> {
    writeln!(out, "t,i,j,w")?;
    let th = coupling.theta();
    for k in 0..traj.len() {
        let w = traj.flux_at(k).ok_or(Error::MissingFlux)?;
        let t = fmt_num(traj.times[k]);
        for ((i, j), &x) in th.indexed_iter() {
            if i != j && x > 0.0 {
                writeln!(out, "{t},{i},{j},{}", fmt_num(w[[i, j]]))?;
            }
        }
    }
    Ok(())
}

/// Reads a density CSV back into times and snapshots.
pub fn read_density_csv(input: impl BufRead) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Schema("empty trajectory file".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    let n = cols.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string()).chain((0..n).map(|i| format!("u_{i}"))).collect();
    if n == 0 || cols != expected {
        return Err(Error::Schema(format!("unexpected trajectory header {header:?}")));
    }
    let (mut times, mut densities) = (Vec::new(), Vec::new());
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::Schema(format!("line {}: expected {} fields", idx + 2, n + 1)));
        }
        times.push(parse_num(fields[0], idx + 2)?);
        densities.push(
            fields[1..]
                .iter()
                .map(|f| parse_num(f, idx + 2))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if times.is_empty() {
        return Err(Error::Schema("trajectory file has no rows".into()));
    }
    Ok((times, densities))
}

/// Reads a flux CSV into per-snapshot edge matrices; times must match the
/// density file exactly and unspecified edges are zero.
pub fn read_flux_csv(input: impl BufRead, times: &[f64], n: usize) -> Result<Vec<Array2<f64>>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Schema("empty flux file".into()))??;
    if header.trim() != "t,i,j,w" {
        return Err(Error::Schema(format!("unexpected flux header {header:?}")));
    }
    let index: HashMap<u64, usize> = times.iter().enumerate().map(|(k, t)| (t.to_bits(), k)).collect();
    let mut ws = vec![Array2::zeros((n, n)); times.len()];
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ln = idx + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Schema(format!("line {ln}: expected 4 fields")));
        }
        let t = parse_num(f[0], ln)?;
        let k = *index
            .get(&t.to_bits())
            .ok_or_else(|| Error::Schema(format!("line {ln}: time {t} is not a checkpoint")))?;
        let ij = |s: &str| -> Result<usize> {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v < n)
                .ok_or_else(|| Error::Schema(format!("line {ln}: bad atom index {s:?}")))
        };
        let (i, j) = (ij(f[1])?, ij(f[2])?);
        ws[k][[i, j]] = parse_num(f[3], ln)?;
    }
    Ok(ws)
}
