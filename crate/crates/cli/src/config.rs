//! JSON run configuration. Every object rejects unknown keys, and parse
//! errors carry the path of the offending field.

use crate::error::CliError;
use jumpflow::densities::Triple;
use jumpflow::evolution::IntegratorConfig;
use jumpflow::experiments::cosine_profile;
use jumpflow::space_kernel::{build_grid, build_torus, cutoff, fractional_kernel, graph, Kernel, Mask, StateSpace};
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub space: SpaceSpec,
    pub kernel: KernelSpec,
    pub triple: String,
    pub initial: InitialSpec,
    pub t_final: f64,
    pub integrator: IntegratorConfig,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
    pub write_flux: bool,
}

/// Top level as read; the tagged sections are decoded separately so errors
/// inside them keep their full field path.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema: u32,
    space: Value,
    kernel: Value,
    triple: String,
    initial: Value,
    t_final: f64,
    #[serde(default)]
    integrator: IntegratorConfig,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    sweep: Option<SweepSpec>,
    #[serde(default)]
    write_flux: bool,
}

#[derive(Debug, Clone)]
pub enum SpaceSpec {
    Grid { a: f64, b: f64, n: usize },
    Torus { n: usize },
    Graph { metric: Vec<Vec<f64>>, pi: Vec<f64> },
}

#[derive(Debug, Clone)]
pub enum KernelSpec {
    Fractional { s: f64, mask: Mask, cutoff: Option<f64> },
    Matrix { rates: Vec<Vec<f64>>, cutoff: Option<f64> },
}

#[derive(Debug, Clone)]
pub enum InitialSpec {
    Constant { value: f64 },
    /// `left` below `split`, `right` at or above it.
    Step { split: f64, left: f64, right: f64 },
    Vector { values: Vec<f64> },
    /// Whitespace- or comma-separated numbers, relative to the config file.
    File { path: PathBuf },
    /// `1 + cos(pi x) / 2`.
    Cosine,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eps: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Grid {
    a: f64,
    b: f64,
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Torus {
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSpace {
    metric: Vec<Vec<f64>>,
    pi: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Fractional {
    s: f64,
    #[serde(default = "full_mask")]
    mask: Mask,
    #[serde(default)]
    cutoff: Option<f64>,
}

fn full_mask() -> Mask {
    Mask::Full
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixKernel {
    rates: Vec<Vec<f64>>,
    #[serde(default)]
    cutoff: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Constant {
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Step {
    split: f64,
    left: f64,
    right: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Values {
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRef {
    path: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

fn schema_err(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("`{path}`: {msg}"))
}

/// Splits `{"kind": k, ...}` into `k` and the remaining fields.
fn split_kind(section: &str, v: Value) -> Result<(String, Value), CliError> {
    let Value::Object(mut map) = v else {
        return Err(schema_err(section, "expected an object"));
    };
    match map.remove("kind") {
        Some(Value::String(k)) => Ok((k, Value::Object(map))),
        Some(_) => Err(schema_err(&format!("{section}.kind"), "expected a string")),
        None => Err(schema_err(section, "missing field `kind`")),
    }
}

fn decode<T: DeserializeOwned>(section: &str, v: Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." { section.to_string() } else { format!("{section}.{inner}") };
        schema_err(&path, e.inner())
    })
}

fn unknown_kind(section: &str, kind: &str, expected: &str) -> CliError {
    schema_err(&format!("{section}.kind"), format!("unknown variant {kind:?}, expected one of {expected}"))
}

fn space_spec(v: Value) -> Result<SpaceSpec, CliError> {
    let (kind, rest) = split_kind("space", v)?;
    Ok(match kind.as_str() {
        "grid" => {
            let g: Grid = decode("space", rest)?;
            SpaceSpec::Grid { a: g.a, b: g.b, n: g.n }
        }
        "torus" => SpaceSpec::Torus {
            n: decode::<Torus>("space", rest)?.n,
        },
        "graph" => {
            let g: GraphSpace = decode("space", rest)?;
            SpaceSpec::Graph { metric: g.metric, pi: g.pi }
        }
        other => return Err(unknown_kind("space", other, "grid, torus, graph")),
    })
}

fn kernel_spec(v: Value) -> Result<KernelSpec, CliError> {
    let (kind, rest) = split_kind("kernel", v)?;
    Ok(match kind.as_str() {
        "fractional" => {
            let f: Fractional = decode("kernel", rest)?;
            KernelSpec::Fractional {
                s: f.s,
                mask: f.mask,
                cutoff: f.cutoff,
            }
        }
        "matrix" => {
            let m: MatrixKernel = decode("kernel", rest)?;
            KernelSpec::Matrix {
                rates: m.rates,
                cutoff: m.cutoff,
            }
        }
        other => return Err(unknown_kind("kernel", other, "fractional, matrix")),
    })
}

fn initial_spec(v: Value) -> Result<InitialSpec, CliError> {
    let (kind, rest) = split_kind("initial", v)?;
    Ok(match kind.as_str() {
        "constant" => InitialSpec::Constant {
            value: decode::<Constant>("initial", rest)?.value,
        },
        "step" => {
            let s: Step = decode("initial", rest)?;
            InitialSpec::Step {
                split: s.split,
                left: s.left,
                right: s.right,
            }
        }
        "vector" => InitialSpec::Vector {
            values: decode::<Values>("initial", rest)?.values,
        },
        "file" => InitialSpec::File {
            path: decode::<FileRef>("initial", rest)?.path,
        },
        "cosine" => {
            decode::<Empty>("initial", rest)?;
            InitialSpec::Cosine
        }
        other => return Err(unknown_kind("initial", other, "constant, step, vector, file, cosine")),
    })
}

/// Everything a command needs, built from a validated config.
pub struct Setup {
    pub space: StateSpace,
    pub kernel: Kernel,
    pub triple: Triple,
    pub u0: Vec<f64>,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| schema_err(&e.path().to_string(), e.inner()))?;
    if raw.schema != SCHEMA_VERSION {
        return Err(schema_err(
            "schema",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema),
        ));
    }
    let cfg = RunConfig {
        space: space_spec(raw.space)?,
        kernel: kernel_spec(raw.kernel)?,
        triple: raw.triple,
        initial: initial_spec(raw.initial)?,
        t_final: raw.t_final,
        integrator: raw.integrator,
        output: raw.output,
        seed: raw.seed,
        sweep: raw.sweep,
        write_flux: raw.write_flux,
    };
    cfg.integrator
        .validate(cfg.t_final)
        .map_err(|e| schema_err("integrator", e))?;
    Ok(cfg)
}

fn to_array(rows: &[Vec<f64>], field: &str) -> Result<Array2<f64>, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Schema(format!("`{field}`: matrix must be square")));
    }
    Array2::from_shape_vec((n, n), rows.concat()).map_err(|e| CliError::Schema(format!("`{field}`: {e}")))
}

fn at(field: &str) -> impl Fn(jumpflow::Error) -> CliError + '_ {
    move |e| CliError::from_core(e).in_field(field)
}

impl RunConfig {
    /// Builds space, kernel and initial density. `base` resolves relative
    /// file paths.
    pub fn setup(&self, base: &Path) -> Result<Setup, CliError> {
        let space = match &self.space {
            SpaceSpec::Grid { a, b, n } => build_grid(*a, *b, *n),
            SpaceSpec::Torus { n } => build_torus(*n),
            SpaceSpec::Graph { metric, pi } => graph(to_array(metric, "space.metric")?, pi.clone()),
        }
        .map_err(at("space"))?;
        let (raw, eps) = match &self.kernel {
            KernelSpec::Fractional { s, mask, cutoff } => (fractional_kernel(&space, *s, *mask), *cutoff),
            KernelSpec::Matrix { rates, cutoff } => (Kernel::from_matrix(to_array(rates, "kernel.rates")?), *cutoff),
        };
        let mut kernel = raw.map_err(at("kernel"))?;
        if kernel.n() != space.n() {
            return Err(CliError::Schema(format!(
                "`kernel`: {} states but the space has {}",
                kernel.n(),
                space.n()
            )));
        }
        if let Some(eps) = eps {
            kernel = cutoff(&space, &kernel, eps).map_err(at("kernel.cutoff"))?;
        }
        let triple = Triple::from_name(&self.triple).map_err(at("triple"))?;
        let u0 = self.initial(&space, base)?;
        if u0.len() != space.n() {
            return Err(CliError::Schema(format!(
                "`initial`: {} values but the space has {} states",
                u0.len(),
                space.n()
            )));
        }
        if u0.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(CliError::Schema("`initial`: densities must be finite and nonnegative".into()));
        }
        Ok(Setup { space, kernel, triple, u0 })
    }

    fn initial(&self, space: &StateSpace, base: &Path) -> Result<Vec<f64>, CliError> {
        let n = space.n();
        Ok(match &self.initial {
            InitialSpec::Constant { value } => vec![*value; n],
            InitialSpec::Step { split, left, right } => {
                let x = space
                    .coords()
                    .ok_or_else(|| CliError::Schema("`initial`: a step needs point coordinates".into()))?;
                x.iter().map(|x| if x < split { *left } else { *right }).collect()
            }
            InitialSpec::Vector { values } => values.clone(),
            InitialSpec::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
                text.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| {
                        t.parse::<f64>()
                            .map_err(|_| CliError::Schema(format!("`initial.path`: {t:?} is not a number")))
                    })
                    .collect::<Result<_, _>>()?
            }
            InitialSpec::Cosine => cosine_profile(space).map_err(at("initial"))?,
        })
    }

    /// Short, filesystem-safe summary used in output file names.
    pub fn tag(&self) -> String {
        let space = match &self.space {
            SpaceSpec::Grid { n, .. } => format!("grid{n}"),
            SpaceSpec::Torus { n } => format!("torus{n}"),
            SpaceSpec::Graph { pi, .. } => format!("graph{}", pi.len()),
        };
        format!("{space}_T{}_{}", self.t_final, self.triple)
    }
}
