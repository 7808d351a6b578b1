//! JSON run configuration.
//!
//! ```json
//! {
//!   "grid": {"nx": 64, "ny": 64, "Lx": 6.283185307179586, "Ly": 6.283185307179586,
//!            "bc": "periodic", "backend": "spectral"},
//!   "params": {"chi": 1.0, "alpha": 1.0, "gamma": 1.0, "tau": 0.0},
//!   "time": {"dt": 0.001, "n_steps": 1000},
//!   "initial": {"rho": {"gaussian": {"amplitude": 2.0, "x0": 3.14, "y0": 3.14, "sigma": 0.6}},
//!               "c": null}
//! }
//! ```
//!
//! Optional: `params.cgn` (1.0), `solver` {`rel_tol`, `max_iters`, `restart`},
//! `output` {`dir`, `diag_every` (1), `snapshot_every` (0, final only)},
//! `time.blowup_ceiling` (1e8) and `gaussian.background` (0.0). Unknown keys
//! are rejected. Relative `file` paths resolve against the config's directory.

use crate::snapshot::{read_snapshot, SnapshotError};
use ks_core::linsolve::KrylovConfig;
use ks_core::scheme::{InitialCondition, ModelParams, RunConfig, DEFAULT_BLOWUP_CEILING};
use ks_core::{make_grid, Backend, BcKind};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("spectral backend requires periodic boundaries")]
    IncompatibleBackend,
    #[error("initial.c is required when tau > 0")]
    TauRequiresC,
    #[error("c forbidden when tau=0")]
    CForbiddenWhenTauZero,
    #[error("initial-condition file {path}: {source}")]
    InitialFile { path: String, source: SnapshotError },
    #[error("invalid configuration: {0}")]
    Invalid(ks_core::Error),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    grid: GridSpec,
    params: ParamsSpec,
    time: TimeSpec,
    initial: InitialSpec,
    #[serde(default)]
    solver: SolverSpec,
    #[serde(default)]
    output: OutputSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    nx: usize,
    ny: usize,
    #[serde(rename = "Lx")]
    lx: f64,
    #[serde(rename = "Ly")]
    ly: f64,
    bc: BcSpec,
    backend: BackendSpec,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BcSpec {
    Periodic,
    Neumann,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BackendSpec {
    Spectral,
    Fd,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSpec {
    chi: f64,
    alpha: f64,
    gamma: f64,
    tau: f64,
    #[serde(default = "one")]
    cgn: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSpec {
    dt: f64,
    n_steps: usize,
    #[serde(default = "default_ceiling")]
    blowup_ceiling: f64,
}

fn default_ceiling() -> f64 {
    DEFAULT_BLOWUP_CEILING
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialSpec {
    rho: IcSpec,
    #[serde(default)]
    c: Option<IcSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum IcSpec {
    Constant(f64),
    Gaussian(GaussianSpec),
    PerturbedConstant(PerturbedSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianSpec {
    amplitude: f64,
    x0: f64,
    y0: f64,
    sigma: f64,
    #[serde(default)]
    background: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbedSpec {
    mean: f64,
    eps: f64,
    kx: f64,
    ky: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSpec {
    rel_tol: f64,
    max_iters: usize,
    restart: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let k = KrylovConfig::default();
        SolverSpec {
            rel_tol: k.rel_tol,
            max_iters: k.max_iters,
            restart: k.restart,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSpec {
    #[serde(default)]
    dir: Option<PathBuf>,
    #[serde(default = "one_usize")]
    diag_every: usize,
    #[serde(default)]
    snapshot_every: usize,
}

fn one_usize() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            diag_every: 1,
            snapshot_every: 0,
        }
    }
}

/// Output settings that are not part of the simulation itself.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    /// Zero writes only the final state.
    pub snapshot_every: usize,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub run: RunConfig,
    pub output: OutputSettings,
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> ConfigError {
    let path = e.path().to_string();
    let inner = e.into_inner();
    let message = inner.to_string();
    // Unknown keys are reported at the offending key itself.
    let path = match unknown_field(&message) {
        Some(key) if path == "." => key.to_string(),
        Some(key) if !path.ends_with(key) => format!("{path}.{key}"),
        _ => path,
    };
    ConfigError::SchemaError { path, message }
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

fn initial_condition(spec: &IcSpec, grid: &ks_core::Grid, base: &Path) -> Result<InitialCondition, ConfigError> {
    Ok(match spec {
        IcSpec::Constant(v) => InitialCondition::Constant(*v),
        IcSpec::Gaussian(g) => InitialCondition::Gaussian {
            amplitude: g.amplitude,
            x0: g.x0,
            y0: g.y0,
            sigma: g.sigma,
            background: g.background,
        },
        IcSpec::PerturbedConstant(p) => InitialCondition::PerturbedConstant {
            mean: p.mean,
            eps: p.eps,
            kx: p.kx,
            ky: p.ky,
        },
        IcSpec::File(path) => {
            let full = base.join(path);
            let wrap = |source| ConfigError::InitialFile {
                path: full.display().to_string(),
                source,
            };
            let (field, _) = read_snapshot(&full).and_then(|s| s.into_field(grid)).map_err(wrap)?;
            InitialCondition::Samples(field)
        }
    })
}

/// Parses and validates a config; relative `file` paths resolve against
/// `base`.
pub fn parse_config_in(bytes: &[u8], base: &Path) -> Result<Config, ConfigError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ConfigError::SchemaError {
        path: ".".into(),
        message: format!("config is not UTF-8: {e}"),
    })?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(schema_error)?;

    let bc = match doc.grid.bc {
        BcSpec::Periodic => BcKind::Periodic,
        BcSpec::Neumann => BcKind::Neumann,
    };
    let backend = match doc.grid.backend {
        BackendSpec::Spectral => Backend::Spectral,
        BackendSpec::Fd => Backend::FiniteDifference,
    };
    if backend == Backend::Spectral && bc == BcKind::Neumann {
        return Err(ConfigError::IncompatibleBackend);
    }
    let grid = make_grid(doc.grid.nx, doc.grid.ny, doc.grid.lx, doc.grid.ly, bc, backend).map_err(ConfigError::Invalid)?;

    let params = ModelParams {
        chi: doc.params.chi,
        alpha: doc.params.alpha,
        gamma: doc.params.gamma,
        tau: doc.params.tau,
        cgn: doc.params.cgn,
    };
    match (params.tau > 0.0, doc.initial.c.is_some()) {
        (true, false) => return Err(ConfigError::TauRequiresC),
        (false, true) if params.tau == 0.0 => return Err(ConfigError::CForbiddenWhenTauZero),
        _ => {}
    }

    let initial_rho = initial_condition(&doc.initial.rho, &grid, base)?;
    let initial_c = doc
        .initial
        .c
        .as_ref()
        .map(|c| initial_condition(c, &grid, base))
        .transpose()?;
    let mut run = RunConfig::new(grid, params, doc.time.dt, doc.time.n_steps, initial_rho, initial_c);
    run.solver = KrylovConfig {
        rel_tol: doc.solver.rel_tol,
        max_iters: doc.solver.max_iters,
        restart: doc.solver.restart,
    };
    run.diag_every = doc.output.diag_every;
    run.blowup_ceiling = doc.time.blowup_ceiling;
    run.validate().map_err(ConfigError::Invalid)?;
    Ok(Config {
        run,
        output: OutputSettings {
            dir: doc.output.dir,
            snapshot_every: doc.output.snapshot_every,
        },
    })
}

/// Parses a config with relative paths resolved against the working
/// directory.
pub fn parse_config(bytes: &[u8]) -> Result<Config, ConfigError> {
    parse_config_in(bytes, Path::new("."))
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_in(&bytes, base)
}
