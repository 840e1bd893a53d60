//! Run configuration: a flat `key = value` file with dotted section names.
//!
//! Grammar (one binding per line):
//!   - blank lines and lines whose first non-space character is `#` are
//!     ignored; there are no inline comments (values may contain `#`);
//!   - every other line must read `key = value` with a nonempty key of the
//!     form `section.field` (solvers use `solver.<name>.field`);
//!   - keys may appear at most once; unknown keys are rejected, each error
//!     carrying the offending line number.
//!
//! Solvers run in the order their names first appear in the file.

use crate::phantom::{PhantomKind, PhantomPhase};
use crate::solve::{PrecondSpec, SolverKind};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key `{key}` (first set on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: unknown key `{key}`")]
    Unknown { line: usize, key: String },
    #[error("line {line}: {key}: {msg}")]
    Value { line: usize, key: String, msg: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoilsKind {
    /// Single all-ones map (the plain DFT model).
    Uniform,
    /// Smooth synthetic sensitivity bumps.
    Synth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajSection {
    Radial { spokes: usize, readout: usize, golden: bool },
    Spiral { interleaves: usize, readout: usize, grid: usize },
    Cartesian { nx: usize, ny: usize, accel: f64, center: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DenoiserSpec {
    Identity,
    /// Normalized Gaussian convolution of the given kernel width.
    Conv { width: f64 },
    /// Complex soft-thresholding (not normalization-equivariant).
    Soft { threshold: f64 },
}

impl DenoiserSpec {
    pub fn parse(s: &str) -> Result<Self, String> {
        if s == "identity" {
            return Ok(DenoiserSpec::Identity);
        }
        if let Some(rest) = s.strip_prefix("conv:") {
            let width: f64 = rest.parse().map_err(|_| format!("bad conv width `{rest}`"))?;
            if !(width > 0.0) {
                return Err(format!("conv width must be positive, got {width}"));
            }
            return Ok(DenoiserSpec::Conv { width });
        }
        if let Some(rest) = s.strip_prefix("soft:") {
            let threshold: f64 =
                rest.parse().map_err(|_| format!("bad soft threshold `{rest}`"))?;
            if !(threshold >= 0.0) {
                return Err(format!("soft threshold must be ≥ 0, got {threshold}"));
            }
            return Ok(DenoiserSpec::Soft { threshold });
        }
        Err(format!("unknown denoiser `{s}` (expected identity, conv:<width>, soft:<t>)"))
    }

    pub fn build(&self, nx: usize, ny: usize) -> Box<dyn crate::denoise::Denoiser> {
        match *self {
            DenoiserSpec::Identity => Box::new(crate::denoise::IdentityDenoiser),
            DenoiserSpec::Conv { width } => {
                Box::new(crate::denoise::ConvDenoiser::new(width, nx, ny))
            }
            DenoiserSpec::Soft { threshold } => {
                Box::new(crate::denoise::SoftThresholdDenoiser::new(threshold))
            }
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DenoiserSpec::Identity => "identity".to_string(),
            DenoiserSpec::Conv { width } => format!("conv:{width}"),
            DenoiserSpec::Soft { threshold } => format!("soft:{threshold}"),
        }
    }
}

fn parse_precond(s: &str) -> Result<PrecondSpec, String> {
    if s == "identity" {
        return Ok(PrecondSpec::Identity);
    }
    if s == "cheb2" {
        return Ok(PrecondSpec::Cheb2);
    }
    if let Some(rest) = s.strip_prefix("binomial:") {
        let gamma: usize = rest.parse().map_err(|_| format!("bad binomial order `{rest}`"))?;
        if gamma == 0 {
            return Err("binomial order must be ≥ 1".to_string());
        }
        return Ok(PrecondSpec::Binomial(gamma));
    }
    if let Some(rest) = s.strip_prefix("cheb-standard:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected cheb-standard:<order>:<tmin>:<tmax>, got `{s}`"));
        }
        let gamma: usize = parts[0].parse().map_err(|_| format!("bad order `{}`", parts[0]))?;
        let t_min: f64 = parts[1].parse().map_err(|_| format!("bad tmin `{}`", parts[1]))?;
        let t_max: f64 = parts[2].parse().map_err(|_| format!("bad tmax `{}`", parts[2]))?;
        if gamma == 0 || !(t_max > t_min) || !(t_min >= 0.0) {
            return Err(format!("need order ≥ 1 and 0 ≤ tmin < tmax, got `{s}`"));
        }
        return Ok(PrecondSpec::ChebStandard { gamma, t_min, t_max });
    }
    if let Some(rest) = s.strip_prefix("custom:") {
        let coeffs: Result<Vec<f64>, _> = rest.split(',').map(str::parse).collect();
        let coeffs = coeffs.map_err(|_| format!("bad coefficient list `{rest}`"))?;
        if coeffs.is_empty() {
            return Err("custom coefficient list is empty".to_string());
        }
        return Ok(PrecondSpec::Custom(coeffs));
    }
    Err(format!(
        "unknown preconditioner `{s}` (expected identity, binomial:<Γ>, cheb2, \
         cheb-standard:<Γ>:<tmin>:<tmax>, custom:<c1,c2,…>)"
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSection {
    pub name: String,
    pub kind: SolverKind,
    pub denoiser: DenoiserSpec,
    pub sigma: f64,
    pub iters: usize,
    /// None means "derive from the measured spectral norm".
    pub alpha: Option<f64>,
    pub precond: PrecondSpec,
    pub cg_tol: f64,
    pub cg_iters: usize,
    pub seed: u64,
    pub early_stop: Option<f64>,
    pub delta: f64,
    pub theta1: f64,
    pub theta2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub phantom_size: usize,
    pub phantom_kind: PhantomKind,
    pub phantom_phase: PhantomPhase,
    pub phantom_seed: u64,
    pub traj: TrajSection,
    pub n_coils: usize,
    pub coils_kind: CoilsKind,
    pub noise_variance: f64,
    pub noise_seed: u64,
    pub output_dir: PathBuf,
    /// None = enabled automatically for radial trajectories.
    pub dc_enabled: Option<bool>,
    /// Per-iteration wall-clock times in the trace CSVs (costs rerun
    /// byte-determinism; the summary's walltime column is always measured).
    pub timing: bool,
    pub solvers: Vec<SolverSection>,
}

impl RunConfig {
    pub fn dc_baseline_enabled(&self) -> bool {
        match self.dc_enabled {
            Some(flag) => flag,
            None => matches!(self.traj, TrajSection::Radial { .. }),
        }
    }
}

/// One parsed binding, keyed for duplicate/unknown reporting.
struct Bindings {
    map: BTreeMap<String, (usize, String)>,
    solver_order: Vec<String>,
}

impl Bindings {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, String), ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::Missing { key: key.to_string() })
    }
}

fn scan(text: &str) -> Result<Bindings, ConfigError> {
    let mut map: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut solver_order: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError::Syntax { line: line_no, text: raw.trim().to_string() });
        };
        let key = line[..eq].trim().to_string();
        let value = line[eq + 1..].trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax { line: line_no, text: raw.trim().to_string() });
        }
        if let Some((first, _)) = map.get(&key) {
            return Err(ConfigError::Duplicate { line: line_no, key, first: *first });
        }
        if let Some(rest) = key.strip_prefix("solver.") {
            if let Some((name, _field)) = rest.split_once('.') {
                if !solver_order.iter().any(|n| n == name) {
                    solver_order.push(name.to_string());
                }
            }
        }
        map.insert(key, (line_no, value));
    }
    Ok(Bindings { map, solver_order })
}

fn value_err(line: usize, key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Value { line, key: key.to_string(), msg: msg.into() }
}

fn parse_with<T, F>(b: &mut Bindings, key: &str, f: F) -> Result<Option<T>, ConfigError>
where
    F: FnOnce(&str) -> Result<T, String>,
{
    match b.take(key) {
        None => Ok(None),
        Some((line, value)) => f(&value).map(Some).map_err(|msg| value_err(line, key, msg)),
    }
}

fn require_with<T, F>(b: &mut Bindings, key: &str, f: F) -> Result<T, ConfigError>
where
    F: FnOnce(&str) -> Result<T, String>,
{
    let (line, value) = b.require(key)?;
    f(&value).map_err(|msg| value_err(line, key, msg))
}

fn as_usize(s: &str) -> Result<usize, String> {
    s.parse().map_err(|_| format!("invalid integer `{s}`"))
}

fn as_u64(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("invalid integer `{s}`"))
}

fn as_f64(s: &str) -> Result<f64, String> {
    s.parse().map_err(|_| format!("invalid number `{s}`"))
}

fn as_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("invalid boolean `{s}` (expected true or false)")),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut b = scan(text)?;

    let phantom_size = require_with(&mut b, "phantom.size", as_usize)?;
    let phantom_kind = require_with(&mut b, "phantom.kind", |s| {
        s.parse::<PhantomKind>().map_err(|e| e.to_string())
    })?;
    let phantom_phase = parse_with(&mut b, "phantom.phase", |s| {
        s.parse::<PhantomPhase>().map_err(|e| e.to_string())
    })?
    .unwrap_or(PhantomPhase::None);
    let phantom_seed = parse_with(&mut b, "phantom.seed", as_u64)?.unwrap_or(0);
    if phantom_size < 8 {
        return Err(ConfigError::Invalid(format!(
            "phantom.size must be ≥ 8, got {phantom_size}"
        )));
    }

    let traj_kind = require_with(&mut b, "traj.kind", |s| match s {
        "radial" | "spiral" | "cartesian" => Ok(s.to_string()),
        other => Err(format!("must be radial, spiral, or cartesian, got `{other}`")),
    })?;
    let traj = match traj_kind.as_str() {
        "radial" => TrajSection::Radial {
            spokes: require_with(&mut b, "traj.spokes", as_usize)?,
            readout: require_with(&mut b, "traj.readout", as_usize)?,
            golden: parse_with(&mut b, "traj.golden", as_bool)?.unwrap_or(true),
        },
        "spiral" => TrajSection::Spiral {
            interleaves: require_with(&mut b, "traj.interleaves", as_usize)?,
            readout: require_with(&mut b, "traj.readout", as_usize)?,
            grid: parse_with(&mut b, "traj.grid", as_usize)?.unwrap_or(phantom_size),
        },
        "cartesian" => TrajSection::Cartesian {
            nx: parse_with(&mut b, "traj.nx", as_usize)?.unwrap_or(phantom_size),
            ny: parse_with(&mut b, "traj.ny", as_usize)?.unwrap_or(phantom_size),
            accel: require_with(&mut b, "traj.accel", as_f64)?,
            center: parse_with(&mut b, "traj.center", as_f64)?.unwrap_or(0.08),
            seed: parse_with(&mut b, "traj.seed", as_u64)?.unwrap_or(0),
        },
        _ => unreachable!("traj.kind already validated"),
    };

    let n_coils = require_with(&mut b, "coils.count", as_usize)?;
    if n_coils == 0 {
        return Err(ConfigError::Invalid("coils.count must be ≥ 1".to_string()));
    }
    let coils_kind = parse_with(&mut b, "coils.kind", |s| match s {
        "uniform" => Ok(CoilsKind::Uniform),
        "synth" => Ok(CoilsKind::Synth),
        other => Err(format!("unknown coils.kind `{other}` (expected uniform or synth)")),
    })?
    .unwrap_or(if n_coils == 1 { CoilsKind::Uniform } else { CoilsKind::Synth });
    if coils_kind == CoilsKind::Uniform && n_coils != 1 {
        return Err(ConfigError::Invalid(format!(
            "coils.kind = uniform requires coils.count = 1, got {n_coils}"
        )));
    }

    let noise_variance = require_with(&mut b, "noise.variance", as_f64)?;
    if !(noise_variance >= 0.0) {
        return Err(ConfigError::Invalid(format!(
            "noise.variance must be ≥ 0, got {noise_variance}"
        )));
    }
    let noise_seed = require_with(&mut b, "noise.seed", as_u64)?;

    let output_dir =
        PathBuf::from(require_with(&mut b, "output.dir", |s| Ok::<_, String>(s.to_string()))?);

    let timing = parse_with(&mut b, "output.timing", as_bool)?.unwrap_or(false);

    let dc_enabled = parse_with(&mut b, "dc.enabled", as_bool)?;
    if dc_enabled == Some(true) && !matches!(traj, TrajSection::Radial { .. }) {
        return Err(ConfigError::Invalid(
            "dc.enabled = true requires a radial trajectory (density weights are radial-only)"
                .to_string(),
        ));
    }

    let solver_names = std::mem::take(&mut b.solver_order);
    if solver_names.is_empty() {
        return Err(ConfigError::Missing { key: "solver.<name>.kind".to_string() });
    }
    let mut solvers = Vec::with_capacity(solver_names.len());
    for name in solver_names {
        let k = |field: &str| format!("solver.{name}.{field}");
        let kind = require_with(&mut b, &k("kind"), |s| match s {
            "pnp-ista" => Ok(SolverKind::PnpIsta),
            "pnp-admm" => Ok(SolverKind::PnpAdmm),
            "p2np-f" => Ok(SolverKind::P2npFixed),
            "p2np-d" => Ok(SolverKind::P2npDynamic),
            other => Err(format!(
                "unknown solver kind `{other}` (expected pnp-ista, pnp-admm, p2np-f, p2np-d)"
            )),
        })?;
        let denoiser = require_with(&mut b, &k("denoiser"), DenoiserSpec::parse)?;
        let sigma = parse_with(&mut b, &k("sigma"), as_f64)?.unwrap_or(0.05);
        let iters = parse_with(&mut b, &k("iters"), as_usize)?.unwrap_or(200);
        let alpha = parse_with(&mut b, &k("alpha"), |s| {
            if s == "auto" {
                Ok(None)
            } else {
                as_f64(s).and_then(|a| {
                    if a > 0.0 { Ok(Some(a)) } else { Err(format!("alpha must be > 0, got {a}")) }
                })
            }
        })?
        .flatten();
        let precond = parse_with(&mut b, &k("precond"), parse_precond)?
            .unwrap_or(PrecondSpec::Identity);
        let cg_tol = parse_with(&mut b, &k("cg_tol"), as_f64)?.unwrap_or(1e-10);
        let cg_iters = parse_with(&mut b, &k("cg_iters"), as_usize)?.unwrap_or(200);
        let seed = parse_with(&mut b, &k("seed"), as_u64)?.unwrap_or(0);
        let early_stop = parse_with(&mut b, &k("early_stop"), as_f64)?;
        let delta = parse_with(&mut b, &k("delta"), as_f64)?.unwrap_or(1e-8);
        let theta1 = parse_with(&mut b, &k("theta1"), as_f64)?.unwrap_or(2e-6);
        let theta2 = parse_with(&mut b, &k("theta2"), as_f64)?.unwrap_or(200.0);
        if iters == 0 {
            return Err(ConfigError::Invalid(format!("solver.{name}.iters must be ≥ 1")));
        }
        solvers.push(SolverSection {
            name,
            kind,
            denoiser,
            sigma,
            iters,
            alpha,
            precond,
            cg_tol,
            cg_iters,
            seed,
            early_stop,
            delta,
            theta1,
            theta2,
        });
    }

    if let Some((key, (line, _))) = b.map.iter().next() {
        return Err(ConfigError::Unknown { line: *line, key: key.clone() });
    }

    Ok(RunConfig {
        phantom_size,
        phantom_kind,
        phantom_phase,
        phantom_seed,
        traj,
        n_coils,
        coils_kind,
        noise_variance,
        noise_seed,
        output_dir,
        dc_enabled,
        timing,
        solvers,
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config(&std::fs::read_to_string(path)?)
}
