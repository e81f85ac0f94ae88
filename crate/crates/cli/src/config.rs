//! Run configuration: one JSON file describes one task.

use std::path::Path;

use anisoheat::coefficients::{CoefficientSet, JumpCoefficient, TimeProfile};
use anisoheat::estimates::{BandLimitedField, FieldMode};
use anisoheat::grid::{BlockAxes, TimeAxis, TorusGrid};
use anisoheat::{Anisotropy, BernsteinFunction, BernsteinSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropyConfig {
    pub dims: Vec<usize>,
    pub phis: Vec<BernsteinSpec>,
}

/// Coefficients; omitted fields default to `a_i ≡ 1`, `b_i = b0_i`, `c1 = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub c1: f64,
    #[serde(default)]
    pub b0: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<TimeProfile>>,
    #[serde(default)]
    pub a: Option<Vec<JumpCoefficient>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Period of every axis of block `i`.
    pub lengths: Vec<f64>,
    /// Points per axis of block `i`.
    pub points: Vec<usize>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Forcing {
    Constant { value: f64 },
    Modes { modes: Vec<FieldMode> },
    Random {
        n_modes: usize,
        max_wave: i64,
        #[serde(default = "one_u32")]
        max_time_mode: u32,
        #[serde(default)]
        seed: u64,
    },
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Subordinator,
    Iasbm,
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probe {
    /// Frequency vector, or a single Laplace argument for subordinators.
    pub xi: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    L2,
    Lqlp,
    Bmo,
    Kernel,
    Levy,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Self::L2 => "l2",
            Self::Lqlp => "lqlp",
            Self::Bmo => "bmo",
            Self::Kernel => "kernel",
            Self::Levy => "levy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub t_lo: f64,
    pub t_hi: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub n_t: usize,
    pub n_r: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            t_lo: 1e-2,
            t_hi: 10.0,
            r_lo: 1e-2,
            r_hi: 10.0,
            n_t: 7,
            n_r: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub size: usize,
    pub n_modes: usize,
    pub max_wave: i64,
    pub max_time_mode: u32,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            size: 20,
            n_modes: 8,
            max_wave: 8,
            max_time_mode: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CubeConfig {
    pub b_lo: f64,
    pub b_hi: f64,
    pub count: usize,
    pub centers: usize,
    /// Window of center times.
    pub t_lo: f64,
    pub t_hi: f64,
    pub members: usize,
}

impl Default for CubeConfig {
    fn default() -> Self {
        Self {
            b_lo: 1e-3,
            b_hi: 1.0,
            count: 13,
            centers: 64,
            t_lo: 0.98,
            t_hi: 1.02,
            members: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub suite: Option<Suite>,
    pub ensemble: EnsembleConfig,
    pub pairs: Vec<(f64, f64)>,
    pub cubes: CubeConfig,
    pub powers: Vec<(u32, u32)>,
    pub nu: f64,
    pub bound: BoundConfig,
    pub levy_nu: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suite: None,
            ensemble: EnsembleConfig::default(),
            pairs: vec![(1.5, 4.0), (4.0, 1.5), (3.0, 3.0)],
            cubes: CubeConfig::default(),
            powers: vec![(0, 0), (0, 1), (1, 0), (1, 1)],
            nu: 1.0,
            bound: BoundConfig::default(),
            levy_nu: vec![0.5, 1.0],
            lambdas: vec![0.1, 1.0, 10.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    Kernel {
        #[serde(default)]
        block: usize,
        t_values: Vec<f64>,
        r_values: Vec<f64>,
        #[serde(default)]
        k: u32,
        #[serde(default)]
        m: u32,
        #[serde(default = "one_f64")]
        nu: f64,
        #[serde(default)]
        bound: BoundConfig,
    },
    Solve {
        forcing: Forcing,
        #[serde(default)]
        lambda: Option<f64>,
    },
    Simulate {
        process: Process,
        n_paths: usize,
        #[serde(default)]
        block: usize,
        #[serde(default)]
        probes: Vec<Probe>,
    },
    Verify(VerifyConfig),
    Multiplier {
        delta1: f64,
        delta2: f64,
        #[serde(default)]
        unsquared_derivative: bool,
    },
}

fn one_f64() -> f64 {
    1.0
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Kernel { .. } => "kernel",
            Self::Solve { .. } => "solve",
            Self::Simulate { .. } => "simulate",
            Self::Verify(_) => "verify",
            Self::Multiplier { .. } => "multiplier",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub anisotropy: AnisotropyConfig,
    #[serde(default)]
    pub coefficients: Option<CoefficientConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub seed: u64,
    pub task: Task,
}

/// Parses configuration text; errors carry the line and column.
pub fn parse(text: &str, origin: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}:{}:{}: {e}", e.line(), e.column())))
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

/// The configuration with every module object constructed and checked.
pub struct Validated {
    pub aniso: Anisotropy,
    pub coeffs: CoefficientSet,
    pub grid: Option<TorusGrid>,
}

fn invalid(e: anisoheat::Error) -> CliError {
    CliError::Config(format!("invalid configuration: {e}"))
}

impl RunConfig {
    pub fn validate(&self) -> Result<Validated, CliError> {
        let phis = self
            .anisotropy
            .phis
            .iter()
            .cloned()
            .map(BernsteinFunction::from_spec)
            .collect::<anisoheat::Result<Vec<_>>>()
            .map_err(invalid)?;
        let aniso = Anisotropy::new(self.anisotropy.dims.clone(), phis).map_err(invalid)?;
        let grid = self.grid.as_ref().map(|g| g.build(&aniso)).transpose()?;
        let coeffs = match &self.coefficients {
            None => CoefficientSet::unit(&aniso),
            Some(c) => {
                let unit = CoefficientSet::unit(&aniso);
                CoefficientSet {
                    c1: c.c1,
                    b0: c.b0.clone().unwrap_or(unit.b0),
                    b: c.b.clone().unwrap_or(unit.b),
                    a: c.a.clone().unwrap_or(unit.a),
                }
            }
        };
        let times = grid.as_ref().and_then(|g| g.time.as_ref()).map_or(vec![0.0], |t| t.samples());
        coeffs.validate(&aniso, &times).map_err(invalid)?;
        let v = Validated { aniso, coeffs, grid };
        self.validate_task(&v)?;
        Ok(v)
    }

    fn validate_task(&self, v: &Validated) -> Result<(), CliError> {
        let need_grid = |time: bool| -> Result<&TorusGrid, CliError> {
            let g = v.grid.as_ref().ok_or_else(|| CliError::Config(format!("task {} needs a grid", self.task.name())))?;
            if time && g.time.is_none() {
                return Err(CliError::Config(format!("task {} needs grid.horizon and grid.steps", self.task.name())));
            }
            Ok(g)
        };
        match &self.task {
            Task::Kernel { block, t_values, r_values, .. } => {
                if *block >= v.aniso.ell() {
                    return Err(CliError::Config(format!("kernel block {block} out of range")));
                }
                if t_values.is_empty() || r_values.is_empty() {
                    return Err(CliError::Config("kernel task needs nonempty t_values and r_values".into()));
                }
            }
            Task::Solve { lambda, forcing } => {
                need_grid(lambda.is_none())?;
                if let Forcing::Modes { modes } = forcing {
                    let axes = v.aniso.total_dim();
                    if modes.iter().any(|m| m.wave.len() != axes) {
                        return Err(CliError::Config(format!("forcing wave vectors need {axes} entries")));
                    }
                }
            }
            Task::Simulate { n_paths, probes, process, block } => {
                let g = need_grid(true)?;
                if *n_paths < 2 {
                    return Err(CliError::Config("simulation needs at least two paths".into()));
                }
                let dim = if *process == Process::Subordinator {
                    if *block >= v.aniso.ell() {
                        return Err(CliError::Config(format!("subordinator block {block} out of range")));
                    }
                    1
                } else {
                    v.aniso.total_dim()
                };
                let horizon = g.time.as_ref().map_or(0.0, |t| t.horizon);
                for p in probes {
                    if p.xi.len() != dim || !(p.t > 0.0 && p.t <= horizon) {
                        return Err(CliError::Config(format!("probe {:?} at t = {} does not fit the process", p.xi, p.t)));
                    }
                }
            }
            Task::Verify(cfg) => {
                if matches!(cfg.suite, Some(Suite::L2 | Suite::Lqlp | Suite::Bmo)) {
                    need_grid(true)?;
                }
            }
            Task::Multiplier { delta1, delta2, .. } => {
                if !(*delta1 > 0.0 && *delta1 < 1.0 && *delta2 > 0.0 && *delta2 < 1.0) {
                    return Err(CliError::Config("multiplier exponents must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }
}

impl GridConfig {
    pub fn build(&self, aniso: &Anisotropy) -> Result<TorusGrid, CliError> {
        if self.lengths.len() != aniso.ell() || self.points.len() != aniso.ell() {
            return Err(CliError::Config(format!(
                "grid declares {}/{} blocks (lengths/points) but the anisotropy has {}",
                self.lengths.len(),
                self.points.len(),
                aniso.ell()
            )));
        }
        let time = match (self.horizon, self.steps) {
            (Some(horizon), Some(steps)) => {
                if !(horizon > 0.0 && horizon.is_finite()) || steps == 0 {
                    return Err(CliError::Config("grid horizon must be positive with at least one step".into()));
                }
                Some(TimeAxis { horizon, steps })
            }
            (None, None) => None,
            _ => return Err(CliError::Config("grid.horizon and grid.steps must be given together".into())),
        };
        let blocks = aniso
            .dims
            .iter()
            .zip(self.lengths.iter().zip(&self.points))
            .map(|(&dim, (&length, &n))| BlockAxes { dim, length, n })
            .collect();
        TorusGrid::new(blocks, time).map_err(invalid)
    }
}

impl Forcing {
    pub fn field(&self, axes: usize) -> Option<BandLimitedField> {
        match self {
            Self::Constant { .. } => None,
            Self::Modes { modes } => Some(BandLimitedField { modes: modes.clone() }),
            Self::Random {
                n_modes,
                max_wave,
                max_time_mode,
                seed,
            } => Some(BandLimitedField::random(axes, *n_modes, *max_wave, *max_time_mode, *seed)),
        }
    }
}
