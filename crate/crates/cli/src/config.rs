use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;
use telegraphnet::carleman::{build_weights, WeightFamily};
use telegraphnet::dynamics::{CoefficientField, Direction, GridSpec, Mesh, ProblemSpec};
use telegraphnet::inverse::{CoefficientPerturbation, DirectOptions, ExperimentPair};
use telegraphnet::network::{EdgeId, NetworkTopology};
use telegraphnet::profile::Profile;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    EnergyCheck,
    CarlemanCheck,
    ReconstructDirect,
    ReconstructLsq,
    Stability,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::EnergyCheck => "energy-check",
            Mode::CarlemanCheck => "carleman-check",
            Mode::ReconstructDirect => "reconstruct-direct",
            Mode::ReconstructLsq => "reconstruct-lsq",
            Mode::Stability => "stability",
        }
    }

    /// Prefix of every file the mode writes.
    pub fn file_stem(self) -> String {
        self.name().replace('-', "_")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Checked against the mode given on the command line when present.
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    pub network: NetworkConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub problem: ProblemSpec,
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub experiments: ExperimentsConfig,
    pub perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    pub direct: DirectConfig,
    #[serde(default)]
    pub lsq: LsqConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    /// Relative to the directory of the config file.
    pub file: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    #[serde(default = "default_coefficients")]
    pub default: [f64; 4],
    #[serde(default)]
    pub edges: Vec<EdgeCoefficientConfig>,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        Self {
            default: default_coefficients(),
            edges: Vec::new(),
        }
    }
}

fn default_coefficients() -> [f64; 4] {
    [1.0, 1.0, 0.0, 0.0]
}

/// Either four constants or four profiles in the tree coordinate.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeCoefficientConfig {
    pub id: EdgeId,
    pub values: Option<[f64; 4]>,
    pub profiles: Option<[Profile; 4]>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionConfig {
    #[default]
    Forward,
    Backward,
    Both,
}

impl From<DirectionConfig> for Direction {
    fn from(d: DirectionConfig) -> Self {
        match d {
            DirectionConfig::Forward => Direction::Forward,
            DirectionConfig::Backward => Direction::Backward,
            DirectionConfig::Both => Direction::Both,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub cells_per_edge: Option<usize>,
    pub cells_per_unit: Option<f64>,
    pub horizon: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub direction: DirectionConfig,
}

fn default_cfl() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub root_alpha: f64,
    pub root_xstar: f64,
    pub beta: f64,
    /// Absolute values of `s`; when absent, `s_multiples / max|φ|`.
    pub s_grid: Option<Vec<f64>>,
    #[serde(default = "default_s_multiples")]
    pub s_multiples: Vec<f64>,
}

fn default_s_multiples() -> Vec<f64> {
    vec![5.0, 10.0, 20.0, 40.0]
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentsConfig {
    /// Vertex-compatible pair built from the tree: a potential drop at rest
    /// and a constant voltage carrying a flow.
    #[default]
    TreePotentials,
    Explicit {
        first: ProblemSpec,
        second: ProblemSpec,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationShape {
    #[default]
    PiecewiseConstant,
    EdgeBumps,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    #[serde(default)]
    pub shape: PerturbationShape,
    pub edges: Vec<EdgePerturbationConfig>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

fn default_epsilons() -> Vec<f64> {
    vec![0.01, 0.02, 0.05, 0.1]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgePerturbationConfig {
    pub id: EdgeId,
    pub values: [f64; 4],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectConfig {
    #[serde(default = "default_margin")]
    pub margin: usize,
    #[serde(default = "default_condition_limit")]
    pub condition_limit: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            margin: default_margin(),
            condition_limit: default_condition_limit(),
        }
    }
}

fn default_margin() -> usize {
    DirectOptions::for_simulation().margin
}

fn default_condition_limit() -> f64 {
    DirectOptions::for_simulation().condition_limit
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsqConfig {
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Relative Gaussian noise added to the derivative channels.
    #[serde(default)]
    pub noise: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Starting edge constants, edge-major; zeros when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for LsqConfig {
    fn default() -> Self {
        Self {
            max_iterations: default_iterations(),
            noise: 0.0,
            tau: default_tau(),
            lambdas: default_lambdas(),
            initial: None,
        }
    }
}

fn default_iterations() -> usize {
    20
}

fn default_tau() -> f64 {
    1.1
}

fn default_lambdas() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 0.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Every `stride`-th level goes into trajectory CSVs.
    #[serde(default = "default_stride")]
    pub stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            stride: default_stride(),
        }
    }
}

fn default_stride() -> usize {
    10
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = toml::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let network = base.join(&config.network.file);
        if !network.is_file() {
            return Err(CliError::Config(format!("network file {} does not exist", network.display())));
        }
        Ok((config, network))
    }
}

/// Everything a mode needs, built from a validated config.
pub struct Setup {
    pub config: ExperimentConfig,
    pub topo: NetworkTopology,
    pub coeffs: CoefficientField,
    pub grid: GridSpec,
}

impl Setup {
    pub fn build(config: ExperimentConfig, network: &Path) -> Result<Self, CliError> {
        let topo = NetworkTopology::load(network)?;
        let g = &config.grid;
        let mesh = match (g.cells_per_edge, g.cells_per_unit) {
            (Some(n), None) => Mesh::uniform(&topo, n)?,
            (None, Some(d)) => Mesh::by_density(&topo, d)?,
            _ => {
                return Err(CliError::Config(
                    "grid needs exactly one of cells_per_edge and cells_per_unit".into(),
                ))
            }
        };
        let c = &config.coefficients;
        for e in &c.edges {
            if topo.edge(e.id).is_none() {
                return Err(CliError::Config(format!("coefficients given for unknown edge {}", e.id)));
            }
            if e.values.is_some() == e.profiles.is_some() {
                return Err(CliError::Config(format!(
                    "edge {} needs exactly one of values and profiles",
                    e.id
                )));
            }
        }
        let coeffs = CoefficientField::from_fn(&mesh, |id, x| match c.edges.iter().find(|e| e.id == id) {
            Some(EdgeCoefficientConfig {
                values: Some(v), ..
            }) => *v,
            Some(EdgeCoefficientConfig {
                profiles: Some(p), ..
            }) => [p[0].value(x), p[1].value(x), p[2].value(x), p[3].value(x)],
            _ => c.default,
        })?;
        let grid = GridSpec::new(mesh, g.horizon, g.cfl, &coeffs)?;
        Ok(Self {
            config,
            topo,
            coeffs,
            grid,
        })
    }

    pub fn weights(&self) -> Result<WeightFamily, CliError> {
        let w = self
            .config
            .weights
            .as_ref()
            .ok_or_else(|| CliError::Config("this mode needs a [weights] table".into()))?;
        Ok(build_weights(&self.topo, w.root_alpha, w.root_xstar, w.beta, self.grid.horizon)?)
    }

    pub fn s_grid(&self, weights: &WeightFamily) -> Vec<f64> {
        match self.config.weights.as_ref() {
            Some(WeightConfig { s_grid: Some(s), .. }) => s.clone(),
            Some(w) => {
                let m = weights.max_abs(&self.topo).max(f64::MIN_POSITIVE);
                w.s_multiples.iter().map(|s| s / m).collect()
            }
            None => weights.default_s_grid(&self.topo),
        }
    }

    /// Background coefficients used to shape the tree-potential pair.
    pub fn background(&self) -> [f64; 4] {
        self.coeffs.as_uniform().unwrap_or(self.config.coefficients.default)
    }

    pub fn pair(&self) -> ExperimentPair {
        match &self.config.experiments {
            ExperimentsConfig::TreePotentials => ExperimentPair::tree_potentials(&self.topo, self.background()),
            ExperimentsConfig::Explicit { first, second } => ExperimentPair::new(first.to_data(), second.to_data()),
        }
    }

    pub fn perturbation(&self) -> Result<(CoefficientPerturbation, &PerturbationConfig), CliError> {
        let p = self
            .config
            .perturbation
            .as_ref()
            .ok_or_else(|| CliError::Config("this mode needs a [perturbation] table".into()))?;
        for e in &p.edges {
            if self.topo.edge(e.id).is_none() {
                return Err(CliError::Config(format!("perturbation given for unknown edge {}", e.id)));
            }
        }
        let values = p.edges.iter().map(|e| (e.id, e.values)).collect();
        let rho = match p.shape {
            PerturbationShape::PiecewiseConstant => CoefficientPerturbation::piecewise_constant(&self.grid.mesh, &values),
            PerturbationShape::EdgeBumps => CoefficientPerturbation::edge_bumps(&self.grid.mesh, &values),
        };
        Ok((rho, p))
    }
}
