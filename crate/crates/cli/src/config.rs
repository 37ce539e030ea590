//! Run configuration: a TOML file with `[problem]`, `[ansatz]`,
//! `[optimizer]`, `[uniform]` and `[io]` sections.
//!
//! ```toml
//! [problem]
//! length = 1.0
//! mu = 222.66      # chemical potential
//! g = 1e6
//! boundary = "dirichlet"           # or "open"
//! potential = { kind = "sine", amplitude = 1749.0, wavenumber = 15.0, degree = 6 }
//!
//! [ansatz]
//! bond_dim = 8
//! mesh = "uniform"                 # "chebyshev" | "explicit"
//! segments = 32                    # or points = [0.0, ..., L] for "explicit"
//!
//! [optimizer]
//! max_iterations = 1500
//! init = "uniform"                 # or "random"
//! taper_width = 0.1
//!
//! [io]
//! out_dir = "runs/tg"
//! checkpoint_every = 100
//! ```
//!
//! Every key not listed in the structs below is rejected.

use std::path::{Path, PathBuf};

use cmps_core::optimize::{BondEvent, CouplingStage, MeshChange, OptimizeOptions, RefinementEvent};
use cmps_core::uniform::UniformOptions;
use cmps_core::{HamiltonianSpec, Mesh, Potential, TaylorTolerance};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub uniform: UniformConfig,
    #[serde(default)]
    pub io: IoConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub length: f64,
    pub mu: f64,
    pub g: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Dirichlet,
    Open,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Zero,
    Constant {
        value: f64,
    },
    Sine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default = "default_degree")]
        degree: usize,
    },
    Harmonic {
        curvature: f64,
        center: f64,
    },
    Polynomial {
        coefficients: Vec<f64>,
    },
}

fn default_degree() -> usize {
    cmps_core::potential::DEFAULT_POTENTIAL_DEGREE
}

impl PotentialConfig {
    pub fn potential(&self) -> Potential {
        match self {
            PotentialConfig::Zero => Potential::Zero,
            PotentialConfig::Constant { value } => Potential::Constant(*value),
            PotentialConfig::Sine {
                amplitude, wavenumber, ..
            } => Potential::Sine {
                amplitude: *amplitude,
                wavenumber: *wavenumber,
            },
            PotentialConfig::Harmonic { curvature, center } => Potential::Harmonic {
                curvature: *curvature,
                center: *center,
            },
            PotentialConfig::Polynomial { coefficients } => Potential::Polynomial(coefficients.clone()),
        }
    }

    pub fn degree(&self) -> usize {
        match self {
            PotentialConfig::Zero | PotentialConfig::Constant { .. } => 0,
            PotentialConfig::Sine { degree, .. } => *degree,
            PotentialConfig::Harmonic { .. } => 2,
            PotentialConfig::Polynomial { coefficients } => coefficients.len().saturating_sub(1),
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            PotentialConfig::Zero => vec![],
            PotentialConfig::Constant { value } => vec![*value],
            PotentialConfig::Sine {
                amplitude, wavenumber, ..
            } => vec![*amplitude, *wavenumber],
            PotentialConfig::Harmonic { curvature, center } => vec![*curvature, *center],
            PotentialConfig::Polynomial { coefficients } => coefficients.clone(),
        }
    }
}

impl ProblemConfig {
    /// The Hamiltonian on `mesh`.
    pub fn hamiltonian(&self, mesh: &Mesh) -> Result<HamiltonianSpec, CliError> {
        let potential = self.potential.potential().discretize(mesh, self.potential.degree());
        Ok(HamiltonianSpec::new(self.g, self.mu, potential)?)
    }

    pub fn dirichlet(&self) -> bool {
        self.boundary == Boundary::Dirichlet
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(CliError::config("problem.length", "must be positive and finite"));
        }
        if !self.mu.is_finite() {
            return Err(CliError::config("problem.mu", "must be finite"));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(CliError::config("problem.g", "must be finite and non-negative"));
        }
        if self.potential.values().iter().any(|v| !v.is_finite()) {
            return Err(CliError::config("problem.potential", "parameters must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshKind {
    #[default]
    Uniform,
    Chebyshev,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    pub bond_dim: usize,
    #[serde(default)]
    pub mesh: MeshKind,
    pub segments: Option<usize>,
    pub points: Option<Vec<f64>>,
}

impl AnsatzConfig {
    pub fn mesh(&self, length: f64) -> Result<Mesh, CliError> {
        let segments = || {
            self.segments
                .filter(|&k| k > 0)
                .ok_or_else(|| CliError::config("ansatz.segments", "required (≥ 1) for uniform and chebyshev meshes"))
        };
        let mesh = match self.mesh {
            MeshKind::Uniform => Mesh::uniform(length, segments()?)?,
            MeshKind::Chebyshev => Mesh::chebyshev(length, segments()?)?,
            MeshKind::Explicit => {
                let points = self
                    .points
                    .clone()
                    .ok_or_else(|| CliError::config("ansatz.points", "required for an explicit mesh"))?;
                let mesh = Mesh::new(points)?;
                if (mesh.length() - length).abs() > 1e-12 * length {
                    return Err(CliError::config("ansatz.points", "must span [0, problem.length]"));
                }
                mesh
            }
        };
        Ok(mesh)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    /// Uniform solution at the same `(D, μ, g)`, tapered to zero at the walls.
    #[default]
    Uniform,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinementConfig {
    pub iteration: usize,
    /// Points to insert; all segment midpoints when absent.
    pub points: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondConfig {
    pub iteration: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub g: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Regularization of the block preconditioner; `0` turns it off.
    pub preconditioner: f64,
    pub memory: usize,
    pub taylor_epsilon: f64,
    pub taylor_max_order: usize,
    pub bond_noise: f64,
    pub refinement_budget: usize,
    pub seed: u64,
    pub init: InitKind,
    pub taper_width: f64,
    pub refinement_schedule: Vec<RefinementConfig>,
    pub bond_schedule: Vec<BondConfig>,
    pub coupling_schedule: Vec<CouplingConfig>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let opts = OptimizeOptions::default();
        Self {
            max_iterations: opts.max_iterations,
            gradient_tolerance: opts.gradient_tolerance,
            preconditioner: opts.preconditioner.unwrap_or(0.0),
            memory: opts.lbfgs.memory,
            taylor_epsilon: opts.taylor.epsilon,
            taylor_max_order: opts.taylor.max_order,
            bond_noise: opts.bond_noise,
            refinement_budget: opts.refinement_budget,
            seed: opts.seed,
            init: InitKind::default(),
            taper_width: 0.1,
            refinement_schedule: Vec::new(),
            bond_schedule: Vec::new(),
            coupling_schedule: Vec::new(),
        }
    }
}

impl OptimizerConfig {
    pub fn taylor(&self) -> TaylorTolerance {
        TaylorTolerance {
            epsilon: self.taylor_epsilon,
            max_order: self.taylor_max_order,
        }
    }

    pub fn options(&self) -> Result<OptimizeOptions, CliError> {
        let mut opts = OptimizeOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            taylor: self.taylor(),
            bond_noise: self.bond_noise,
            refinement_budget: self.refinement_budget,
            preconditioner: (self.preconditioner > 0.0).then_some(self.preconditioner),
            seed: self.seed,
            refinement_schedule: self
                .refinement_schedule
                .iter()
                .map(|r| RefinementEvent {
                    iteration: r.iteration,
                    change: match &r.points {
                        Some(p) => MeshChange::Insert(p.clone()),
                        None => MeshChange::Midpoints,
                    },
                })
                .collect(),
            bond_schedule: self
                .bond_schedule
                .iter()
                .map(|b| BondEvent {
                    iteration: b.iteration,
                    dim: b.dim,
                })
                .collect(),
            coupling_schedule: self
                .coupling_schedule
                .iter()
                .map(|c| CouplingStage {
                    g: c.g,
                    iterations: c.iterations,
                })
                .collect(),
            ..OptimizeOptions::default()
        };
        opts.lbfgs.memory = self.memory;
        opts.validate()
            .map_err(|e| CliError::config("optimizer", e.to_string()))?;
        if self.preconditioner < 0.0 {
            return Err(CliError::config(
                "optimizer.preconditioner",
                "must be 0 (off) or in (0, 1)",
            ));
        }
        Ok(opts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniformConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    /// Regularization of the block preconditioner; `0` turns it off.
    pub preconditioner: f64,
    pub seed: u64,
    /// Bond dimension; defaults to `ansatz.bond_dim`.
    pub bond_dim: Option<usize>,
}

impl Default for UniformConfig {
    fn default() -> Self {
        let opts = UniformOptions::default();
        Self {
            max_iterations: opts.minimize.max_iterations,
            gradient_tolerance: opts.minimize.gradient_tolerance,
            preconditioner: opts.preconditioner.unwrap_or(0.0),
            seed: opts.seed,
            bond_dim: None,
        }
    }
}

impl UniformConfig {
    pub fn options(&self) -> UniformOptions {
        let mut opts = UniformOptions {
            seed: self.seed,
            preconditioner: (self.preconditioner > 0.0).then_some(self.preconditioner),
            ..UniformOptions::default()
        };
        opts.minimize.max_iterations = self.max_iterations;
        opts.minimize.gradient_tolerance = self.gradient_tolerance;
        opts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    pub out_dir: Option<PathBuf>,
    /// Write a checkpoint every this many iterations; `0` only at the end.
    pub checkpoint_every: usize,
    /// Number of evenly spaced profile samples, walls included.
    pub samples: usize,
    /// Entanglement cut specification, see [`crate::output::parse_cuts`].
    pub cuts: String,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            out_dir: None,
            checkpoint_every: 0,
            samples: 201,
            cuts: "uniform:99".into(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config = Self::parse(&text)?;
        Ok((config, text))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.problem.validate()?;
        if self.ansatz.bond_dim == 0 {
            return Err(CliError::config("ansatz.bond_dim", "must be at least 1"));
        }
        self.ansatz.mesh(self.problem.length)?;
        self.optimizer.options()?;
        let taper = self.optimizer.taper_width;
        if self.optimizer.init == InitKind::Uniform && !(taper > 0.0 && taper < 0.5 * self.problem.length) {
            return Err(CliError::config("optimizer.taper_width", "must lie in (0, L/2)"));
        }
        if self.io.samples < 2 {
            return Err(CliError::config("io.samples", "must be at least 2"));
        }
        crate::output::parse_cuts(&self.io.cuts, self.problem.length)
            .map_err(|e| CliError::config("io.cuts", e.to_string()))?;
        Ok(())
    }

    pub fn uniform_bond_dim(&self) -> usize {
        self.uniform.bond_dim.unwrap_or(self.ansatz.bond_dim)
    }
}

/// Lowercase hex SHA-256 of the configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
