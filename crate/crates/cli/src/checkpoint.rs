//! JSON checkpoints. Matrices are stored column-major as `[re, im]` pairs;
//! floats round-trip exactly.

use std::path::Path;

use cmps_core::linalg::{CMatrix, CVector};
use cmps_core::uniform::UniformCmps;
use cmps_core::{CmpsState, Mesh, PiecewiseLinear};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ProblemConfig;
use crate::error::CliError;

pub const FORMAT_VERSION: u64 = 1;

type Entries = Vec<[f64; 2]>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateData {
    Box {
        dim: usize,
        dirichlet: bool,
        points: Vec<f64>,
        q: Vec<Entries>,
        r: Vec<Entries>,
        left: Entries,
        right: Entries,
    },
    /// A translation-invariant state: one `(Q, R)` pair.
    Uniform { dim: usize, q: Entries, r: Entries },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u64,
    pub code_version: String,
    pub config_sha256: String,
    pub problem: ProblemConfig,
    /// Iteration at which the state was saved, if it came from an optimizer.
    pub iteration: Option<usize>,
    pub energy: Option<f64>,
    pub state: StateData,
}

fn entries<'a>(values: impl Iterator<Item = &'a Complex64>) -> Entries {
    values.map(|z| [z.re, z.im]).collect()
}

fn matrix(d: usize, e: &Entries) -> Option<CMatrix> {
    (e.len() == d * d).then(|| CMatrix::from_iterator(d, d, e.iter().map(|[re, im]| Complex64::new(*re, *im))))
}

fn vector(d: usize, e: &Entries) -> Option<CVector> {
    (e.len() == d).then(|| CVector::from_iterator(d, e.iter().map(|[re, im]| Complex64::new(*re, *im))))
}

impl StateData {
    pub fn from_state(state: &CmpsState) -> Self {
        StateData::Box {
            dim: state.dim(),
            dirichlet: state.dirichlet(),
            points: state.mesh().points().to_vec(),
            q: state.q_nodes().iter().map(|m| entries(m.iter())).collect(),
            r: state.r_nodes().iter().map(|m| entries(m.iter())).collect(),
            left: entries(state.left_boundary().iter()),
            right: entries(state.right_boundary().iter()),
        }
    }

    pub fn from_uniform(state: &UniformCmps) -> Self {
        StateData::Uniform {
            dim: state.dim(),
            q: entries(state.q.iter()),
            r: entries(state.r.iter()),
        }
    }
}

impl Checkpoint {
    pub fn new(problem: &ProblemConfig, config_sha256: &str, state: StateData) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            code_version: crate::VERSION.into(),
            config_sha256: config_sha256.into(),
            problem: problem.clone(),
            iteration: None,
            energy: None,
            state,
        }
    }

    /// Writes through a temporary file so a crash never leaves a truncated
    /// checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::checkpoint(path, e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| CliError::checkpoint(path, "missing format_version"))?;
        if found != FORMAT_VERSION {
            return Err(CliError::Version {
                path: path.to_path_buf(),
                found,
                expected: FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| CliError::checkpoint(path, e.to_string()))
    }

    pub fn box_state(&self, path: &Path) -> Result<CmpsState, CliError> {
        let bad = |what: &str| CliError::checkpoint(path, format!("inconsistent {what}"));
        match &self.state {
            StateData::Box {
                dim,
                dirichlet,
                points,
                q,
                r,
                left,
                right,
            } => {
                let mesh = Mesh::new(points.clone())?;
                let nodes = |list: &Vec<Entries>, what: &str| {
                    list.iter()
                        .map(|e| matrix(*dim, e))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| bad(what))
                };
                let q = PiecewiseLinear::new(mesh.clone(), nodes(q, "Q nodes")?)?;
                let r = PiecewiseLinear::new(mesh, nodes(r, "R nodes")?)?;
                let left = vector(*dim, left).ok_or_else(|| bad("left boundary"))?;
                let right = vector(*dim, right).ok_or_else(|| bad("right boundary"))?;
                Ok(CmpsState::new(q, r, left, right, *dirichlet)?)
            }
            StateData::Uniform { .. } => Err(CliError::checkpoint(path, "holds a uniform state, not a box state")),
        }
    }

    pub fn uniform_state(&self, path: &Path) -> Result<UniformCmps, CliError> {
        match &self.state {
            StateData::Uniform { dim, q, r } => {
                let bad = || CliError::checkpoint(path, "inconsistent uniform matrices");
                let q = matrix(*dim, q).ok_or_else(bad)?;
                let r = matrix(*dim, r).ok_or_else(bad)?;
                Ok(UniformCmps::new(q, r)?)
            }
            StateData::Box { .. } => Err(CliError::checkpoint(path, "holds a box state, not a uniform state")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Boundary, PotentialConfig};
    use rand::SeedableRng;

    fn problem() -> ProblemConfig {
        ProblemConfig {
            length: 1.0,
            mu: 3.0,
            g: 1.0,
            boundary: Boundary::Dirichlet,
            potential: PotentialConfig::Zero,
        }
    }

    #[test]
    fn box_state_round_trips_exactly() {
        let mesh = Mesh::chebyshev(1.0, 5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let state = CmpsState::random(&mesh, 3, 0.7, 0.3, true, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        Checkpoint::new(&problem(), "abc", StateData::from_state(&state))
            .save(&path)
            .unwrap();
        let back = Checkpoint::load(&path).unwrap().box_state(&path).unwrap();
        assert_eq!(back, state);
    }

    #[test]
    fn version_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let mut c = Checkpoint::new(
            &problem(),
            "abc",
            StateData::Uniform {
                dim: 1,
                q: vec![[0.0, 0.0]],
                r: vec![[1.0, 0.0]],
            },
        );
        c.format_version = FORMAT_VERSION + 1;
        std::fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(CliError::Version { .. })));
    }
}
