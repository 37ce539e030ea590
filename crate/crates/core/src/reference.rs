//! Exact reference solutions: the Tonks-Girardeau state and free fermions in
//! a box, plus benchmark constants.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::linalg::{basis_vector, identity, kron_all, real, CMatrix};
use crate::math;
use crate::mesh::{Mesh, PiecewiseLinear};
use crate::state::CmpsState;

/// Largest particle number accepted by [`tonks_girardeau_state`]
/// (`D = 2^N`).
pub const MAX_TG_PARTICLES: usize = 10;

/// Exact hard-core boson ground state with `n` particles on `mesh`:
/// `Q = 0` and `R(x) = Σ_k Z^{⊗(k−1)} ⊗ a_k(x) ⊗ 1^{⊗(n−k)}` with
/// `a_k(x) = √(2/L) sin(πkx/L) |0⟩⟨1|`. Boundaries are `|0…0⟩` on the left
/// and `|1…1⟩` on the right.
pub fn tonks_girardeau_state(n: usize, mesh: &Mesh) -> Result<CmpsState> {
    if n == 0 {
        return Err(invalid("Tonks-Girardeau state needs at least one particle"));
    }
    if n > MAX_TG_PARTICLES {
        return Err(invalid(alloc::format!(
            "Tonks-Girardeau state with {n} particles exceeds the limit of {MAX_TG_PARTICLES}"
        )));
    }
    let d = 1usize << n;
    let length = mesh.length();
    let mut z = identity(2);
    z[(1, 1)] = real(-1.0);
    let mut lowering = CMatrix::zeros(2, 2);
    lowering[(0, 1)] = real(1.0);
    // the x-independent operators multiplying each mode function
    let modes: Vec<CMatrix> = (0..n)
        .map(|k| {
            let factors: Vec<CMatrix> = (0..n)
                .map(|j| match j.cmp(&k) {
                    core::cmp::Ordering::Less => z.clone(),
                    core::cmp::Ordering::Equal => lowering.clone(),
                    core::cmp::Ordering::Greater => identity(2),
                })
                .collect();
            kron_all(&factors)
        })
        .collect();
    let amplitude = math::sqrt(2.0 / length);
    let last = mesh.num_points() - 1;
    let nodes: Vec<CMatrix> = mesh
        .points()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut r = CMatrix::zeros(d, d);
            if i == 0 || i == last {
                return r;
            }
            for (k, m) in modes.iter().enumerate() {
                let f = amplitude * math::sin(PI * (k + 1) as f64 * x / length);
                r += m * real(f);
            }
            r
        })
        .collect();
    for r in &nodes {
        let sq = r * r;
        if sq.iter().any(|z| z.norm() > 1e-12 * (1.0 + r.norm_squared())) {
            return Err(crate::Error::NumericalBreakdown(
                "Tonks-Girardeau R(x) is not nilpotent".into(),
            ));
        }
    }
    let q = PiecewiseLinear::zeros(mesh.clone(), d);
    let r = PiecewiseLinear::new(mesh.clone(), nodes)?;
    CmpsState::new(q, r, basis_vector(d, 0), basis_vector(d, d - 1), true)
}

/// Ground state of free fermions in a hard-wall box of length `length` at
/// chemical potential `mu`: number of filled modes and energy
/// `Σ_k (kπ/L)² − Nμ`.
pub fn free_fermion_box(mu: f64, length: f64) -> (usize, f64) {
    let mut n = 0;
    let mut energy = 0.0;
    loop {
        let k = (n + 1) as f64 * PI / length;
        if k * k >= mu {
            break;
        }
        energy += k * k - mu;
        n += 1;
    }
    (n, energy)
}

/// Free-fermion density `(2/L) Σ_{k≤n} sin²(πkx/L)`.
pub fn free_fermion_density(n: usize, length: f64, x: f64) -> f64 {
    (1..=n)
        .map(|k| {
            let s = math::sin(PI * k as f64 * x / length);
            2.0 / length * s * s
        })
        .sum()
}

/// A published benchmark value and what it measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Benchmark {
    pub value: f64,
    pub description: &'static str,
}

/// Benchmark numbers used by the regression and acceptance tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConstants {
    pub tg_exact_energy: Benchmark,
    pub tg_d8_energy: Benchmark,
    pub casimir_energy: Benchmark,
    pub casimir_bulk_energy_density: Benchmark,
    pub casimir_bulk_density: Benchmark,
    pub casimir_boundary_energy: Benchmark,
    pub casimir_particle_number: Benchmark,
    pub casimir_particle_std: Benchmark,
    pub casimir_order_parameter: Benchmark,
    pub sine_gamma: Benchmark,
}

impl ReferenceConstants {
    pub const fn new() -> Self {
        Self {
            tg_exact_energy: Benchmark {
                value: -594.643,
                description: "free fermions, N=4, L=1, mu=(4.75 pi)^2: 30 pi^2 - 4 mu",
            },
            tg_d8_energy: Benchmark {
                value: -594.45,
                description: "optimized D=8 state, 32 uniform segments, g=1e6, mu=(4.75 pi)^2",
            },
            casimir_energy: Benchmark {
                value: -221056.1,
                description: "box energy, D=64, mu=10000, g=1000, 300 Chebyshev points",
            },
            casimir_bulk_energy_density: Benchmark {
                value: -226719.9,
                description: "uniform energy density, D=64, mu=10000, g=1000",
            },
            casimir_bulk_density: Benchmark {
                value: 34.7840,
                description: "uniform particle density, D=64, mu=10000, g=1000",
            },
            casimir_boundary_energy: Benchmark {
                value: 5663.8,
                description: "boundary energy E - L e_inf, D=64, mu=10000, g=1000",
            },
            casimir_particle_number: Benchmark {
                value: 33.9999,
                description: "mean particle number in the box, D=64, mu=10000, g=1000",
            },
            casimir_particle_std: Benchmark {
                value: 0.0256,
                description: "particle-number standard deviation, D=64, mu=10000, g=1000",
            },
            casimir_order_parameter: Benchmark {
                value: 0.0016,
                description: "max |<psi(x)>| in the box, D=64, mu=10000, g=1000",
            },
            sine_gamma: Benchmark {
                value: 1.0509966,
                description: "g / mean density for V = mu sin(15 pi x), mu=1749, g=35",
            },
        }
    }

    /// All entries with short names, for reporting.
    pub fn entries(&self) -> Vec<(&'static str, Benchmark)> {
        vec![
            ("tg_exact_energy", self.tg_exact_energy),
            ("tg_d8_energy", self.tg_d8_energy),
            ("casimir_energy", self.casimir_energy),
            ("casimir_bulk_energy_density", self.casimir_bulk_energy_density),
            ("casimir_bulk_density", self.casimir_bulk_density),
            ("casimir_boundary_energy", self.casimir_boundary_energy),
            ("casimir_particle_number", self.casimir_particle_number),
            ("casimir_particle_std", self.casimir_particle_std),
            ("casimir_order_parameter", self.casimir_order_parameter),
            ("sine_gamma", self.sine_gamma),
        ]
    }
}

impl Default for ReferenceConstants {
    fn default() -> Self {
        Self::new()
    }
}

pub const REFERENCE: ReferenceConstants = ReferenceConstants::new();

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{evaluate_energy, HamiltonianSpec};
    use crate::envelope::TaylorTolerance;

    #[test]
    fn single_particle_matrix() {
        let mesh = Mesh::uniform(1.0, 4).unwrap();
        let s = tonks_girardeau_state(1, &mesh).unwrap();
        let r = &s.r_nodes()[1];
        assert!((r[(0, 1)].re - 2f64.sqrt() * (PI / 4.0).sin()).abs() < 1e-15);
        assert_eq!(r[(1, 0)], real(0.0));
        assert_eq!(r[(0, 0)], real(0.0));
    }

    #[test]
    fn free_fermion_counts() {
        let mu = (4.75 * PI).powi(2);
        let (n, e) = free_fermion_box(mu, 1.0);
        assert_eq!(n, 4);
        assert!((e - (30.0 * PI * PI - 4.0 * mu)).abs() < 1e-10);
        assert!((e + 594.643).abs() < 1e-3);
        assert_eq!(free_fermion_box(0.0, 1.0), (0, 0.0));
        let (n, e) = free_fermion_box((1.5 * PI).powi(2), 1.0);
        assert_eq!(n, 1);
        assert!((e - (PI * PI - (1.5 * PI).powi(2))).abs() < 1e-12);
    }

    #[test]
    fn interaction_vanishes_for_tg() {
        let mesh = Mesh::uniform(1.0, 16).unwrap();
        let s = tonks_girardeau_state(3, &mesh).unwrap();
        let spec = HamiltonianSpec::free(1e6, 50.0, &mesh).unwrap();
        let (rep, _) = evaluate_energy(&s, &spec, &TaylorTolerance::default()).unwrap();
        assert!(rep.interaction.abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_particle_numbers() {
        let mesh = Mesh::uniform(1.0, 4).unwrap();
        assert!(tonks_girardeau_state(0, &mesh).is_err());
        assert!(tonks_girardeau_state(MAX_TG_PARTICLES + 1, &mesh).is_err());
    }
}
