//! Physical profiles, particle-number statistics, density correlations and
//! entanglement data of a state.
//!
//! All expectation values use the pairing `tr(ρ(x) A σ(x) B†) / N` with
//! `N = tr(ρ(0) σ(0))`.

use alloc::vec;
use alloc::vec::Vec;

use crate::beta::BetaTable;
use crate::energy::{contract, HamiltonianSpec};
use crate::envelope::{propagate_with_source, Direction, Envelopes, SegmentFlow, TaylorTolerance};
use crate::error::{invalid, Error, Result};
use crate::gradient::sandwich;
use crate::linalg::{commutator, general_eigenvalues, trace_product, CMatrix};
use crate::math;
use crate::mesh::{Orientation, SegmentPolynomial};
use crate::state::CmpsState;

/// Channels sampled at a list of positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub positions: Vec<f64>,
    pub density: Vec<f64>,
    pub kinetic: Vec<f64>,
    pub potential: Vec<f64>,
    pub interaction: Vec<f64>,
    /// `|⟨ψ(x)⟩|`
    pub order_parameter: Vec<f64>,
}

impl Profile {
    pub const COLUMNS: [&'static str; 6] = ["x", "density", "kinetic", "potential", "interaction", "orderParameter"];

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Row `i` in [`Profile::COLUMNS`] order.
    pub fn row(&self, i: usize) -> [f64; 6] {
        [
            self.positions[i],
            self.density[i],
            self.kinetic[i],
            self.potential[i],
            self.interaction[i],
            self.order_parameter[i],
        ]
    }
}

/// Schmidt weights and entropies for a set of cuts.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementData {
    pub cuts: Vec<f64>,
    /// Descending weights per cut, summing to one.
    pub weights: Vec<Vec<f64>>,
    /// Von Neumann entropy in nats.
    pub entropy: Vec<f64>,
}

/// Mean and variance of the particle number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleStatistics {
    pub mean: f64,
    pub variance: f64,
}

impl ParticleStatistics {
    pub fn std_dev(&self) -> f64 {
        math::sqrt(self.variance.max(0.0))
    }
}

/// A state together with its envelopes, ready for measurements.
#[derive(Debug, Clone)]
pub struct Observer<'a> {
    state: &'a CmpsState,
    envelopes: Envelopes,
    norm: f64,
    tol: TaylorTolerance,
}

struct Local {
    k: usize,
    t: f64,
    rho: CMatrix,
    sigma: CMatrix,
    q: CMatrix,
    r: CMatrix,
}

impl<'a> Observer<'a> {
    pub fn new(state: &'a CmpsState, tol: &TaylorTolerance) -> Result<Self> {
        let envelopes = Envelopes::compute(state, tol)?;
        Self::with_envelopes(state, envelopes, tol)
    }

    pub fn with_envelopes(state: &'a CmpsState, envelopes: Envelopes, tol: &TaylorTolerance) -> Result<Self> {
        let norm = envelopes.norm()?;
        Ok(Self {
            state,
            envelopes,
            norm,
            tol: tol.clone(),
        })
    }

    pub fn envelopes(&self) -> &Envelopes {
        &self.envelopes
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    fn local(&self, x: f64) -> Result<Local> {
        let (k, t) = self.state.mesh().locate(x)?;
        Ok(Local {
            k,
            t,
            rho: self.envelopes.left.at_local(k, t),
            sigma: self.envelopes.right.at_local(k, t),
            q: self.state.q().at_local(k, t),
            r: self.state.r().at_local(k, t),
        })
    }

    fn pair(&self, rho: &CMatrix, a: &CMatrix, sigma: &CMatrix, b: &CMatrix) -> f64 {
        let inner = a * sigma * b.adjoint();
        trace_product(rho, &inner).re / self.norm
    }

    /// Density, energy channels and order parameter at `positions`.
    pub fn profiles(&self, spec: &HamiltonianSpec, positions: &[f64]) -> Result<Profile> {
        spec.potential.check_mesh(self.state.mesh())?;
        let n = positions.len();
        let mut p = Profile {
            positions: positions.to_vec(),
            density: Vec::with_capacity(n),
            kinetic: Vec::with_capacity(n),
            potential: Vec::with_capacity(n),
            interaction: Vec::with_capacity(n),
            order_parameter: Vec::with_capacity(n),
        };
        let mesh = self.state.mesh();
        for &x in positions {
            let l = self.local(x)?;
            let slope =
                (&self.state.r_nodes()[l.k + 1] - &self.state.r_nodes()[l.k]) / crate::linalg::real(mesh.width(l.k));
            let dr = commutator(&l.q, &l.r) + slope;
            let r2 = &l.r * &l.r;
            let density = self.pair(&l.rho, &l.r, &l.sigma, &l.r);
            let v = spec.potential.eval_local(l.k, l.t) - spec.mu;
            p.density.push(density);
            p.kinetic.push(self.pair(&l.rho, &dr, &l.sigma, &dr));
            p.potential.push(v * density);
            p.interaction.push(spec.g * self.pair(&l.rho, &r2, &l.sigma, &r2));
            p.order_parameter
                .push(trace_product(&l.rho, &(&l.r * &l.sigma)).norm() / self.norm);
        }
        Ok(p)
    }

    /// `|⟨ψ(x)⟩|` at `positions`.
    pub fn order_parameter(&self, positions: &[f64]) -> Result<Vec<f64>> {
        positions
            .iter()
            .map(|&x| {
                let l = self.local(x)?;
                Ok(trace_product(&l.rho, &(&l.r * &l.sigma)).norm() / self.norm)
            })
            .collect()
    }

    /// `(R(t), R(1−t))` coefficient lists of segment `k`: `[R_k, R_{k+1} − R_k]`
    /// in powers of `t` and `[R_{k+1}, R_k − R_{k+1}]` in powers of `1 − t`.
    fn r_coefficients(&self, k: usize) -> (Vec<CMatrix>, Vec<CMatrix>) {
        let r0 = &self.state.r_nodes()[k];
        let r1 = &self.state.r_nodes()[k + 1];
        (vec![r0.clone(), r1 - r0], vec![r1.clone(), r0 - r1])
    }

    /// `Σ_k Δ_k ∫ tr(ρ R X R†) dt / N` for a right-type envelope `X`.
    fn integrate_density_against(&self, right: &[SegmentPolynomial]) -> f64 {
        let mesh = self.state.mesh();
        let max_left = self.envelopes.left.max_order();
        let max_right = right.iter().map(|s| s.degree()).max().unwrap_or(0);
        let beta = BetaTable::new(max_left + max_right + 2);
        let mut total = 0.0;
        for (k, x) in right.iter().enumerate() {
            let (a, b) = self.r_coefficients(k);
            let (v, _) = contract(
                &self.envelopes.left.segments[k].coefficients,
                &x.coefficients,
                &a,
                &b,
                &beta,
            );
            total += mesh.width(k) * v.re;
        }
        total / self.norm
    }

    /// `⟨N̂⟩` and `⟨N̂²⟩ − ⟨N̂⟩²`.
    ///
    /// `⟨N̂²⟩ = ⟨N̂⟩ + 2 ∫_{x<y} ⟨ψ†(x)ψ†(y)ψ(y)ψ(x)⟩`; the inner integral over
    /// `y` is the right-flow environment `C(x)` with source `R σ R†`, so the
    /// double integral costs one extra sweep.
    pub fn particle_number(&self) -> Result<ParticleStatistics> {
        let mean = self.integrate_density_against(&self.envelopes.right.segments);
        let d = self.state.dim();
        let sources: Vec<SegmentPolynomial> = (0..self.state.mesh().num_segments())
            .map(|k| {
                let (_, b) = self.r_coefficients(k);
                let c = sandwich(&b, &self.envelopes.right.segments[k].coefficients, &b);
                SegmentPolynomial::new(c, Orientation::Right)
            })
            .collect();
        let env = propagate_with_source(self.state, Direction::Right, CMatrix::zeros(d, d), &sources, &self.tol)?;
        let pairs = self.integrate_density_against(&env.segments);
        let second = mean + 2.0 * pairs;
        Ok(ParticleStatistics {
            mean,
            variance: second - mean * mean,
        })
    }

    /// `⟨ψ†(x)ψ†(y)ψ(y)ψ(x)⟩` for `x < y`.
    pub fn density_correlator(&self, x: f64, y: f64) -> Result<f64> {
        if !(x < y) {
            return Err(invalid("density correlator needs x < y"));
        }
        let mesh = self.state.mesh();
        let ly = self.local(y)?;
        let lx = self.local(x)?;
        let q = self.state.q_nodes();
        let r = self.state.r_nodes();
        let mut carry = &ly.r * &ly.sigma * ly.r.adjoint();
        let hop = |flow: SegmentFlow, seed: CMatrix, k: usize| -> Result<CMatrix> {
            let (c, _) = flow.propagate(seed, None, &self.tol, k)?;
            Ok(SegmentPolynomial::new(c, Orientation::Right).sum())
        };
        if lx.k == ly.k {
            let w = (ly.t - lx.t) * mesh.width(lx.k);
            carry = hop(SegmentFlow::right_between(&ly.q, &lx.q, &ly.r, &lx.r, w), carry, lx.k)?;
        } else {
            let w = ly.t * mesh.width(ly.k);
            carry = hop(
                SegmentFlow::right_between(&ly.q, &q[ly.k], &ly.r, &r[ly.k], w),
                carry,
                ly.k,
            )?;
            for k in (lx.k + 1..ly.k).rev() {
                let flow = SegmentFlow::right(&q[k], &q[k + 1], &r[k], &r[k + 1], mesh.width(k));
                carry = hop(flow, carry, k)?;
            }
            let w = (1.0 - lx.t) * mesh.width(lx.k);
            let flow = SegmentFlow::right_between(&q[lx.k + 1], &lx.q, &r[lx.k + 1], &lx.r, w);
            carry = hop(flow, carry, lx.k)?;
        }
        Ok(self.pair(&lx.rho, &lx.r, &carry, &lx.r))
    }

    /// Schmidt weights from the spectrum of `ρ(x)σ(x)` at each cut.
    ///
    /// `ρσ` is similar to the positive matrix `ρ^{1/2} σ ρ^{1/2}`, so its
    /// eigenvalues are real and nonnegative up to roundoff.
    pub fn entanglement(&self, cuts: &[f64]) -> Result<EntanglementData> {
        let length = self.state.mesh().length();
        let mut weights = Vec::with_capacity(cuts.len());
        let mut entropy = Vec::with_capacity(cuts.len());
        for &x in cuts {
            if !(x > 0.0 && x < length) {
                return Err(Error::OutOfDomain { x, length });
            }
            let l = self.local(x)?;
            let prod = &l.rho * &l.sigma;
            let tr = prod.trace().re;
            if !(tr > 0.0) {
                return Err(Error::NumericalBreakdown(alloc::format!("tr(ρσ) = {tr} at x = {x}")));
            }
            let mut w = Vec::with_capacity(prod.nrows());
            for z in general_eigenvalues(&prod) {
                let z = z / tr;
                if math::abs(z.im) > 1e-8 {
                    return Err(Error::NumericalBreakdown(alloc::format!(
                        "complex Schmidt weight {z} at x = {x}"
                    )));
                }
                w.push(if z.re < 1e-16 { 0.0 } else { z.re });
            }
            w.sort_by(|a, b| b.total_cmp(a));
            entropy.push(w.iter().filter(|&&v| v > 0.0).map(|&v| -v * math::ln(v)).sum());
            weights.push(w);
        }
        Ok(EntanglementData {
            cuts: cuts.to_vec(),
            weights,
            entropy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real;
    use crate::mesh::{Mesh, PiecewiseLinear};
    use crate::reference::tonks_girardeau_state;
    use core::f64::consts::PI;

    fn coherent(mesh: &Mesh, f: impl Fn(f64) -> f64) -> CmpsState {
        // D = 1 with Q = −R²/2 keeps ρσ = 1
        let r = PiecewiseLinear::from_fn(mesh.clone(), |x| CMatrix::from_element(1, 1, real(f(x)))).unwrap();
        let q = PiecewiseLinear::new(mesh.clone(), r.nodes().iter().map(|m| m * m * real(-0.5)).collect()).unwrap();
        CmpsState::with_default_boundaries(q, r, false).unwrap()
    }

    #[test]
    fn coherent_density_and_correlator() {
        let mesh = Mesh::uniform(2.0, 5).unwrap();
        let f = |x: f64| 0.5 + 0.3 * x;
        let s = coherent(&mesh, f);
        let obs = Observer::new(&s, &TaylorTolerance::default()).unwrap();
        let spec = HamiltonianSpec::free(1.0, 0.0, &mesh).unwrap();
        let p = obs.profiles(&spec, mesh.points()).unwrap();
        for (x, n) in mesh.points().iter().zip(&p.density) {
            assert!((n - f(*x).powi(2)).abs() < 1e-14);
        }
        let c = obs.density_correlator(0.3, 1.7).unwrap();
        assert!((c - f(0.3).powi(2) * f(1.7).powi(2)).abs() < 1e-12);
        let c = obs.density_correlator(0.45, 0.5).unwrap();
        assert!((c - f(0.45).powi(2) * f(0.5).powi(2)).abs() < 1e-12);
        let stats = obs.particle_number().unwrap();
        assert!((stats.variance / stats.mean - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tg_single_particle() {
        let mesh = Mesh::uniform(1.0, 64).unwrap();
        let s = tonks_girardeau_state(1, &mesh).unwrap();
        let obs = Observer::new(&s, &TaylorTolerance::default()).unwrap();
        let e = obs.entanglement(&[0.5]).unwrap();
        assert!((e.entropy[0] - 2f64.ln()).abs() < 1e-3);
        assert!((e.weights[0][0] - 0.5).abs() < 1e-3);
        assert!(obs.density_correlator(0.2, 0.6).unwrap().abs() < 1e-8);
        assert!(obs
            .order_parameter(&[0.1, 0.5, 0.77])
            .unwrap()
            .iter()
            .all(|v| *v < 1e-10));
    }

    #[test]
    fn tg_two_particles_is_number_eigenstate() {
        let mesh = Mesh::uniform(1.0, 256).unwrap();
        let s = tonks_girardeau_state(2, &mesh).unwrap();
        let obs = Observer::new(&s, &TaylorTolerance::default()).unwrap();
        let stats = obs.particle_number().unwrap();
        assert!((stats.mean - 2.0).abs() < 1e-6, "{stats:?}");
        assert!(stats.variance.abs() < 1e-8, "{stats:?}");
        let p = obs
            .profiles(&HamiltonianSpec::free(0.0, 0.0, &mesh).unwrap(), &[0.25])
            .unwrap();
        let exact = 2.0 * ((PI * 0.25).sin().powi(2) + (2.0 * PI * 0.25).sin().powi(2));
        assert!((p.density[0] - exact).abs() < 1e-3);
    }

    #[test]
    fn entanglement_rejects_walls() {
        let mesh = Mesh::uniform(1.0, 4).unwrap();
        let s = tonks_girardeau_state(1, &mesh).unwrap();
        let obs = Observer::new(&s, &TaylorTolerance::default()).unwrap();
        assert!(obs.entanglement(&[0.0]).is_err());
        assert!(obs.entanglement(&[1.0]).is_err());
    }
}
