//! Exact energy of a piecewise-linear cMPS.
//!
//! On segment `k` every channel of the Hamiltonian density has the form
//! `A(t) ⊗ conj(B(t))`, where `A` is kept in powers of `t` and `B` in powers
//! of `1 − t`. Pairing with `ρ` (powers of `t`) and `σ` (powers of `1 − t`)
//! gives
//!
//! ```text
//! E_k = Δ_k Σ_{n,a,m,b} β(n+a, m+b) · tr(ρ_n A_a σ_m B_b†)
//! ```
//!
//! with `β(p, q) = ∫₀¹ t^p (1−t)^q dt`.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::beta::BetaTable;
use crate::envelope::{Envelopes, TaylorTolerance};
use crate::error::{invalid, Error, Result};
use crate::linalg::{commutator, mul_acc, real, trace_product, CMatrix, ONE, ZERO};
use crate::mesh::{Mesh, Orientation, SegmentPolynomial};
use crate::potential::PotentialSpec;
use crate::state::CmpsState;

/// Lieb-Liniger Hamiltonian with an external potential.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSpec {
    /// Contact interaction strength, `g ≥ 0`.
    pub g: f64,
    /// Chemical potential.
    pub mu: f64,
    pub potential: PotentialSpec,
}

impl HamiltonianSpec {
    pub fn new(g: f64, mu: f64, potential: PotentialSpec) -> Result<Self> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(invalid("interaction strength must be finite and non-negative"));
        }
        if !mu.is_finite() {
            return Err(invalid("chemical potential must be finite"));
        }
        Ok(Self { g, mu, potential })
    }

    /// `V = 0` on `mesh`.
    pub fn free(g: f64, mu: f64, mesh: &Mesh) -> Result<Self> {
        Self::new(g, mu, PotentialSpec::zero(mesh))
    }

    /// The same Hamiltonian with the potential re-expanded on `fine`.
    pub fn refined(&self, coarse: &Mesh, fine: &Mesh) -> Result<Self> {
        Ok(Self {
            g: self.g,
            mu: self.mu,
            potential: self.potential.refined(coarse, fine)?,
        })
    }

    /// `V(t) − μ` on segment `k`.
    pub fn shifted_potential(&self, k: usize) -> Vec<f64> {
        let mut w = self.potential.segment(k).to_vec();
        w[0] -= self.mu;
        w
    }
}

/// Which physical term a set of coefficients belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Kinetic,
    Potential,
    Interaction,
}

/// `A(t) ⊗ conj(B(t))` with `A` in powers of `t` and `B` in powers of `1 − t`;
/// element `(a, b)` is `A_a ⊗ conj(B_b)` with weight `t^a (1−t)^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTerms {
    pub channel: Channel,
    pub left: Vec<CMatrix>,
    pub right: Vec<CMatrix>,
}

/// All channels of the Hamiltonian density on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentHamiltonianCoefficients {
    pub segment: usize,
    pub channels: Vec<ChannelTerms>,
}

impl SegmentHamiltonianCoefficients {
    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// `(a, b, A_a, B_b)` for every element.
    pub fn elements(&self) -> impl Iterator<Item = (usize, usize, &CMatrix, &CMatrix)> {
        self.channels.iter().flat_map(|c| {
            c.left
                .iter()
                .enumerate()
                .flat_map(move |(a, am)| c.right.iter().enumerate().map(move |(b, bm)| (a, b, am, bm)))
        })
    }
}

/// Coefficients `[C_0, C_1, C_2]` of `[Q(u), R(u)] + slope` with
/// `Q(u) = qa + u·dq`, `R(u) = ra + u·dr`.
pub(crate) fn covariant_coefficients(
    qa: &CMatrix,
    ra: &CMatrix,
    dq: &CMatrix,
    dr: &CMatrix,
    slope: &CMatrix,
) -> Vec<CMatrix> {
    let c0 = commutator(qa, ra) + slope;
    let c1 = commutator(qa, dr) + commutator(dq, ra);
    let c2 = commutator(dq, dr);
    vec![c0, c1, c2]
}

/// `[S_0, S_1, S_2]` of `(a + u·d)²`.
pub(crate) fn square_coefficients(a: &CMatrix, d: &CMatrix) -> Vec<CMatrix> {
    vec![a * a, a * d + d * a, d * d]
}

/// `𝒟R = [Q, R] + dR/dx` on segment `k` as a degree-2 polynomial in `t`.
pub fn covariant_derivative_segment(k: usize, state: &CmpsState) -> Result<SegmentPolynomial> {
    if k >= state.mesh().num_segments() {
        return Err(invalid(alloc::format!("segment index {k} out of range")));
    }
    let (q0, q1) = (&state.q_nodes()[k], &state.q_nodes()[k + 1]);
    let (r0, r1) = (&state.r_nodes()[k], &state.r_nodes()[k + 1]);
    let dr = r1 - r0;
    let slope = &dr * real(1.0 / state.mesh().width(k));
    Ok(SegmentPolynomial::new(
        covariant_coefficients(q0, r0, &(q1 - q0), &dr, &slope),
        Orientation::Left,
    ))
}

/// Hamiltonian density coefficients on segment `k`; empty when `R ≡ 0` there.
pub fn hamiltonian_coefficients(k: usize, state: &CmpsState, spec: &HamiltonianSpec) -> SegmentHamiltonianCoefficients {
    let (q0, q1) = (&state.q_nodes()[k], &state.q_nodes()[k + 1]);
    let (r0, r1) = (&state.r_nodes()[k], &state.r_nodes()[k + 1]);
    let is_zero = |m: &CMatrix| m.iter().all(|z| *z == ZERO);
    if is_zero(r0) && is_zero(r1) {
        return SegmentHamiltonianCoefficients {
            segment: k,
            channels: Vec::new(),
        };
    }
    let width = state.mesh().width(k);
    let dq = q1 - q0;
    let dr = r1 - r0;
    let eq = q0 - q1;
    let er = r0 - r1;
    let slope = &dr * real(1.0 / width);

    let kinetic = ChannelTerms {
        channel: Channel::Kinetic,
        left: covariant_coefficients(q0, r0, &dq, &dr, &slope),
        right: covariant_coefficients(q1, r1, &eq, &er, &slope),
    };

    let w = spec.shifted_potential(k);
    let mut pot_left = vec![CMatrix::zeros(r0.nrows(), r0.ncols()); w.len() + 1];
    for (l, &wl) in w.iter().enumerate() {
        pot_left[l] += r0 * real(wl);
        pot_left[l + 1] += &dr * real(wl);
    }
    let potential = ChannelTerms {
        channel: Channel::Potential,
        left: pot_left,
        right: vec![r1.clone(), er.clone()],
    };

    let mut channels = vec![kinetic, potential];
    if spec.g != 0.0 {
        let g = real(spec.g);
        channels.push(ChannelTerms {
            channel: Channel::Interaction,
            left: square_coefficients(r0, &dr).into_iter().map(|m| m * g).collect(),
            right: square_coefficients(r1, &er),
        });
    }
    SegmentHamiltonianCoefficients { segment: k, channels }
}

/// Intermediate products of one channel contraction, kept for the reverse pass.
#[derive(Debug, Clone)]
pub(crate) struct Contraction {
    /// `L_p = Σ_{n+a=p} ρ_n A_a`
    pub left: Vec<CMatrix>,
    /// `Rr_q = Σ_{m+b=q} σ_m B_b†`
    pub right: Vec<CMatrix>,
    /// `W_p = Σ_q β(p, q) Rr_q`
    pub w: Vec<CMatrix>,
}

/// `Σ_{p,q} β(p,q) tr(L_p Rr_q)` for `A ⊗ conj(B)` with `A` in powers of `t`
/// and `B` in powers of `1 − t` (without the width factor).
pub(crate) fn contract(
    rho: &[CMatrix],
    sigma: &[CMatrix],
    a_coeffs: &[CMatrix],
    b_coeffs: &[CMatrix],
    beta: &BetaTable,
) -> (Complex64, Contraction) {
    let d = rho[0].nrows();
    let np = rho.len() + a_coeffs.len() - 1;
    let nq = sigma.len() + b_coeffs.len() - 1;
    let mut left = vec![CMatrix::zeros(d, d); np];
    for (n, rn) in rho.iter().enumerate() {
        for (a, am) in a_coeffs.iter().enumerate() {
            mul_acc(&mut left[n + a], ONE, rn, am);
        }
    }
    let right_adj: Vec<CMatrix> = b_coeffs.iter().map(|b| b.adjoint()).collect();
    let mut right = vec![CMatrix::zeros(d, d); nq];
    for (m, sm) in sigma.iter().enumerate() {
        for (b, bm) in right_adj.iter().enumerate() {
            mul_acc(&mut right[m + b], ONE, sm, bm);
        }
    }
    let mut w = Vec::with_capacity(np);
    let mut total = ZERO;
    for (p, lp) in left.iter().enumerate() {
        let mut wp = CMatrix::zeros(d, d);
        for (q, rq) in right.iter().enumerate() {
            wp += rq * real(beta.get(p, q));
        }
        total += trace_product(lp, &wp);
        w.push(wp);
    }
    (total, Contraction { left, right, w })
}

/// Energy and its breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub total: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub interaction: f64,
    /// Contribution of each segment (normalized).
    pub per_segment: Vec<f64>,
    /// `tr(ρ(0)σ(0))`.
    pub norm: f64,
    /// Largest relative deviation of `tr(ρσ)` across mesh nodes.
    pub norm_drift: f64,
    /// `|Im E| / |E|` before the imaginary part was dropped.
    pub imaginary_ratio: f64,
    pub max_taylor_order: usize,
}

pub(crate) struct EnergyDetail {
    pub report: EnergyReport,
    /// Per segment: channel coefficients and the matching contractions.
    pub segments: Vec<(SegmentHamiltonianCoefficients, Vec<Contraction>)>,
}

pub(crate) fn beta_table_for(envelopes: &Envelopes, spec: &HamiltonianSpec) -> BetaTable {
    let extra_left = (spec.potential.max_degree() + 1).max(2);
    BetaTable::new(envelopes.left.max_order() + extra_left + envelopes.right.max_order() + 2)
}

pub(crate) fn energy_detail(
    state: &CmpsState,
    spec: &HamiltonianSpec,
    envelopes: &Envelopes,
    keep: bool,
) -> Result<EnergyDetail> {
    let mesh = state.mesh();
    spec.potential.check_mesh(mesh)?;
    if envelopes.left.num_segments() != mesh.num_segments() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_segments(),
            found: envelopes.left.num_segments(),
        });
    }
    let norm = envelopes.norm()?;
    let beta = beta_table_for(envelopes, spec);
    let mut per_segment = Vec::with_capacity(mesh.num_segments());
    let mut channels = [ZERO; 3];
    let mut segments = Vec::new();
    for k in 0..mesh.num_segments() {
        let coeffs = hamiltonian_coefficients(k, state, spec);
        let rho = &envelopes.left.segments[k].coefficients;
        let sigma = &envelopes.right.segments[k].coefficients;
        let width = real(mesh.width(k));
        let mut seg = ZERO;
        let mut kept = Vec::new();
        for terms in &coeffs.channels {
            let (v, c) = contract(rho, sigma, &terms.left, &terms.right, &beta);
            let v = v * width;
            seg += v;
            channels[terms.channel as usize] += v;
            if keep {
                kept.push(c);
            }
        }
        per_segment.push(seg.re / norm);
        if keep {
            segments.push((coeffs, kept));
        }
    }
    let total_c = channels[0] + channels[1] + channels[2];
    let total = total_c.re / norm;
    let imaginary_ratio = if total_c.re != 0.0 {
        crate::math::abs(total_c.im / total_c.re)
    } else {
        crate::math::abs(total_c.im)
    };
    let report = EnergyReport {
        total,
        kinetic: channels[0].re / norm,
        potential: channels[1].re / norm,
        interaction: channels[2].re / norm,
        per_segment,
        norm,
        norm_drift: envelopes.norm_drift(),
        imaginary_ratio,
        max_taylor_order: envelopes.max_order(),
    };
    Ok(EnergyDetail { report, segments })
}

/// Energy of `state` from precomputed envelopes.
pub fn energy(state: &CmpsState, spec: &HamiltonianSpec, envelopes: &Envelopes) -> Result<EnergyReport> {
    Ok(energy_detail(state, spec, envelopes, false)?.report)
}

/// Computes the envelopes and the energy.
pub fn evaluate_energy(
    state: &CmpsState,
    spec: &HamiltonianSpec,
    tol: &TaylorTolerance,
) -> Result<(EnergyReport, Envelopes)> {
    let env = Envelopes::compute(state, tol)?;
    let report = energy(state, spec, &env)?;
    Ok((report, env))
}
