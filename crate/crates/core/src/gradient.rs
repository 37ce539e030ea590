//! Exact energy gradients by reverse-mode differentiation through the Taylor
//! recursion.
//!
//! Internally every adjoint `X̄` follows the convention
//! `δE = Re tr(X̄† δX)`. The reported gradients are Wirtinger derivatives
//! `∂E/∂conj(Z) = X̄ / 2`, so that `δE = 2 Re Σ tr(grad† δZ)` and steepest
//! descent is `−grad`.

use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{beta_table_for, energy_detail, Channel, ChannelTerms, Contraction, EnergyReport, HamiltonianSpec};
use crate::envelope::{
    propagate_with_source, segment_flow, Direction, Envelopes, SegmentFlow, TaylorEnvelope, TaylorTolerance,
};
use crate::error::Result;
use crate::linalg::{ad_mul_acc, mul_acc, real, CMatrix, ONE};
use crate::mesh::{Orientation, SegmentPolynomial};
use crate::state::CmpsState;

/// Wirtinger derivatives of the energy with respect to every node matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub grad_q: Vec<CMatrix>,
    pub grad_r: Vec<CMatrix>,
}

impl GradientReport {
    /// `2 Re Σ_k tr(gQ_k† δQ_k) + tr(gR_k† δR_k)`.
    pub fn directional(&self, dq: &[CMatrix], dr: &[CMatrix]) -> f64 {
        let mut acc = 0.0;
        for (g, d) in self.grad_q.iter().zip(dq).chain(self.grad_r.iter().zip(dr)) {
            acc += 2.0 * g.dotc(d).re;
        }
        acc
    }

    /// Frobenius norm over all entries.
    pub fn norm(&self) -> f64 {
        let s: f64 = self
            .grad_q
            .iter()
            .chain(self.grad_r.iter())
            .map(|m| m.norm_squared())
            .sum();
        crate::math::sqrt(s)
    }
}

/// Adjoints of the four generic flow matrices.
struct FlowAdjoint {
    m0: CMatrix,
    dm: CMatrix,
    n0: CMatrix,
    dn: CMatrix,
}

impl FlowAdjoint {
    fn zeros(d: usize) -> Self {
        Self {
            m0: CMatrix::zeros(d, d),
            dm: CMatrix::zeros(d, d),
            n0: CMatrix::zeros(d, d),
            dn: CMatrix::zeros(d, d),
        }
    }
}

impl SegmentFlow {
    /// Reverse pass of [`SegmentFlow::propagate`] for the coefficients `x`.
    ///
    /// On entry `xbar[n]` holds the adjoint of `x[n]` from every downstream
    /// use; on exit `xbar[0]` is the adjoint of the seed and `acc` has the
    /// flow-matrix adjoints added.
    fn reverse(&self, x: &[CMatrix], xbar: &mut [CMatrix], acc: &mut FlowAdjoint) {
        let d = self.dim();
        let top = x.len() - 1;
        let m0_ad = self.m0.adjoint();
        let dm_ad = self.dm.adjoint();
        let n0_ad = self.n0.adjoint();
        let dn_ad = self.dn.adjoint();
        // running products (N X)_j and (X N†)_j
        let mut p = Vec::with_capacity(top + 1);
        let mut pp = Vec::with_capacity(top + 1);
        for j in 0..=top {
            let mut a = &self.n0 * &x[j];
            let mut b = &x[j] * &n0_ad;
            if j >= 1 {
                mul_acc(&mut a, ONE, &self.dn, &x[j - 1]);
                mul_acc(&mut b, ONE, &x[j - 1], &dn_ad);
            }
            p.push(a);
            pp.push(b);
        }
        let mut gn0 = CMatrix::zeros(d, d);
        let mut gdn = CMatrix::zeros(d, d);
        for j in (1..=top).rev() {
            let n = j - 1;
            let g = &xbar[j] * real(self.width / j as f64);
            let g_ad = g.adjoint();
            // state adjoints
            {
                let xb = &mut xbar[n];
                mul_acc(xb, ONE, &m0_ad, &g);
                mul_acc(xb, ONE, &g, &self.m0);
                gn0.gemm(ONE, &g, &self.n0, real(0.0));
                mul_acc(xb, ONE, &n0_ad, &gn0);
            }
            gdn.gemm(ONE, &g, &self.dn, real(0.0));
            if n >= 1 {
                let xb = &mut xbar[n - 1];
                mul_acc(xb, ONE, &dm_ad, &g);
                mul_acc(xb, ONE, &g, &self.dm);
                mul_acc(xb, ONE, &n0_ad, &gdn);
                mul_acc(xb, ONE, &dn_ad, &gn0);
            }
            if n >= 2 {
                mul_acc(&mut xbar[n - 2], ONE, &dn_ad, &gdn);
            }
            // flow-matrix adjoints
            acc.m0.gemm(ONE, &g, &x[n].adjoint(), ONE);
            mul_acc(&mut acc.m0, ONE, &g_ad, &x[n]);
            acc.n0.gemm(ONE, &g, &pp[n].adjoint(), ONE);
            mul_acc(&mut acc.n0, ONE, &g_ad, &p[n]);
            if n >= 1 {
                acc.dm.gemm(ONE, &g, &x[n - 1].adjoint(), ONE);
                mul_acc(&mut acc.dm, ONE, &g_ad, &x[n - 1]);
                acc.dn.gemm(ONE, &g, &pp[n - 1].adjoint(), ONE);
                mul_acc(&mut acc.dn, ONE, &g_ad, &p[n - 1]);
            }
        }
    }
}

/// Node adjoints `(Q̄, R̄)` being accumulated.
struct NodeAdjoints {
    q: Vec<CMatrix>,
    r: Vec<CMatrix>,
}

impl NodeAdjoints {
    fn add_flow(&mut self, direction: Direction, k: usize, a: &FlowAdjoint) {
        match direction {
            // M0 = Q_k†, dM = (Q_{k+1} − Q_k)†, same for R
            Direction::Left => {
                let dm = a.dm.adjoint();
                let dn = a.dn.adjoint();
                self.q[k] += a.m0.adjoint() - &dm;
                self.q[k + 1] += dm;
                self.r[k] += a.n0.adjoint() - &dn;
                self.r[k + 1] += dn;
            }
            // M0 = Q_{k+1}, dM = Q_k − Q_{k+1}, same for R
            Direction::Right => {
                self.q[k + 1] += &a.m0 - &a.dm;
                self.q[k] += &a.dm;
                self.r[k + 1] += &a.n0 - &a.dn;
                self.r[k] += &a.dn;
            }
        }
    }
}

/// Adjoint of `[C_0, C_1, C_2]` from `covariant_coefficients`; returns
/// `(q̄a, r̄a, d̄q, d̄r, slopē)`.
fn covariant_adjoint(cbar: &[CMatrix], qa: &CMatrix, ra: &CMatrix, dq: &CMatrix, dr: &CMatrix) -> [CMatrix; 5] {
    let d = qa.nrows();
    let mut qa_b = CMatrix::zeros(d, d);
    let mut ra_b = CMatrix::zeros(d, d);
    let mut dq_b = CMatrix::zeros(d, d);
    let mut dr_b = CMatrix::zeros(d, d);
    // C = [X, Y]:  X̄ += C̄Y† − Y†C̄,  Ȳ += X†C̄ − C̄X†
    let comm = |c: &CMatrix, x: &CMatrix, y: &CMatrix, xb: &mut CMatrix, yb: &mut CMatrix| {
        xb.gemm(ONE, c, &y.adjoint(), ONE);
        ad_mul_acc(xb, -ONE, y, c);
        ad_mul_acc(yb, ONE, x, c);
        yb.gemm(-ONE, c, &x.adjoint(), ONE);
    };
    comm(&cbar[0], qa, ra, &mut qa_b, &mut ra_b);
    comm(&cbar[1], qa, dr, &mut qa_b, &mut dr_b);
    comm(&cbar[1], dq, ra, &mut dq_b, &mut ra_b);
    comm(&cbar[2], dq, dr, &mut dq_b, &mut dr_b);
    [qa_b, ra_b, dq_b, dr_b, cbar[0].clone()]
}

/// Adjoint of `square_coefficients(a, d)`; returns `(ā, d̄)`.
fn square_adjoint(sbar: &[CMatrix], a: &CMatrix, d: &CMatrix) -> (CMatrix, CMatrix) {
    let a_ad = a.adjoint();
    let d_ad = d.adjoint();
    let mut ab = &sbar[0] * &a_ad + &a_ad * &sbar[0];
    ab += &sbar[1] * &d_ad + &d_ad * &sbar[1];
    let mut db = &sbar[1] * &a_ad + &a_ad * &sbar[1];
    db += &sbar[2] * &d_ad + &d_ad * &sbar[2];
    (ab, db)
}

/// Backpropagates one channel contraction into the envelope coefficient
/// adjoints and returns `(Ā_a, B̄_b)`.
#[allow(clippy::too_many_arguments)]
fn contraction_adjoint(
    rho: &[CMatrix],
    sigma: &[CMatrix],
    terms: &ChannelTerms,
    c: &Contraction,
    beta: &crate::beta::BetaTable,
    scale: f64,
    rho_bar: &mut [CMatrix],
    sigma_bar: &mut [CMatrix],
) -> (Vec<CMatrix>, Vec<CMatrix>) {
    let d = rho[0].nrows();
    let s = real(scale);
    // L̄_p = s·W_p†,  R̄r_q = s·V_q† with V_q = Σ_p β(p,q) L_p
    let lbar: Vec<CMatrix> = c.w.iter().map(|w| w.adjoint() * s).collect();
    let rbar: Vec<CMatrix> = (0..c.right.len())
        .map(|q| {
            let mut v = CMatrix::zeros(d, d);
            for (p, lp) in c.left.iter().enumerate() {
                v += lp * real(beta.get(p, q));
            }
            v.adjoint() * s
        })
        .collect();
    let mut abar = vec![CMatrix::zeros(d, d); terms.left.len()];
    let a_ad: Vec<CMatrix> = terms.left.iter().map(|a| a.adjoint()).collect();
    for (n, rn) in rho.iter().enumerate() {
        for (a, am_ad) in a_ad.iter().enumerate() {
            mul_acc(&mut rho_bar[n], ONE, &lbar[n + a], am_ad);
            ad_mul_acc(&mut abar[a], ONE, rn, &lbar[n + a]);
        }
    }
    // Rr_q = Σ σ_m B_b†: σ̄_m += R̄r B_b, B̄_b += R̄r† σ_m
    let mut bbar = vec![CMatrix::zeros(d, d); terms.right.len()];
    for (m, sm) in sigma.iter().enumerate() {
        for (b, bm) in terms.right.iter().enumerate() {
            mul_acc(&mut sigma_bar[m], ONE, &rbar[m + b], bm);
            ad_mul_acc(&mut bbar[b], ONE, &rbar[m + b], sm);
        }
    }
    (abar, bbar)
}

/// Energy and its exact gradient with respect to every `Q_k`, `R_k`.
///
/// The energy is produced by the same code path as [`crate::energy::energy`].
pub fn energy_and_gradient(
    state: &CmpsState,
    spec: &HamiltonianSpec,
    tol: &TaylorTolerance,
) -> Result<(EnergyReport, GradientReport)> {
    let env = Envelopes::compute(state, tol)?;
    let (report, grad) = gradient_from_envelopes(state, spec, &env)?;
    Ok((report, grad))
}

pub(crate) fn gradient_from_envelopes(
    state: &CmpsState,
    spec: &HamiltonianSpec,
    env: &Envelopes,
) -> Result<(EnergyReport, GradientReport)> {
    let detail = energy_detail(state, spec, env, true)?;
    let report = detail.report;
    let mesh = state.mesh();
    let k_max = mesh.num_segments();
    let d = state.dim();
    let norm = report.norm;
    let energy = report.total;
    let beta = beta_table_for(env, spec);

    let mut rho_bar: Vec<Vec<CMatrix>> = env
        .left
        .segments
        .iter()
        .map(|s| vec![CMatrix::zeros(d, d); s.coefficients.len()])
        .collect();
    let mut sigma_bar: Vec<Vec<CMatrix>> = env
        .right
        .segments
        .iter()
        .map(|s| vec![CMatrix::zeros(d, d); s.coefficients.len()])
        .collect();
    let mut nodes = NodeAdjoints {
        q: vec![CMatrix::zeros(d, d); k_max + 1],
        r: vec![CMatrix::zeros(d, d); k_max + 1],
    };

    // E = E_num / N:  Ē_num = 1/N
    for (k, (coeffs, contractions)) in detail.segments.iter().enumerate() {
        let rho = &env.left.segments[k].coefficients;
        let sigma = &env.right.segments[k].coefficients;
        let width = mesh.width(k);
        let (q0, q1) = (&state.q_nodes()[k], &state.q_nodes()[k + 1]);
        let (r0, r1) = (&state.r_nodes()[k], &state.r_nodes()[k + 1]);
        for (terms, c) in coeffs.channels.iter().zip(contractions) {
            let (abar, bbar) = contraction_adjoint(
                rho,
                sigma,
                terms,
                c,
                &beta,
                width / norm,
                &mut rho_bar[k],
                &mut sigma_bar[k],
            );
            match terms.channel {
                Channel::Kinetic => {
                    let [qa, ra, dq, dr, slope] = covariant_adjoint(&abar, q0, r0, &(q1 - q0), &(r1 - r0));
                    // dq = Q1 − Q0, dr = R1 − R0, slope = (R1 − R0)/Δ
                    let dr = dr + slope * real(1.0 / width);
                    nodes.q[k] += qa - &dq;
                    nodes.q[k + 1] += dq;
                    nodes.r[k] += ra - &dr;
                    nodes.r[k + 1] += dr;
                    let [qa, ra, eq, er, slope] = covariant_adjoint(&bbar, q1, r1, &(q0 - q1), &(r0 - r1));
                    // eq = Q0 − Q1, er = R0 − R1, slope = (R1 − R0)/Δ
                    let er = er - slope * real(1.0 / width);
                    nodes.q[k + 1] += qa - &eq;
                    nodes.q[k] += eq;
                    nodes.r[k + 1] += ra - &er;
                    nodes.r[k] += er;
                }
                Channel::Potential => {
                    let w = spec.shifted_potential(k);
                    let mut r0b = CMatrix::zeros(d, d);
                    let mut drb = CMatrix::zeros(d, d);
                    for (l, &wl) in w.iter().enumerate() {
                        r0b += &abar[l] * real(wl);
                        drb += &abar[l + 1] * real(wl);
                    }
                    nodes.r[k] += r0b - &drb;
                    nodes.r[k + 1] += drb;
                    // B = [R1, R0 − R1]
                    nodes.r[k + 1] += &bbar[0] - &bbar[1];
                    nodes.r[k] += &bbar[1];
                }
                Channel::Interaction => {
                    let g = real(spec.g);
                    let sbar: Vec<CMatrix> = abar.iter().map(|a| a * g).collect();
                    let (r0b, drb) = square_adjoint(&sbar, r0, &(r1 - r0));
                    nodes.r[k] += r0b - &drb;
                    nodes.r[k + 1] += drb;
                    let (r1b, erb) = square_adjoint(&bbar, r1, &(r0 - r1));
                    nodes.r[k + 1] += r1b - &erb;
                    nodes.r[k] += erb;
                }
            }
        }
    }

    // N = Re tr(ρ(0)σ(0)):  σ̄(0) = N̄·ρ(0)†,  N̄ = −E/N
    let sigma0_bar = env.left.node_value(0).adjoint() * real(-energy / norm);

    // left sweep in reverse: adjoint of ρ(x_K) is zero
    let mut carry = CMatrix::zeros(d, d);
    for k in (0..k_max).rev() {
        let bars = &mut rho_bar[k];
        for b in bars.iter_mut() {
            *b += &carry;
        }
        let flow = segment_flow(state, Direction::Left, k);
        let mut acc = FlowAdjoint::zeros(d);
        flow.reverse(&env.left.segments[k].coefficients, bars, &mut acc);
        nodes.add_flow(Direction::Left, k, &acc);
        carry = bars[0].clone();
    }

    // right sweep in reverse, starting from the norm at x = 0
    let mut carry = sigma0_bar;
    for k in 0..k_max {
        let bars = &mut sigma_bar[k];
        for b in bars.iter_mut() {
            *b += &carry;
        }
        let flow = segment_flow(state, Direction::Right, k);
        let mut acc = FlowAdjoint::zeros(d);
        flow.reverse(&env.right.segments[k].coefficients, bars, &mut acc);
        nodes.add_flow(Direction::Right, k, &acc);
        carry = bars[0].clone();
    }

    let half = real(0.5);
    let grad = GradientReport {
        grad_q: nodes.q.into_iter().map(|m| m * half).collect(),
        grad_r: nodes.r.into_iter().map(|m| m * half).collect(),
    };
    Ok((report, grad))
}

/// Coefficients of `p(1 − u)` in powers of `u`.
pub(crate) fn flip_orientation(p: &[CMatrix]) -> Vec<CMatrix> {
    let d = p[0].nrows();
    let mut out: Vec<CMatrix> = Vec::with_capacity(p.len());
    for c in p.iter().rev() {
        out.push(CMatrix::zeros(d, d));
        for i in (0..out.len() - 1).rev() {
            let v = out[i].clone();
            out[i + 1] -= &v;
        }
        out[0] += c;
    }
    out
}

/// `Σ_{i+j+l} X_i Y_j Z_l†` as polynomial coefficients.
pub(crate) fn sandwich(x: &[CMatrix], y: &[CMatrix], z: &[CMatrix]) -> Vec<CMatrix> {
    let d = y[0].nrows();
    let mut xy = vec![CMatrix::zeros(d, d); x.len() + y.len() - 1];
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            mul_acc(&mut xy[i + j], ONE, xi, yj);
        }
    }
    let z_ad: Vec<CMatrix> = z.iter().map(|m| m.adjoint()).collect();
    let mut out = vec![CMatrix::zeros(d, d); xy.len() + z.len() - 1];
    for (i, a) in xy.iter().enumerate() {
        for (l, zl) in z_ad.iter().enumerate() {
            mul_acc(&mut out[i + l], ONE, a, zl);
        }
    }
    out
}

/// Integrated energy environments `(H_L, H_R)`.
///
/// `H_L` solves the left flow with source `Σ B(t)† ρ(t) A(t)` from
/// `H_L(0) = 0`; `H_R` the right flow with source `Σ A σ B†` from
/// `H_R(L) = 0`. Both are unnormalized, so
/// `tr(H_L(x)σ(x)) + tr(ρ(x)H_R(x)) = E·N` for every `x`.
pub fn energy_environments(
    state: &CmpsState,
    spec: &HamiltonianSpec,
    tol: &TaylorTolerance,
) -> Result<(TaylorEnvelope, TaylorEnvelope)> {
    let env = Envelopes::compute(state, tol)?;
    let d = state.dim();
    let k_max = state.mesh().num_segments();
    let mut left_sources = Vec::with_capacity(k_max);
    let mut right_sources = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let coeffs = crate::energy::hamiltonian_coefficients(k, state, spec);
        let rho = &env.left.segments[k].coefficients;
        let sigma = &env.right.segments[k].coefficients;
        let mut sl = vec![CMatrix::zeros(d, d)];
        let mut sr = vec![CMatrix::zeros(d, d)];
        for terms in &coeffs.channels {
            let b_in_t = flip_orientation(&terms.right);
            let a_in_s = flip_orientation(&terms.left);
            // B(t)† ρ A(t) = (A† ρ† B)† ; ρ is Hermitian up to roundoff
            let bl: Vec<CMatrix> = b_in_t.iter().map(|m| m.adjoint()).collect();
            let al: Vec<CMatrix> = terms.left.iter().map(|m| m.adjoint()).collect();
            add_poly(&mut sl, &sandwich(&bl, rho, &al));
            add_poly(&mut sr, &sandwich(&a_in_s, sigma, &terms.right));
        }
        left_sources.push(SegmentPolynomial::new(sl, Orientation::Left));
        right_sources.push(SegmentPolynomial::new(sr, Orientation::Right));
    }
    let hl = propagate_with_source(state, Direction::Left, CMatrix::zeros(d, d), &left_sources, tol)?;
    let hr = propagate_with_source(state, Direction::Right, CMatrix::zeros(d, d), &right_sources, tol)?;
    Ok((hl, hr))
}

pub(crate) fn add_poly(acc: &mut Vec<CMatrix>, p: &[CMatrix]) {
    let d = p[0].nrows();
    while acc.len() < p.len() {
        acc.push(CMatrix::zeros(d, d));
    }
    for (a, b) in acc.iter_mut().zip(p) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy;
    use crate::mesh::{Mesh, PiecewiseLinear};
    use crate::potential::PotentialSpec;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, d: usize, k: usize) -> (CmpsState, HamiltonianSpec) {
        let mesh = Mesh::uniform(1.3, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = CmpsState::random(&mesh, d, 0.8, 0.6, true, &mut rng);
        let spec = HamiltonianSpec::new(2.5, 3.0, PotentialSpec::sine(&mesh, 1.7, 2.0, 12)).unwrap();
        (state, spec)
    }

    fn energy_of(state: &CmpsState, spec: &HamiltonianSpec) -> f64 {
        let tol = TaylorTolerance::default();
        let env = Envelopes::compute(state, &tol).unwrap();
        energy(state, spec, &env).unwrap().total
    }

    #[test]
    fn matches_central_differences() {
        let (state, spec) = random_problem(11, 2, 5);
        let (_, grad) = energy_and_gradient(&state, &spec, &TaylorTolerance::default()).unwrap();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for node in 0..=5 {
            for which in 0..2 {
                for _ in 0..2 {
                    let mut dir = CMatrix::zeros(2, 2);
                    for z in dir.iter_mut() {
                        *z = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    }
                    if which == 1 && (node == 0 || node == 5) {
                        continue;
                    }
                    let shifted = |eps: f64| {
                        let mut q = state.q_nodes().to_vec();
                        let mut r = state.r_nodes().to_vec();
                        let target = if which == 0 { &mut q } else { &mut r };
                        target[node] += &dir * Complex64::new(eps, 0.0);
                        energy_of(&state.with_nodes(q, r).unwrap(), &spec)
                    };
                    let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                    let g = if which == 0 {
                        &grad.grad_q[node]
                    } else {
                        &grad.grad_r[node]
                    };
                    let an = 2.0 * g.dotc(&dir).re;
                    assert!(
                        (fd - an).abs() <= 1e-6 * an.abs().max(1.0),
                        "node {node} which {which}: {fd} vs {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn energy_is_bitwise_identical() {
        let (state, spec) = random_problem(3, 3, 4);
        let (rep, _) = energy_and_gradient(&state, &spec, &TaylorTolerance::default()).unwrap();
        assert_eq!(rep.total.to_bits(), energy_of(&state, &spec).to_bits());
    }

    #[test]
    fn zero_r_has_zero_gradient() {
        let (state, spec) = random_problem(4, 2, 4);
        let r = PiecewiseLinear::zeros(state.mesh().clone(), 2);
        let s = CmpsState::with_default_boundaries(state.q().clone(), r, true).unwrap();
        let (_, grad) = energy_and_gradient(&s, &spec, &TaylorTolerance::default()).unwrap();
        assert_eq!(grad.norm(), 0.0);
    }

    #[test]
    fn environments_split_the_energy() {
        let (state, spec) = random_problem(8, 2, 4);
        let tol = TaylorTolerance::default();
        let env = Envelopes::compute(&state, &tol).unwrap();
        let rep = energy(&state, &spec, &env).unwrap();
        let (hl, hr) = energy_environments(&state, &spec, &tol).unwrap();
        let target = rep.total * rep.norm;
        for k in 0..4 {
            for t in [0.0, 0.37, 1.0] {
                let v = crate::linalg::trace_product(&hl.at_local(k, t), &env.right.at_local(k, t))
                    + crate::linalg::trace_product(&env.left.at_local(k, t), &hr.at_local(k, t));
                assert!(
                    (v.re - target).abs() < 1e-10 * target.abs(),
                    "{k} {t}: {} vs {target}",
                    v.re
                );
            }
        }
    }
}
