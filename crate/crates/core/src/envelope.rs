//! Left and right reduced density matrices as per-segment Taylor polynomials.
//!
//! On a segment with `Q(t) = Q_k + tΔQ` and `R(t) = R_k + tΔR`, the flows
//!
//! ```text
//!  dρ/dx =  Q†ρ + ρQ + R†ρR
//! −dσ/dx =  Qσ + σQ† + RσR†
//! ```
//!
//! become a triangular recursion for the Taylor coefficients: the coefficient
//! of `u^{n+1}` depends only on the coefficients of order `n`, `n−1`, `n−2`.
//! Both flows are instances of [`SegmentFlow`], the generic form
//! `dX/du = w·(M X + X M† + N X N† + S(u))` with `M`, `N` linear in `u`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_part, mul_acc, real, trace_product, CMatrix, ONE};
use crate::mesh::{Orientation, SegmentPolynomial};
use crate::state::CmpsState;

/// Truncation rule of the Taylor recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaylorTolerance {
    /// Relative cutoff on coefficient Frobenius norms.
    pub epsilon: f64,
    /// Hard cap on the polynomial degree.
    pub max_order: usize,
}

impl Default for TaylorTolerance {
    fn default() -> Self {
        Self {
            epsilon: 1e-14,
            max_order: 64,
        }
    }
}

impl TaylorTolerance {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_order < 2 {
            return Err(crate::error::invalid(
                "Taylor tolerance needs epsilon > 0 and max_order >= 2",
            ));
        }
        Ok(())
    }
}

/// Linear flow `dX/du = width·(M(u)X + XM(u)† + N(u)XN(u)† + S(u))` on
/// `u ∈ [0, 1]` with `M(u) = m0 + u·dm`, `N(u) = n0 + u·dn`.
#[derive(Debug, Clone)]
pub struct SegmentFlow {
    pub m0: CMatrix,
    pub dm: CMatrix,
    pub n0: CMatrix,
    pub dn: CMatrix,
    pub width: f64,
    m0_ad: CMatrix,
    dm_ad: CMatrix,
    n0_ad: CMatrix,
    dn_ad: CMatrix,
    active: [bool; 4],
}

impl SegmentFlow {
    pub fn new(m0: CMatrix, dm: CMatrix, n0: CMatrix, dn: CMatrix, width: f64) -> Self {
        let nz = |m: &CMatrix| m.iter().any(|z| z.re != 0.0 || z.im != 0.0);
        let active = [nz(&m0), nz(&dm), nz(&n0), nz(&dn)];
        Self {
            m0_ad: m0.adjoint(),
            dm_ad: dm.adjoint(),
            n0_ad: n0.adjoint(),
            dn_ad: dn.adjoint(),
            m0,
            dm,
            n0,
            dn,
            width,
            active,
        }
    }

    /// Left flow from `a` (local variable 0) to `b` (local variable 1), with
    /// `b` to the right of `a` at distance `width`.
    pub fn left_between(qa: &CMatrix, qb: &CMatrix, ra: &CMatrix, rb: &CMatrix, width: f64) -> Self {
        Self::new(
            qa.adjoint(),
            (qb - qa).adjoint(),
            ra.adjoint(),
            (rb - ra).adjoint(),
            width,
        )
    }

    /// Right flow from `a` (local variable 0) to `b` (local variable 1), with
    /// `b` to the left of `a` at distance `width`.
    pub fn right_between(qa: &CMatrix, qb: &CMatrix, ra: &CMatrix, rb: &CMatrix, width: f64) -> Self {
        Self::new(qa.clone(), qb - qa, ra.clone(), rb - ra, width)
    }

    /// Left flow over a whole segment, in powers of `t`.
    pub fn left(q0: &CMatrix, q1: &CMatrix, r0: &CMatrix, r1: &CMatrix, width: f64) -> Self {
        Self::left_between(q0, q1, r0, r1, width)
    }

    /// Right flow over a whole segment, in powers of `1 − t`.
    pub fn right(q0: &CMatrix, q1: &CMatrix, r0: &CMatrix, r1: &CMatrix, width: f64) -> Self {
        Self::right_between(q1, q0, r1, r0, width)
    }

    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }

    /// Coefficient of `u^n` in `M X + X M† + N X N†`, given the coefficients
    /// `x[0..=n]` and the running products `p[j] = (N X)_j` for `j < n`.
    /// Appends `p[n]`.
    fn generator_coefficient(&self, x: &[CMatrix], p: &mut Vec<CMatrix>, n: usize) -> CMatrix {
        let d = self.dim();
        let [m0_on, dm_on, n0_on, dn_on] = self.active;
        let mut y = CMatrix::zeros(d, d);
        if m0_on {
            mul_acc(&mut y, ONE, &self.m0, &x[n]);
            mul_acc(&mut y, ONE, &x[n], &self.m0_ad);
        }
        if dm_on && n >= 1 {
            mul_acc(&mut y, ONE, &self.dm, &x[n - 1]);
            mul_acc(&mut y, ONE, &x[n - 1], &self.dm_ad);
        }
        let mut pn = CMatrix::zeros(d, d);
        if n0_on {
            mul_acc(&mut pn, ONE, &self.n0, &x[n]);
        }
        if dn_on && n >= 1 {
            mul_acc(&mut pn, ONE, &self.dn, &x[n - 1]);
        }
        if n0_on {
            mul_acc(&mut y, ONE, &pn, &self.n0_ad);
        }
        if dn_on && n >= 1 {
            mul_acc(&mut y, ONE, &p[n - 1], &self.dn_ad);
        }
        p.push(pn);
        y
    }

    /// Taylor coefficients of the solution with `X(0) = seed`.
    ///
    /// `source`, when given, holds the coefficients of `S(u)`. Stops once three
    /// consecutive coefficients fall below `epsilon` times the largest
    /// coefficient so far and every source term has entered.
    pub fn propagate(
        &self,
        seed: CMatrix,
        source: Option<&[CMatrix]>,
        tol: &TaylorTolerance,
        segment: usize,
    ) -> Result<(Vec<CMatrix>, f64)> {
        let source = source.unwrap_or(&[]);
        let source_degree = source.len();
        let mut scale = frobenius(&seed);
        let mut x = Vec::with_capacity(32);
        let mut p = Vec::with_capacity(32);
        x.push(seed);
        // the recursion reaches back three coefficients, so three consecutive
        // small ones are needed before the tail is negligible
        let mut recent = [scale, scale];
        for n in 0..tol.max_order {
            let mut y = self.generator_coefficient(&x, &mut p, n);
            if let Some(s) = source.get(n) {
                y += s;
            }
            y *= real(self.width / (n + 1) as f64);
            let norm = frobenius(&y);
            if !norm.is_finite() {
                return Err(Error::NumericalBreakdown(alloc::format!(
                    "non-finite Taylor coefficient on segment {segment}"
                )));
            }
            scale = scale.max(norm);
            x.push(y);
            let small = tol.epsilon * scale;
            let done = n >= 2 && n + 1 >= source_degree && recent[0] <= small && recent[1] <= small && norm <= small;
            recent = [recent[1], norm];
            if done {
                let residual = if scale > 0.0 { norm / scale } else { 0.0 };
                return Ok((x, residual));
            }
        }
        Err(Error::Truncation {
            segment,
            order: tol.max_order,
            residual: if scale > 0.0 { recent[1] / scale } else { 0.0 },
        })
    }
}

/// `ρ` on one segment in powers of `t`, from `ρ(x_k) = rho0`.
pub fn propagate_left_segment(
    qk: &CMatrix,
    qk1: &CMatrix,
    rk: &CMatrix,
    rk1: &CMatrix,
    width: f64,
    rho0: &CMatrix,
    tol: &TaylorTolerance,
) -> Result<SegmentPolynomial> {
    let flow = SegmentFlow::left(qk, qk1, rk, rk1, width);
    let (c, _) = flow.propagate(rho0.clone(), None, tol, 0)?;
    Ok(SegmentPolynomial::new(c, Orientation::Left))
}

/// `σ` on one segment in powers of `1 − t`, from `σ(x_{k+1}) = sigma1`.
pub fn propagate_right_segment(
    qk: &CMatrix,
    qk1: &CMatrix,
    rk: &CMatrix,
    rk1: &CMatrix,
    width: f64,
    sigma1: &CMatrix,
    tol: &TaylorTolerance,
) -> Result<SegmentPolynomial> {
    let flow = SegmentFlow::right(qk, qk1, rk, rk1, width);
    let (c, _) = flow.propagate(sigma1.clone(), None, tol, 0)?;
    Ok(SegmentPolynomial::new(c, Orientation::Right))
}

/// Sweep direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `ρ`-type flow, seeded at `x = 0`.
    Left,
    /// `σ`-type flow, seeded at `x = L`.
    Right,
}

/// Piecewise Taylor representation of `ρ(x)` or `σ(x)` over the whole box.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorEnvelope {
    pub direction: Direction,
    /// Left: powers of `t` starting at `x_k`; right: powers of `1 − t`
    /// starting at `x_{k+1}`.
    pub segments: Vec<SegmentPolynomial>,
    /// Relative size of the last retained coefficient per segment.
    pub residuals: Vec<f64>,
}

impl TaylorEnvelope {
    pub fn orders(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.degree()).collect()
    }

    pub fn max_order(&self) -> usize {
        self.segments.iter().map(|s| s.degree()).max().unwrap_or(0)
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    /// Value at mesh node `k` (`0 ≤ k ≤ K`).
    pub fn node_value(&self, k: usize) -> CMatrix {
        let last = self.segments.len();
        match self.direction {
            Direction::Left if k < last => self.segments[k].coefficients[0].clone(),
            Direction::Left => self.segments[last - 1].sum(),
            Direction::Right if k == last => self.segments[last - 1].coefficients[0].clone(),
            Direction::Right => self.segments[k].sum(),
        }
    }

    /// Value on segment `k` at local coordinate `t`.
    pub fn at_local(&self, k: usize, t: f64) -> CMatrix {
        self.segments[k].eval(t)
    }
}

/// `ρ(x)` for the whole state, seeded with `ρ(0) = |l⟩⟨l|`.
pub fn sweep_left(state: &CmpsState, tol: &TaylorTolerance) -> Result<TaylorEnvelope> {
    let v = state.left_boundary();
    let seed = hermitian_part(&(v * v.adjoint()));
    propagate_envelope(state, Direction::Left, seed, None, tol)
}

/// `σ(x)` for the whole state, seeded with `σ(L) = |B⟩⟨B|`.
pub fn sweep_right(state: &CmpsState, tol: &TaylorTolerance) -> Result<TaylorEnvelope> {
    let v = state.right_boundary();
    let seed = hermitian_part(&(v * v.adjoint()));
    propagate_envelope(state, Direction::Right, seed, None, tol)
}

/// Flow of one segment in the given direction.
pub fn segment_flow(state: &CmpsState, direction: Direction, k: usize) -> SegmentFlow {
    let q = state.q_nodes();
    let r = state.r_nodes();
    let w = state.mesh().width(k);
    match direction {
        Direction::Left => SegmentFlow::left(&q[k], &q[k + 1], &r[k], &r[k + 1], w),
        Direction::Right => SegmentFlow::right(&q[k], &q[k + 1], &r[k], &r[k + 1], w),
    }
}

/// Propagates `boundary` across the box, adding the optional per-segment
/// sources (oriented like the sweep: powers of `t` for left, `1 − t` for
/// right). Without sources this is [`sweep_left`] / [`sweep_right`].
pub fn propagate_with_source(
    state: &CmpsState,
    direction: Direction,
    boundary: CMatrix,
    sources: &[SegmentPolynomial],
    tol: &TaylorTolerance,
) -> Result<TaylorEnvelope> {
    let k_max = state.mesh().num_segments();
    if sources.len() != k_max {
        return Err(Error::DimensionMismatch {
            expected: k_max,
            found: sources.len(),
        });
    }
    propagate_envelope(state, direction, boundary, Some(sources), tol)
}

fn propagate_envelope(
    state: &CmpsState,
    direction: Direction,
    seed: CMatrix,
    sources: Option<&[SegmentPolynomial]>,
    tol: &TaylorTolerance,
) -> Result<TaylorEnvelope> {
    tol.validate()?;
    let k_max = state.mesh().num_segments();
    let orientation = match direction {
        Direction::Left => Orientation::Left,
        Direction::Right => Orientation::Right,
    };
    let mut segments: Vec<Option<SegmentPolynomial>> = vec![None; k_max];
    let mut residuals = vec![0.0; k_max];
    let mut seed = seed;
    let order: Vec<usize> = match direction {
        Direction::Left => (0..k_max).collect(),
        Direction::Right => (0..k_max).rev().collect(),
    };
    for k in order {
        let flow = segment_flow(state, direction, k);
        let src = sources.map(|s| {
            debug_assert_eq!(s[k].orientation, orientation);
            s[k].coefficients.as_slice()
        });
        let (coeffs, residual) = flow.propagate(seed, src, tol, k)?;
        let poly = SegmentPolynomial::new(coeffs, orientation);
        seed = poly.sum();
        residuals[k] = residual;
        segments[k] = Some(poly);
    }
    Ok(TaylorEnvelope {
        direction,
        segments: segments
            .into_iter()
            .map(|s| s.expect("every segment visited"))
            .collect(),
        residuals,
    })
}

/// The pair `(ρ, σ)` for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelopes {
    pub left: TaylorEnvelope,
    pub right: TaylorEnvelope,
}

impl Envelopes {
    pub fn compute(state: &CmpsState, tol: &TaylorTolerance) -> Result<Self> {
        #[cfg(feature = "parallel")]
        let (left, right) = rayon::join(|| sweep_left(state, tol), || sweep_right(state, tol));
        #[cfg(not(feature = "parallel"))]
        let (left, right) = (sweep_left(state, tol), sweep_right(state, tol));
        Ok(Self {
            left: left?,
            right: right?,
        })
    }

    /// `tr(ρ(0)σ(0))`.
    pub fn norm(&self) -> Result<f64> {
        let n = trace_product(&self.left.node_value(0), &self.right.node_value(0)).re;
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::NumericalBreakdown(alloc::format!("state norm is {n}")));
        }
        Ok(n)
    }

    /// `tr(ρ(x)σ(x))` on segment `k` at local coordinate `t`.
    pub fn overlap_at(&self, k: usize, t: f64) -> f64 {
        trace_product(&self.left.at_local(k, t), &self.right.at_local(k, t)).re
    }

    /// Largest relative deviation of `tr(ρσ)` at the mesh nodes from the
    /// value at `x = 0`.
    pub fn norm_drift(&self) -> f64 {
        let n0 = trace_product(&self.left.node_value(0), &self.right.node_value(0)).re;
        (0..=self.left.num_segments())
            .map(|k| {
                let n = trace_product(&self.left.node_value(k), &self.right.node_value(k)).re;
                crate::math::abs(n - n0) / crate::math::abs(n0)
            })
            .fold(0.0, f64::max)
    }

    pub fn max_order(&self) -> usize {
        self.left.max_order().max(self.right.max_order())
    }
}

/// `tr(ρ(0)σ(0))` of a state.
pub fn norm(envelopes: &Envelopes) -> Result<f64> {
    envelopes.norm()
}
