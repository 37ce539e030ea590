//! Translation-invariant cMPS in the thermodynamic limit.
//!
//! With constant `Q`, `R` the flows become the stationary problems
//!
//! ```text
//! T(l)  = Q†l + lQ + R†lR = λ l
//! T*(r) = Qr + rQ† + RrR† = λ r
//! ```
//!
//! and the energy density is `e = tr(l 𝓗(r)) / tr(l r)` with
//! `𝓗(Y) = 𝒟R Y 𝒟R† − μ R Y R† + g R² Y R²†`, `𝒟R = [Q, R]`. Gradients use
//! implicit differentiation of the fixed points.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;

use crate::envelope::{SegmentFlow, TaylorTolerance};
use crate::error::{invalid, Error, Result};
use crate::lbfgs::{minimize_with, MinimizeOptions, Termination};
use crate::linalg::{
    commutator, general_eigenvalues, hermitian_function, hermitian_part, identity, real, trace_product, CMatrix, ONE,
    ZERO,
};
use crate::math;
use crate::precondition::{Block, BlockDiagonal, Jacobian};
use crate::state::{complex_gaussian, gaussian_matrix};

/// Bond dimensions up to this use dense `D² × D²` linear algebra.
pub const DENSE_LIMIT: usize = 16;

/// Leading eigen-matrices of the transfer generator.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoints {
    /// `T(l) = λ l`, Hermitian, positive trace.
    pub left: CMatrix,
    /// `T*(r) = λ r`, Hermitian, positive trace, `tr(l r) = 1`.
    pub right: CMatrix,
    /// Leading eigenvalue `λ`; shifting `Q → Q − (λ/2)·1` makes it zero.
    pub eigenvalue: f64,
    /// Distance in real part to the next eigenvalue.
    pub gap: f64,
}

/// Uniform state with cached fixed points.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformCmps {
    pub q: CMatrix,
    pub r: CMatrix,
    pub fixed: FixedPoints,
}

impl UniformCmps {
    /// Shifts `Q` so the leading eigenvalue is zero and computes the fixed
    /// points.
    pub fn new(q: CMatrix, r: CMatrix) -> Result<Self> {
        let fp = fixed_points(&q, &r)?;
        let d = q.nrows();
        let q = q - identity(d) * real(0.5 * fp.eigenvalue);
        let fixed = FixedPoints { eigenvalue: 0.0, ..fp };
        Ok(Self { q, r, fixed })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `(e, density)` at chemical potential `mu` and coupling `g`.
    pub fn energy_density(&self, mu: f64, g: f64) -> (f64, f64) {
        let (e, n) = energy_with(&self.q, &self.r, &self.fixed, mu, g);
        (e, n)
    }

    /// The same state in the gauge where `l = r`.
    pub fn symmetric_gauge(&self) -> Result<Self> {
        let l = &self.fixed.left;
        let r = &self.fixed.right;
        let r_half = hermitian_function(r, |v| math::sqrt(v.max(0.0)));
        let r_inv_half = hermitian_function(r, |v| if v > 0.0 { 1.0 / math::sqrt(v) } else { 0.0 });
        let m = hermitian_function(&(&r_half * l * &r_half), |v| math::sqrt(v.max(0.0)));
        // P r P = l with P = G†G
        let p = &r_inv_half * m * &r_inv_half;
        let spectrum = crate::linalg::hermitian_eigen(&p).0;
        if !(spectrum[0] > 0.0) {
            return Err(Error::NonInjective { gap: spectrum[0] });
        }
        let g = hermitian_function(&p, math::sqrt);
        let g_inv = hermitian_function(&p, |v| 1.0 / math::sqrt(v));
        let q = &g * &self.q * &g_inv;
        let rr = &g * &self.r * &g_inv;
        let right = hermitian_part(&(&g * r * &g));
        let left = hermitian_part(&(&g_inv * l * &g_inv));
        // both equal X with tr(X²) = 1 up to roundoff; average them
        let x = (left + right) * real(0.5);
        let scale = 1.0 / math::sqrt(trace_product(&x, &x).re);
        let x = x * real(scale);
        Ok(Self {
            q,
            r: rr,
            fixed: FixedPoints {
                left: x.clone(),
                right: x,
                eigenvalue: self.fixed.eigenvalue,
                gap: self.fixed.gap,
            },
        })
    }
}

/// `T(Y) = Q†Y + YQ + R†YR`.
pub fn transfer_left(q: &CMatrix, r: &CMatrix, y: &CMatrix) -> CMatrix {
    q.adjoint() * y + y * q + r.adjoint() * y * r
}

/// `T*(Y) = QY + YQ† + RYR†`.
pub fn transfer_right(q: &CMatrix, r: &CMatrix, y: &CMatrix) -> CMatrix {
    q * y + y * q.adjoint() + r * y * r.adjoint()
}

fn vec_of(m: &CMatrix) -> DVector<Complex64> {
    DVector::from_column_slice(m.as_slice())
}

fn mat_of(v: &DVector<Complex64>, d: usize) -> CMatrix {
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Dense superoperators `(S, S*)` of `T` and `T*` acting on column-major
/// `vec(Y)`, using `vec(AYB) = (Bᵀ ⊗ A) vec(Y)`.
fn superoperators(q: &CMatrix, r: &CMatrix) -> (CMatrix, CMatrix) {
    let d = q.nrows();
    let id = identity(d);
    let s = id.kronecker(&q.adjoint()) + q.transpose().kronecker(&id) + r.transpose().kronecker(&r.adjoint());
    let s_star = id.kronecker(q) + q.conjugate().kronecker(&id) + r.conjugate().kronecker(r);
    (s, s_star)
}

/// Null vector of `a − λ` by inverse iteration.
fn dense_eigenvector(a: &CMatrix, lambda: Complex64) -> Result<DVector<Complex64>> {
    let n = a.nrows();
    let scale = a.norm().max(1.0);
    let shift = lambda + Complex64::new(1e-13 * scale, 0.0);
    let mut m = a.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for i in 0..n {
        v[i] += Complex64::new(0.1 * i as f64 / n as f64, 0.03);
    }
    for _ in 0..3 {
        let next = lu
            .solve(&v)
            .ok_or_else(|| Error::NumericalBreakdown("singular inverse iteration".into()))?;
        let nrm = next.norm();
        if !(nrm.is_finite() && nrm > 0.0) {
            return Err(Error::NumericalBreakdown("inverse iteration diverged".into()));
        }
        v = next / real(nrm);
    }
    Ok(v)
}

/// Turns an eigen-matrix into a Hermitian one with positive trace.
fn hermitian_fixed_point(m: CMatrix) -> CMatrix {
    let tr = m.trace();
    let phase = if tr.norm() > 0.0 { tr.conj() / tr.norm() } else { ONE };
    hermitian_part(&(m * phase))
}

fn normalize_pair(l: CMatrix, r: CMatrix) -> Result<(CMatrix, CMatrix)> {
    let l = hermitian_fixed_point(l);
    let r = hermitian_fixed_point(r);
    let overlap = trace_product(&l, &r).re;
    if !(overlap > 0.0) {
        return Err(Error::NumericalBreakdown(alloc::format!(
            "fixed points have non-positive overlap {overlap}"
        )));
    }
    let s = real(1.0 / math::sqrt(overlap));
    Ok((l * s, r * s))
}

/// Leading fixed points of `(Q, R)`.
pub fn fixed_points(q: &CMatrix, r: &CMatrix) -> Result<FixedPoints> {
    let d = q.nrows();
    if d == 0 || q.ncols() != d || r.shape() != q.shape() {
        return Err(invalid("Q and R must be square matrices of equal size"));
    }
    if d == 1 {
        let lambda = 2.0 * q[(0, 0)].re + r[(0, 0)].norm_sqr();
        let one = CMatrix::from_element(1, 1, ONE);
        return Ok(FixedPoints {
            left: one.clone(),
            right: one,
            eigenvalue: lambda,
            gap: f64::INFINITY,
        });
    }
    if d <= DENSE_LIMIT {
        fixed_points_dense(q, r)
    } else {
        fixed_points_krylov(q, r, None)
    }
}

fn fixed_points_dense(q: &CMatrix, r: &CMatrix) -> Result<FixedPoints> {
    let d = q.nrows();
    let (s, s_star) = superoperators(q, r);
    let mut ev = general_eigenvalues(&s_star);
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    let lambda = ev[0];
    let gap = lambda.re - ev[1].re;
    if !(gap >= 1e-10) {
        return Err(Error::NonInjective { gap });
    }
    let lambda = Complex64::new(lambda.re, 0.0);
    let right = mat_of(&dense_eigenvector(&s_star, lambda)?, d);
    let left = mat_of(&dense_eigenvector(&s, lambda)?, d);
    let (left, right) = normalize_pair(left, right)?;
    Ok(FixedPoints {
        left,
        right,
        eigenvalue: lambda.re,
        gap,
    })
}

/// `exp(τ·G)` applied to `y`, with `G(Y) = MY + YM† + NYN†`.
fn exp_apply(m: &CMatrix, n: &CMatrix, tau: f64, y: &CMatrix) -> Result<CMatrix> {
    let d = m.nrows();
    let flow = SegmentFlow::new(m.clone(), CMatrix::zeros(d, d), n.clone(), CMatrix::zeros(d, d), tau);
    let tol = TaylorTolerance {
        epsilon: 1e-16,
        max_order: 200,
    };
    let (c, _) = flow.propagate(y.clone(), None, &tol, 0)?;
    let mut acc = c[c.len() - 1].clone();
    for x in c.iter().rev().skip(1) {
        acc += x;
    }
    Ok(acc)
}

fn inner(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.dotc(b)
}

/// Rightmost eigenpair of `G(Y) = MY + YM† + NYN†` by restarted Arnoldi on
/// `exp(τG)`. Returns `(λ, vector, gap estimate)`.
fn leading_krylov(m: &CMatrix, n: &CMatrix, start: CMatrix) -> Result<(f64, CMatrix, f64)> {
    let d = m.nrows();
    let dim = (d * d).min(30);
    let generator_scale = 2.0 * m.norm() + n.norm_squared();
    let tau = 2.0 / generator_scale.max(1e-300);
    let apply_g = |y: &CMatrix| m * y + y * m.adjoint() + n * y * n.adjoint();
    let mut v0 = start;
    let mut last_gap = 0.0;
    for _ in 0..500 {
        let nrm = v0.norm();
        v0 /= real(nrm);
        let mut basis = vec![v0.clone()];
        let mut h = CMatrix::zeros(dim + 1, dim);
        let mut size = dim;
        for j in 0..dim {
            let mut w = exp_apply(m, n, tau, &basis[j])?;
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = inner(b, &w);
                    h[(i, j)] += c;
                    w -= b * c;
                }
            }
            let hn = w.norm();
            h[(j + 1, j)] = real(hn);
            if hn <= 1e-14 * h[(j, j)].norm().max(1e-300) || j + 1 == dim {
                size = j + 1;
                if hn > 1e-14 * h[(j, j)].norm().max(1e-300) {
                    basis.push(w / real(hn));
                }
                break;
            }
            basis.push(w / real(hn));
        }
        let hm = h.view((0, 0), (size, size)).into_owned();
        let mut theta = general_eigenvalues(&hm);
        theta.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
        let top = theta[0];
        last_gap = if theta.len() > 1 && theta[1].norm() > 0.0 {
            (math::ln(top.norm()) - math::ln(theta[1].norm())) / tau
        } else {
            f64::INFINITY
        };
        let y = dense_eigenvector(&hm, top)?;
        let mut u = CMatrix::zeros(d, d);
        for (i, yi) in y.iter().enumerate() {
            u += &basis[i] * *yi;
        }
        let u_norm = u.norm();
        u /= real(u_norm);
        let gu = apply_g(&u);
        let lambda = inner(&u, &gu);
        let residual = (&gu - &u * lambda).norm();
        if residual <= 1e-11 * generator_scale.max(1.0) {
            return Ok((lambda.re, u, last_gap));
        }
        v0 = u;
    }
    Err(Error::NumericalBreakdown(alloc::format!(
        "Arnoldi did not converge (gap estimate {last_gap})"
    )))
}

fn fixed_points_krylov(q: &CMatrix, r: &CMatrix, guess: Option<&FixedPoints>) -> Result<FixedPoints> {
    let d = q.nrows();
    let (start_l, start_r) = match guess {
        Some(fp) => (fp.left.clone(), fp.right.clone()),
        None => (identity(d), identity(d)),
    };
    let (lambda, right, gap) = leading_krylov(q, r, start_r)?;
    if !(gap >= 1e-10) {
        return Err(Error::NonInjective { gap });
    }
    let (_, left, _) = leading_krylov(&q.adjoint(), &r.adjoint(), start_l)?;
    let (left, right) = normalize_pair(left, right)?;
    Ok(FixedPoints {
        left,
        right,
        eigenvalue: lambda,
        gap,
    })
}

/// `𝓗(Y) = 𝒟R Y 𝒟R† − μ R Y R† + g R² Y R²†` and its transpose action.
struct Density<'a> {
    dr: CMatrix,
    sq: CMatrix,
    r: &'a CMatrix,
    mu: f64,
    g: f64,
}

impl<'a> Density<'a> {
    fn new(q: &CMatrix, r: &'a CMatrix, mu: f64, g: f64) -> Self {
        Self {
            dr: commutator(q, r),
            sq: r * r,
            r,
            mu,
            g,
        }
    }

    fn apply(&self, y: &CMatrix) -> CMatrix {
        let mut out = &self.dr * y * self.dr.adjoint();
        out -= self.r * y * self.r.adjoint() * real(self.mu);
        if self.g != 0.0 {
            out += &self.sq * y * self.sq.adjoint() * real(self.g);
        }
        out
    }

    /// `𝓗ᵀ(X)` with `tr(X 𝓗(Y)) = tr(𝓗ᵀ(X) Y)`.
    fn apply_transpose(&self, x: &CMatrix) -> CMatrix {
        let mut out = self.dr.adjoint() * x * &self.dr;
        out -= self.r.adjoint() * x * self.r * real(self.mu);
        if self.g != 0.0 {
            out += self.sq.adjoint() * x * &self.sq * real(self.g);
        }
        out
    }
}

fn energy_with(q: &CMatrix, r: &CMatrix, fp: &FixedPoints, mu: f64, g: f64) -> (f64, f64) {
    let h = Density::new(q, r, mu, g);
    let norm = trace_product(&fp.left, &fp.right).re;
    let e = trace_product(&fp.left, &h.apply(&fp.right)).re / norm;
    let n = trace_product(&fp.left, &(r * &fp.right * r.adjoint())).re / norm;
    (e, n)
}

/// `(e, density)` of `(Q, R)`.
pub fn uniform_energy_density(q: &CMatrix, r: &CMatrix, mu: f64, g: f64) -> Result<(f64, f64)> {
    let fp = fixed_points(q, r)?;
    Ok(energy_with(q, r, &fp, mu, g))
}

/// Solves `A z = c` for a matrix-valued linear map, densely for small `D`
/// and with restarted GMRES otherwise.
fn solve_superoperator(apply: &dyn Fn(&CMatrix) -> CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let d = c.nrows();
    if d <= DENSE_LIMIT {
        let n = d * d;
        let mut a = CMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = CMatrix::zeros(d, d);
            e[(j % d, j / d)] = ONE;
            a.set_column(j, &vec_of(&apply(&e)));
        }
        let z = a
            .lu()
            .solve(&vec_of(c))
            .ok_or_else(|| Error::NumericalBreakdown("singular fixed-point system".into()))?;
        return Ok(mat_of(&z, d));
    }
    gmres(apply, c, 1e-13, 60, 4000)
}

/// Restarted GMRES on matrices with the Frobenius inner product.
fn gmres(
    apply: &dyn Fn(&CMatrix) -> CMatrix,
    b: &CMatrix,
    tol: f64,
    restart: usize,
    max_iterations: usize,
) -> Result<CMatrix> {
    let d = b.nrows();
    let b_norm = b.norm();
    let mut x = CMatrix::zeros(d, d);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut iterations = 0;
    while iterations < max_iterations {
        let r0 = b - apply(&x);
        let beta = r0.norm();
        if beta <= tol * b_norm {
            return Ok(x);
        }
        let mut basis = vec![r0 / real(beta)];
        let mut h = CMatrix::zeros(restart + 1, restart);
        let mut size = 0;
        for j in 0..restart {
            let mut w = apply(&basis[j]);
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = inner(v, &w);
                    h[(i, j)] += c;
                    w -= v * c;
                }
            }
            let hn = w.norm();
            h[(j + 1, j)] = real(hn);
            size = j + 1;
            iterations += 1;
            if hn <= 1e-300 {
                break;
            }
            basis.push(w / real(hn));
        }
        // least squares min ‖β e₁ − H y‖ via QR of the small Hessenberg matrix
        let hs = h.view((0, 0), (size + 1, size)).into_owned();
        let mut rhs = CMatrix::zeros(size + 1, 1);
        rhs[(0, 0)] = real(beta);
        let qr = hs.qr();
        let qtb = qr.q().adjoint() * rhs;
        let rmat = qr.r();
        let mut y = vec![ZERO; size];
        for i in (0..size).rev() {
            let mut acc = qtb[(i, 0)];
            for (k, yk) in y.iter().enumerate().skip(i + 1) {
                acc -= rmat[(i, k)] * yk;
            }
            y[i] = acc / rmat[(i, i)];
        }
        for (v, yi) in basis.iter().zip(&y) {
            x += v * *yi;
        }
    }
    let residual = (b - apply(&x)).norm() / b_norm;
    if residual <= 1e3 * tol {
        Ok(x)
    } else {
        Err(Error::NumericalBreakdown(alloc::format!(
            "GMRES stopped at relative residual {residual:e}"
        )))
    }
}

/// Energy density, density and Wirtinger gradients `(∂e/∂conj Q, ∂e/∂conj R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformGradient {
    pub energy: f64,
    pub density: f64,
    pub grad_q: CMatrix,
    pub grad_r: CMatrix,
    pub fixed: FixedPoints,
}

pub fn uniform_energy_and_gradient(q: &CMatrix, r: &CMatrix, mu: f64, g: f64) -> Result<UniformGradient> {
    let fp = fixed_points(q, r)?;
    gradient_with(q, r, fp, mu, g)
}

fn gradient_with(q: &CMatrix, r: &CMatrix, fp: FixedPoints, mu: f64, g: f64) -> Result<UniformGradient> {
    let (energy, density) = energy_with(q, r, &fp, mu, g);
    let h = Density::new(q, r, mu, g);
    let l = &fp.left;
    let rf = &fp.right;
    let lambda = fp.eigenvalue;
    let norm = trace_product(l, rf).re;
    let c = h.apply(rf) - rf * real(energy);
    let b = h.apply_transpose(l) - l * real(energy);
    let ln = l / real(norm);
    let rn = rf / real(norm);
    // (T* − λ + |r⟩⟨l|) z = c and (T − λ + |l⟩⟨r|) y = b
    let a_op = |z: &CMatrix| transfer_right(q, r, z) - z * real(lambda) + rf * trace_product(&ln, z);
    let b_op = |y: &CMatrix| transfer_left(q, r, y) - y * real(lambda) + l * trace_product(y, &rn);
    let z = hermitian_part(&solve_superoperator(&a_op, &c)?);
    let y = hermitian_part(&solve_superoperator(&b_op, &b)?);

    // δe·N = Σ tr(G δX) + tr(H δX†);  X̄ = G† + H
    let d = q.nrows();
    let mut gq = CMatrix::zeros(d, d);
    let mut hq = CMatrix::zeros(d, d);
    let mut gr = CMatrix::zeros(d, d);
    let mut hr = CMatrix::zeros(d, d);
    let r_ad = r.adjoint();
    let q_ad = q.adjoint();
    // kinetic
    let w = rf * h.dr.adjoint() * l;
    let v = l * &h.dr * rf;
    gq += commutator(r, &w);
    gr += commutator(&w, q);
    hq += &v * &r_ad - &r_ad * &v;
    hr += &q_ad * &v - &v * &q_ad;
    // chemical potential
    gr -= rf * &r_ad * l * real(mu);
    hr -= l * r * rf * real(mu);
    // interaction
    if g != 0.0 {
        let u = rf * h.sq.adjoint() * l;
        let vs = l * &h.sq * rf;
        gr += (r * &u + &u * r) * real(g);
        hr += (&vs * &r_ad + &r_ad * &vs) * real(g);
    }
    // fixed-point response
    gq -= rf * &y + &z * l;
    hq -= &y * rf + l * &z;
    gr -= rf * &r_ad * &y + &z * &r_ad * l;
    hr -= &y * r * rf + l * r * &z;

    let half = real(0.5 / norm);
    Ok(UniformGradient {
        energy,
        density,
        grad_q: (gq.adjoint() + hq) * half,
        grad_r: (gr.adjoint() + hr) * half,
        fixed: fp,
    })
}

/// Options of [`uniform_optimize`].
#[derive(Debug, Clone, PartialEq)]
pub struct UniformOptions {
    /// `gradient_tolerance` applies to the packed real gradient
    /// `(∂e/∂Re, ∂e/∂Im)` of all entries of `Q` and `R`.
    pub minimize: MinimizeOptions,
    pub seed: u64,
    /// Entry size of the random initial `R`; by default chosen from `μ` and
    /// `g`.
    pub initial_scale: Option<f64>,
    /// Relative regularization of the local Gauss-Newton preconditioner, or
    /// `None` for plain L-BFGS.
    pub preconditioner: Option<f64>,
}

impl Default for UniformOptions {
    fn default() -> Self {
        Self {
            minimize: MinimizeOptions {
                max_iterations: 3000,
                gradient_tolerance: 1e-8,
                ..MinimizeOptions::default()
            },
            seed: 1,
            initial_scale: None,
            preconditioner: Some(0.01),
        }
    }
}

/// Result of [`uniform_optimize`]; the state is in the symmetric gauge
/// unless that gauge is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSolution {
    pub state: UniformCmps,
    pub energy: f64,
    pub density: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// The optimizer stopped before reaching the gradient tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformStall {
    pub best: UniformSolution,
    pub termination: Termination,
}

/// Density estimate used to size random initial states: the mean-field
/// value `μ/g`, capped by the hard-core value `√μ/π`.
pub fn density_estimate(mu: f64, g: f64) -> f64 {
    if mu <= 0.0 {
        return 0.1;
    }
    let hard_core = math::sqrt(mu) / core::f64::consts::PI;
    if g > 0.0 {
        (mu / g).min(hard_core)
    } else {
        hard_core
    }
}

fn pack(q: &CMatrix, r: &CMatrix) -> Vec<f64> {
    let mut x = Vec::with_capacity(4 * q.len());
    for m in [q, r] {
        for z in m.iter() {
            x.push(z.re);
            x.push(z.im);
        }
    }
    x
}

fn unpack(x: &[f64], d: usize) -> (CMatrix, CMatrix) {
    let n = d * d;
    let q = CMatrix::from_iterator(d, d, (0..n).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])));
    let r = CMatrix::from_iterator(
        d,
        d,
        (0..n).map(|i| Complex64::new(x[2 * n + 2 * i], x[2 * n + 2 * i + 1])),
    );
    (q, r)
}

fn pack_gradient(gq: &CMatrix, gr: &CMatrix) -> Vec<f64> {
    // ∂e/∂Re Z = 2 Re(∂e/∂conj Z), ∂e/∂Im Z = 2 Im(∂e/∂conj Z)
    let mut out = Vec::with_capacity(4 * gq.len());
    for m in [gq, gr] {
        for z in m.iter() {
            out.push(2.0 * z.re);
            out.push(2.0 * z.im);
        }
    }
    out
}

/// Gauss-Newton blocks for `Q` (commutator with `R`) and `R` (commutator
/// with `Q`, interaction weighted by `g`) around the fixed points.
fn local_metric(q: &CMatrix, r: &CMatrix, fp: &FixedPoints, mu: f64, g: f64, delta: f64) -> BlockDiagonal {
    let norm = trace_product(&fp.left, &fp.right).re;
    let scale = mu.abs() + 1.0;
    let block = |jacobians: &[Jacobian]| Block::new(&fp.left, &fp.right, scale, jacobians, norm, delta);
    let bq = block(&[Jacobian {
        x: r,
        sign: -1.0,
        weight: 1.0,
    }]);
    let br = block(&[
        Jacobian {
            x: q,
            sign: -1.0,
            weight: 1.0,
        },
        Jacobian {
            x: r,
            sign: 1.0,
            weight: g,
        },
    ]);
    BlockDiagonal {
        dim: q.nrows(),
        blocks: vec![bq, br],
    }
}

/// Random starting point `R` Gaussian, `Q = −½R†R + iH`.
pub fn random_uniform(d: usize, scale: f64, seed: u64) -> (CMatrix, CMatrix) {
    let mut rng = rand_chacha_like(seed);
    let r = gaussian_matrix(d, scale, &mut rng);
    let mut hmat = CMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            hmat[(i, j)] = complex_gaussian(&mut rng) * real(0.5 * scale * scale);
        }
    }
    let hmat = hermitian_part(&hmat);
    let q = r.adjoint() * &r * real(-0.5) + hmat * Complex64::new(0.0, 1.0);
    (q, r)
}

fn rand_chacha_like(seed: u64) -> rand_chacha::ChaCha8Rng {
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

/// Minimizes the energy density over `D × D` matrices `Q`, `R`.
pub fn uniform_optimize(
    d: usize,
    mu: f64,
    g: f64,
    options: &UniformOptions,
) -> core::result::Result<UniformSolution, UniformStall> {
    let scale = options
        .initial_scale
        .unwrap_or_else(|| math::sqrt(density_estimate(mu, g) / d as f64));
    let (q, r) = random_uniform(d, scale, options.seed);
    uniform_optimize_from(q, r, mu, g, options)
}

/// [`uniform_optimize`] from a given starting point.
pub fn uniform_optimize_from(
    q: CMatrix,
    r: CMatrix,
    mu: f64,
    g: f64,
    options: &UniformOptions,
) -> core::result::Result<UniformSolution, UniformStall> {
    let d = q.nrows();
    let objective = |x: &[f64]| {
        let (q, r) = unpack(x, d);
        let res = uniform_energy_and_gradient(&q, &r, mu, g).ok()?;
        let metric = options
            .preconditioner
            .map(|delta| local_metric(&q, &r, &res.fixed, mu, g, delta));
        Some((res.energy, pack_gradient(&res.grad_q, &res.grad_r), metric))
    };
    let precondition = |metric: &Option<BlockDiagonal>, v: &mut [f64]| {
        if let Some(m) = metric {
            m.apply(v);
        }
    };
    let fallback = || {
        let zero = CMatrix::zeros(d, d);
        let one = CMatrix::from_element(1, 1, ONE);
        UniformSolution {
            state: UniformCmps {
                q: zero.clone(),
                r: zero,
                fixed: FixedPoints {
                    left: one.clone(),
                    right: one,
                    eigenvalue: 0.0,
                    gap: 0.0,
                },
            },
            energy: f64::NAN,
            density: f64::NAN,
            gradient_norm: f64::NAN,
            iterations: 0,
        }
    };
    let Some(found) = minimize_with(objective, precondition, pack(&q, &r), &options.minimize) else {
        return Err(UniformStall {
            best: fallback(),
            termination: Termination::LineSearch,
        });
    };
    let (q, r) = unpack(&found.point.x, d);
    // near the vacuum the gauge transform is singular; keep the raw gauge
    let solution = UniformCmps::new(q, r)
        .map(|u| u.symmetric_gauge().unwrap_or(u))
        .map(|state| {
            let (energy, density) = state.energy_density(mu, g);
            UniformSolution {
                state,
                energy,
                density,
                gradient_norm: crate::lbfgs::norm(&found.point.gradient),
                iterations: found.iterations,
            }
        });
    match (solution, found.termination) {
        (Ok(s), t) if t.converged() => Ok(s),
        (Ok(s), t) => Err(UniformStall {
            best: s,
            termination: t,
        }),
        (Err(_), t) => Err(UniformStall {
            best: fallback(),
            termination: t,
        }),
    }
}
