//! Dense complex matrix helpers shared by the numerical modules.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn zeros(d: usize) -> CMatrix {
    CMatrix::zeros(d, d)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// `e_i` in dimension `d`.
pub fn basis_vector(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = ONE;
    v
}

/// `tr(a b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    debug_assert_eq!(a.ncols(), b.nrows());
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

pub fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * real(0.5)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// `out += alpha * a * b`
#[inline]
pub fn mul_acc(out: &mut CMatrix, alpha: Complex64, a: &CMatrix, b: &CMatrix) {
    out.gemm(alpha, a, b, ONE);
}

/// `out += alpha * a^† * b`
#[inline]
pub fn ad_mul_acc(out: &mut CMatrix, alpha: Complex64, a: &CMatrix, b: &CMatrix) {
    out.gemm_ad(alpha, a, b, ONE);
}

/// `out = a * b`
#[inline]
pub fn mul_into(out: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
    out.gemm(ONE, a, b, ZERO);
}

/// `a * b^†`
pub fn mul_ad(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b.adjoint()
}

/// Kronecker product of a list of square factors, left to right.
pub fn kron_all(factors: &[CMatrix]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for f in factors {
        out = out.kronecker(f);
    }
    out
}

/// Largest deviation from Hermiticity, `‖a − a^†‖_F`.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    (a - a.adjoint()).norm()
}

/// Embeds `a` as the top-left block of a `d_new × d_new` zero matrix.
pub fn embed(a: &CMatrix, d_new: usize) -> CMatrix {
    let mut out = zeros(d_new);
    out.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    out
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = hermitian_part(a).symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = zeros(n);
    for (c, &i) in order.iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(a: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(a);
    let mut scaled = vectors.clone();
    for (c, v) in values.iter().enumerate() {
        let fv = real(f(*v));
        for r in 0..scaled.nrows() {
            scaled[(r, c)] *= fv;
        }
    }
    mul_ad(&scaled, &vectors)
}

/// Eigenvalues of a general complex square matrix (complex Schur form).
pub fn general_eigenvalues(a: &CMatrix) -> Vec<Complex64> {
    let n = a.nrows();
    if n == 1 {
        return alloc::vec![a[(0, 0)]];
    }
    let schur = nalgebra::Schur::new(a.clone());
    let (_, t) = schur.unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_product_matches_product_trace() {
        let a = CMatrix::from_fn(3, 3, |i, j| Complex64::new(i as f64 + 1.0, j as f64 - 0.5));
        let b = CMatrix::from_fn(3, 3, |i, j| Complex64::new((i * j) as f64, 1.0 + i as f64));
        let direct = (&a * &b).trace();
        assert!((trace_product(&a, &b) - direct).norm() < 1e-12);
    }

    #[test]
    fn general_eigenvalues_of_triangular() {
        let mut a = zeros(3);
        a[(0, 0)] = real(1.0);
        a[(1, 1)] = real(2.0);
        a[(2, 2)] = Complex64::new(0.0, 3.0);
        a[(0, 2)] = real(5.0);
        let mut ev = general_eigenvalues(&a);
        ev.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
        assert!((ev[0] - real(1.0)).norm() < 1e-12);
        assert!((ev[2] - Complex64::new(0.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn hermitian_sqrt_squares_back() {
        let b = CMatrix::from_fn(3, 3, |i, j| {
            Complex64::new((i + 2 * j) as f64 * 0.1, (i as f64) - (j as f64))
        });
        let p = b.adjoint() * &b + identity(3);
        let s = hermitian_function(&p, f64::sqrt);
        assert!((&s * &s - &p).norm() < 1e-10);
    }
}
