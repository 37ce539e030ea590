//! Local Gauss-Newton blocks used as the initial inverse Hessian of L-BFGS.
//!
//! A block acts on one matrix parameter `Z` (packed as interleaved `Re`,
//! `Im`, column-major). It approximates the curvature of the energy density
//! around that parameter by `(1/N)[c Ĝ + Σ w J†GJ]`, where `G = σᵀ ⊗ ρ` is
//! the metric `Z ↦ ρZσ` and each `J` is a linear map of the form
//! `Z ↦ XZ ± ZX`. `Ĝ` is `G` with `ρ`, `σ` shifted by `δ` times their
//! largest eigenvalue.

use alloc::vec::Vec;

use nalgebra::{Cholesky, Dyn};
use num_complex::Complex64;

use crate::linalg::{hermitian_eigen, hermitian_function, hermitian_part, identity, real, CMatrix, CVector};

/// Largest bond dimension for which blocks are factored as dense
/// `D² × D²` matrices; larger blocks keep only the Kronecker metric.
pub const DENSE_BLOCK_LIMIT: usize = 16;

/// `Z ↦ XZ + sign·ZX`, weighted in the block by `weight`.
pub struct Jacobian<'a> {
    pub x: &'a CMatrix,
    pub sign: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub enum Block {
    Dense(Cholesky<Complex64, Dyn>),
    /// `Z ↦ scale · L Z R`.
    Kronecker(CMatrix, CMatrix, f64),
}

/// `J†(σᵀ ⊗ ρ)J` for `J = 1 ⊗ X + sign Xᵀ ⊗ 1`.
fn gauss_newton(x: &CMatrix, sign: f64, rho: &CMatrix, sigma: &CMatrix) -> CMatrix {
    let st = sigma.transpose();
    let xt = x.transpose();
    let xc = x.conjugate();
    let xa = x.adjoint();
    let s = real(sign);
    st.kronecker(&(&xa * rho * x))
        + (&st * &xt).kronecker(&(&xa * rho)) * s
        + (&xc * &st).kronecker(&(rho * x)) * s
        + (&xc * &st * &xt).kronecker(rho)
}

fn shifted(m: &CMatrix, delta: f64) -> CMatrix {
    let top = hermitian_eigen(m)
        .0
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(f64::MIN_POSITIVE);
    m + identity(m.nrows()) * real(delta * top)
}

fn inverse(m: &CMatrix) -> CMatrix {
    hermitian_function(m, |v| 1.0 / v.max(f64::MIN_POSITIVE))
}

impl Block {
    pub fn new(rho: &CMatrix, sigma: &CMatrix, c: f64, jacobians: &[Jacobian], norm: f64, delta: f64) -> Self {
        let (rho, sigma) = (hermitian_part(rho), hermitian_part(sigma));
        let (rr, ss) = (shifted(&rho, delta), shifted(&sigma, delta));
        let fallback = || Block::Kronecker(inverse(&rr), inverse(&ss), norm / c);
        if rho.nrows() > DENSE_BLOCK_LIMIT {
            return fallback();
        }
        let mut p = ss.transpose().kronecker(&rr) * real(c);
        for j in jacobians {
            p += gauss_newton(j.x, j.sign, &rho, &sigma) * real(j.weight);
        }
        let p = hermitian_part(&p) / real(norm);
        match p.cholesky() {
            Some(ch) => Block::Dense(ch),
            None => fallback(),
        }
    }

    /// Overwrites the packed matrix `chunk` (length `2D²`) with the block's
    /// inverse applied to it.
    pub fn apply(&self, d: usize, chunk: &mut [f64]) {
        let z = CMatrix::from_iterator(d, d, chunk.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        let p = match self {
            Block::Dense(ch) => {
                let col = CVector::from_iterator(d * d, z.iter().copied());
                CMatrix::from_iterator(d, d, ch.solve(&col).iter().copied())
            }
            Block::Kronecker(left, right, scale) => left * z * right * real(*scale),
        };
        for (c, w) in chunk.chunks_exact_mut(2).zip(p.iter()) {
            c[0] = w.re;
            c[1] = w.im;
        }
    }
}

/// Block-diagonal preconditioner over consecutive packed matrices.
#[derive(Debug, Clone)]
pub struct BlockDiagonal {
    pub dim: usize,
    pub blocks: Vec<Block>,
}

impl BlockDiagonal {
    pub fn apply(&self, v: &mut [f64]) {
        let d = self.dim;
        for (chunk, block) in v.chunks_exact_mut(2 * d * d).zip(&self.blocks) {
            block.apply(d, chunk);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random(d: usize, rng: &mut rand_chacha::ChaCha8Rng) -> CMatrix {
        use rand::Rng;
        CMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn dense_block_inverts_the_quadratic_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let d = 3;
        let a = random(d, &mut rng);
        let b = random(d, &mut rng);
        let rho = &a * a.adjoint() + identity(d) * real(0.1);
        let sigma = &b * b.adjoint() + identity(d) * real(0.2);
        let x = random(d, &mut rng);
        let (c, w, norm, delta) = (2.0, 3.0, 1.7, 1e-3);
        let block = Block::new(
            &rho,
            &sigma,
            c,
            &[Jacobian {
                x: &x,
                sign: 1.0,
                weight: w,
            }],
            norm,
            delta,
        );
        assert!(matches!(block, Block::Dense(_)));
        let z = random(d, &mut rng);
        // P(Z) = (1/N)[c ρ̂Zσ̂ + w J†(ρ J(Z) σ)]
        let (rr, ss) = (shifted(&rho, delta), shifted(&sigma, delta));
        let jz = &x * &z + &z * &x;
        let inner = &rho * jz * &sigma;
        let jt = x.adjoint() * &inner + &inner * x.adjoint();
        let pz = (&rr * &z * &ss * real(c) + jt * real(w)) / real(norm);
        let mut packed: Vec<f64> = pz.iter().flat_map(|c| [c.re, c.im]).collect();
        block.apply(d, &mut packed);
        let back = CMatrix::from_iterator(d, d, packed.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        assert!((back - &z).norm() < 1e-10 * z.norm());
        // positive definite in the real inner product
        let mut v: Vec<f64> = z.iter().flat_map(|c| [c.re, c.im]).collect();
        let orig = v.clone();
        block.apply(d, &mut v);
        assert!(v.iter().zip(&orig).map(|(a, b)| a * b).sum::<f64>() > 0.0);
    }
}
