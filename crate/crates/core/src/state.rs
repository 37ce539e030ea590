//! The variational object: mesh, `Q` and `R` node matrices and boundary vectors.

use alloc::vec::Vec;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg::{basis_vector, embed, identity, real, CMatrix, CVector};
use crate::math;
use crate::mesh::{Mesh, PiecewiseLinear};

/// Piecewise-linear cMPS on a finite box.
#[derive(Debug, Clone, PartialEq)]
pub struct CmpsState {
    q: PiecewiseLinear,
    r: PiecewiseLinear,
    left: CVector,
    right: CVector,
    dirichlet: bool,
}

impl CmpsState {
    pub fn new(q: PiecewiseLinear, r: PiecewiseLinear, left: CVector, right: CVector, dirichlet: bool) -> Result<Self> {
        if q.mesh() != r.mesh() {
            return Err(invalid("Q and R must share a mesh"));
        }
        let d = q.dim();
        for found in [r.dim(), left.len(), right.len()] {
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        if dirichlet {
            let last = r.nodes().len() - 1;
            if r.nodes()[0].iter().any(|z| *z != Complex64::new(0.0, 0.0))
                || r.nodes()[last].iter().any(|z| *z != Complex64::new(0.0, 0.0))
            {
                return Err(invalid("Dirichlet state needs R = 0 at both walls"));
            }
        }
        Ok(Self {
            q,
            r,
            left,
            right,
            dirichlet,
        })
    }

    /// Both boundary vectors set to the first basis vector.
    pub fn with_default_boundaries(q: PiecewiseLinear, r: PiecewiseLinear, dirichlet: bool) -> Result<Self> {
        let d = q.dim();
        Self::new(q, r, basis_vector(d, 0), basis_vector(d, 0), dirichlet)
    }

    /// Random state: complex Gaussian `R` nodes of size `r_scale`, and
    /// `Q = −½R†R + i·H` with a random Hermitian `H` of size `q_scale`.
    pub fn random<G: Rng + ?Sized>(
        mesh: &Mesh,
        d: usize,
        r_scale: f64,
        q_scale: f64,
        dirichlet: bool,
        rng: &mut G,
    ) -> Self {
        let k_last = mesh.num_points() - 1;
        let mut qs = Vec::with_capacity(mesh.num_points());
        let mut rs = Vec::with_capacity(mesh.num_points());
        for k in 0..mesh.num_points() {
            let r = if dirichlet && (k == 0 || k == k_last) {
                CMatrix::zeros(d, d)
            } else {
                gaussian_matrix(d, r_scale, rng)
            };
            let h = gaussian_matrix(d, q_scale, rng);
            let h = (&h + h.adjoint()) * real(0.5);
            let q = r.ad_mul(&r) * real(-0.5) + h * Complex64::new(0.0, 1.0);
            qs.push(q);
            rs.push(r);
        }
        let q = PiecewiseLinear::new(mesh.clone(), qs).expect("consistent by construction");
        let r = PiecewiseLinear::new(mesh.clone(), rs).expect("consistent by construction");
        Self::with_default_boundaries(q, r, dirichlet).expect("consistent by construction")
    }

    pub fn mesh(&self) -> &Mesh {
        self.q.mesh()
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn q(&self) -> &PiecewiseLinear {
        &self.q
    }

    pub fn r(&self) -> &PiecewiseLinear {
        &self.r
    }

    pub fn q_nodes(&self) -> &[CMatrix] {
        self.q.nodes()
    }

    pub fn r_nodes(&self) -> &[CMatrix] {
        self.r.nodes()
    }

    pub fn left_boundary(&self) -> &CVector {
        &self.left
    }

    pub fn right_boundary(&self) -> &CVector {
        &self.right
    }

    pub fn dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn into_parts(self) -> (PiecewiseLinear, PiecewiseLinear, CVector, CVector, bool) {
        (self.q, self.r, self.left, self.right, self.dirichlet)
    }

    /// Same boundaries and constraint, new node matrices on the same mesh.
    pub fn with_nodes(&self, q_nodes: Vec<CMatrix>, r_nodes: Vec<CMatrix>) -> Result<Self> {
        let q = PiecewiseLinear::new(self.mesh().clone(), q_nodes)?;
        let r = PiecewiseLinear::new(self.mesh().clone(), r_nodes)?;
        Self::new(q, r, self.left.clone(), self.right.clone(), self.dirichlet)
    }

    /// Inserts `new_points` into the mesh; the functions `Q(x)`, `R(x)` are
    /// unchanged.
    pub fn refine(&self, new_points: &[f64]) -> Result<Self> {
        if new_points.is_empty() {
            return Ok(self.clone());
        }
        let fine = self.mesh().with_points(new_points)?;
        let q = self.q.resampled(&fine)?;
        let r = self.r.resampled(&fine)?;
        Self::new(q, r, self.left.clone(), self.right.clone(), self.dirichlet)
    }

    /// Embeds every node as the top-left block of a `d_new × d_new` matrix,
    /// filling the rest with complex Gaussian noise of size `noise_scale`.
    pub fn expand_bond<G: Rng + ?Sized>(&self, d_new: usize, noise_scale: f64, rng: &mut G) -> Result<Self> {
        let d = self.dim();
        if d_new <= d {
            return Err(invalid(alloc::format!(
                "new bond dimension {d_new} must exceed current {d}"
            )));
        }
        let last = self.mesh().num_points() - 1;
        let grow = |m: &CMatrix, noisy: bool, rng: &mut G| {
            let mut out = embed(m, d_new);
            if noisy && noise_scale != 0.0 {
                for j in 0..d_new {
                    for i in 0..d_new {
                        if i >= d || j >= d {
                            out[(i, j)] = complex_gaussian(rng) * real(noise_scale);
                        }
                    }
                }
            }
            out
        };
        let mut q_nodes = Vec::with_capacity(last + 1);
        let mut r_nodes = Vec::with_capacity(last + 1);
        for k in 0..=last {
            q_nodes.push(grow(&self.q.nodes()[k], true, rng));
            let wall = self.dirichlet && (k == 0 || k == last);
            r_nodes.push(grow(&self.r.nodes()[k], !wall, rng));
        }
        let pad = |v: &CVector| {
            let mut out = CVector::zeros(d_new);
            out.rows_mut(0, d).copy_from(v);
            out
        };
        Self::new(
            PiecewiseLinear::new(self.mesh().clone(), q_nodes)?,
            PiecewiseLinear::new(self.mesh().clone(), r_nodes)?,
            pad(&self.left),
            pad(&self.right),
            self.dirichlet,
        )
    }

    /// `Q → G Q G⁻¹`, `R → G R G⁻¹` with boundaries transformed so the
    /// physical state is unchanged.
    pub fn gauge_transformed(&self, g: &CMatrix) -> Result<Self> {
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("gauge matrix is singular"))?;
        let conj = |m: &CMatrix| g * m * &g_inv;
        let q_nodes = self.q.nodes().iter().map(conj).collect();
        let r_nodes = self.r.nodes().iter().map(conj).collect();
        let left = g_inv.adjoint() * &self.left;
        let right = g * &self.right;
        Self::new(
            PiecewiseLinear::new(self.mesh().clone(), q_nodes)?,
            PiecewiseLinear::new(self.mesh().clone(), r_nodes)?,
            left,
            right,
            self.dirichlet,
        )
    }

    /// `Q → Q − shift·1` everywhere; rescales the norm by `e^{−2 shift L}`.
    pub fn shifted(&self, shift: f64) -> Self {
        let d = self.dim();
        let id = identity(d) * real(shift);
        let q_nodes = self.q.nodes().iter().map(|m| m - &id).collect();
        let mut out = self.clone();
        out.q = PiecewiseLinear::new(self.mesh().clone(), q_nodes).expect("same shape");
        out
    }
}

pub(crate) fn complex_gaussian<G: Rng + ?Sized>(rng: &mut G) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * math::sqrt(0.5)
}

pub(crate) fn gaussian_matrix<G: Rng + ?Sized>(d: usize, scale: f64, rng: &mut G) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] = complex_gaussian(rng) * real(scale);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_state() -> CmpsState {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        CmpsState::random(&Mesh::uniform(1.0, 1).unwrap(), 2, 0.5, 0.3, false, &mut rng)
    }

    #[test]
    fn refine_midpoint_preserves_functions() {
        let s = sample_state();
        let fine = s.refine(&[0.5]).unwrap();
        assert_eq!(fine.mesh().num_points(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = rng.random();
            let dq = (s.q().evaluate(x).unwrap() - fine.q().evaluate(x).unwrap()).norm();
            let dr = (s.r().evaluate(x).unwrap() - fine.r().evaluate(x).unwrap()).norm();
            assert!(dq < 1e-14 && dr < 1e-14);
        }
    }

    #[test]
    fn refine_empty_is_identity() {
        let s = sample_state();
        assert_eq!(s.refine(&[]).unwrap(), s);
    }

    #[test]
    fn refine_rejects_bad_points() {
        let s = sample_state();
        assert!(s.refine(&[0.0]).is_err());
        assert!(s.refine(&[1.2]).is_err());
        assert!(s.refine(&[0.3, 0.3]).is_err());
    }

    #[test]
    fn expand_bond_rejects_shrinking() {
        let s = sample_state();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(s.expand_bond(2, 0.0, &mut rng).is_err());
        let big = s.expand_bond(4, 0.0, &mut rng).unwrap();
        assert_eq!(big.dim(), 4);
        assert_eq!(big.q_nodes()[0][(3, 3)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn dirichlet_enforced() {
        let mesh = Mesh::uniform(1.0, 2).unwrap();
        let one = CMatrix::identity(1, 1);
        let q = PiecewiseLinear::zeros(mesh.clone(), 1);
        let r = PiecewiseLinear::new(mesh, alloc::vec![one.clone(), one.clone(), one]).unwrap();
        assert!(CmpsState::with_default_boundaries(q.clone(), r.clone(), true).is_err());
        assert!(CmpsState::with_default_boundaries(q, r, false).is_ok());
    }
}
