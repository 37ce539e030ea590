//! Meshes, piecewise-linear matrix functions and segment-local polynomials.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::linalg::{real, CMatrix};
use crate::math;

/// Strictly increasing grid `0 = x_0 < x_1 < … < x_K = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    points: Vec<f64>,
}

impl Mesh {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("a mesh needs at least two points"));
        }
        if points[0] != 0.0 {
            return Err(invalid("a mesh must start at x = 0"));
        }
        for w in points.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(invalid("mesh points must be finite and strictly increasing"));
            }
        }
        Ok(Self { points })
    }

    /// `segments` equal segments on `[0, length]`.
    pub fn uniform(length: f64, segments: usize) -> Result<Self> {
        if segments == 0 || !(length > 0.0) {
            return Err(invalid("uniform mesh needs length > 0 and at least one segment"));
        }
        let mut points: Vec<f64> = (0..=segments).map(|k| length * k as f64 / segments as f64).collect();
        points[segments] = length;
        Self::new(points)
    }

    /// Cosine-clustered mesh `x_k = (1 − cos(πk/K))·L/2`, dense near both walls.
    pub fn chebyshev(length: f64, segments: usize) -> Result<Self> {
        if segments == 0 || !(length > 0.0) {
            return Err(invalid("chebyshev mesh needs length > 0 and at least one segment"));
        }
        let mut points: Vec<f64> = (0..=segments)
            .map(|k| (1.0 - math::cos(PI * k as f64 / segments as f64)) * length / 2.0)
            .collect();
        points[0] = 0.0;
        points[segments] = length;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_segments(&self) -> usize {
        self.points.len() - 1
    }

    pub fn length(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Width `x_{k+1} − x_k` of segment `k`.
    pub fn width(&self, k: usize) -> f64 {
        self.points[k + 1] - self.points[k]
    }

    /// Segment index and local coordinate `t ∈ [0, 1]` of `x`.
    ///
    /// Interior nodes belong to the segment on their right; `x = L` maps to
    /// the last segment at `t = 1`.
    pub fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let length = self.length();
        if !(x >= 0.0 && x <= length) {
            return Err(Error::OutOfDomain { x, length });
        }
        let last = self.num_segments() - 1;
        if x == length {
            return Ok((last, 1.0));
        }
        // number of points <= x, minus one
        let k = self.points.partition_point(|&p| p <= x) - 1;
        let k = k.min(last);
        let t = (x - self.points[k]) / self.width(k);
        Ok((k, t))
    }

    /// Union with `new_points`, which must lie strictly inside `(0, L)` and
    /// not coincide with existing nodes or each other.
    pub fn with_points(&self, new_points: &[f64]) -> Result<Self> {
        let length = self.length();
        let mut all = self.points.clone();
        for &p in new_points {
            if !(p > 0.0 && p < length) {
                return Err(invalid("refinement points must lie strictly inside (0, L)"));
            }
            all.push(p);
        }
        all.sort_by(f64::total_cmp);
        for w in all.windows(2) {
            if w[0] == w[1] {
                return Err(invalid("refinement point duplicates an existing mesh point"));
            }
        }
        Self::new(all)
    }

    /// Midpoints of every segment (or of the selected segments).
    pub fn midpoints(&self, segments: Option<&[usize]>) -> Vec<f64> {
        match segments {
            Some(ks) => ks
                .iter()
                .map(|&k| 0.5 * (self.points[k] + self.points[k + 1]))
                .collect(),
            None => self.points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        }
    }
}

/// Matrix-valued tent-function interpolant: one node matrix per mesh point,
/// linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    mesh: Mesh,
    nodes: Vec<CMatrix>,
}

impl PiecewiseLinear {
    pub fn new(mesh: Mesh, nodes: Vec<CMatrix>) -> Result<Self> {
        if nodes.len() != mesh.num_points() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_points(),
                found: nodes.len(),
            });
        }
        let d = nodes[0].nrows();
        if d == 0 {
            return Err(invalid("node matrices must have dimension >= 1"));
        }
        for n in &nodes {
            if n.nrows() != d || n.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: if n.nrows() != d { n.nrows() } else { n.ncols() },
                });
            }
        }
        Ok(Self { mesh, nodes })
    }

    /// Samples `f` at every mesh point.
    pub fn from_fn(mesh: Mesh, f: impl Fn(f64) -> CMatrix) -> Result<Self> {
        let nodes = mesh.points().iter().map(|&x| f(x)).collect();
        Self::new(mesh, nodes)
    }

    pub fn zeros(mesh: Mesh, d: usize) -> Self {
        let nodes = (0..mesh.num_points()).map(|_| CMatrix::zeros(d, d)).collect();
        Self { mesh, nodes }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn nodes(&self) -> &[CMatrix] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [CMatrix] {
        &mut self.nodes
    }

    pub fn into_nodes(self) -> Vec<CMatrix> {
        self.nodes
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].nrows()
    }

    /// Value on segment `k` at local coordinate `t`.
    pub fn at_local(&self, k: usize, t: f64) -> CMatrix {
        if t == 0.0 {
            return self.nodes[k].clone();
        }
        if t == 1.0 {
            return self.nodes[k + 1].clone();
        }
        &self.nodes[k] + (&self.nodes[k + 1] - &self.nodes[k]) * real(t)
    }

    pub fn evaluate(&self, x: f64) -> Result<CMatrix> {
        let (k, t) = self.mesh.locate(x)?;
        Ok(self.at_local(k, t))
    }

    /// Same function on a finer mesh containing every current node.
    pub fn resampled(&self, fine: &Mesh) -> Result<Self> {
        let nodes = fine
            .points()
            .iter()
            .map(|&x| self.evaluate(x))
            .collect::<Result<Vec<_>>>()?;
        // keep shared nodes bit-identical
        let mut nodes = nodes;
        let mut j = 0;
        for (i, &x) in fine.points().iter().enumerate() {
            while j < self.mesh.num_points() && self.mesh.points()[j] < x {
                j += 1;
            }
            if j < self.mesh.num_points() && self.mesh.points()[j] == x {
                nodes[i] = self.nodes[j].clone();
            }
        }
        Self::new(fine.clone(), nodes)
    }
}

/// Which local variable a [`SegmentPolynomial`] is expanded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Powers of `t`, anchored at the left end of the segment.
    Left,
    /// Powers of `1 − t`, anchored at the right end.
    Right,
}

/// `Σ_n c_n u^n` with matrix coefficients, `u = t` or `u = 1 − t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPolynomial {
    pub coefficients: Vec<CMatrix>,
    pub orientation: Orientation,
}

impl SegmentPolynomial {
    pub fn new(coefficients: Vec<CMatrix>, orientation: Orientation) -> Self {
        debug_assert!(!coefficients.is_empty());
        Self {
            coefficients,
            orientation,
        }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.coefficients[0].nrows()
    }

    /// Evaluates in the native variable `u` (Horner).
    pub fn eval_native(&self, u: f64) -> CMatrix {
        let mut acc = self.coefficients[self.degree()].clone();
        for c in self.coefficients.iter().rev().skip(1) {
            acc *= real(u);
            acc += c;
        }
        acc
    }

    /// Evaluates at local coordinate `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> CMatrix {
        match self.orientation {
            Orientation::Left => self.eval_native(t),
            Orientation::Right => self.eval_native(1.0 - t),
        }
    }

    /// Sum of all coefficients: the value at the far end of the expansion.
    pub fn sum(&self) -> CMatrix {
        let mut acc = self.coefficients[0].clone();
        for c in &self.coefficients[1..] {
            acc += c;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::zeros;

    fn scalar(v: f64) -> CMatrix {
        CMatrix::from_element(1, 1, real(v))
    }

    #[test]
    fn mesh_validation() {
        assert!(Mesh::new(alloc::vec![0.0]).is_err());
        assert!(Mesh::new(alloc::vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Mesh::new(alloc::vec![0.1, 1.0]).is_err());
        assert!(Mesh::new(alloc::vec![0.0, 1.0, 0.5]).is_err());
        assert!(Mesh::new(alloc::vec![0.0, 0.3, 1.0]).is_ok());
    }

    #[test]
    fn chebyshev_mesh_endpoints_and_clustering() {
        let m = Mesh::chebyshev(1.0, 300).unwrap();
        assert_eq!(m.points()[0], 0.0);
        assert_eq!(m.points()[300], 1.0);
        assert!(m.width(0) < m.width(150) / 100.0);
        let k = 37.0_f64;
        let expected = (1.0 - (core::f64::consts::PI * k / 300.0).cos()) / 2.0;
        assert!((m.points()[37] - expected).abs() < 1e-15);
    }

    #[test]
    fn locate_is_right_continuous() {
        let m = Mesh::new(alloc::vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(m.locate(0.25).unwrap(), (1, 0.0));
        assert_eq!(m.locate(1.0).unwrap(), (1, 1.0));
        assert_eq!(m.locate(0.0).unwrap(), (0, 0.0));
        assert!(matches!(m.locate(1.5), Err(Error::OutOfDomain { .. })));
        assert!(m.locate(-1e-300).is_err());
        assert!(m.locate(f64::NAN).is_err());
    }

    #[test]
    fn evaluate_constant_and_ramp() {
        let mesh = Mesh::uniform(1.0, 1).unwrap();
        let f = PiecewiseLinear::new(mesh.clone(), alloc::vec![scalar(0.0), scalar(1.0)]).unwrap();
        assert_eq!(f.evaluate(0.25).unwrap()[(0, 0)], real(0.25));
        let m = CMatrix::from_fn(2, 2, |i, j| real((i * 2 + j) as f64));
        let c = PiecewiseLinear::from_fn(Mesh::uniform(2.0, 5).unwrap(), |_| m.clone()).unwrap();
        for x in [0.0, 0.3, 1.1, 2.0] {
            assert_eq!(c.evaluate(x).unwrap(), m);
        }
    }

    #[test]
    fn evaluate_sine_within_interpolation_bound() {
        let mesh = Mesh::uniform(1.0, 63).unwrap();
        let s2 = core::f64::consts::SQRT_2;
        let f = PiecewiseLinear::from_fn(mesh, |x| scalar(s2 * (PI * x).sin())).unwrap();
        let h = 1.0 / 63.0;
        let bound = PI * PI / 2.0 * h * h * s2;
        let v = f.evaluate(0.5).unwrap()[(0, 0)].re;
        assert!((v - s2).abs() <= bound);
    }

    #[test]
    fn evaluate_exact_at_nodes() {
        let mesh = Mesh::chebyshev(1.0, 9).unwrap();
        let f = PiecewiseLinear::from_fn(mesh.clone(), |x| {
            CMatrix::from_fn(2, 2, |i, j| {
                num_complex::Complex64::new(x.sin() + i as f64, -x * j as f64)
            })
        })
        .unwrap();
        for (k, &x) in mesh.points().iter().enumerate() {
            assert_eq!(f.evaluate(x).unwrap(), f.nodes()[k]);
        }
    }

    #[test]
    fn dimension_checks() {
        let mesh = Mesh::uniform(1.0, 2).unwrap();
        assert!(PiecewiseLinear::new(mesh.clone(), alloc::vec![zeros(2), zeros(2)]).is_err());
        assert!(PiecewiseLinear::new(mesh, alloc::vec![zeros(2), zeros(3), zeros(2)]).is_err());
    }

    #[test]
    fn polynomial_orientation() {
        let p = SegmentPolynomial::new(alloc::vec![scalar(1.0), scalar(2.0)], Orientation::Right);
        assert_eq!(p.eval(1.0)[(0, 0)], real(1.0));
        assert_eq!(p.eval(0.0)[(0, 0)], real(3.0));
        assert_eq!(p.sum()[(0, 0)], real(3.0));
    }
}
