//! External potentials stored as per-segment real polynomials in the local
//! coordinate `t`, so every energy integrand stays a polynomial.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::math;
use crate::mesh::Mesh;

/// Default Taylor degree used when discretizing non-polynomial potentials.
pub const DEFAULT_POTENTIAL_DEGREE: usize = 20;

/// Closed-form description of `V(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    Constant(f64),
    /// `amplitude · sin(wavenumber · π · x)`
    Sine {
        amplitude: f64,
        wavenumber: f64,
    },
    /// `curvature · (x − center)²`
    Harmonic {
        curvature: f64,
        center: f64,
    },
    /// `Σ_j c_j x^j`
    Polynomial(Vec<f64>),
}

impl Potential {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant(c) => *c,
            Potential::Sine { amplitude, wavenumber } => amplitude * math::sin(wavenumber * PI * x),
            Potential::Harmonic { curvature, center } => curvature * (x - center) * (x - center),
            Potential::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
        }
    }

    /// Taylor coefficients of `V(c + u)` in `u` up to `degree`.
    fn taylor_at(&self, c: f64, degree: usize) -> Vec<f64> {
        match self {
            Potential::Zero => vec![0.0],
            Potential::Constant(v) => vec![*v],
            Potential::Sine { amplitude, wavenumber } => {
                let w = wavenumber * PI;
                let mut out = Vec::with_capacity(degree + 1);
                let mut scale = *amplitude;
                for j in 0..=degree {
                    if j > 0 {
                        scale *= w / j as f64;
                    }
                    out.push(scale * math::sin(w * c + j as f64 * PI / 2.0));
                }
                out
            }
            Potential::Harmonic { curvature, center } => {
                let d = c - center;
                vec![curvature * d * d, 2.0 * curvature * d, *curvature]
            }
            Potential::Polynomial(coeffs) => compose_affine(coeffs, c, 1.0),
        }
    }

    /// Per-segment polynomials on `mesh`, Taylor-expanded about each segment
    /// midpoint to `degree` (exact for polynomial kinds).
    pub fn discretize(&self, mesh: &Mesh, degree: usize) -> PotentialSpec {
        let segments = (0..mesh.num_segments())
            .map(|k| {
                let width = mesh.width(k);
                let mid = 0.5 * (mesh.points()[k] + mesh.points()[k + 1]);
                let in_u = self.taylor_at(mid, degree);
                // u = x − mid = width·(t − 1/2)
                trim(compose_affine(&in_u, -0.5 * width, width))
            })
            .collect();
        PotentialSpec { segments }
    }
}

/// `V(x)` on a specific mesh: one coefficient list in powers of `t` per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    segments: Vec<Vec<f64>>,
}

impl PotentialSpec {
    pub fn new(segments: Vec<Vec<f64>>) -> Result<Self> {
        if segments.iter().any(|s| s.is_empty()) {
            return Err(invalid("every potential segment needs at least one coefficient"));
        }
        Ok(Self { segments })
    }

    pub fn zero(mesh: &Mesh) -> Self {
        Potential::Zero.discretize(mesh, 0)
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Potential::Constant(value).discretize(mesh, 0)
    }

    pub fn sine(mesh: &Mesh, amplitude: f64, wavenumber: f64, degree: usize) -> Self {
        Potential::Sine { amplitude, wavenumber }.discretize(mesh, degree)
    }

    pub fn harmonic(mesh: &Mesh, curvature: f64, center: f64) -> Self {
        Potential::Harmonic { curvature, center }.discretize(mesh, 2)
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, k: usize) -> &[f64] {
        &self.segments[k]
    }

    pub fn max_degree(&self) -> usize {
        self.segments.iter().map(|s| s.len() - 1).max().unwrap_or(0)
    }

    pub fn eval_local(&self, k: usize, t: f64) -> f64 {
        self.segments[k].iter().rev().fold(0.0, |acc, &a| acc * t + a)
    }

    pub fn evaluate(&self, mesh: &Mesh, x: f64) -> Result<f64> {
        self.check_mesh(mesh)?;
        let (k, t) = mesh.locate(x)?;
        Ok(self.eval_local(k, t))
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if mesh.num_segments() != self.segments.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_segments(),
                found: self.segments.len(),
            });
        }
        Ok(())
    }

    /// Largest jump `|V_k(1) − V_{k+1}(0)|` between neighbouring segments.
    pub fn continuity_defect(&self) -> f64 {
        (1..self.segments.len())
            .map(|k| math::abs(self.eval_local(k - 1, 1.0) - self.eval_local(k, 0.0)))
            .fold(0.0, f64::max)
    }

    pub fn check_continuity(&self, tolerance: f64) -> Result<()> {
        let defect = self.continuity_defect();
        if defect > tolerance {
            return Err(invalid(alloc::format!(
                "potential jumps by {defect:e} between segments (tolerance {tolerance:e})"
            )));
        }
        Ok(())
    }

    /// Exact re-expansion onto `fine`, whose nodes must include every node of
    /// `coarse`.
    pub fn refined(&self, coarse: &Mesh, fine: &Mesh) -> Result<Self> {
        self.check_mesh(coarse)?;
        let mut segments = Vec::with_capacity(fine.num_segments());
        for j in 0..fine.num_segments() {
            let a = fine.points()[j];
            let b = fine.points()[j + 1];
            let (k, ta) = coarse.locate(a)?;
            let w = coarse.width(k);
            let tb = (b - coarse.points()[k]) / w;
            if tb > 1.0 + 1e-12 {
                return Err(invalid("fine mesh does not contain every coarse node"));
            }
            segments.push(compose_affine(&self.segments[k], ta, tb - ta));
        }
        Ok(Self { segments })
    }
}

/// Coefficients of `p(a + b·t)` in powers of `t`.
pub(crate) fn compose_affine(p: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(p.len().max(1));
    for &c in p.iter().rev() {
        // out ← out·(a + b t) + c
        out.push(0.0);
        for i in (0..out.len() - 1).rev() {
            let v = out[i];
            out[i + 1] += b * v;
            out[i] = a * v;
        }
        out[0] += c;
    }
    if out.is_empty() {
        out.push(0.0);
    }
    out
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_affine_shifts() {
        // p(x) = 1 + 2x + 3x², p(1 + 2t) = 6 + 16t + 12t²
        let c = compose_affine(&[1.0, 2.0, 3.0], 1.0, 2.0);
        assert_eq!(c, vec![6.0, 16.0, 12.0]);
    }

    #[test]
    fn sine_matches_closed_form_at_nodes() {
        let mesh = Mesh::uniform(1.0, 31).unwrap();
        let spec = PotentialSpec::sine(&mesh, 1749.0, 15.0, DEFAULT_POTENTIAL_DEGREE);
        for (k, &x) in mesh.points().iter().enumerate() {
            let exact = 1749.0 * (15.0 * PI * x).sin();
            let v = if k < mesh.num_segments() {
                spec.eval_local(k, 0.0)
            } else {
                spec.eval_local(k - 1, 1.0)
            };
            assert!((v - exact).abs() < 1e-14 * 1749.0, "x={x} v={v} exact={exact}");
        }
        assert!(spec.check_continuity(1e-10).is_ok());
    }

    #[test]
    fn harmonic_is_exact() {
        let mesh = Mesh::chebyshev(2.0, 7).unwrap();
        let spec = PotentialSpec::harmonic(&mesh, 3.0, 0.7);
        for x in [0.0, 0.13, 0.9, 1.5, 2.0] {
            let v = spec.evaluate(&mesh, x).unwrap();
            assert!((v - 3.0 * (x - 0.7) * (x - 0.7)).abs() < 1e-13);
        }
    }

    #[test]
    fn refinement_is_exact() {
        let mesh = Mesh::uniform(1.0, 4).unwrap();
        let spec = PotentialSpec::sine(&mesh, 2.0, 3.0, 12);
        let fine = mesh.with_points(&[0.1, 0.6, 0.61]).unwrap();
        let r = spec.refined(&mesh, &fine).unwrap();
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            let a = spec.evaluate(&mesh, x).unwrap();
            let b = r.evaluate(&fine, x).unwrap();
            assert!((a - b).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn mismatched_mesh_rejected() {
        let spec = PotentialSpec::zero(&Mesh::uniform(1.0, 3).unwrap());
        assert!(spec.check_mesh(&Mesh::uniform(1.0, 4).unwrap()).is_err());
    }
}
