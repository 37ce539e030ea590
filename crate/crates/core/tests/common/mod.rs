//! Independent oracles shared by the integration tests: an adaptive
//! Dormand-Prince integrator, Gauss-Legendre quadrature and random inputs.
//! Nothing here calls into the Taylor machinery of the crate.

#![allow(dead_code)]

use cmps_core::linalg::CMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Rng8 = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng8 {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut Rng8, d: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * (2.0 * scale)
    })
}

/// Random positive definite matrix with unit trace.
pub fn random_density(rng: &mut Rng8, d: usize) -> CMatrix {
    let a = random_matrix(rng, d, 1.0);
    let m = &a * a.adjoint() + CMatrix::identity(d, d) * Complex64::new(0.05, 0.0);
    let t = m.trace();
    m / t
}

/// Integrates `dX/dt = f(t, X)` from `t0` to `t1` with the Dormand-Prince
/// 5(4) pair and step control on the mixed error `|e| / (atol + rtol·|X|)`.
pub fn dormand_prince<F>(f: F, t0: f64, t1: f64, x0: CMatrix, rtol: f64, atol: f64) -> CMatrix
where
    F: Fn(f64, &CMatrix) -> CMatrix,
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let span = t1 - t0;
    let dir = span.signum();
    let mut t = t0;
    let mut x = x0;
    let mut h = span.abs() / 64.0;
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        assert!(steps < 1_000_000, "integrator did not finish");
        h = h.min((t1 - t).abs());
        let mut k: Vec<CMatrix> = Vec::with_capacity(7);
        for i in 0..7 {
            let mut xi = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[i][j] != 0.0 {
                    xi += kj * Complex64::new(dir * h * A[i][j], 0.0);
                }
            }
            k.push(f(t + dir * h * C[i], &xi));
        }
        let mut x5 = x.clone();
        let mut err = CMatrix::zeros(x.nrows(), x.ncols());
        for i in 0..7 {
            x5 += &k[i] * Complex64::new(dir * h * B5[i], 0.0);
            err += &k[i] * Complex64::new(dir * h * (B5[i] - B4[i]), 0.0);
        }
        let mut ratio: f64 = 0.0;
        for (e, (a, b)) in err.iter().zip(x.iter().zip(x5.iter())) {
            let tol = atol + rtol * a.norm().max(b.norm());
            ratio = ratio.max(e.norm() / tol);
        }
        if ratio <= 1.0 {
            t += dir * h;
            x = x5;
        }
        let factor = if ratio == 0.0 {
            5.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    x
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact for polynomials of
/// degree `2n − 1`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev guess
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        out.push((0.5 * (1.0 - z), 0.5 * w));
    }
    out
}

/// `Σ_k w_k f(x_k)` over `[a, b]` split into `pieces` equal parts.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let h = b - a;
    rule.iter().map(|(x, w)| w * h * f(a + h * x)).sum()
}

/// Relative difference with an absolute floor.
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
