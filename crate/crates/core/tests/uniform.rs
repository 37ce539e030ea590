//! Translation-invariant states in the thermodynamic limit.

mod common;

use std::f64::consts::PI;

use cmps_core::uniform::{
    random_uniform, uniform_energy_and_gradient, uniform_energy_density, uniform_optimize, UniformOptions,
};

fn solve(d: usize, mu: f64, g: f64) -> (f64, f64) {
    let sol = uniform_optimize(d, mu, g, &UniformOptions::default()).unwrap_or_else(|stall| stall.best);
    (sol.energy, sol.density)
}

#[test]
fn gradient_matches_finite_differences() {
    let step = 1e-4;
    for seed in 0..5 {
        let d = 2 + seed as usize % 3;
        let (q, r) = random_uniform(d, 0.7, seed);
        let (mu, g) = (1.5, 2.0);
        let grad = uniform_energy_and_gradient(&q, &r, mu, g).unwrap();
        let scale = grad
            .grad_q
            .iter()
            .chain(grad.grad_r.iter())
            .fold(0.0_f64, |m, z| m.max(z.norm()));
        for (which, analytic) in [(0, &grad.grad_q), (1, &grad.grad_r)] {
            for i in 0..d * d {
                for (part, unit) in [
                    (0, num_complex::Complex64::new(1.0, 0.0)),
                    (1, num_complex::Complex64::new(0.0, 1.0)),
                ] {
                    let at = |h: f64| {
                        let (mut q, mut r) = (q.clone(), r.clone());
                        let m = if which == 0 { &mut q } else { &mut r };
                        m[i] += unit * h;
                        uniform_energy_density(&q, &r, mu, g).unwrap().0
                    };
                    let fd = (at(-2.0 * step) - 8.0 * at(-step) + 8.0 * at(step) - at(2.0 * step)) / (12.0 * step);
                    let z = analytic[i];
                    let a = 2.0 * if part == 0 { z.re } else { z.im };
                    let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4 * scale);
                    assert!(
                        err < 1e-6,
                        "seed {seed} matrix {which} entry {i} part {part}: {a:e} vs {fd:e}"
                    );
                }
            }
        }
    }
}

#[test]
fn negative_chemical_potential_gives_the_vacuum() {
    let (e, n) = solve(2, -1.0, 1.0);
    assert!(e > -1e-10 && e <= 1e-10, "e = {e}");
    assert!(n < 1e-6, "density {n}");
}

#[test]
fn energy_density_decreases_with_bond_dimension() {
    let energies: Vec<f64> = [1, 2, 4, 6].iter().map(|&d| solve(d, 100.0, 10.0).0).collect();
    for w in energies.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{energies:?}");
    }
}

#[test]
fn strong_coupling_approaches_free_fermions() {
    let mu: f64 = 1.0;
    let fermions = -2.0 * mu.powf(1.5) / (3.0 * PI);
    let (e, n) = solve(6, mu, 1e4);
    assert!(e >= fermions, "{e} below the hard-core bound {fermions}");
    assert!((e - fermions).abs() < 0.02 * fermions.abs(), "{e} vs {fermions}");
    assert!((n - mu.sqrt() / PI).abs() < 0.02 * mu.sqrt() / PI, "density {n}");
}
