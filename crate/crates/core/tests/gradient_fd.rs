//! Exact gradients against five-point central differences of the energy.

mod common;

use cmps_core::energy::evaluate_energy;
use cmps_core::optimize::{pack, pack_gradient, unpack};
use cmps_core::{energy_and_gradient, CmpsState, HamiltonianSpec, Mesh, PotentialSpec, TaylorTolerance};
use rand::Rng;

const INSTANCES: usize = 20;
const STEP: f64 = 3e-4;
/// Components smaller than this fraction of the largest one are compared on
/// that scale instead: some vanish identically (the phase of a D = 1 `Q`)
/// and the difference quotient of those is pure roundoff.
const FLOOR: f64 = 1e-4;

fn random_mesh(rng: &mut common::Rng8, segments: usize) -> Mesh {
    let length = rng.random_range(0.5..2.0);
    let mut inner: Vec<f64> = (1..segments)
        .map(|i| length * (i as f64 + rng.random_range(-0.3..0.3)) / segments as f64)
        .collect();
    inner.sort_by(f64::total_cmp);
    let mut points = vec![0.0];
    points.extend(inner);
    points.push(length);
    Mesh::new(points).unwrap()
}

fn random_spec(rng: &mut common::Rng8, mesh: &Mesh) -> HamiltonianSpec {
    let potential = match rng.random_range(0..3) {
        0 => PotentialSpec::zero(mesh),
        1 => PotentialSpec::sine(mesh, rng.random_range(1.0..5.0), rng.random_range(1.0..6.0), 4),
        _ => PotentialSpec::harmonic(mesh, rng.random_range(1.0..10.0), 0.5 * mesh.length()),
    };
    HamiltonianSpec::new(rng.random_range(0.0..5.0), rng.random_range(-2.0..6.0), potential).unwrap()
}

fn energy_at(x: &[f64], template: &CmpsState, spec: &HamiltonianSpec, tol: &TaylorTolerance) -> f64 {
    let state = unpack(x, template).unwrap();
    evaluate_energy(&state, spec, tol).unwrap().0.total
}

#[test]
fn every_component_matches_finite_differences() {
    let tol = TaylorTolerance::default();
    let mut rng = common::rng(21);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut floored = 0usize;
    for instance in 0..INSTANCES {
        let d = rng.random_range(1..=3);
        let segments = rng.random_range(2..=8);
        let dirichlet = rng.random_bool(0.5);
        let mesh = random_mesh(&mut rng, segments);
        let spec = random_spec(&mut rng, &mesh);
        let state = CmpsState::random(&mesh, d, 0.8, 0.5, dirichlet, &mut rng);
        let (_, grad) = energy_and_gradient(&state, &spec, &tol).unwrap();
        let analytic = pack_gradient(&grad, &state);
        let x0 = pack(&state);
        let scale = analytic.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert_eq!(analytic.len(), x0.len());
        for i in 0..x0.len() {
            let at = |shift: f64| {
                let mut x = x0.clone();
                x[i] += shift;
                energy_at(&x, &state, &spec, &tol)
            };
            let fd = (at(-2.0 * STEP) - 8.0 * at(-STEP) + 8.0 * at(STEP) - at(2.0 * STEP)) / (12.0 * STEP);
            let a = analytic[i];
            let e = (a - fd).abs() / a.abs().max(fd.abs()).max(FLOOR * scale);
            if a.abs().max(fd.abs()) < FLOOR * scale {
                floored += 1;
            }
            assert!(
                e < 1e-6,
                "instance {instance} (D={d}, K={segments}) component {i}: analytic {a:e} vs difference {fd:e}"
            );
            worst = worst.max(e);
            checked += 1;
        }
    }
    eprintln!("{checked} components ({floored} below the floor), largest relative deviation {worst:e}");
}
