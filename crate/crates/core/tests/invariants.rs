//! Property tests: quantities that must not depend on the representation.

mod common;

use cmps_core::energy::evaluate_energy;
use cmps_core::envelope::{propagate_with_source, Direction};
use cmps_core::linalg::CMatrix;
use cmps_core::mesh::Orientation;
use cmps_core::{CmpsState, Envelopes, HamiltonianSpec, Mesh, PotentialSpec, SegmentPolynomial, TaylorTolerance};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

struct Instance {
    state: CmpsState,
    spec: HamiltonianSpec,
    rng: common::Rng8,
}

fn instance(seed: u64, d: usize, segments: usize, dirichlet: bool) -> Instance {
    let mut rng = common::rng(seed);
    let length = segments as f64 * rng.random_range(0.1..0.25);
    let mesh = Mesh::uniform(length, segments).unwrap();
    let potential = PotentialSpec::sine(&mesh, rng.random_range(0.5..4.0), rng.random_range(1.0..5.0), 3);
    let spec = HamiltonianSpec::new(rng.random_range(0.0..4.0), rng.random_range(-1.0..5.0), potential).unwrap();
    let state = CmpsState::random(&mesh, d, 0.8, 0.5, dirichlet, &mut rng);
    Instance { state, spec, rng }
}

fn energy(state: &CmpsState, spec: &HamiltonianSpec) -> f64 {
    evaluate_energy(state, spec, &TaylorTolerance::default())
        .unwrap()
        .0
        .total
}

fn params() -> impl Strategy<Value = (u64, usize, usize, bool)> {
    (any::<u64>(), 1usize..=3, 2usize..=6, any::<bool>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn overlap_is_constant_inside_segments((seed, d, k, dirichlet) in params()) {
        let Instance { state, .. } = instance(seed, d, k, dirichlet);
        let env = Envelopes::compute(&state, &TaylorTolerance::default()).unwrap();
        let n = env.norm().unwrap();
        for seg in 0..k {
            for t in [0.0, 0.17, 0.5, 0.83, 1.0] {
                let v = env.overlap_at(seg, t);
                prop_assert!((v - n).abs() <= 1e-10 * n, "segment {} t {}: {} vs {}", seg, t, v, n);
            }
        }
    }

    #[test]
    fn refinement_keeps_the_energy((seed, d, k, dirichlet) in params(), extra in 1usize..4) {
        let Instance { state, spec, mut rng } = instance(seed, d, k, dirichlet);
        let length = state.mesh().length();
        let points: Vec<f64> = (0..extra).map(|_| length * rng.random_range(0.01..0.99)).collect();
        let fine = state.refine(&points).unwrap();
        let fine_spec = spec.refined(state.mesh(), fine.mesh()).unwrap();
        let (e0, e1) = (energy(&state, &spec), energy(&fine, &fine_spec));
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1.0), "{} vs {}", e0, e1);
    }

    #[test]
    fn silent_bond_expansion_keeps_the_energy((seed, d, k, dirichlet) in params(), grow in 1usize..3) {
        let Instance { state, spec, mut rng } = instance(seed, d, k, dirichlet);
        let big = state.expand_bond(d + grow, 0.0, &mut rng).unwrap();
        let (e0, e1) = (energy(&state, &spec), energy(&big, &spec));
        prop_assert!((e0 - e1).abs() <= 1e-12 * e0.abs().max(1.0), "{} vs {}", e0, e1);
    }

    #[test]
    fn gauge_transformation_keeps_the_energy((seed, d, k, dirichlet) in params()) {
        let Instance { state, spec, mut rng } = instance(seed, d, k, dirichlet);
        let g = CMatrix::identity(d, d) + common::random_matrix(&mut rng, d, 0.3);
        let moved = state.gauge_transformed(&g).unwrap();
        let (e0, e1) = (energy(&state, &spec), energy(&moved, &spec));
        prop_assert!((e0 - e1).abs() <= 1e-10 * e0.abs().max(1.0), "{} vs {}", e0, e1);
    }

    #[test]
    fn sourced_sweeps_are_linear((seed, d, k, dirichlet) in params(), c in -2.0f64..2.0) {
        let Instance { state, mut rng, .. } = instance(seed, d, k, dirichlet);
        let tol = TaylorTolerance::default();
        let sources = |rng: &mut common::Rng8| -> Vec<SegmentPolynomial> {
            (0..k)
                .map(|_| {
                    let degree = rng.random_range(0..3);
                    let coeffs = (0..=degree).map(|_| common::random_matrix(rng, d, 1.0)).collect();
                    SegmentPolynomial::new(coeffs, Orientation::Left)
                })
                .collect()
        };
        let (s1, s2) = (sources(&mut rng), sources(&mut rng));
        let (a, b) = (common::random_matrix(&mut rng, d, 1.0), common::random_matrix(&mut rng, d, 1.0));
        let cc = Complex64::new(c, 0.0);
        let mixed: Vec<SegmentPolynomial> = s1
            .iter()
            .zip(&s2)
            .map(|(p, q)| {
                let n = p.coefficients.len().max(q.coefficients.len());
                let get = |s: &SegmentPolynomial, i: usize| s.coefficients.get(i).cloned().unwrap_or_else(|| CMatrix::zeros(d, d));
                SegmentPolynomial::new((0..n).map(|i| get(p, i) + get(q, i) * cc).collect(), Orientation::Left)
            })
            .collect();
        let x1 = propagate_with_source(&state, Direction::Left, a.clone(), &s1, &tol).unwrap();
        let x2 = propagate_with_source(&state, Direction::Left, b.clone(), &s2, &tol).unwrap();
        let x = propagate_with_source(&state, Direction::Left, &a + &b * cc, &mixed, &tol).unwrap();
        for node in 0..=k {
            let expect = x1.node_value(node) + x2.node_value(node) * cc;
            let scale = x1.node_value(node).norm() + (x2.node_value(node) * cc).norm();
            let err = (x.node_value(node) - expect).norm();
            prop_assert!(err <= 1e-10 * scale.max(1e-300), "node {}: {} of {}", node, err, scale);
        }
    }
}
