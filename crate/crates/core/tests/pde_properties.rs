mod common;

use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;
use regobs::pde::*;
use regobs::sensing::*;

fn interval(modes: usize) -> Arc<SpectralBasis> {
    Arc::new(build_basis(DomainSpec::interval(1.0, 0.8, 65).unwrap(), modes).unwrap())
}

fn rectangle(modes: usize) -> Arc<SpectralBasis> {
    Arc::new(build_basis(DomainSpec::rectangle(1.0, 0.5, 1.0, 17).unwrap(), modes).unwrap())
}

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, n)
}

fn state(b: &Arc<SpectralBasis>, c: Vec<f64>) -> StateField {
    StateField::new(b.clone(), DVector::from_vec(c)).unwrap()
}

#[test]
fn first_eigenvalue_matches_finite_differences() {
    let b = interval(4);
    let fd = common::fd_neumann_eigenvalues_1d(257, 1.0, 0.8);
    let rel = (b.eigenvalues()[1] - fd[1]).abs() / b.eigenvalues()[1].abs();
    assert!(rel < 1e-4, "{rel}");
}

#[test]
fn mild_solution_matches_rk4_under_constant_control() {
    let b = interval(5);
    let z0 = state(&b, vec![0.3, -0.2, 0.1, 0.05, -0.4]);
    let input = state(&b, vec![1.0, 0.5, -0.25, 0.0, 0.2]);
    let u = ControlSignal::constant(&[2.0], 0.01, 100).unwrap();
    let z = mild_solution(&z0, std::slice::from_ref(&input), &u, 0.7).unwrap();
    for k in 0..5 {
        let lam = b.eigenvalues()[k];
        let forcing = 2.0 * input.coefficients()[k];
        let reference = common::rk4_scalar(lam, forcing, z0.coefficients()[k], 0.7, 20_000);
        assert!((z.coefficients()[k] - reference).abs() < 1e-9, "mode {k}");
    }
}

#[test]
fn mild_solution_matches_crank_nicolson() {
    let b = interval(6);
    let z0 = state(&b, vec![1.0, 0.4, -0.3, 0.2, 0.1, -0.05]);
    let t = 0.05;
    let z = mild_solution(&z0, &[], &ControlSignal::zeros(0, 1.0, 1).unwrap(), t).unwrap();
    let init: Vec<f64> = z0.evaluate_grid().iter().copied().collect();
    let fd = common::crank_nicolson_1d(&init, 1.0, 0.8, t, 500);
    let w = common::trapezoid_weights(65, 1.0 / 64.0);
    let ours: Vec<f64> = z.evaluate_grid().iter().copied().collect();
    assert!(common::relative_l2(&fd, &ours, &w) < 1e-3);
}

#[test]
fn trace_of_constant_is_constant() {
    let b = rectangle(3);
    let c = StateField::constant(b.clone(), 1.5);
    let tr = trace_to_boundary(&c);
    assert!(tr.values().iter().all(|v| (v - 1.5).abs() < 1e-14));
}

#[test]
fn restriction_of_trace_is_trace_on_region() {
    let b = rectangle(3);
    let d = b.domain().clone();
    let g = Arc::new(BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Top, 0.25, 0.75)]).unwrap());
    let z = state(&b, (0..9).map(|k| (k as f64).sin()).collect());
    let a = restrict_trace(&trace_to_boundary(&z), &g).unwrap();
    let bb = trace_on(&z, &g).unwrap();
    assert_eq!(a.values(), bb.values());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn semigroup_is_linear(a in coeffs(6), c in coeffs(6), s in -3.0..3.0f64, t in 0.0..1.0f64) {
        let b = interval(6);
        let (x, y) = (state(&b, a), state(&b, c));
        let lhs = semigroup_apply(t, &(&x + &(&y * s))).unwrap();
        let rhs = &semigroup_apply(t, &x).unwrap() + &(&semigroup_apply(t, &y).unwrap() * s);
        prop_assert!((lhs.coefficients() - rhs.coefficients()).amax() < 1e-13);
    }

    #[test]
    fn semigroup_property(a in coeffs(9), t in 0.0..0.5f64, s in 0.0..0.5f64) {
        let b = rectangle(3);
        let x = state(&b, a);
        let lhs = semigroup_apply(t + s, &x).unwrap();
        let rhs = semigroup_apply(t, &semigroup_apply(s, &x).unwrap()).unwrap();
        prop_assert!((lhs.coefficients() - rhs.coefficients()).amax() < 1e-14);
    }

    #[test]
    fn semigroup_is_contractive(a in coeffs(9), t in 0.0..1.0f64) {
        let b = rectangle(3);
        let x = state(&b, a);
        prop_assert!(semigroup_apply(t, &x).unwrap().l2_norm() <= x.l2_norm() * (1.0 + 1e-14));
    }

    #[test]
    fn sensors_are_linear(a in coeffs(9), c in coeffs(9), s in -2.0..2.0f64) {
        let b = rectangle(3);
        let sensors = vec![
            SensorSpec::pointwise(&[0.3, 0.2]),
            SensorSpec::zone(&[(0.1, 0.6), (0.0, 0.25)]),
            SensorSpec::boundary_pointwise(&[1.0, 0.1]),
            SensorSpec::boundary_zone(Edge::Bottom, 0.2, 0.9),
        ];
        let (x, y) = (state(&b, a), state(&b, c));
        let m = |z: &StateField| measure_trajectory(&b, z, &sensors, 0.2, 10).unwrap();
        let lhs = m(&(&x + &(&y * s)));
        let (mx, my) = (m(&x), m(&y));
        let rhs = mx.samples() + my.samples() * s;
        prop_assert!((lhs.samples() - rhs).amax() < 1e-12);
    }

    #[test]
    fn pointwise_sensor_reads_the_field(a in coeffs(9), x in 0.0..1.0f64, y in 0.0..0.5f64) {
        let b = rectangle(3);
        let z = state(&b, a);
        let traj = measure_trajectory(&b, &z, &[SensorSpec::pointwise(&[x, y])], 0.1, 1).unwrap();
        prop_assert!((traj.samples()[(0, 0)] - z.evaluate(&[x, y]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn trace_adjoint_identity(a in coeffs(9), g in prop::collection::vec(-1.0..1.0f64, 64)) {
        let b = rectangle(3);
        let full = Arc::new(BoundaryRegion::full(b.domain()));
        let z = state(&b, a);
        let field = BoundaryField::new(full.clone(), DVector::from_vec(g)).unwrap();
        let lhs = trace_on(&z, &full).unwrap().inner(&field).unwrap();
        let rhs = z.inner(&adjoint_trace(&b, &field).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn restriction_adjoint_identity(g in prop::collection::vec(-1.0..1.0f64, 64), h in prop::collection::vec(-1.0..1.0f64, 9)) {
        let b = rectangle(3);
        let d = b.domain().clone();
        let full = Arc::new(BoundaryRegion::full(&d));
        let part = Arc::new(BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Left, 0.0, 0.25)]).unwrap());
        prop_assume!(part.len() == 9);
        let f = BoundaryField::new(full, DVector::from_vec(g)).unwrap();
        let p = BoundaryField::new(part.clone(), DVector::from_vec(h)).unwrap();
        let lhs = restrict_trace(&f, &part).unwrap().inner(&p).unwrap();
        let rhs = f.inner(&adjoint_restrict(&p)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn extension_reproduces_resolvable_data(a in coeffs(9)) {
        let b = rectangle(3);
        let z = state(&b, a);
        let h = trace_to_boundary(&z);
        prop_assume!(h.norm() > 1e-6);
        let ext = extend_from_boundary(&b, &h).unwrap();
        let back = trace_to_boundary(&ext);
        let rel = (back.values() - h.values()).norm() / h.values().norm();
        prop_assert!(rel < 1e-8);
    }

    #[test]
    fn trapezoid_time_inner_is_symmetric(a in coeffs(4), c in coeffs(4)) {
        let b = interval(4);
        let s = vec![SensorSpec::pointwise(&[0.2])];
        let y1 = measure_trajectory(&b, &state(&b, a), &s, 0.3, 20).unwrap();
        let y2 = measure_trajectory(&b, &state(&b, c), &s, 0.3, 20).unwrap();
        prop_assert!((y1.inner(&y2).unwrap() - y2.inner(&y1).unwrap()).abs() < 1e-15);
    }
}
