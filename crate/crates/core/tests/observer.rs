use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use regobs::observability::is_gamma_detectable;
use regobs::observer::*;
use regobs::pde::*;
use regobs::sensing::*;
use regobs::Error;

fn interval(modes: usize) -> Arc<SpectralBasis> {
    Arc::new(build_basis(DomainSpec::interval(1.0, 1.0, 65).unwrap(), modes).unwrap())
}

fn full(b: &SpectralBasis) -> Arc<BoundaryRegion> {
    Arc::new(BoundaryRegion::full(b.domain()))
}

#[test]
fn constant_mode_error_decays_like_the_scalar_ode() {
    // one mode with lambda = 0: the error obeys e' = -h c e
    let b = interval(1);
    let sensors = vec![SensorSpec::pointwise(&[0.4])];
    let c = sensor_matrix(&sensors, &b).unwrap()[(0, 0)];
    let h = 1.5 / c;
    let gain = ObserverGain::from_columns(DMatrix::from_element(1, 1, h));
    let sys = ObserverSystem::new(b.clone(), sensors, gain, &[], full(&b)).unwrap();
    let z0 = StateField::constant(b.clone(), 2.0);
    let z = simulate_plant(&sys, &z0, None, 2.0, 2000).unwrap();
    let y = plant_output(&sys, &z).unwrap();
    let w = simulate_observer(&sys, &y, None, None).unwrap();
    let err = error_trajectory(&sys, &z, &w).unwrap();
    let e0 = err[0];
    for (t, e) in z.time_grid().iter().zip(&err) {
        let exact = e0 * (-1.5 * t).exp();
        assert!((e - exact).abs() <= 1e-5 * e0, "t = {t}: {e} vs {exact}");
    }
}

#[test]
fn plant_twin_tracks_the_closed_form_semigroup() {
    let b = interval(5);
    let sensors = vec![SensorSpec::pointwise(&[0.3])];
    let gain = design_gain(&b, &sensors, DesignMethod::ModalShift, 1.0).unwrap();
    let sys = ObserverSystem::new(b.clone(), sensors, gain, &[], full(&b)).unwrap();
    let z0 = StateField::new(
        b.clone(),
        DVector::from_column_slice(&[1.0, 0.5, -0.3, 0.2, 0.1]),
    )
    .unwrap();
    let traj = simulate_plant(&sys, &z0, None, 0.2, 4000).unwrap();
    let exact = semigroup_apply(0.2, &z0).unwrap();
    assert!((traj.last().coefficients() - exact.coefficients()).amax() < 1e-5);
}

#[test]
fn modal_shift_moves_the_slow_spectrum() {
    let b = interval(8);
    let sensors = vec![SensorSpec::pointwise(&[0.3])];
    for sigma in [1.0, 5.0, 30.0] {
        let gain = design_gain(&b, &sensors, DesignMethod::ModalShift, sigma).unwrap();
        assert_eq!(gain.method(), Some(DesignMethod::ModalShift));
        let rep = is_gamma_detectable(&b, &sensors, &gain).unwrap();
        assert!(
            rep.spectral_abscissa <= -sigma * (1.0 - 1e-8),
            "sigma {sigma}: {}",
            rep.spectral_abscissa
        );
    }
}

#[test]
fn scaled_adjoint_reaches_a_modest_target() {
    let b = interval(4);
    let sensors = vec![
        SensorSpec::pointwise(&[0.3]),
        SensorSpec::pointwise(&[0.77]),
    ];
    let gain = design_gain(&b, &sensors, DesignMethod::ScaledAdjoint, 0.5).unwrap();
    assert_eq!(gain.method(), Some(DesignMethod::ScaledAdjoint));
    let rep = is_gamma_detectable(&b, &sensors, &gain).unwrap();
    assert!(rep.spectral_abscissa <= -0.5 * (1.0 - 1e-6));
}

#[test]
fn modal_shift_refuses_an_invisible_slow_mode() {
    let b = interval(4);
    // mode 1 vanishes at x = 1/2 and has lambda = -pi^2 > -20
    let sensors = vec![SensorSpec::pointwise(&[0.5])];
    let err = design_gain(&b, &sensors, DesignMethod::ModalShift, 20.0).unwrap_err();
    assert!(
        matches!(err, Error::UnobservableMode { index: 1, .. }),
        "{err}"
    );
}

#[test]
fn observer_converges_and_fit_recovers_a_rate_above_target() {
    let b = interval(8);
    let sensors = vec![SensorSpec::pointwise(&[0.3])];
    let gain = design_gain(&b, &sensors, DesignMethod::ModalShift, 1.0).unwrap();
    let sys = ObserverSystem::new(b.clone(), sensors, gain, &[], full(&b)).unwrap();
    let z0 = StateField::new(
        b.clone(),
        DVector::from_fn(8, |k, _| 1.0 / (1.0 + k as f64)),
    )
    .unwrap();
    let z = simulate_plant(&sys, &z0, None, 5.0, 1000).unwrap();
    let y = plant_output(&sys, &z).unwrap();
    let w = simulate_observer(&sys, &y, None, None).unwrap();
    let err = error_trajectory(&sys, &z, &w).unwrap();
    let fit = fit_exponential_decay(z.time_grid(), &err).unwrap();
    assert!(fit.sigma >= 0.9, "{fit:?}");
    assert!(err.last().unwrap() < &(err[0] * 0.05));
}

#[test]
fn control_input_cancels_in_the_error() {
    let b = interval(4);
    let sensors = vec![SensorSpec::pointwise(&[0.3])];
    let gain = design_gain(&b, &sensors, DesignMethod::ModalShift, 1.0).unwrap();
    let input = vec![StateField::mode(b.clone(), 2)];
    let sys = ObserverSystem::new(b.clone(), sensors, gain, &input, full(&b)).unwrap();
    let u = ControlSignal::new(
        0.01,
        DMatrix::from_fn(100, 1, |j, _| (j as f64 * 0.1).sin()),
    )
    .unwrap();
    let z0 = StateField::new(
        b.clone(),
        DVector::from_column_slice(&[0.2, -0.1, 0.3, 0.4]),
    )
    .unwrap();
    let z = simulate_plant(&sys, &z0, Some(&u), 1.0, 100).unwrap();
    let y = plant_output(&sys, &z).unwrap();
    let w = simulate_observer(&sys, &y, Some(&u), Some(&z0)).unwrap();
    let err = error_trajectory(&sys, &z, &w).unwrap();
    assert!(
        err.iter().all(|e| *e <= 1e-12),
        "{:?}",
        err.iter().cloned().fold(0.0, f64::max)
    );
}

#[test]
fn identities_hold_for_designed_gains() {
    let b = Arc::new(build_basis(DomainSpec::rectangle(1.0, 1.0, 1.0, 17).unwrap(), 3).unwrap());
    let sensors = vec![
        SensorSpec::pointwise(&[0.137, 0.71]),
        SensorSpec::pointwise(&[0.83, 0.29]),
    ];
    let gain = design_gain(&b, &sensors, DesignMethod::ModalShift, 3.0).unwrap();
    let sys = ObserverSystem::new(
        b.clone(),
        sensors,
        gain,
        &[StateField::mode(b.clone(), 0)],
        full(&b),
    )
    .unwrap();
    let rep = verify_observer_identities(&sys);
    assert!(
        rep.injection < 1e-12 && rep.sylvester_minus < 1e-12 && rep.input < 1e-12,
        "{rep:?}"
    );
}

#[test]
fn decay_fit_is_exact_on_a_pure_exponential() {
    let t: Vec<f64> = (0..=200).map(|j| j as f64 * 0.025).collect();
    let v: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp()).collect();
    let fit = fit_exponential_decay(&t, &v).unwrap();
    assert!((fit.sigma - 1.7).abs() < 1e-10);
    assert!((fit.prefactor - 3.0).abs() < 1e-9);
    assert!(fit.residual < 1e-10);
    assert!((fit.predict(2.0) - 3.0 * (-3.4f64).exp()).abs() < 1e-10);
}

#[test]
fn decay_fit_needs_enough_samples() {
    let t: Vec<f64> = (0..=20).map(|j| j as f64).collect();
    let v: Vec<f64> = t.iter().map(|t| (-20.0 * t).exp()).collect();
    assert!(matches!(
        fit_exponential_decay(&t, &v),
        Err(Error::NothingToFit(_))
    ));
}
