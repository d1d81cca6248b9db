//! Output-injection gain design, the identity observer
//! `w' = (A - H C) w + B u + H y`, its structural identities, and
//! exponential-decay fitting of the region-restricted error.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::FullSvd;
use crate::observability::{corrected_generator, spectral_abscissa};
use crate::pde::{
    same_basis, trace_matrix, BoundaryRegion, ControlSignal, SpectralBasis, StateField,
};
use crate::sensing::{sensor_matrix, uniform_time_grid, OutputTrajectory, SensorSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignMethod {
    /// Move the eigenvalues above `-sigma_target` and leave the rest alone.
    ModalShift,
    /// `H = kappa C*` with `kappa` found by line search.
    ScaledAdjoint,
}

/// Output-to-state gain `H`, one column per sensor channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ObserverGain {
    columns: DMatrix<f64>,
    method: Option<DesignMethod>,
    target_rate: f64,
}

impl ObserverGain {
    /// A hand-made gain (no design method, target rate 0).
    pub fn from_columns(columns: DMatrix<f64>) -> Self {
        Self {
            columns,
            method: None,
            target_rate: 0.0,
        }
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn method(&self) -> Option<DesignMethod> {
        self.method
    }

    pub fn target_rate(&self) -> f64 {
        self.target_rate
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            columns: &self.columns * factor,
            ..self.clone()
        }
    }
}

/// Designs `H` so that every eigenvalue of `A - H C` has real part at most
/// `-sigma_target`.
pub fn design_gain(
    basis: &SpectralBasis,
    sensors: &[SensorSpec],
    method: DesignMethod,
    sigma_target: f64,
) -> Result<ObserverGain> {
    if !(sigma_target.is_finite() && sigma_target > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target rate must be positive, got {sigma_target}"
        )));
    }
    let c = sensor_matrix(sensors, basis)?;
    let columns = match method {
        DesignMethod::ModalShift => modal_shift(basis, &c, sigma_target)?,
        DesignMethod::ScaledAdjoint => scaled_adjoint(basis, &c, sigma_target)?,
    };
    Ok(ObserverGain {
        columns,
        method: Some(method),
        target_rate: sigma_target,
    })
}

fn modal_shift(basis: &SpectralBasis, c: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    let lambdas = basis.eigenvalues();
    let (n, q) = (basis.len(), c.nrows());
    let slow: Vec<usize> = (0..n).filter(|&k| lambdas[k] > -sigma).collect();
    let mut h = DMatrix::zeros(n, q);
    if slow.is_empty() {
        return Ok(h);
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    for &k in &slow {
        if c.column(k).amax() <= 1e-12 * scale {
            return Err(Error::UnobservableMode {
                index: k,
                mode: basis.mode_indices()[k].clone(),
            });
        }
    }
    let s = slow.len();
    let targets: Vec<f64> = (0..s).map(|j| -sigma * (1.0 + 0.1 * j as f64)).collect();
    let cs = DMatrix::from_fn(q, s, |i, j| c[(i, slow[j])]);
    let ls: Vec<f64> = slow.iter().map(|&k| lambdas[k]).collect();

    let svd = FullSvd::new(&cs)?;
    let block = if svd.rank(1e-10 * scale) == s {
        // C_s has full column rank: H_s = (L_s - D) C_s^+ gives L_s - H_s C_s = D
        let mut pinv = DMatrix::zeros(s, q);
        for r in 0..s {
            pinv += svd.v.column(r) * svd.u.column(r).transpose() / svd.singular_values[r];
        }
        DMatrix::from_fn(s, s, |i, j| if i == j { ls[i] - targets[i] } else { 0.0 }) * pinv
    } else {
        single_output_placement(&cs, &ls, &targets, scale)?
    };
    for (j, &k) in slow.iter().enumerate() {
        h.set_row(k, &block.row(j));
    }
    Ok(h)
}

/// Places the spectrum of `diag(ls) - k g^T C_s` at `targets` through one
/// combined output channel `g^T y`.
fn single_output_placement(
    cs: &DMatrix<f64>,
    ls: &[f64],
    targets: &[f64],
    scale: f64,
) -> Result<DMatrix<f64>> {
    let (q, s) = cs.shape();
    for i in 0..s {
        for j in 0..i {
            if ls[i] == ls[j] {
                return Err(Error::GainDesign(format!(
                    "{s} slow modes include a repeated eigenvalue {} but only {q} independent outputs see them",
                    ls[i]
                )));
            }
        }
    }
    let mut candidates: Vec<DVector<f64>> = (0..q)
        .map(|i| DVector::from_fn(q, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    candidates.push(DVector::from_element(q, 1.0));
    let g = candidates
        .into_iter()
        .find(|g| (cs.transpose() * g).iter().all(|v| v.abs() > 1e-10 * scale))
        .ok_or_else(|| {
            Error::GainDesign("no single output combination sees every slow mode".into())
        })?;
    let ct = cs.transpose() * &g;
    let k = DVector::from_fn(s, |i, _| {
        let num: f64 = targets.iter().map(|m| ls[i] - m).product();
        let den: f64 = (0..s).filter(|&j| j != i).map(|j| ls[i] - ls[j]).product();
        num / (ct[i] * den)
    });
    Ok(k * g.transpose())
}

fn scaled_adjoint(basis: &SpectralBasis, c: &DMatrix<f64>, sigma: f64) -> Result<DMatrix<f64>> {
    let a = basis.generator();
    let ct = c.transpose();
    let abscissa = |kappa: f64| {
        let l = &a - kappa * &ct * c;
        spectral_abscissa(&l.complex_eigenvalues().iter().copied().collect::<Vec<_>>())
    };
    let meets = |kappa: f64| abscissa(kappa) <= -sigma;
    let mut hi = 1e-6;
    while !meets(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::GainDesign(format!(
                "no multiple of C* reaches decay rate {sigma}; best abscissa {}",
                abscissa(hi)
            )));
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if meets(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi * ct)
}

/// The identity observer on a truncated basis.
#[derive(Clone, Debug)]
pub struct ObserverSystem {
    basis: Arc<SpectralBasis>,
    sensors: Vec<SensorSpec>,
    output: DMatrix<f64>,
    gain: ObserverGain,
    generator: DMatrix<f64>,
    input_map: DMatrix<f64>,
    region: Arc<BoundaryRegion>,
}

impl ObserverSystem {
    pub fn new(
        basis: Arc<SpectralBasis>,
        sensors: Vec<SensorSpec>,
        gain: ObserverGain,
        input_map: &[StateField],
        region: Arc<BoundaryRegion>,
    ) -> Result<Self> {
        let output = sensor_matrix(&sensors, &basis)?;
        let generator = corrected_generator(&basis, &output, &gain)?;
        let mut b = DMatrix::zeros(basis.len(), input_map.len());
        for (j, col) in input_map.iter().enumerate() {
            if !same_basis(&basis, col.basis()) {
                return Err(Error::BasisMismatch);
            }
            b.set_column(j, col.coefficients());
        }
        if region.domain() != basis.domain() {
            return Err(Error::InvalidRegion(
                "region lives on a different domain".into(),
            ));
        }
        Ok(Self {
            basis,
            sensors,
            output,
            gain,
            generator,
            input_map: b,
            region,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn output_matrix(&self) -> &DMatrix<f64> {
        &self.output
    }

    pub fn gain(&self) -> &ObserverGain {
        &self.gain
    }

    /// `A - H C`.
    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// Columns of `B`.
    pub fn input_map(&self) -> &DMatrix<f64> {
        &self.input_map
    }

    pub fn region(&self) -> &Arc<BoundaryRegion> {
        &self.region
    }
}

/// Sampled coefficient trajectory; row `j` is the state at `time_grid[j]`.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    basis: Arc<SpectralBasis>,
    time_grid: Vec<f64>,
    states: DMatrix<f64>,
}

impl StateTrajectory {
    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn len(&self) -> usize {
        self.time_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_grid.is_empty()
    }

    /// Coefficients, one row per time sample.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.states
    }

    pub fn state(&self, j: usize) -> StateField {
        StateField::new(self.basis.clone(), self.states.row(j).transpose())
            .expect("rows match the basis")
    }

    pub fn last(&self) -> StateField {
        self.state(self.len() - 1)
    }
}

/// Crank-Nicolson for `x' = L x + f_n + (g_n + g_{n+1}) / 2` on a uniform grid.
struct Stepper {
    lhs: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: DMatrix<f64>,
    dt: f64,
}

impl Stepper {
    fn new(generator: &DMatrix<f64>, dt: f64) -> Result<Self> {
        let n = generator.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let lhs = (&id - 0.5 * dt * generator).lu();
        if !lhs.is_invertible() {
            return Err(Error::LinearSolve(
                "Crank-Nicolson step matrix is singular".into(),
            ));
        }
        Ok(Self {
            lhs,
            rhs: &id + 0.5 * dt * generator,
            dt,
        })
    }

    fn step(&self, x: &DVector<f64>, forcing: &DVector<f64>) -> Result<DVector<f64>> {
        let b = &self.rhs * x + self.dt * forcing;
        self.lhs
            .solve(&b)
            .ok_or_else(|| Error::LinearSolve("Crank-Nicolson solve failed".into()))
    }
}

fn control_forcing(
    b: &DMatrix<f64>,
    control: Option<&ControlSignal>,
    dt: f64,
    steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let n = b.nrows();
    if b.ncols() == 0 {
        return Ok(vec![DVector::zeros(n); steps]);
    }
    let control = control.ok_or_else(|| {
        Error::InvalidArgument("the system has inputs but no control was given".into())
    })?;
    if control.channels() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: b.ncols(),
            got: control.channels(),
        });
    }
    if (control.dt() - dt).abs() > 1e-12 * dt {
        return Err(Error::GridMismatch(format!(
            "control step {} differs from the simulation step {dt}",
            control.dt()
        )));
    }
    if control.steps() < steps {
        return Err(Error::ControlTooShort {
            covered: control.horizon(),
            requested: dt * steps as f64,
        });
    }
    Ok((0..steps).map(|j| b * control.at_step(j)).collect())
}

/// The plant `z' = A z + B u` stepped with the observer's scheme, so that the
/// observer error obeys the discrete error recursion exactly.
pub fn simulate_plant(
    sys: &ObserverSystem,
    z0: &StateField,
    control: Option<&ControlSignal>,
    horizon: f64,
    steps: usize,
) -> Result<StateTrajectory> {
    if !same_basis(&sys.basis, z0.basis()) {
        return Err(Error::BasisMismatch);
    }
    if !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "need horizon > 0 and steps >= 1, got {horizon} and {steps}"
        )));
    }
    let grid = uniform_time_grid(horizon, steps);
    let dt = horizon / steps as f64;
    let forcing = control_forcing(&sys.input_map, control, dt, steps)?;
    let stepper = Stepper::new(&sys.basis.generator(), dt)?;
    integrate(
        &sys.basis,
        grid,
        z0.coefficients().clone(),
        &stepper,
        &forcing,
    )
}

fn integrate(
    basis: &Arc<SpectralBasis>,
    grid: Vec<f64>,
    x0: DVector<f64>,
    stepper: &Stepper,
    forcing: &[DVector<f64>],
) -> Result<StateTrajectory> {
    let mut states = DMatrix::zeros(grid.len(), x0.len());
    states.set_row(0, &x0.transpose());
    let mut x = x0;
    for (j, f) in forcing.iter().enumerate() {
        x = stepper.step(&x, f)?;
        states.set_row(j + 1, &x.transpose());
    }
    Ok(StateTrajectory {
        basis: basis.clone(),
        time_grid: grid,
        states,
    })
}

/// Sensor outputs `C z(t_j)` of a simulated trajectory.
pub fn plant_output(sys: &ObserverSystem, traj: &StateTrajectory) -> Result<OutputTrajectory> {
    OutputTrajectory::new(
        traj.time_grid.clone(),
        &traj.states * sys.output.transpose(),
    )
}

/// Integrates `w' = (A - H C) w + B u + H y` by Crank-Nicolson on the time
/// grid of `y`, starting from `w0` (zero when `None`).
pub fn simulate_observer(
    sys: &ObserverSystem,
    y: &OutputTrajectory,
    control: Option<&ControlSignal>,
    w0: Option<&StateField>,
) -> Result<StateTrajectory> {
    let grid = y.time_grid().to_vec();
    let steps = grid.len() - 1;
    let dt = y.horizon() / steps as f64;
    let uniform = uniform_time_grid(y.horizon(), steps);
    if grid
        .iter()
        .zip(&uniform)
        .any(|(a, b)| (a - b).abs() > 1e-12 * y.horizon())
    {
        return Err(Error::GridMismatch(
            "observer needs a uniform time grid".into(),
        ));
    }
    if y.sensor_count() != sys.sensors.len() {
        return Err(Error::DimensionMismatch {
            expected: sys.sensors.len(),
            got: y.sensor_count(),
        });
    }
    let x0 = match w0 {
        Some(w) => {
            if !same_basis(&sys.basis, w.basis()) {
                return Err(Error::BasisMismatch);
            }
            w.coefficients().clone()
        }
        None => DVector::zeros(sys.basis.len()),
    };
    let mut forcing = control_forcing(&sys.input_map, control, dt, steps)?;
    let h = sys.gain.columns();
    for (j, f) in forcing.iter_mut().enumerate() {
        let avg = 0.5 * (y.samples().row(j) + y.samples().row(j + 1));
        *f += h * avg.transpose();
    }
    let stepper = Stepper::new(&sys.generator, dt)?;
    integrate(&sys.basis, grid, x0, &stepper, &forcing)
}

/// `|chi_Gamma gamma_0 (w(t_j) - z(t_j))|` in the quadrature norm of the
/// observer's region.
pub fn error_trajectory(
    sys: &ObserverSystem,
    z_traj: &StateTrajectory,
    w_traj: &StateTrajectory,
) -> Result<Vec<f64>> {
    if z_traj.time_grid != w_traj.time_grid {
        return Err(Error::GridMismatch(
            "state trajectories use different time grids".into(),
        ));
    }
    if !same_basis(&z_traj.basis, &sys.basis) || !same_basis(&w_traj.basis, &sys.basis) {
        return Err(Error::BasisMismatch);
    }
    let r = trace_matrix(&sys.basis, &sys.region);
    let w = sys.region.weights();
    let diff = &w_traj.states - &z_traj.states;
    Ok((0..diff.nrows())
        .map(|j| {
            let vals = &r * diff.row(j).transpose();
            vals.iter()
                .zip(w)
                .map(|(v, wi)| wi * v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Least-squares fit of `log |e(t)| ~ log F - sigma t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub prefactor: f64,
    /// Positive for decay.
    pub sigma: f64,
    /// Root-mean-square misfit of the logarithms.
    pub residual: f64,
    pub window: (f64, f64),
    pub samples_used: usize,
}

impl DecayFit {
    pub fn predict(&self, t: f64) -> f64 {
        self.prefactor * (-self.sigma * t).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Fraction of the leading samples dropped as transient.
    pub skip_fraction: f64,
    /// Samples at or below this value end the window.
    pub floor: f64,
    pub min_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            skip_fraction: 0.1,
            floor: 1e-14,
            min_samples: 8,
        }
    }
}

pub fn fit_exponential_decay(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    fit_exponential_decay_with(times, values, FitOptions::default())
}

pub fn fit_exponential_decay_with(
    times: &[f64],
    values: &[f64],
    opts: FitOptions,
) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            got: values.len(),
        });
    }
    let start = (opts.skip_fraction * times.len() as f64).ceil() as usize;
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .skip(start)
        .take_while(|(_, &v)| v > opts.floor)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if window.len() < opts.min_samples.max(2) {
        return Err(Error::NothingToFit(format!(
            "{} samples above the floor {:e} after the transient, need {}",
            window.len(),
            opts.floor,
            opts.min_samples
        )));
    }
    let m = window.len() as f64;
    let tm = window.iter().map(|p| p.0).sum::<f64>() / m;
    let lm = window.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = window.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let stl: f64 = window.iter().map(|p| (p.0 - tm) * (p.1 - lm)).sum();
    let slope = stl / stt;
    let intercept = lm - slope * tm;
    let residual = (window
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(DecayFit {
        prefactor: intercept.exp(),
        sigma: -slope,
        residual,
        window: (window[0].0, window[window.len() - 1].0),
        samples_used: window.len(),
    })
}

/// Frobenius residuals of the identity-observer relations with
/// `alpha = I`, `M = 0`, `N = I`, `L = A - H C`, `G = B`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    /// `M C + N alpha - I`.
    pub injection: f64,
    /// `alpha A + L alpha - H C`, the relation with a plus sign.
    pub sylvester_plus: f64,
    /// `alpha A - L alpha - H C`, the usual Luenberger relation.
    pub sylvester_minus: f64,
    /// `G - B`.
    pub input: f64,
}

pub fn verify_observer_identities(sys: &ObserverSystem) -> IdentityReport {
    let n = sys.basis.len();
    let q = sys.sensors.len();
    let id = DMatrix::<f64>::identity(n, n);
    let alpha = &id;
    let m = DMatrix::<f64>::zeros(n, q);
    let nn = &id;
    let a = sys.basis.generator();
    let l = &sys.generator;
    let hc = sys.gain.columns() * &sys.output;
    let g = &sys.input_map;
    IdentityReport {
        injection: (&m * &sys.output + nn * alpha - &id).norm(),
        sylvester_plus: (alpha * &a + l * alpha - &hc).norm(),
        sylvester_minus: (alpha * &a - l * alpha - &hc).norm(),
        input: (g - &sys.input_map).norm(),
    }
}
