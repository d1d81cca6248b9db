//! Initial-state reconstruction by regularized least squares, the
//! region-restricted observation error, observable-state subspaces and the
//! region-monotonicity and sensor-sweep experiments.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::linalg::{cholesky_solve, orthonormal_span, sorted_symmetric_eigen, FullSvd};
use crate::observability::{adjoint_kstar, analytic_gramian, forward_k, ObservabilityProblem};
use crate::pde::{same_basis, trace_matrix, BoundaryRegion, SpectralBasis, StateField};
use crate::sensing::{OutputTrajectory, SensorSpec};
use crate::{csv, Error, Result};

/// Default ridge parameter.
pub const DEFAULT_REGULARIZATION: f64 = 1e-10;

/// Absolute slack of the nesting assertion.
pub const NESTING_SLACK: f64 = 1e-12;

/// Largest condition number accepted for an unregularized solve.
const MAX_CONDITION: f64 = 1e13;

/// Measured outputs plus the data needed to invert them.
#[derive(Clone, Debug)]
pub struct ReconstructionProblem {
    observability: ObservabilityProblem,
    measured: OutputTrajectory,
    regularization: f64,
    regions: Vec<Arc<BoundaryRegion>>,
}

/// Checks `regions[i] ⊆ regions[i + 1]` on the basis domain.
pub fn check_nested(basis: &SpectralBasis, regions: &[Arc<BoundaryRegion>]) -> Result<()> {
    for (i, r) in regions.iter().enumerate() {
        if r.domain() != basis.domain() {
            return Err(Error::NotNested(format!(
                "region {i} lives on a different domain"
            )));
        }
    }
    for (i, w) in regions.windows(2).enumerate() {
        if !w[0].subset_of(&w[1]) {
            return Err(Error::NotNested(format!(
                "region {i} ({}) is not contained in region {} ({})",
                w[0].label(),
                i + 1,
                w[1].label()
            )));
        }
    }
    Ok(())
}

impl ReconstructionProblem {
    pub fn new(
        observability: ObservabilityProblem,
        measured: OutputTrajectory,
        regularization: f64,
        regions: Vec<Arc<BoundaryRegion>>,
    ) -> Result<Self> {
        if !(regularization.is_finite() && regularization >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "regularization must be non-negative, got {regularization}"
            )));
        }
        if measured.time_grid() != observability.time_grid().as_slice() {
            return Err(Error::GridMismatch(
                "measurements are not on the problem's time grid".into(),
            ));
        }
        if measured.sensor_count() != observability.sensors().len() {
            return Err(Error::DimensionMismatch {
                expected: observability.sensors().len(),
                got: measured.sensor_count(),
            });
        }
        check_nested(observability.basis(), &regions)?;
        Ok(Self {
            observability,
            measured,
            regularization,
            regions,
        })
    }

    pub fn observability(&self) -> &ObservabilityProblem {
        &self.observability
    }

    pub fn measured(&self) -> &OutputTrajectory {
        &self.measured
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn regions(&self) -> &[Arc<BoundaryRegion>] {
        &self.regions
    }
}

/// Minimizes `|K z - y|^2 + eps |z|^2` over the coefficients through
/// `(G_h + eps I) z = K* y`, where `G_h` is the Gramian of the sampled
/// operator (so the normal equations are exactly those of the sampled
/// objective).
pub fn reconstruct_initial_state(problem: &ReconstructionProblem) -> Result<StateField> {
    let obs = &problem.observability;
    let rhs = adjoint_kstar(obs, &problem.measured)?;
    let mut g = obs.sampled_gramian();
    let n = g.nrows();
    let eps = problem.regularization;
    if eps == 0.0 {
        let (eig, _) = sorted_symmetric_eigen(&g);
        let (max, min) = (eig[0], eig[n - 1]);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::SingularNormalEquations { condition });
        }
    } else {
        for k in 0..n {
            g[(k, k)] += eps;
        }
    }
    let z = cholesky_solve(&g, rhs.coefficients()).ok_or(Error::SingularNormalEquations {
        condition: f64::INFINITY,
    })?;
    StateField::new(obs.basis().clone(), z)
}

/// Output misfit `|K z - y|` in the sampled output norm.
pub fn output_residual(problem: &ReconstructionProblem, z: &StateField) -> Result<f64> {
    let fitted = forward_k(&problem.observability, z)?;
    let diff = OutputTrajectory::new(
        fitted.time_grid().to_vec(),
        fitted.samples() - problem.measured.samples(),
    )?;
    Ok(diff.norm())
}

/// `Er = |chi_Gamma gamma_0 (z0 - z0_rec)|^2` in the quadrature norm of the
/// region.
pub fn observation_error(
    z0_true: &StateField,
    z0_rec: &StateField,
    region: &BoundaryRegion,
) -> Result<f64> {
    if !same_basis(z0_true.basis(), z0_rec.basis()) {
        return Err(Error::BasisMismatch);
    }
    if region.domain() != z0_true.basis().domain() {
        return Err(Error::InvalidRegion(
            "region lives on a different domain".into(),
        ));
    }
    let diff = z0_true.coefficients() - z0_rec.coefficients();
    let vals = trace_matrix(z0_true.basis(), region) * diff;
    Ok(vals
        .iter()
        .zip(region.weights())
        .map(|(v, w)| w * v * v)
        .sum())
}

/// Whole-domain error: the squared state norm (H1 proxy) of `z0 - z0_rec`.
pub fn observation_error_omega(z0_true: &StateField, z0_rec: &StateField) -> Result<f64> {
    if !same_basis(z0_true.basis(), z0_rec.basis()) {
        return Err(Error::BasisMismatch);
    }
    Ok((z0_true - z0_rec).h1_norm_squared())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetLabel {
    /// States whose region trace is recovered from the outputs.
    Gamma,
    /// States recovered on the whole domain.
    Omega,
}

/// An orthonormal basis (in coefficients) of a recoverable subspace.
#[derive(Clone, Debug)]
pub struct ObservableSet {
    pub label: SetLabel,
    pub region: Option<Arc<BoundaryRegion>>,
    pub sensors: Vec<SensorSpec>,
    pub basis: DMatrix<f64>,
    pub threshold: f64,
}

impl ObservableSet {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Largest distance of a unit vector of `other` from this subspace.
    pub fn projection_residual(&self, other: &ObservableSet) -> f64 {
        let q = &self.basis;
        (0..other.dim())
            .map(|j| {
                let v = other.basis.column(j);
                (v - q * (q.transpose() * v)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, v: &DVector<f64>) -> bool {
        let q = &self.basis;
        (v - q * (q.transpose() * v)).norm() <= 1e-10 * v.norm().max(f64::MIN_POSITIVE)
    }
}

/// Whole-domain observable states: Gramian eigenvectors with eigenvalue
/// above `threshold`, for the given horizon.
pub fn build_omega_observable_set(
    basis: &Arc<SpectralBasis>,
    sensors: &[SensorSpec],
    horizon: f64,
    threshold: f64,
) -> Result<ObservableSet> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let full = Arc::new(BoundaryRegion::full(basis.domain()));
    let problem = ObservabilityProblem::new(basis.clone(), sensors.to_vec(), full, horizon, 1)?;
    let (values, vectors) = sorted_symmetric_eigen(&analytic_gramian(&problem));
    let keep = values.iter().filter(|&&v| v > threshold).count();
    Ok(ObservableSet {
        label: SetLabel::Omega,
        region: None,
        sensors: sensors.to_vec(),
        basis: vectors.columns(0, keep).into_owned(),
        threshold,
    })
}

/// Region observable states: states whose trace on `region` coincides with
/// the trace of a whole-domain observable state, i.e. the sum of the
/// whole-domain observable subspace and the kernel of the region trace.
pub fn build_observable_set(
    basis: &Arc<SpectralBasis>,
    sensors: &[SensorSpec],
    region: &Arc<BoundaryRegion>,
    horizon: f64,
    threshold: f64,
) -> Result<ObservableSet> {
    let omega = build_omega_observable_set(basis, sensors, horizon, threshold)?;
    if region.domain() != basis.domain() {
        return Err(Error::InvalidRegion(
            "region lives on a different domain".into(),
        ));
    }
    let r = trace_matrix(basis, region);
    let svd = FullSvd::new(&r)?;
    let kernel = svd.kernel(1e-10 * svd.singular_values.max().max(f64::MIN_POSITIVE));
    let mut cols = omega.basis.clone();
    if kernel.ncols() > 0 {
        cols = DMatrix::from_columns(
            &cols
                .column_iter()
                .chain(kernel.column_iter())
                .map(|c| c.into_owned())
                .collect::<Vec<_>>(),
        );
    }
    Ok(ObservableSet {
        label: SetLabel::Gamma,
        region: Some(region.clone()),
        sensors: sensors.to_vec(),
        basis: orthonormal_span(&cols, 1e-10)?,
        threshold,
    })
}

/// Seeded random initial state: standard normal coefficients scaled by
/// `1 / (1 + |lambda_k|)`.
pub fn random_initial_state(basis: &Arc<SpectralBasis>, seed: u64) -> StateField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = DVector::from_iterator(
        basis.len(),
        basis.eigenvalues().iter().map(|l| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x / (1.0 + l.abs())
        }),
    );
    StateField::new(basis.clone(), coeffs).expect("length matches the basis")
}

/// Errors of one reconstruction on a region nest.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    pub reconstructed: StateField,
    /// `|K z_rec - y|`.
    pub residual: f64,
    /// `(region label, Er)` in nesting order.
    pub per_region_errors: Vec<(String, f64)>,
    /// Whole-domain error of the same reconstruction.
    pub omega_error: f64,
    /// Value of the minimized objective at the reconstruction.
    pub minimizer_value: f64,
}

impl ErrorReport {
    /// `Er` is non-decreasing along the nest, up to [`NESTING_SLACK`].
    pub fn nested_ok(&self) -> bool {
        self.per_region_errors
            .windows(2)
            .all(|w| w[0].1 <= w[1].1 + NESTING_SLACK)
    }

    /// Every region error is at most the whole-domain error.
    pub fn domain_bound_ok(&self) -> bool {
        self.per_region_errors
            .iter()
            .all(|(_, e)| *e <= self.omega_error + NESTING_SLACK)
    }
}

/// Reconstructs and evaluates `Er` on every region of the nest.
pub fn evaluate_reconstruction(
    problem: &ReconstructionProblem,
    z0_true: &StateField,
) -> Result<ErrorReport> {
    let rec = reconstruct_initial_state(problem)?;
    let residual = output_residual(problem, &rec)?;
    let per_region_errors = problem
        .regions
        .iter()
        .map(|r| Ok((r.label().to_string(), observation_error(z0_true, &rec, r)?)))
        .collect::<Result<Vec<_>>>()?;
    let omega_error = observation_error_omega(z0_true, &rec)?;
    let minimizer_value =
        residual * residual + problem.regularization * rec.coefficients().norm_squared();
    Ok(ErrorReport {
        reconstructed: rec,
        residual,
        per_region_errors,
        omega_error,
        minimizer_value,
    })
}

/// One trial of the monotonicity experiment.
#[derive(Clone, Debug)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub errors: Vec<f64>,
    pub omega_error: f64,
    pub residual: f64,
    pub nested_ok: bool,
    pub domain_bound_ok: bool,
}

#[derive(Clone, Debug)]
pub struct MonotonicityReport {
    pub region_labels: Vec<String>,
    pub regularization: f64,
    pub trials: Vec<TrialRecord>,
}

impl MonotonicityReport {
    pub fn nested_passes(&self) -> usize {
        self.trials.iter().filter(|t| t.nested_ok).count()
    }

    pub fn domain_bound_passes(&self) -> usize {
        self.trials.iter().filter(|t| t.domain_bound_ok).count()
    }

    pub fn all_pass(&self) -> bool {
        self.trials.iter().all(|t| t.nested_ok && t.domain_bound_ok)
    }

    /// Mean and maximum `Er` per region.
    pub fn region_stats(&self) -> Vec<(String, f64, f64)> {
        let m = self.trials.len().max(1) as f64;
        self.region_labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let errs = self.trials.iter().map(|t| t.errors[i]);
                let mean = errs.clone().sum::<f64>() / m;
                let max = errs.fold(0.0, f64::max);
                (l.clone(), mean, max)
            })
            .collect()
    }

    /// `trial,seed,region,er,er_omega,residual,nested,domain_bound`, one row
    /// per trial and region.
    pub fn to_csv(&self) -> String {
        let rows = self.trials.iter().flat_map(|t| {
            self.region_labels.iter().enumerate().map(move |(i, l)| {
                vec![
                    t.trial.to_string(),
                    t.seed.to_string(),
                    l.clone(),
                    csv::num(t.errors[i]),
                    csv::num(t.omega_error),
                    csv::num(t.residual),
                    pass(t.nested_ok).into(),
                    pass(t.domain_bound_ok).into(),
                ]
            })
        });
        csv::table(
            &[
                "trial",
                "seed",
                "region",
                "er",
                "er_omega",
                "residual",
                "nested",
                "domain_bound",
            ],
            rows,
        )
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

/// Seed of trial `k` in an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

/// Draws `trials` seeded initial states, measures and reconstructs each once,
/// and evaluates `Er` on every region of the nest plus the whole-domain
/// error. Trials run in parallel; records come back in trial order.
pub fn monotonicity_experiment(
    problem: &ObservabilityProblem,
    regions: &[Arc<BoundaryRegion>],
    regularization: f64,
    trials: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if regions.is_empty() {
        return Err(Error::NotNested("no regions given".into()));
    }
    check_nested(problem.basis(), regions)?;
    let records = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = trial_seed(seed, trial);
            let z0 = random_initial_state(problem.basis(), s);
            let y = forward_k(problem, &z0)?;
            let rp =
                ReconstructionProblem::new(problem.clone(), y, regularization, regions.to_vec())?;
            let rep = evaluate_reconstruction(&rp, &z0)?;
            Ok(TrialRecord {
                trial,
                seed: s,
                nested_ok: rep.nested_ok(),
                domain_bound_ok: rep.domain_bound_ok(),
                errors: rep.per_region_errors.iter().map(|p| p.1).collect(),
                omega_error: rep.omega_error,
                residual: rep.residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonotonicityReport {
        region_labels: regions.iter().map(|r| r.label().to_string()).collect(),
        regularization,
        trials: records,
    })
}

/// `Er` on the problem's region as one pointwise sensor moves.
#[derive(Clone, Debug)]
pub struct SweepReport {
    pub locations: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `|Er(b_{i+1}) - Er(b_i)| / |b_{i+1} - b_i|` for adjacent locations.
    pub moduli: Vec<f64>,
}

impl SweepReport {
    /// `index,x[,y],er,residual,modulus`; the modulus column refers to the
    /// step from the previous location and is empty on the first row.
    pub fn to_csv(&self) -> String {
        let dim = self.locations.first().map_or(1, Vec::len);
        let mut header = vec!["index", "x"];
        if dim == 2 {
            header.push("y");
        }
        header.extend(["er", "residual", "modulus"]);
        let rows = self.locations.iter().enumerate().map(|(i, b)| {
            let mut row = vec![i.to_string()];
            row.extend(b.iter().map(|&v| csv::num(v)));
            row.push(csv::num(self.errors[i]));
            row.push(csv::num(self.residuals[i]));
            row.push(if i == 0 {
                String::new()
            } else {
                csv::num(self.moduli[i - 1])
            });
            row
        });
        csv::table(&header, rows)
    }
}

/// For each location `b`, appends a pointwise sensor at `b` to the problem's
/// sensors, measures `z0`, reconstructs and evaluates `Er` on the problem's
/// region.
pub fn sensor_sweep(
    problem: &ObservabilityProblem,
    z0: &StateField,
    locations: &[Vec<f64>],
    regularization: f64,
) -> Result<SweepReport> {
    let region = problem.region().clone();
    let results = locations
        .par_iter()
        .map(|b| {
            let mut sensors = problem.sensors().to_vec();
            sensors.push(SensorSpec::pointwise(b));
            let p = problem.with_sensors(sensors)?;
            let y = forward_k(&p, z0)?;
            let rp = ReconstructionProblem::new(p, y, regularization, vec![region.clone()])?;
            let rec = reconstruct_initial_state(&rp)?;
            Ok((
                observation_error(z0, &rec, &region)?,
                output_residual(&rp, &rec)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let moduli = locations
        .windows(2)
        .zip(results.windows(2))
        .map(|(b, e)| {
            let d: f64 = b[0]
                .iter()
                .zip(&b[1])
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            (e[1].0 - e[0].0).abs() / d
        })
        .collect();
    Ok(SweepReport {
        locations: locations.to_vec(),
        errors: results.iter().map(|r| r.0).collect(),
        residuals: results.iter().map(|r| r.1).collect(),
        moduli,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{build_basis, DomainSpec, Edge, PieceSpec};

    fn interval_problem(sensors: &[f64], modes: usize) -> ObservabilityProblem {
        let d = DomainSpec::interval(1.0, 1.0, 33).unwrap();
        let basis = Arc::new(build_basis(d.clone(), modes).unwrap());
        let g = Arc::new(BoundaryRegion::full(&d));
        let s = sensors
            .iter()
            .map(|&b| SensorSpec::pointwise(&[b]))
            .collect();
        ObservabilityProblem::new(basis, s, g, 0.2, 100).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_state() {
        let p = interval_problem(&[0.3], 4);
        let y = OutputTrajectory::new(p.time_grid(), DMatrix::zeros(101, 1)).unwrap();
        let rp = ReconstructionProblem::new(p, y, 1e-6, vec![]).unwrap();
        let z = reconstruct_initial_state(&rp).unwrap();
        assert_eq!(z.coefficients().amax(), 0.0);
    }

    #[test]
    fn invisible_mode_is_set_to_zero() {
        let p = interval_problem(&[0.5], 4);
        let z0 = StateField::new(
            p.basis().clone(),
            DVector::from_vec(vec![1.0, 0.5, 0.2, 0.1]),
        )
        .unwrap();
        let y = forward_k(&p, &z0).unwrap();
        let rp = ReconstructionProblem::new(p, y, 1e-8, vec![]).unwrap();
        let z = reconstruct_initial_state(&rp).unwrap();
        assert_eq!(z.coefficients()[1], 0.0);
        assert_eq!(z.coefficients()[3], 0.0);
    }

    #[test]
    fn singular_system_without_regularization_is_rejected() {
        let p = interval_problem(&[0.5], 4);
        let y = OutputTrajectory::new(p.time_grid(), DMatrix::zeros(101, 1)).unwrap();
        let rp = ReconstructionProblem::new(p, y, 0.0, vec![]).unwrap();
        assert!(matches!(
            reconstruct_initial_state(&rp),
            Err(Error::SingularNormalEquations { .. })
        ));
    }

    #[test]
    fn error_scales_quadratically() {
        let p = interval_problem(&[0.3], 4);
        let b = p.basis().clone();
        let z = random_initial_state(&b, 3);
        let zero = StateField::zeros(b.clone());
        let g = BoundaryRegion::full(b.domain());
        let e1 = observation_error(&z, &zero, &g).unwrap();
        let e2 = observation_error(&(&z * 3.0), &zero, &g).unwrap();
        assert!((e2 - 9.0 * e1).abs() < 1e-12 * e2);
        assert_eq!(observation_error(&z, &z, &g).unwrap(), 0.0);
    }

    #[test]
    fn observable_sets_exclude_invisible_mode() {
        let p = interval_problem(&[0.5], 4);
        let b = p.basis().clone();
        let omega = build_omega_observable_set(&b, p.sensors(), 0.2, 1e-10).unwrap();
        assert_eq!(omega.dim(), 2);
        let mode1 = DVector::from_fn(4, |k, _| if k == 1 { 1.0 } else { 0.0 });
        assert!(!omega.contains(&mode1));
        let full = Arc::new(BoundaryRegion::full(b.domain()));
        let gamma = build_observable_set(&b, p.sensors(), &full, 0.2, 1e-10).unwrap();
        assert!(!gamma.contains(&mode1));
        assert!(gamma.projection_residual(&omega) < 1e-12);
        let left =
            Arc::new(BoundaryRegion::new(b.domain(), &[PieceSpec::whole(Edge::Left)]).unwrap());
        // one endpoint value is always matched by a constant
        let gl = build_observable_set(&b, p.sensors(), &left, 0.2, 1e-10).unwrap();
        assert_eq!(gl.dim(), 4);
    }

    #[test]
    fn seeded_states_repeat() {
        let p = interval_problem(&[0.3], 5);
        let a = random_initial_state(p.basis(), 11);
        let b = random_initial_state(p.basis(), 11);
        assert_eq!(a.coefficients(), b.coefficients());
        assert_ne!(
            a.coefficients(),
            random_initial_state(p.basis(), 12).coefficients()
        );
    }
}
