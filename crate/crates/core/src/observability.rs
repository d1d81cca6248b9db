//! The observation operator `K z = C S_A(.) z`, its adjoint, the
//! observability Gramian and the regional observability and detectability
//! verdicts at the truncated level.

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use crate::linalg::{exp_integral, orthonormal_span, psd_sqrt, sorted_symmetric_eigen, FullSvd};
use crate::observer::ObserverGain;
use crate::pde::{same_basis, trace_matrix, BoundaryRegion, SpectralBasis, StateField};
use crate::sensing::{
    measure_with_matrix, sensor_matrix, trapezoid_in_time, uniform_time_grid, OutputTrajectory,
    SensorSpec,
};
use crate::{Error, Result};

/// Default cut-off on the trace-recovery singular values.
pub const DEFAULT_THRESHOLD: f64 = 1e-8;

/// Relative rank cut-off of the normalized trace map.
const TRACE_RANK_TOL: f64 = 1e-10;

/// Detectability requires the spectral abscissa to be below `-DETECTABILITY_MARGIN`.
pub const DETECTABILITY_MARGIN: f64 = 1e-10;

/// Sensors, a boundary region and a sampled horizon over one spectral basis.
#[derive(Clone, Debug)]
pub struct ObservabilityProblem {
    basis: Arc<SpectralBasis>,
    sensors: Vec<SensorSpec>,
    region: Arc<BoundaryRegion>,
    horizon: f64,
    time_steps: usize,
    output: DMatrix<f64>,
}

impl ObservabilityProblem {
    pub fn new(
        basis: Arc<SpectralBasis>,
        sensors: Vec<SensorSpec>,
        region: Arc<BoundaryRegion>,
        horizon: f64,
        time_steps: usize,
    ) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if time_steps == 0 {
            return Err(Error::InvalidArgument(
                "time_steps must be at least 1".into(),
            ));
        }
        if region.domain() != basis.domain() {
            return Err(Error::InvalidRegion(
                "region lives on a different domain".into(),
            ));
        }
        let output = sensor_matrix(&sensors, &basis)?;
        Ok(Self {
            basis,
            sensors,
            region,
            horizon,
            time_steps,
            output,
        })
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn sensors(&self) -> &[SensorSpec] {
        &self.sensors
    }

    pub fn region(&self) -> &Arc<BoundaryRegion> {
        &self.region
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn time_steps(&self) -> usize {
        self.time_steps
    }

    /// The output matrix `C`, one row per sensor.
    pub fn output_matrix(&self) -> &DMatrix<f64> {
        &self.output
    }

    pub fn time_grid(&self) -> Vec<f64> {
        uniform_time_grid(self.horizon, self.time_steps)
    }

    /// The same sensors and horizon observed on another region.
    pub fn with_region(&self, region: Arc<BoundaryRegion>) -> Result<Self> {
        if region.domain() != self.basis.domain() {
            return Err(Error::InvalidRegion(
                "region lives on a different domain".into(),
            ));
        }
        Ok(Self {
            region,
            ..self.clone()
        })
    }

    /// The same region and horizon with another sensor set.
    pub fn with_sensors(&self, sensors: Vec<SensorSpec>) -> Result<Self> {
        Self::new(
            self.basis.clone(),
            sensors,
            self.region.clone(),
            self.horizon,
            self.time_steps,
        )
    }

    /// Gramian of the sampled operator, `K_h^T W K_h` with trapezoid weights
    /// `W` in time. It is the Gramian consistent with [`adjoint_kstar`].
    pub fn sampled_gramian(&self) -> DMatrix<f64> {
        let grid = self.time_grid();
        let w = trapezoid_in_time(&grid);
        let lambdas = self.basis.eigenvalues();
        let ctc = self.output.transpose() * &self.output;
        DMatrix::from_fn(lambdas.len(), lambdas.len(), |j, k| {
            let s = lambdas[j] + lambdas[k];
            ctc[(j, k)]
                * grid
                    .iter()
                    .zip(&w)
                    .map(|(t, wt)| wt * (s * t).exp())
                    .sum::<f64>()
        })
    }
}

/// `K z`, sampled on the problem's time grid.
pub fn forward_k(problem: &ObservabilityProblem, z: &StateField) -> Result<OutputTrajectory> {
    if !same_basis(&problem.basis, z.basis()) {
        return Err(Error::BasisMismatch);
    }
    Ok(measure_with_matrix(
        &problem.output,
        problem.basis.eigenvalues(),
        z.coefficients(),
        problem.horizon,
        problem.time_steps,
    ))
}

/// `K* y`: coefficient `k` is `sum_i C_ik int_0^T exp(lambda_k s) y_i(s) ds`
/// with the trapezoid rule in time.
pub fn adjoint_kstar(problem: &ObservabilityProblem, y: &OutputTrajectory) -> Result<StateField> {
    let grid = problem.time_grid();
    if y.time_grid() != grid.as_slice() {
        return Err(Error::GridMismatch(
            "output trajectory is not on the problem's time grid".into(),
        ));
    }
    if y.sensor_count() != problem.sensors.len() {
        return Err(Error::DimensionMismatch {
            expected: problem.sensors.len(),
            got: y.sensor_count(),
        });
    }
    let w = trapezoid_in_time(&grid);
    let lambdas = problem.basis.eigenvalues();
    // C^T y(t_j), then weight each mode by exp(lambda_k t_j)
    let projected = y.samples() * &problem.output;
    let coeffs = DVector::from_fn(lambdas.len(), |k, _| {
        grid.iter()
            .enumerate()
            .map(|(j, &t)| w[j] * (lambdas[k] * t).exp() * projected[(j, k)])
            .sum()
    });
    StateField::new(problem.basis.clone(), coeffs)
}

/// Closed-form Gramian `G = (C^T C) o M`, `M_jk = int_0^T exp((l_j + l_k) s) ds`.
pub fn analytic_gramian(problem: &ObservabilityProblem) -> DMatrix<f64> {
    let ctc = problem.output.transpose() * &problem.output;
    let m = time_kernel(problem.basis.eigenvalues(), problem.horizon);
    ctc.component_mul(&m)
}

fn time_kernel(lambdas: &[f64], horizon: f64) -> DMatrix<f64> {
    DMatrix::from_fn(lambdas.len(), lambdas.len(), |j, k| {
        exp_integral(lambdas[j] + lambdas[k], horizon)
    })
}

/// A factor `F` with `F^T F = G`: the blocks `M^{1/2} diag(C_i)` stacked over
/// sensors. `|F z|` is the output-space norm of `K z`.
fn gramian_factor(problem: &ObservabilityProblem) -> DMatrix<f64> {
    let n = problem.basis.len();
    let q = problem.sensors.len();
    let root = psd_sqrt(&time_kernel(problem.basis.eigenvalues(), problem.horizon));
    let mut f = DMatrix::zeros(q * n, n);
    for i in 0..q {
        let row = problem.output.row(i);
        let block = DMatrix::from_fn(n, n, |a, b| root[(a, b)] * row[b]);
        f.view_mut((i * n, 0), (n, n)).copy_from(&block);
    }
    f
}

/// Observability data of a problem on its region.
#[derive(Clone, Debug)]
pub struct GramianReport {
    /// `G = K* K` over mode coefficients.
    pub gramian: DMatrix<f64>,
    /// `chi_Gamma gamma_0` as a matrix from coefficients to the region's
    /// quadrature nodes.
    pub restricted_map: DMatrix<f64>,
    /// Singular values of the trace-recovery operator, non-increasing.
    pub singular_values: DVector<f64>,
    pub observable: bool,
    pub threshold: f64,
}

impl GramianReport {
    /// Smallest trace-recovery singular value (0 if there is none).
    pub fn sigma_min(&self) -> f64 {
        if self.singular_values.is_empty() {
            0.0
        } else {
            self.singular_values.min()
        }
    }

    /// Eigenvalues of the Gramian, non-increasing.
    pub fn gramian_eigenvalues(&self) -> DVector<f64> {
        sorted_symmetric_eigen(&self.gramian).0
    }
}

/// Weighted trace map on `region`, scaled so the whole-boundary map has unit
/// spectral norm.
fn normalized_trace(basis: &SpectralBasis, region: &BoundaryRegion) -> Result<DMatrix<f64>> {
    let full = BoundaryRegion::full(region.domain());
    let scale = FullSvd::new(&weighted_trace(basis, &full))?
        .singular_values
        .max();
    Ok(weighted_trace(basis, region) / scale)
}

fn weighted_trace(basis: &SpectralBasis, region: &BoundaryRegion) -> DMatrix<f64> {
    let mut r = trace_matrix(basis, region);
    for (i, w) in region.weights().iter().enumerate() {
        r.row_mut(i).scale_mut(w.sqrt());
    }
    r
}

/// Singular values of the map sending region trace data `u` to
/// `min { |F z| : R z = u }`. Its smallest value is the best constant in
/// `|R z| <= |F z| / sigma`, i.e. how stably the outputs determine the trace.
fn trace_recovery_values(f: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DVector<f64>> {
    let svd = FullSvd::new(r)?;
    let rank = svd.rank(TRACE_RANK_TOL);
    if rank == 0 {
        return Ok(DVector::zeros(0));
    }
    let n = r.ncols();
    let particular = DMatrix::from_fn(n, rank, |a, b| svd.v[(a, b)] / svd.singular_values[b]);
    let kernel = svd.kernel(TRACE_RANK_TOL);
    let mut image = f * particular;
    if kernel.ncols() > 0 {
        let q = orthonormal_span(&(f * kernel), 1e-12)?;
        image -= &q * (q.transpose() * &image);
    }
    Ok(FullSvd::new(&image)?.singular_values)
}

/// Assembles the Gramian and the trace-recovery verdict with
/// [`DEFAULT_THRESHOLD`].
pub fn boundary_gramian(problem: &ObservabilityProblem) -> Result<GramianReport> {
    is_gamma_observable(problem, DEFAULT_THRESHOLD)
}

/// Region observability at the truncated level: every direction of the
/// discrete region-trace space is recovered from the outputs with a
/// singular value above `threshold`.
pub fn is_gamma_observable(
    problem: &ObservabilityProblem,
    threshold: f64,
) -> Result<GramianReport> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let f = gramian_factor(problem);
    let r = normalized_trace(&problem.basis, &problem.region)?;
    let singular_values = trace_recovery_values(&f, &r)?;
    let observable = !singular_values.is_empty() && singular_values.iter().all(|&s| s > threshold);
    Ok(GramianReport {
        gramian: analytic_gramian(problem),
        restricted_map: trace_matrix(&problem.basis, &problem.region),
        singular_values,
        observable,
        threshold,
    })
}

/// Recoverability of the whole state: singular values of `K` in the
/// coefficient norm (square roots of the Gramian eigenvalues).
#[derive(Clone, Debug)]
pub struct DomainRecoverability {
    pub singular_values: DVector<f64>,
    pub observable: bool,
    pub threshold: f64,
}

pub fn omega_recoverability(
    problem: &ObservabilityProblem,
    threshold: f64,
) -> Result<DomainRecoverability> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    let singular_values = FullSvd::new(&gramian_factor(problem))?.singular_values;
    let observable = singular_values.iter().all(|&s| s > threshold);
    Ok(DomainRecoverability {
        singular_values,
        observable,
        threshold,
    })
}

/// Spectrum of the corrected generator `A - H C`.
#[derive(Clone, Debug)]
pub struct DetectabilityReport {
    pub detectable: bool,
    /// Largest real part of the spectrum.
    pub spectral_abscissa: f64,
    /// Guaranteed decay rate `-abscissa` (positive when detectable).
    pub decay_rate: f64,
    pub eigenvalues: Vec<Complex<f64>>,
}

/// `A - H C` in coefficient space.
pub fn corrected_generator(
    basis: &SpectralBasis,
    output: &DMatrix<f64>,
    gain: &ObserverGain,
) -> Result<DMatrix<f64>> {
    let h = gain.columns();
    if h.nrows() != basis.len() || h.ncols() != output.nrows() || output.ncols() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: h.nrows(),
        });
    }
    Ok(basis.generator() - h * output)
}

pub(crate) fn spectral_abscissa(eigenvalues: &[Complex<f64>]) -> f64 {
    eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Region exponential detectability: the truncated `A - H C` is exponentially
/// stable. Stability of the whole truncated state bounds the region trace.
pub fn is_gamma_detectable(
    basis: &SpectralBasis,
    sensors: &[SensorSpec],
    gain: &ObserverGain,
) -> Result<DetectabilityReport> {
    let c = sensor_matrix(sensors, basis)?;
    let l = corrected_generator(basis, &c, gain)?;
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve(
            "generator has non-finite entries".into(),
        ));
    }
    let eigenvalues: Vec<Complex<f64>> = l.complex_eigenvalues().iter().copied().collect();
    let abscissa = spectral_abscissa(&eigenvalues);
    Ok(DetectabilityReport {
        detectable: abscissa < -DETECTABILITY_MARGIN,
        spectral_abscissa: abscissa,
        decay_rate: -abscissa,
        eigenvalues,
    })
}
