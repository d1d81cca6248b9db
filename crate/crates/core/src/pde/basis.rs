use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::domain::{DomainKind, DomainSpec};
use crate::linalg::{cos_pi, exp_integral};
use crate::{Error, Result};

/// Truncated eigenbasis of `diffusivity * Laplacian` with homogeneous Neumann
/// conditions.
///
/// On `[0, L]` the eigenpairs are `-D (n pi / L)^2` and `c_n cos(n pi x / L)`
/// with `c_0 = 1/sqrt(L)`, `c_n = sqrt(2/L)`; on a rectangle they are tensor
/// products. Modes are sorted by non-increasing eigenvalue, ties broken by
/// the index tuple, so the constant mode is always mode 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBasis {
    domain: DomainSpec,
    mode_count: usize,
    eigenvalues: Vec<f64>,
    mode_indices: Vec<Vec<usize>>,
    normalization_constants: Vec<f64>,
}

/// Builds the analytic Neumann eigenbasis with `mode_count` modes per axis.
///
/// The grid must have more intervals than modes per axis so that the
/// trapezoid rule integrates products of basis functions exactly.
pub fn build_basis(domain: DomainSpec, mode_count: usize) -> Result<SpectralBasis> {
    if mode_count == 0 {
        return Err(Error::InvalidModeCount(mode_count));
    }
    if domain.grid_resolution() <= mode_count {
        return Err(Error::InvalidDomain(format!(
            "grid_resolution {} must exceed the mode count {mode_count}",
            domain.grid_resolution()
        )));
    }
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let lengths = domain.lengths().to_vec();
    let axis_norm = |n: usize, l: f64| {
        if n == 0 {
            (1.0 / l).sqrt()
        } else {
            (2.0 / l).sqrt()
        }
    };

    let tuples: Vec<Vec<usize>> = match domain.kind() {
        DomainKind::Interval => (0..mode_count).map(|n| vec![n]).collect(),
        DomainKind::Rectangle => (0..mode_count)
            .flat_map(|m| (0..mode_count).map(move |n| vec![m, n]))
            .collect(),
    };
    let mut modes: Vec<(f64, Vec<usize>, f64)> = tuples
        .into_iter()
        .map(|idx| {
            let s: f64 = idx
                .iter()
                .zip(&lengths)
                .map(|(&n, &l)| (n * n) as f64 / (l * l))
                .sum();
            let lambda = if s == 0.0 {
                0.0
            } else {
                -domain.diffusivity() * pi2 * s
            };
            let c: f64 = idx
                .iter()
                .zip(&lengths)
                .map(|(&n, &l)| axis_norm(n, l))
                .product();
            (lambda, idx, c)
        })
        .collect();
    modes.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    Ok(SpectralBasis {
        domain,
        mode_count,
        eigenvalues: modes.iter().map(|m| m.0).collect(),
        mode_indices: modes.iter().map(|m| m.1.clone()).collect(),
        normalization_constants: modes.iter().map(|m| m.2).collect(),
    })
}

impl SpectralBasis {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    /// Truncation order per axis.
    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    /// Total number of modes (the state dimension).
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mode_indices(&self) -> &[Vec<usize>] {
        &self.mode_indices
    }

    pub fn normalization_constants(&self) -> &[f64] {
        &self.normalization_constants
    }

    /// Position of the mode with the given index tuple.
    pub fn find_mode(&self, index: &[usize]) -> Option<usize> {
        self.mode_indices.iter().position(|m| m == index)
    }

    /// Weights `1 + |lambda_k|` of the H1-proxy norm.
    pub fn h1_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.eigenvalues.iter().map(|l| 1.0 + l.abs()))
    }

    /// Mode `k` at a point given as fractions of the domain lengths.
    pub(crate) fn eval_mode_ratio(&self, k: usize, ratio: [f64; 2]) -> f64 {
        self.mode_indices[k]
            .iter()
            .enumerate()
            .map(|(a, &n)| cos_pi(n as f64 * ratio[a]))
            .product::<f64>()
            * self.normalization_constants[k]
    }

    /// Mode `k` evaluated at a physical point.
    pub fn eval_mode(&self, k: usize, point: &[f64]) -> Result<f64> {
        let r = self.domain.to_ratio(point)?;
        Ok(self.eval_mode_ratio(k, r))
    }

    /// All modes at a point: one row of the point-evaluation functional.
    pub(crate) fn eval_row_ratio(&self, ratio: [f64; 2]) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            (0..self.len()).map(|k| self.eval_mode_ratio(k, ratio)),
        )
    }

    /// Mode values on the domain grid: one row per grid point.
    pub fn grid_matrix(&self) -> DMatrix<f64> {
        let g = self.domain.grid_len();
        DMatrix::from_fn(g, self.len(), |p, k| {
            self.eval_mode_ratio(k, self.domain.grid_ratio(p))
        })
    }

    /// Gram matrix of the basis under the domain's trapezoid quadrature.
    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let e = self.grid_matrix();
        let w = DVector::from_vec(self.domain.grid_weights());
        e.transpose() * DMatrix::from_diagonal(&w) * e
    }

    /// The generator `diag(lambda)` in coefficient space.
    pub fn generator(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues))
    }
}

/// A state `z(., t)` as coefficients in a spectral basis.
#[derive(Clone, Debug)]
pub struct StateField {
    basis: Arc<SpectralBasis>,
    coefficients: DVector<f64>,
}

pub(crate) fn same_basis(a: &Arc<SpectralBasis>, b: &Arc<SpectralBasis>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl StateField {
    pub fn new(basis: Arc<SpectralBasis>, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: coefficients.len(),
            });
        }
        Ok(Self {
            basis,
            coefficients,
        })
    }

    pub fn zeros(basis: Arc<SpectralBasis>) -> Self {
        let n = basis.len();
        Self {
            basis,
            coefficients: DVector::zeros(n),
        }
    }

    /// The spatially constant field with value `c`.
    pub fn constant(basis: Arc<SpectralBasis>, c: f64) -> Self {
        let mut s = Self::zeros(basis);
        s.coefficients[0] = c / s.basis.normalization_constants[0];
        s
    }

    /// The `k`-th basis function.
    pub fn mode(basis: Arc<SpectralBasis>, k: usize) -> Self {
        let mut s = Self::zeros(basis);
        s.coefficients[k] = 1.0;
        s
    }

    pub fn basis(&self) -> &Arc<SpectralBasis> {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn into_coefficients(self) -> DVector<f64> {
        self.coefficients
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64> {
        let r = self.basis.domain.to_ratio(point)?;
        Ok(self.basis.eval_row_ratio(r).dot(&self.coefficients))
    }

    /// Values on the domain grid (row-major, x fastest).
    pub fn evaluate_grid(&self) -> DVector<f64> {
        self.basis.grid_matrix() * &self.coefficients
    }

    /// L2 projection of grid values onto the basis by trapezoid quadrature.
    pub fn project(basis: Arc<SpectralBasis>, grid_values: &DVector<f64>) -> Result<Self> {
        let g = basis.domain.grid_len();
        if grid_values.len() != g {
            return Err(Error::DimensionMismatch {
                expected: g,
                got: grid_values.len(),
            });
        }
        let w = basis.domain.grid_weights();
        let weighted = DVector::from_iterator(g, grid_values.iter().zip(&w).map(|(v, w)| v * w));
        let coefficients = basis.grid_matrix().transpose() * weighted;
        Self::new(basis, coefficients)
    }

    /// L2(Omega) inner product (the coefficient dot product).
    pub fn inner(&self, other: &Self) -> Result<f64> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(self.coefficients.dot(&other.coefficients))
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients.norm()
    }

    /// Squared H1-proxy norm `sum (1 + |lambda_k|) a_k^2`.
    pub fn h1_norm_squared(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.basis.eigenvalues())
            .map(|(a, l)| (1.0 + l.abs()) * a * a)
            .sum()
    }

    pub fn h1_norm(&self) -> f64 {
        self.h1_norm_squared().sqrt()
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Self) -> Result<Self> {
        if !same_basis(&self.basis, &other.basis) {
            return Err(Error::BasisMismatch);
        }
        Ok(Self {
            basis: self.basis.clone(),
            coefficients: &self.coefficients + alpha * &other.coefficients,
        })
    }

    pub(crate) fn with_coefficients(&self, coefficients: DVector<f64>) -> Self {
        debug_assert_eq!(coefficients.len(), self.basis.len());
        Self {
            basis: self.basis.clone(),
            coefficients,
        }
    }
}

/// Panics if the operands live on different bases; use [`StateField::axpy`]
/// for a fallible version.
impl Add for &StateField {
    type Output = StateField;
    fn add(self, rhs: &StateField) -> StateField {
        self.axpy(1.0, rhs)
            .expect("state fields on different bases")
    }
}

impl Sub for &StateField {
    type Output = StateField;
    fn sub(self, rhs: &StateField) -> StateField {
        self.axpy(-1.0, rhs)
            .expect("state fields on different bases")
    }
}

impl Mul<f64> for &StateField {
    type Output = StateField;
    fn mul(self, rhs: f64) -> StateField {
        self.with_coefficients(&self.coefficients * rhs)
    }
}

/// `S_A(t) z`: each coefficient is multiplied by `exp(lambda_k t)`.
pub fn semigroup_apply(t: f64, state: &StateField) -> Result<StateField> {
    if !(t >= 0.0) {
        return Err(Error::NegativeTime(t));
    }
    let coeffs = DVector::from_iterator(
        state.coefficients.len(),
        state
            .coefficients
            .iter()
            .zip(state.basis.eigenvalues())
            .map(|(a, l)| a * (l * t).exp()),
    );
    Ok(state.with_coefficients(coeffs))
}

/// Piecewise-constant control `u(t)`: row `j` holds the value on
/// `[j dt, (j + 1) dt)`, one column per input channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal {
    dt: f64,
    values: DMatrix<f64>,
}

impl ControlSignal {
    pub fn new(dt: f64, values: DMatrix<f64>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "control dt must be positive, got {dt}"
            )));
        }
        Ok(Self { dt, values })
    }

    /// Every channel held at the given constant over `steps` intervals.
    pub fn constant(levels: &[f64], dt: f64, steps: usize) -> Result<Self> {
        let values = DMatrix::from_fn(steps, levels.len(), |_, c| levels[c]);
        Self::new(dt, values)
    }

    pub fn zeros(channels: usize, dt: f64, steps: usize) -> Result<Self> {
        Self::new(dt, DMatrix::zeros(steps, channels))
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn steps(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// End of the covered time interval.
    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    /// Value held on step `j` (the last value is held past the horizon).
    pub fn at_step(&self, j: usize) -> DVector<f64> {
        if self.steps() == 0 {
            return DVector::zeros(self.channels());
        }
        self.values.row(j.min(self.steps() - 1)).transpose()
    }
}

/// `z(t) = S_A(t) z0 + int_0^t S_A(t - s) B u(s) ds` with each mode's
/// Duhamel integral evaluated in closed form over every control interval.
pub fn mild_solution(
    z0: &StateField,
    input_map: &[StateField],
    control: &ControlSignal,
    t: f64,
) -> Result<StateField> {
    let mut z = semigroup_apply(t, z0)?;
    if input_map.len() != control.channels() {
        return Err(Error::DimensionMismatch {
            expected: input_map.len(),
            got: control.channels(),
        });
    }
    if input_map.is_empty() || t == 0.0 {
        return Ok(z);
    }
    if control.horizon() < t * (1.0 - 1e-12) {
        return Err(Error::ControlTooShort {
            covered: control.horizon(),
            requested: t,
        });
    }
    let n = z0.basis.len();
    let mut b = DMatrix::zeros(n, input_map.len());
    for (c, col) in input_map.iter().enumerate() {
        if !same_basis(&col.basis, &z0.basis) {
            return Err(Error::BasisMismatch);
        }
        b.set_column(c, &col.coefficients);
    }
    let lambdas = z0.basis.eigenvalues();
    let dt = control.dt();
    let mut acc = DVector::zeros(n);
    for j in 0..control.steps() {
        let a = j as f64 * dt;
        if a >= t {
            break;
        }
        let c = ((j + 1) as f64 * dt).min(t);
        let forcing = &b * control.at_step(j);
        for k in 0..n {
            let l = lambdas[k];
            acc[k] += (l * (t - c)).exp() * exp_integral(l, c - a) * forcing[k];
        }
    }
    z.coefficients += acc;
    Ok(z)
}
