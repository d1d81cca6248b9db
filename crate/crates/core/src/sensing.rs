//! Output map `y = C z` for pointwise and zone sensors, interior or on the
//! boundary, and sampled output trajectories.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{cos_pi, sin_pi};
use crate::pde::{DomainKind, DomainSpec, Edge, SpectralBasis, StateField};
use crate::{csv, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorKind {
    InteriorPointwise,
    InteriorZone,
    BoundaryPointwise,
    BoundaryZone,
}

/// Spatial weight of a zone sensor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightProfile {
    #[default]
    Uniform,
}

/// One scalar output channel.
#[derive(Clone, Debug, PartialEq)]
pub enum SensorSpec {
    /// Point evaluation at a point of the closed domain.
    InteriorPointwise { location: Vec<f64> },
    /// Average over an axis-aligned box `support[axis] = (a, b)`.
    InteriorZone {
        support: Vec<(f64, f64)>,
        profile: WeightProfile,
    },
    /// Point evaluation at a boundary point.
    BoundaryPointwise { location: Vec<f64> },
    /// Average over a sub-interval of a rectangle edge.
    BoundaryZone {
        edge: Edge,
        interval: (f64, f64),
        profile: WeightProfile,
    },
}

const GEOMETRY_SLACK: f64 = 1e-12;

impl SensorSpec {
    pub fn pointwise(location: &[f64]) -> Self {
        Self::InteriorPointwise {
            location: location.to_vec(),
        }
    }

    pub fn zone(support: &[(f64, f64)]) -> Self {
        Self::InteriorZone {
            support: support.to_vec(),
            profile: WeightProfile::Uniform,
        }
    }

    pub fn boundary_pointwise(location: &[f64]) -> Self {
        Self::BoundaryPointwise {
            location: location.to_vec(),
        }
    }

    pub fn boundary_zone(edge: Edge, a: f64, b: f64) -> Self {
        Self::BoundaryZone {
            edge,
            interval: (a, b),
            profile: WeightProfile::Uniform,
        }
    }

    pub fn kind(&self) -> SensorKind {
        match self {
            Self::InteriorPointwise { .. } => SensorKind::InteriorPointwise,
            Self::InteriorZone { .. } => SensorKind::InteriorZone,
            Self::BoundaryPointwise { .. } => SensorKind::BoundaryPointwise,
            Self::BoundaryZone { .. } => SensorKind::BoundaryZone,
        }
    }

    /// Checks the sensor geometry against a domain.
    pub fn validate(&self, domain: &DomainSpec) -> Result<()> {
        let tol = GEOMETRY_SLACK * domain.lengths().iter().cloned().fold(0.0, f64::max);
        match self {
            Self::InteriorPointwise { location } => {
                if !domain.contains_closure(location, tol) {
                    return Err(Error::InvalidSensor(format!(
                        "location {location:?} is outside the domain"
                    )));
                }
            }
            Self::BoundaryPointwise { location } => {
                if !domain.on_boundary(location, tol) {
                    return Err(Error::InvalidSensor(format!(
                        "location {location:?} is not on the boundary"
                    )));
                }
            }
            Self::InteriorZone { support, .. } => {
                if support.len() != domain.dim() {
                    return Err(Error::InvalidSensor(format!(
                        "zone support needs {} interval(s), got {}",
                        domain.dim(),
                        support.len()
                    )));
                }
                for (axis, &(a, b)) in support.iter().enumerate() {
                    let l = domain.lengths()[axis];
                    if !(a < b) {
                        return Err(Error::InvalidSensor(format!(
                            "zone interval [{a}, {b}] has no positive measure"
                        )));
                    }
                    if a < -tol || b > l + tol {
                        return Err(Error::InvalidSensor(format!(
                            "zone interval [{a}, {b}] leaves [0, {l}]"
                        )));
                    }
                }
            }
            Self::BoundaryZone { edge, interval, .. } => {
                if domain.kind() != DomainKind::Rectangle {
                    return Err(Error::InvalidSensor(
                        "boundary zones need a rectangle; use a boundary point on an interval"
                            .into(),
                    ));
                }
                let l = domain.lengths()[edge_axis(*edge)];
                let (a, b) = *interval;
                if !(a < b) || a < -tol || b > l + tol {
                    return Err(Error::InvalidSensor(format!(
                        "boundary zone [{a}, {b}] is empty or leaves edge {edge:?} of length {l}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn edge_axis(edge: Edge) -> usize {
    match edge {
        Edge::Bottom | Edge::Top => 0,
        Edge::Left | Edge::Right => 1,
    }
}

/// Mean of `cos(n pi x / l)` over `[a, b]`.
fn cos_mean(n: usize, a: f64, b: f64, l: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let nf = n as f64;
    l / (nf * std::f64::consts::PI) * (sin_pi(nf * b / l) - sin_pi(nf * a / l)) / (b - a)
}

/// One row of `C` in the spectral basis: the sensor applied to every mode.
pub fn sensor_row(sensor: &SensorSpec, basis: &SpectralBasis) -> Result<DVector<f64>> {
    let domain = basis.domain();
    sensor.validate(domain)?;
    let lengths = domain.lengths();
    let n = basis.len();
    let row = match sensor {
        SensorSpec::InteriorPointwise { location } | SensorSpec::BoundaryPointwise { location } => {
            let mut ratio = [0.0; 2];
            for (a, &x) in location.iter().enumerate() {
                ratio[a] = (x / lengths[a]).clamp(0.0, 1.0);
            }
            basis.eval_row_ratio(ratio)
        }
        SensorSpec::InteriorZone { support, .. } => DVector::from_fn(n, |k, _| {
            let idx = &basis.mode_indices()[k];
            basis.normalization_constants()[k]
                * idx
                    .iter()
                    .enumerate()
                    .map(|(a, &m)| cos_mean(m, support[a].0, support[a].1, lengths[a]))
                    .product::<f64>()
        }),
        SensorSpec::BoundaryZone { edge, interval, .. } => {
            let along = edge_axis(*edge);
            let fixed_ratio = match edge {
                Edge::Left | Edge::Bottom => 0.0,
                Edge::Right | Edge::Top => 1.0,
            };
            DVector::from_fn(n, |k, _| {
                let idx = &basis.mode_indices()[k];
                basis.normalization_constants()[k]
                    * cos_mean(idx[along], interval.0, interval.1, lengths[along])
                    * cos_pi(idx[1 - along] as f64 * fixed_ratio)
            })
        }
    };
    Ok(row)
}

/// The output matrix `C` (one row per sensor).
pub fn sensor_matrix(sensors: &[SensorSpec], basis: &SpectralBasis) -> Result<DMatrix<f64>> {
    if sensors.is_empty() {
        return Err(Error::EmptySensors);
    }
    let mut c = DMatrix::zeros(sensors.len(), basis.len());
    for (i, s) in sensors.iter().enumerate() {
        c.set_row(i, &sensor_row(s, basis)?.transpose());
    }
    Ok(c)
}

/// Sampled outputs `y(t_j)` on a uniform grid over `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputTrajectory {
    time_grid: Vec<f64>,
    samples: DMatrix<f64>,
}

/// `steps + 1` equispaced times over `[0, horizon]`.
pub fn uniform_time_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|j| horizon * j as f64 / steps as f64)
        .collect()
}

impl OutputTrajectory {
    pub fn new(time_grid: Vec<f64>, samples: DMatrix<f64>) -> Result<Self> {
        if time_grid.len() < 2 {
            return Err(Error::GridMismatch("need at least two time samples".into()));
        }
        if samples.nrows() != time_grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} sample rows for {} times",
                samples.nrows(),
                time_grid.len()
            )));
        }
        if samples.ncols() == 0 {
            return Err(Error::EmptySensors);
        }
        Ok(Self { time_grid, samples })
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn sensor_count(&self) -> usize {
        self.samples.ncols()
    }

    pub fn horizon(&self) -> f64 {
        *self.time_grid.last().expect("non-empty grid")
    }

    /// Trapezoid weights of the time grid.
    pub fn time_weights(&self) -> Vec<f64> {
        trapezoid_in_time(&self.time_grid)
    }

    /// Inner product of sampled `L2(0, T; R^q)` (trapezoid rule in time).
    pub fn inner(&self, other: &OutputTrajectory) -> Result<f64> {
        self.check_same_grid(other)?;
        if self.sensor_count() != other.sensor_count() {
            return Err(Error::DimensionMismatch {
                expected: self.sensor_count(),
                got: other.sensor_count(),
            });
        }
        let w = self.time_weights();
        Ok((0..self.time_grid.len())
            .map(|j| w[j] * self.samples.row(j).dot(&other.samples.row(j)))
            .sum())
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same grid").sqrt()
    }

    pub(crate) fn check_same_grid(&self, other: &OutputTrajectory) -> Result<()> {
        if self.time_grid != other.time_grid {
            return Err(Error::GridMismatch(
                "trajectories use different time grids".into(),
            ));
        }
        Ok(())
    }

    /// `time,y0,y1,...` with one row per sample.
    pub fn to_csv(&self) -> String {
        let names: Vec<String> = (0..self.sensor_count()).map(|i| format!("y{i}")).collect();
        let mut header = vec!["time"];
        header.extend(names.iter().map(String::as_str));
        csv::table(
            &header,
            self.time_grid.iter().enumerate().map(|(j, &t)| {
                std::iter::once(csv::num(t))
                    .chain(self.samples.row(j).iter().map(|&v| csv::num(v)))
                    .collect()
            }),
        )
    }
}

pub(crate) fn trapezoid_in_time(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let mut w = vec![0.0; m];
    for j in 0..m - 1 {
        let h = grid[j + 1] - grid[j];
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    w
}

/// `y(t_j) = C S_A(t_j) z0` evaluated exactly per mode.
pub fn measure_trajectory(
    basis: &Arc<SpectralBasis>,
    z0: &StateField,
    sensors: &[SensorSpec],
    horizon: f64,
    steps: usize,
) -> Result<OutputTrajectory> {
    if !(horizon > 0.0) || steps == 0 {
        return Err(Error::InvalidArgument(format!(
            "need horizon > 0 and steps >= 1, got {horizon} and {steps}"
        )));
    }
    if !Arc::ptr_eq(basis, z0.basis()) && **basis != **z0.basis() {
        return Err(Error::BasisMismatch);
    }
    let c = sensor_matrix(sensors, basis)?;
    Ok(measure_with_matrix(
        &c,
        basis.eigenvalues(),
        z0.coefficients(),
        horizon,
        steps,
    ))
}

pub(crate) fn measure_with_matrix(
    c: &DMatrix<f64>,
    eigenvalues: &[f64],
    z0: &DVector<f64>,
    horizon: f64,
    steps: usize,
) -> OutputTrajectory {
    let grid = uniform_time_grid(horizon, steps);
    let mut samples = DMatrix::zeros(grid.len(), c.nrows());
    for (j, &t) in grid.iter().enumerate() {
        let zt = DVector::from_iterator(
            z0.len(),
            z0.iter().zip(eigenvalues).map(|(a, l)| a * (l * t).exp()),
        );
        samples.set_row(j, &(c * zt).transpose());
    }
    OutputTrajectory {
        time_grid: grid,
        samples,
    }
}

/// Concatenates channels of trajectories sharing one time grid.
pub fn stack_sensors(trajs: &[OutputTrajectory]) -> Result<OutputTrajectory> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to stack".into()))?;
    for t in &trajs[1..] {
        first.check_same_grid(t)?;
    }
    let q: usize = trajs.iter().map(|t| t.sensor_count()).sum();
    let mut samples = DMatrix::zeros(first.time_grid.len(), q);
    let mut col = 0;
    for t in trajs {
        samples
            .columns_mut(col, t.sensor_count())
            .copy_from(&t.samples);
        col += t.sensor_count();
    }
    OutputTrajectory::new(first.time_grid.clone(), samples)
}
