use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Rectangle,
}

/// An interval `[0, L]` or a rectangle `[0, Lx] x [0, Ly]` carrying the
/// diffusivity of the Laplacian and the evaluation/quadrature grid size.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    lengths: Vec<f64>,
    diffusivity: f64,
    grid_resolution: usize,
}

impl DomainSpec {
    pub fn new(
        kind: DomainKind,
        lengths: Vec<f64>,
        diffusivity: f64,
        grid_resolution: usize,
    ) -> Result<Self> {
        let dim = match kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        };
        if lengths.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "{kind:?} needs {dim} length(s), got {}",
                lengths.len()
            )));
        }
        if lengths.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::InvalidDomain(format!(
                "lengths must be positive, got {lengths:?}"
            )));
        }
        if !(diffusivity.is_finite() && diffusivity > 0.0) {
            return Err(Error::InvalidDomain(format!(
                "diffusivity must be positive, got {diffusivity}"
            )));
        }
        if grid_resolution < 4 {
            return Err(Error::InvalidDomain(format!(
                "grid_resolution must be at least 4, got {grid_resolution}"
            )));
        }
        Ok(Self {
            kind,
            lengths,
            diffusivity,
            grid_resolution,
        })
    }

    pub fn interval(length: f64, diffusivity: f64, grid_resolution: usize) -> Result<Self> {
        Self::new(
            DomainKind::Interval,
            vec![length],
            diffusivity,
            grid_resolution,
        )
    }

    pub fn rectangle(lx: f64, ly: f64, diffusivity: f64, grid_resolution: usize) -> Result<Self> {
        Self::new(
            DomainKind::Rectangle,
            vec![lx, ly],
            diffusivity,
            grid_resolution,
        )
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn grid_resolution(&self) -> usize {
        self.grid_resolution
    }

    /// Grid spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / (self.grid_resolution - 1) as f64
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    /// Number of grid points over the whole domain.
    pub fn grid_len(&self) -> usize {
        self.grid_resolution.pow(self.dim() as u32)
    }

    /// Grid point `k` (row-major, x fastest) as fractions of the lengths.
    pub(crate) fn grid_ratio(&self, k: usize) -> [f64; 2] {
        let n = self.grid_resolution;
        let m = (n - 1) as f64;
        match self.kind {
            DomainKind::Interval => [k as f64 / m, 0.0],
            DomainKind::Rectangle => [(k % n) as f64 / m, (k / n) as f64 / m],
        }
    }

    /// Physical coordinates of grid point `k`.
    pub fn grid_point(&self, k: usize) -> Vec<f64> {
        let r = self.grid_ratio(k);
        (0..self.dim()).map(|a| r[a] * self.lengths[a]).collect()
    }

    /// Tensor-product trapezoid weights over the grid.
    pub fn grid_weights(&self) -> Vec<f64> {
        let n = self.grid_resolution;
        let w1 = |i: usize, h: f64| if i == 0 || i == n - 1 { 0.5 * h } else { h };
        match self.kind {
            DomainKind::Interval => (0..n).map(|i| w1(i, self.spacing(0))).collect(),
            DomainKind::Rectangle => (0..n * n)
                .map(|k| w1(k % n, self.spacing(0)) * w1(k / n, self.spacing(1)))
                .collect(),
        }
    }

    /// Converts a physical point to length fractions, validating its size.
    pub(crate) fn to_ratio(&self, point: &[f64]) -> Result<[f64; 2]> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: point.len(),
            });
        }
        let mut r = [0.0; 2];
        for (a, &x) in point.iter().enumerate() {
            r[a] = x / self.lengths[a];
        }
        Ok(r)
    }

    /// Whether the point lies in the closed domain (absolute slack `tol`).
    pub fn contains_closure(&self, point: &[f64], tol: f64) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(&self.lengths)
                .all(|(&x, &l)| x >= -tol && x <= l + tol)
    }

    /// Whether the point lies on the boundary (absolute slack `tol`).
    pub fn on_boundary(&self, point: &[f64], tol: f64) -> bool {
        self.contains_closure(point, tol)
            && point
                .iter()
                .zip(&self.lengths)
                .any(|(&x, &l)| x.abs() <= tol || (x - l).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_domains() {
        assert!(DomainSpec::interval(0.0, 1.0, 8).is_err());
        assert!(DomainSpec::interval(1.0, -1.0, 8).is_err());
        assert!(DomainSpec::interval(1.0, 1.0, 3).is_err());
        assert!(DomainSpec::new(DomainKind::Rectangle, vec![1.0], 1.0, 8).is_err());
    }

    #[test]
    fn weights_sum_to_measure() {
        let d = DomainSpec::rectangle(2.0, 0.5, 1.0, 9).unwrap();
        let s: f64 = d.grid_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
        assert!(d.on_boundary(&[2.0, 0.3], 1e-12));
        assert!(!d.on_boundary(&[1.0, 0.3], 1e-12));
    }
}
