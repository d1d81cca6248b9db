use super::boundary::BoundaryRegion;
use super::domain::DomainKind;
use crate::{Error, Result};

/// Interior neighbourhood `omega_r` of a boundary region: the interior grid
/// points closer than `radius` to the region.
#[derive(Clone, Debug)]
pub struct InflatedRegion {
    pub radius: f64,
    /// Physical coordinates of the selected interior grid points.
    pub points: Vec<Vec<f64>>,
    /// Row-major grid indices of the selected points.
    pub grid_indices: Vec<usize>,
    /// Set when the neighbourhood swallows every interior grid point.
    pub covers_domain: bool,
}

/// Union of open balls of radius `r` around the region, intersected with the
/// interior, sampled on the domain grid.
pub fn inflate_region(region: &BoundaryRegion, r: f64) -> Result<InflatedRegion> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive, got {r}"
        )));
    }
    let domain = region.domain();
    let n = domain.grid_resolution();
    let interior = |i: usize| i > 0 && i < n - 1;
    let candidates: Vec<usize> = match domain.kind() {
        DomainKind::Interval => (0..n).filter(|&i| interior(i)).collect(),
        DomainKind::Rectangle => (0..n * n)
            .filter(|&k| interior(k % n) && interior(k / n))
            .collect(),
    };
    let total = candidates.len();
    let mut points = Vec::new();
    let mut grid_indices = Vec::new();
    for k in candidates {
        let p = domain.grid_point(k);
        if region.distance_to(&p) < r {
            points.push(p);
            grid_indices.push(k);
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "radius {r} does not reach any interior grid point"
        )));
    }
    Ok(InflatedRegion {
        radius: r,
        covers_domain: points.len() == total,
        points,
        grid_indices,
    })
}
