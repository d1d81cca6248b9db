use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::basis::{SpectralBasis, StateField};
use super::domain::{DomainKind, DomainSpec};
use crate::linalg::FullSvd;
use crate::{Error, Result};

/// Relative residual allowed by [`extend_from_boundary`].
pub const EXTENSION_TOLERANCE: f64 = 1e-8;

/// Boundary components. On an interval `Left`/`Right` are the endpoints
/// `x = 0` / `x = L`; on a rectangle they are the edges `x = 0` / `x = Lx`,
/// and `Bottom`/`Top` are `y = 0` / `y = Ly`. Rectangle edges are
/// parametrized by the increasing free coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Bottom, Edge::Right, Edge::Top, Edge::Left];

    /// Axis along which the edge runs (rectangle only).
    fn free_axis(self) -> usize {
        match self {
            Edge::Bottom | Edge::Top => 0,
            Edge::Left | Edge::Right => 1,
        }
    }
}

/// User-facing description of one piece of a boundary region. `interval`
/// is a sub-interval along a rectangle edge; `None` selects the whole edge
/// (or the endpoint, on an interval).
#[derive(Clone, Debug, PartialEq)]
pub struct PieceSpec {
    pub edge: Edge,
    pub interval: Option<(f64, f64)>,
}

impl PieceSpec {
    pub fn whole(edge: Edge) -> Self {
        Self {
            edge,
            interval: None,
        }
    }

    pub fn along(edge: Edge, a: f64, b: f64) -> Self {
        Self {
            edge,
            interval: Some((a, b)),
        }
    }
}

/// A resolved piece: grid node indices `start..=end` along `edge`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundaryPiece {
    pub edge: Edge,
    pub start: usize,
    pub end: usize,
}

/// A subset `Gamma` of the boundary, discretized by composite trapezoid
/// quadrature on the boundary grid inherited from the domain grid.
///
/// Nodes are identified by their position in the boundary node loop
/// (counter-clockwise from the origin on a rectangle; `0` and `1` for the
/// endpoints of an interval, where the quadrature is the counting measure).
#[derive(Clone, Debug)]
pub struct BoundaryRegion {
    domain: DomainSpec,
    label: String,
    pieces: Vec<BoundaryPiece>,
    segments: BTreeSet<(Edge, usize)>,
    node_ids: Vec<usize>,
    weights: Vec<f64>,
}

impl PartialEq for BoundaryRegion {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.segments == other.segments
    }
}

fn boundary_node_count(domain: &DomainSpec) -> usize {
    match domain.kind() {
        DomainKind::Interval => 2,
        DomainKind::Rectangle => 4 * (domain.grid_resolution() - 1),
    }
}

/// Global id of the node with grid index `k` along `edge`.
fn node_id(domain: &DomainSpec, edge: Edge, k: usize) -> usize {
    match domain.kind() {
        DomainKind::Interval => match edge {
            Edge::Right => 1,
            _ => 0,
        },
        DomainKind::Rectangle => {
            let m = domain.grid_resolution() - 1;
            match edge {
                Edge::Bottom => k,
                Edge::Right => m + k,
                Edge::Top => 2 * m + (m - k),
                Edge::Left => (3 * m + (m - k)) % (4 * m),
            }
        }
    }
}

/// Position of a boundary node as fractions of the domain lengths.
fn node_ratio(domain: &DomainSpec, id: usize) -> [f64; 2] {
    match domain.kind() {
        DomainKind::Interval => [id as f64, 0.0],
        DomainKind::Rectangle => {
            let m = domain.grid_resolution() - 1;
            let mf = m as f64;
            let (i, j) = match id / m {
                0 => (id, 0),
                1 => (m, id - m),
                2 => (m - (id - 2 * m), m),
                _ => (0, m - (id - 3 * m)),
            };
            [i as f64 / mf, j as f64 / mf]
        }
    }
}

impl BoundaryRegion {
    /// Resolves piece descriptions against the boundary grid. Rectangle piece
    /// endpoints must coincide with grid nodes; pieces may touch but not
    /// overlap.
    pub fn new(domain: &DomainSpec, specs: &[PieceSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidRegion("region has no pieces".into()));
        }
        let mut pieces = Vec::with_capacity(specs.len());
        let mut segments = BTreeSet::new();
        for (p, spec) in specs.iter().enumerate() {
            let piece = resolve_piece(domain, spec)
                .map_err(|msg| Error::InvalidRegion(format!("piece {p}: {msg}")))?;
            let segs: Vec<(Edge, usize)> = match domain.kind() {
                DomainKind::Interval => vec![(piece.edge, 0)],
                DomainKind::Rectangle => {
                    (piece.start..piece.end).map(|s| (piece.edge, s)).collect()
                }
            };
            for s in segs {
                if !segments.insert(s) {
                    return Err(Error::InvalidRegion(format!(
                        "piece {p} overlaps an earlier piece on {:?}",
                        piece.edge
                    )));
                }
            }
            pieces.push(piece);
        }
        Ok(Self::from_segments(domain.clone(), pieces, segments))
    }

    /// The whole boundary.
    pub fn full(domain: &DomainSpec) -> Self {
        let specs: Vec<PieceSpec> = match domain.kind() {
            DomainKind::Interval => {
                vec![PieceSpec::whole(Edge::Left), PieceSpec::whole(Edge::Right)]
            }
            DomainKind::Rectangle => Edge::ALL.iter().map(|&e| PieceSpec::whole(e)).collect(),
        };
        Self::new(domain, &specs)
            .expect("whole-boundary pieces are valid")
            .with_label("boundary")
    }

    fn from_segments(
        domain: DomainSpec,
        pieces: Vec<BoundaryPiece>,
        segments: BTreeSet<(Edge, usize)>,
    ) -> Self {
        let total = boundary_node_count(&domain);
        let mut weight = vec![0.0; total];
        let mut member = vec![false; total];
        for &(edge, s) in &segments {
            match domain.kind() {
                DomainKind::Interval => {
                    let id = node_id(&domain, edge, 0);
                    weight[id] += 1.0;
                    member[id] = true;
                }
                DomainKind::Rectangle => {
                    let h = domain.spacing(edge.free_axis());
                    for k in [s, s + 1] {
                        let id = node_id(&domain, edge, k);
                        weight[id] += 0.5 * h;
                        member[id] = true;
                    }
                }
            }
        }
        let node_ids: Vec<usize> = (0..total).filter(|&i| member[i]).collect();
        let weights = node_ids.iter().map(|&i| weight[i]).collect();
        Self {
            domain,
            label: String::new(),
            pieces,
            segments,
            node_ids,
            weights,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn pieces(&self) -> &[BoundaryPiece] {
        &self.pieces
    }

    /// Global boundary node ids of the quadrature nodes (ascending).
    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Physical coordinates of the quadrature nodes.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.node_ids
            .iter()
            .map(|&id| {
                let r = node_ratio(&self.domain, id);
                (0..self.domain.dim())
                    .map(|a| r[a] * self.domain.lengths()[a])
                    .collect()
            })
            .collect()
    }

    pub(crate) fn node_ratios(&self) -> Vec<[f64; 2]> {
        self.node_ids
            .iter()
            .map(|&id| node_ratio(&self.domain, id))
            .collect()
    }

    /// Length (rectangle) or number of endpoints (interval) of the region.
    pub fn measure(&self) -> f64 {
        match self.domain.kind() {
            DomainKind::Interval => self.segments.len() as f64,
            DomainKind::Rectangle => self
                .segments
                .iter()
                .map(|(e, _)| self.domain.spacing(e.free_axis()))
                .sum(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.segments.len()
            == match self.domain.kind() {
                DomainKind::Interval => 2,
                DomainKind::Rectangle => boundary_node_count(&self.domain),
            }
    }

    /// Exact inclusion of the underlying boundary sets.
    pub fn subset_of(&self, other: &BoundaryRegion) -> bool {
        self.domain == other.domain && self.segments.is_subset(&other.segments)
    }

    /// Physical distance from a point to the region.
    pub fn distance_to(&self, point: &[f64]) -> f64 {
        let l = self.domain.lengths();
        let mut best = f64::INFINITY;
        for piece in &self.pieces {
            let d = match self.domain.kind() {
                DomainKind::Interval => {
                    let x = if piece.edge == Edge::Right { l[0] } else { 0.0 };
                    (point[0] - x).abs()
                }
                DomainKind::Rectangle => {
                    let a = piece.edge.free_axis();
                    let h = self.domain.spacing(a);
                    let (lo, hi) = (piece.start as f64 * h, piece.end as f64 * h);
                    let fixed = match piece.edge {
                        Edge::Left | Edge::Bottom => 0.0,
                        Edge::Right => l[0],
                        Edge::Top => l[1],
                    };
                    let along = point[a].clamp(lo, hi) - point[a];
                    let across = point[1 - a] - fixed;
                    along.hypot(across)
                }
            };
            best = best.min(d);
        }
        best
    }

    /// Position of a global node id within this region's node list.
    pub(crate) fn local_index(&self, id: usize) -> Option<usize> {
        self.node_ids.binary_search(&id).ok()
    }
}

fn resolve_piece(
    domain: &DomainSpec,
    spec: &PieceSpec,
) -> std::result::Result<BoundaryPiece, String> {
    match domain.kind() {
        DomainKind::Interval => {
            if !matches!(spec.edge, Edge::Left | Edge::Right) {
                return Err(format!("{:?} is not an endpoint of an interval", spec.edge));
            }
            if spec.interval.is_some() {
                return Err("interval endpoints take no sub-interval".into());
            }
            Ok(BoundaryPiece {
                edge: spec.edge,
                start: 0,
                end: 0,
            })
        }
        DomainKind::Rectangle => {
            let axis = spec.edge.free_axis();
            let len = domain.lengths()[axis];
            let h = domain.spacing(axis);
            let m = domain.grid_resolution() - 1;
            let (a, b) = spec.interval.unwrap_or((0.0, len));
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(format!("interval [{a}, {b}] is empty or not finite"));
            }
            let slack = 1e-9 * h;
            if a < -slack || b > len + slack {
                return Err(format!(
                    "interval [{a}, {b}] exceeds edge {:?} of length {len}",
                    spec.edge
                ));
            }
            let snap = |x: f64| -> std::result::Result<usize, String> {
                let k = (x / h).round();
                if (x - k * h).abs() > slack {
                    Err(format!(
                        "endpoint {x} is not a boundary grid node (spacing {h})"
                    ))
                } else {
                    Ok((k as usize).min(m))
                }
            };
            Ok(BoundaryPiece {
                edge: spec.edge,
                start: snap(a)?,
                end: snap(b)?,
            })
        }
    }
}

/// Values at the quadrature nodes of a boundary region.
#[derive(Clone, Debug)]
pub struct BoundaryField {
    region: Arc<BoundaryRegion>,
    values: DVector<f64>,
}

impl BoundaryField {
    pub fn new(region: Arc<BoundaryRegion>, values: DVector<f64>) -> Result<Self> {
        if values.len() != region.len() {
            return Err(Error::DimensionMismatch {
                expected: region.len(),
                got: values.len(),
            });
        }
        Ok(Self { region, values })
    }

    pub fn region(&self) -> &Arc<BoundaryRegion> {
        &self.region
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    /// Quadrature inner product on the region.
    pub fn inner(&self, other: &BoundaryField) -> Result<f64> {
        if *self.region != *other.region {
            return Err(Error::NodeMismatch(
                "fields live on different regions".into(),
            ));
        }
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .zip(self.region.weights())
            .map(|((a, b), w)| w * a * b)
            .sum())
    }

    /// Quadrature (L2-proxy) norm on the region.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.region.weights())
            .map(|(a, w)| w * a * a)
            .sum::<f64>()
            .sqrt()
    }
}

/// Matrix of mode values at the region's quadrature nodes
/// (rows: nodes, columns: modes).
pub fn trace_matrix(basis: &SpectralBasis, region: &BoundaryRegion) -> DMatrix<f64> {
    let ratios = region.node_ratios();
    DMatrix::from_fn(ratios.len(), basis.len(), |i, k| {
        basis.eval_mode_ratio(k, ratios[i])
    })
}

fn check_domain(basis: &SpectralBasis, region: &BoundaryRegion) -> Result<()> {
    if basis.domain() != region.domain() {
        return Err(Error::NodeMismatch(
            "region and basis are defined on different domains".into(),
        ));
    }
    Ok(())
}

/// Trace of order zero: the state evaluated at every boundary node.
pub fn trace_to_boundary(state: &StateField) -> BoundaryField {
    let region = Arc::new(BoundaryRegion::full(state.basis().domain()));
    let values = trace_matrix(state.basis(), &region) * state.coefficients();
    BoundaryField { region, values }
}

/// Trace of the state restricted to a region (`chi_Gamma` after `gamma_0`).
pub fn trace_on(state: &StateField, region: &Arc<BoundaryRegion>) -> Result<BoundaryField> {
    check_domain(state.basis(), region)?;
    let values = trace_matrix(state.basis(), region) * state.coefficients();
    Ok(BoundaryField {
        region: region.clone(),
        values,
    })
}

/// Restriction of a boundary field to a sub-region: selects the values at
/// the region's nodes.
pub fn restrict_trace(
    field: &BoundaryField,
    region: &Arc<BoundaryRegion>,
) -> Result<BoundaryField> {
    if field.region.domain() != region.domain() {
        return Err(Error::NodeMismatch("regions on different domains".into()));
    }
    let values = region
        .node_ids()
        .iter()
        .map(|&id| {
            field
                .region
                .local_index(id)
                .map(|i| field.values[i])
                .ok_or_else(|| {
                    Error::NodeMismatch(format!(
                        "node {id} of the target region is not in the source field"
                    ))
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BoundaryField {
        region: region.clone(),
        values: DVector::from_vec(values),
    })
}

/// Adjoint of the restriction to `Gamma` under the quadrature inner
/// products: zero outside `Gamma`, weight ratio `w_Gamma / w_boundary` inside.
pub fn adjoint_restrict(field: &BoundaryField) -> BoundaryField {
    let full = Arc::new(BoundaryRegion::full(field.region.domain()));
    let mut values = DVector::zeros(full.len());
    for (i, &id) in field.region.node_ids().iter().enumerate() {
        let j = full
            .local_index(id)
            .expect("every region node is a boundary node");
        values[j] = field.region.weights()[i] / full.weights()[j] * field.values[i];
    }
    BoundaryField {
        region: full,
        values,
    }
}

/// Adjoint of the trace onto the field's region with respect to the
/// coefficient (L2(Omega)) inner product: `R^T W g`.
pub fn adjoint_trace(basis: &Arc<SpectralBasis>, field: &BoundaryField) -> Result<StateField> {
    check_domain(basis, &field.region)?;
    let weighted = DVector::from_iterator(
        field.values.len(),
        field
            .values
            .iter()
            .zip(field.region.weights())
            .map(|(v, w)| v * w),
    );
    let coeffs = trace_matrix(basis, &field.region).transpose() * weighted;
    StateField::new(basis.clone(), coeffs)
}

/// Linear extension of boundary data into the domain.
///
/// Returns the state of least Dirichlet energy `sum |lambda_k| a_k^2` among
/// the weighted least-squares fits of the data; constants therefore extend to
/// constants. Fails when the fit leaves a relative residual above
/// [`EXTENSION_TOLERANCE`].
pub fn extend_from_boundary(
    basis: &Arc<SpectralBasis>,
    field: &BoundaryField,
) -> Result<StateField> {
    check_domain(basis, &field.region)?;
    let n = basis.len();
    let data_norm = field.norm();
    if data_norm == 0.0 {
        return Ok(StateField::zeros(basis.clone()));
    }
    let sqrt_w: Vec<f64> = field.region.weights().iter().map(|w| w.sqrt()).collect();
    let mut r = trace_matrix(basis, &field.region);
    for (i, s) in sqrt_w.iter().enumerate() {
        r.row_mut(i).scale_mut(*s);
    }
    let h = DVector::from_iterator(
        field.values.len(),
        field.values.iter().zip(&sqrt_w).map(|(v, s)| v * s),
    );

    let svd = FullSvd::new(&r)?;
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let rank = svd.rank(tol);
    // minimum-Euclidean-norm least-squares solution
    let mut particular = DVector::zeros(n);
    for i in 0..rank {
        let coef = svd.u.column(i).dot(&h) / svd.singular_values[i];
        particular += coef * svd.v.column(i);
    }
    // move along the kernel of the trace to minimize the energy
    let kernel = svd.kernel(tol);
    let energy = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        basis.eigenvalues().iter().map(|l| l.abs()),
    ));
    let mut coeffs = particular.clone();
    if kernel.ncols() > 0 {
        let reduced = kernel.transpose() * &energy * &kernel;
        let rhs = -(kernel.transpose() * &energy * &particular);
        let step = FullSvd::new(&reduced)?;
        let cut = 1e-13 * step.singular_values.max().max(f64::MIN_POSITIVE);
        let mut c = DVector::zeros(kernel.ncols());
        for i in 0..step.rank(cut) {
            c += (step.u.column(i).dot(&rhs) / step.singular_values[i]) * step.v.column(i);
        }
        coeffs += &kernel * c;
    }

    let residual = (&r * &coeffs - &h).norm() / h.norm();
    if residual > EXTENSION_TOLERANCE {
        return Err(Error::ExtensionResidual {
            residual,
            tolerance: EXTENSION_TOLERANCE,
        });
    }
    StateField::new(basis.clone(), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::build_basis;

    fn square(res: usize) -> DomainSpec {
        DomainSpec::rectangle(1.0, 1.0, 1.0, res).unwrap()
    }

    #[test]
    fn full_rectangle_boundary_weights() {
        let d = DomainSpec::rectangle(2.0, 1.0, 1.0, 9).unwrap();
        let full = BoundaryRegion::full(&d);
        assert_eq!(full.len(), 32);
        let total: f64 = full.weights().iter().sum();
        assert!((total - 6.0).abs() < 1e-13);
        assert!((full.measure() - 6.0).abs() < 1e-13);
        assert!(full.is_full());
    }

    #[test]
    fn node_loop_is_consistent() {
        let d = square(5);
        let full = BoundaryRegion::full(&d);
        let nodes = full.nodes();
        assert_eq!(nodes[0], vec![0.0, 0.0]);
        assert_eq!(nodes[4], vec![1.0, 0.0]);
        assert_eq!(nodes[8], vec![1.0, 1.0]);
        assert_eq!(nodes[12], vec![0.0, 1.0]);
        assert_eq!(node_id(&d, Edge::Left, 0), 0);
        assert_eq!(node_id(&d, Edge::Left, 4), 12);
        assert!(nodes.iter().all(|p| d.on_boundary(p, 1e-12)));
    }

    #[test]
    fn region_validation() {
        let d = square(9);
        assert!(BoundaryRegion::new(&d, &[]).is_err());
        assert!(BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Bottom, 0.5, 1.5)]).is_err());
        assert!(BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Bottom, 0.1, 0.5)]).is_err());
        assert!(BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Bottom, 0.5, 0.5)]).is_err());
        let overlap = [
            PieceSpec::along(Edge::Bottom, 0.0, 0.5),
            PieceSpec::along(Edge::Bottom, 0.25, 0.75),
        ];
        assert!(BoundaryRegion::new(&d, &overlap).is_err());
        let touching = [
            PieceSpec::along(Edge::Bottom, 0.0, 0.5),
            PieceSpec::along(Edge::Bottom, 0.5, 0.75),
        ];
        let r = BoundaryRegion::new(&d, &touching).unwrap();
        assert!((r.measure() - 0.75).abs() < 1e-14);
        let i = DomainSpec::interval(1.0, 1.0, 8).unwrap();
        assert!(BoundaryRegion::new(&i, &[PieceSpec::whole(Edge::Top)]).is_err());
        assert!(BoundaryRegion::new(
            &i,
            &[PieceSpec::whole(Edge::Left), PieceSpec::whole(Edge::Left)]
        )
        .is_err());
    }

    #[test]
    fn nesting_is_exact_on_pieces() {
        let d = square(9);
        let small = BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Left, 0.25, 0.5)]).unwrap();
        let split = BoundaryRegion::new(
            &d,
            &[
                PieceSpec::along(Edge::Left, 0.0, 0.375),
                PieceSpec::along(Edge::Left, 0.375, 1.0),
            ],
        )
        .unwrap();
        let other = BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Right, 0.25, 0.5)]).unwrap();
        let full = BoundaryRegion::full(&d);
        assert!(small.subset_of(&split));
        assert!(split.subset_of(&full));
        assert!(!split.subset_of(&small));
        assert!(!small.subset_of(&other));
    }

    #[test]
    fn interval_trace_of_first_mode() {
        let d = DomainSpec::interval(1.0, 1.0, 16).unwrap();
        let b = Arc::new(build_basis(d, 4).unwrap());
        let t = trace_to_boundary(&StateField::mode(b, 1));
        let s2 = 2f64.sqrt();
        assert!((t.values()[0] - s2).abs() < 1e-15);
        assert!((t.values()[1] + s2).abs() < 1e-15);
    }

    #[test]
    fn rectangle_trace_on_left_edge() {
        let d = square(9);
        let b = Arc::new(build_basis(d.clone(), 3).unwrap());
        let k = b.find_mode(&[2, 1]).unwrap();
        let left = Arc::new(BoundaryRegion::new(&d, &[PieceSpec::whole(Edge::Left)]).unwrap());
        let f = trace_on(&StateField::mode(b.clone(), k), &left).unwrap();
        for (p, v) in left.nodes().iter().zip(f.values().iter()) {
            let expect = 2.0 * (std::f64::consts::PI * p[1]).cos();
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn restriction_rules() {
        let d = square(9);
        let b = Arc::new(build_basis(d.clone(), 3).unwrap());
        let z = StateField::constant(b, 1.5);
        let full_trace = trace_to_boundary(&z);
        let full = full_trace.region().clone();
        let same = restrict_trace(&full_trace, &full).unwrap();
        assert_eq!(same.values(), full_trace.values());

        let big = Arc::new(BoundaryRegion::new(&d, &[PieceSpec::whole(Edge::Left)]).unwrap());
        let small =
            Arc::new(BoundaryRegion::new(&d, &[PieceSpec::along(Edge::Left, 0.0, 0.5)]).unwrap());
        let on_big = restrict_trace(&full_trace, &big).unwrap();
        assert!(on_big.values().iter().all(|v| (v - 1.5).abs() < 1e-14));
        let a = restrict_trace(&on_big, &small).unwrap();
        let c = restrict_trace(&full_trace, &small).unwrap();
        assert_eq!(a.values(), c.values());
        // a field on the small region cannot be restricted to the larger one
        assert!(matches!(
            restrict_trace(&c, &big),
            Err(Error::NodeMismatch(_))
        ));
    }

    #[test]
    fn adjoint_restrict_full_is_identity() {
        let d = square(7);
        let full = Arc::new(BoundaryRegion::full(&d));
        let f = BoundaryField::new(full.clone(), DVector::from_fn(full.len(), |i, _| i as f64))
            .unwrap();
        assert_eq!(adjoint_restrict(&f).values(), f.values());
        let zero = BoundaryField::new(full.clone(), DVector::zeros(full.len())).unwrap();
        assert_eq!(adjoint_restrict(&zero).values().norm(), 0.0);
    }

    #[test]
    fn extension_of_constant_is_constant() {
        let d = square(9);
        let b = Arc::new(build_basis(d.clone(), 4).unwrap());
        let full = Arc::new(BoundaryRegion::full(&d));
        let h = BoundaryField::new(full.clone(), DVector::from_element(full.len(), 2.0)).unwrap();
        let z = extend_from_boundary(&b, &h).unwrap();
        let c = StateField::constant(b, 2.0);
        assert!((z.coefficients() - c.coefficients()).amax() < 1e-10);
    }

    #[test]
    fn unresolvable_boundary_data_is_reported() {
        let d = DomainSpec::rectangle(1.0, 1.0, 1.0, 17).unwrap();
        let b = Arc::new(build_basis(d.clone(), 2).unwrap());
        let full = Arc::new(BoundaryRegion::full(&d));
        let spiky = DVector::from_fn(full.len(), |i, _| if i == 3 { 1.0 } else { 0.0 });
        let h = BoundaryField::new(full, spiky).unwrap();
        assert!(matches!(
            extend_from_boundary(&b, &h),
            Err(Error::ExtensionResidual { .. })
        ));
    }
}
