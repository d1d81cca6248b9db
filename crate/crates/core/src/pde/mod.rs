//! The spatial domain, the Neumann Laplacian in its eigenbasis, the
//! semigroup and mild solution, and the operators that move data between the
//! domain and its boundary (trace, restriction, their adjoints, extension).

mod basis;
mod boundary;
mod domain;
mod inflate;

pub(crate) use basis::same_basis;
pub use basis::{
    build_basis, mild_solution, semigroup_apply, ControlSignal, SpectralBasis, StateField,
};
pub use boundary::{
    adjoint_restrict, adjoint_trace, extend_from_boundary, restrict_trace, trace_matrix, trace_on,
    trace_to_boundary, BoundaryField, BoundaryPiece, BoundaryRegion, Edge, PieceSpec,
    EXTENSION_TOLERANCE,
};
pub use domain::{DomainKind, DomainSpec};
pub use inflate::{inflate_region, InflatedRegion};
