//! Regional boundary exponential observation for parabolic
//! distributed-parameter systems.
//!
//! The crate models the heat equation with homogeneous Neumann conditions on
//! an interval or a rectangle, measured by interior or boundary sensors, and
//! provides:
//!
//! - [`pde`]: the spectral basis of the Neumann Laplacian, the semigroup and
//!   mild solution, and the trace / restriction / extension operators between
//!   the domain and its boundary;
//! - [`sensing`]: pointwise and zone sensors and sampled output trajectories;
//! - [`observability`]: the observation operator, its adjoint, the
//!   Gramian and the regional (boundary) observability and detectability tests;
//! - [`observer`]: gain design, the identity observer, decay fitting;
//! - [`reconstruction`]: regularized initial-state reconstruction and the
//!   region-monotonicity experiments;
//! - [`cli`]: the configuration-driven experiment runner behind the `regobs`
//!   binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub(crate) mod csv;
mod error;
pub(crate) mod linalg;
pub mod observability;
pub mod observer;
pub mod pde;
pub mod reconstruction;
pub mod sensing;

pub use error::{Error, Result};
