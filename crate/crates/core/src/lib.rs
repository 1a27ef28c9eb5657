//! Discrete observability and controllability of the 1-D heat equation
//! `∂ₜy − ∂ₓₓy + V(x,t)y = 0` on an interval with Dirichlet conditions.
//!
//! Everything is generic over [`Real`]; the `*64` aliases below fix `f64`.

// `!(a > b)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod carleman;
pub mod control;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod mesh;
pub mod observability;
pub mod pde;
pub mod potential;
pub mod random;
pub mod scalar;
pub mod spectral;

pub use error::{HeatError, Result};
pub use scalar::Real;

pub type SpaceGrid64 = mesh::SpaceGrid<f64>;
pub type TimeGrid64 = mesh::TimeGrid<f64>;
pub type SpaceMask64 = mesh::SpaceMask<f64>;
pub type TimeSet64 = mesh::TimeSet<f64>;
pub type Potential64 = potential::Potential<f64>;
pub type Propagator64 = pde::Propagator<f64>;
pub type Field64 = pde::SpaceTimeField<f64>;
pub type Source64 = pde::HalfStepSource<f64>;
pub type Region64 = observability::ObservationRegion<f64>;
pub type HillBasis64 = spectral::HillBasis<f64>;
