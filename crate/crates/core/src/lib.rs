//! Quasi-classical limit of particle-field Hamiltonians.
//!
//! A finite set of bosonic field modes with ε-scaled commutation relations is
//! coupled linearly to N non-relativistic particles on a spatial grid. The crate
//! assembles the full operator on the truncated tensor space, reduces field
//! states to effective Schrödinger operators and compares both against the
//! classical-field limit.
//!
//! [`fock`] holds the field side, [`model`] the particle grid and the full
//! Hamiltonian, [`effective`] the partial traces and classical potentials and
//! [`spectral`] the Lanczos, resolvent and ground-state solvers.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix `f64`, which is what the experiment harness uses.

pub mod effective;
pub mod error;
pub mod fock;
pub mod model;
pub mod operator;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use num_complex::Complex;

/// Double-precision complex amplitude.
pub type C64 = Complex<f64>;
/// Sparse Hermitian operator over `f64`.
pub type Operator = operator::SparseOperator<f64>;
/// Mode set over `f64`.
pub type Modes = fock::ModeSet<f64>;
/// Truncated Fock space over `f64`.
pub type Fock = fock::FockSpace<f64>;
/// Field state over `f64`.
pub type State = fock::FockState<f64>;
/// Spatial grid over `f64`.
pub type Grid = model::SpatialGrid<f64>;
/// Particle model over `f64`.
pub type Particles = model::ParticleModel<f64>;
/// Full Hamiltonian specification over `f64`.
pub type Hamiltonian = model::HamiltonianSpec<f64>;
/// Classical measure over `f64`.
pub type Measure = effective::ClassicalMeasure<f64>;
/// Effective potential over `f64`.
pub type Potential = effective::EffectivePotential<f64>;
