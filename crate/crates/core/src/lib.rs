//! Numerical laboratory for a direct-particle-interaction (DPI) potential.
//!
//! The crate evaluates the DPI potential built from a short-range and a
//! long-range Gaussian interaction, compares it with Bohm's quantum
//! potential and its heat-operator corrections, extracts the emergent
//! inverse-distance tail of a structured radial density, and integrates the
//! approximate relational dynamics that goes with it.
//!
//! Module map:
//!
//! * [`params`]: interaction constants and every derived constant.
//! * [`ensemble`]: particle configurations and density fields with exact derivatives.
//! * [`potentials`]: direct, integral, closed and series forms of the potential, the
//!   quantum potential, heat-kernel machinery and the many-kind generalisation.
//! * [`equivalence`]: sweeps quantifying how close the forms are.
//! * [`gravity`]: radial discretisation of the series and power-law tail fits.
//! * [`dynamics`]: kinetic terms, the effective integrator, cosmological scalings and
//!   invariance checks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod ensemble;
pub mod equivalence;
mod error;
pub mod gravity;
pub mod io;
pub mod params;
pub mod potentials;
pub mod quadrature;
mod sum;
pub mod taylor;

pub use error::{Error, Result};

pub use dynamics::{CosmologyState, EffectiveLagrangian, QpDensity, Trajectory, TransformSpec};
pub use ensemble::{DensityFloor, DensityModel, MultiKindConfiguration, ParticleConfiguration};
pub use equivalence::{SweepReport, SweepSpec};
pub use gravity::{RadialSeriesSpec, TailFitReport};
pub use params::{derive_params, DerivedParams, DpiParams, PhysicalConstants};
pub use potentials::{PotentialProbe, QuadratureSpec};

/// Version of this crate, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Three-component vector used for positions and velocities.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix used for rotations.
pub type Mat3 = nalgebra::Matrix3<f64>;
