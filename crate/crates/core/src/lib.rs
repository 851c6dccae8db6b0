//! Simple exclusion process on segments of the integers in an i.i.d. random
//! environment.
//!
//! The crate has two halves that check each other:
//!
//! * a seeded graphical construction ([`graphical`]) that realizes the
//!   canonical monotone coupling, censored dynamics and second class
//!   particles, together with Monte Carlo estimators ([`estimate`]) and the
//!   boundary-driven comparison chains ([`boundary`]);
//! * a dense/sparse linear-algebra engine ([`exact`]) over the enumerated
//!   state space that produces stationary laws, transient laws, total
//!   variation mixing times and stochastic-dominance certificates.
//!
//! The exact engine is generic over the scalar type through [`Scalar`];
//! the aliases below fix it to `f64`, which is what the simulator and the
//! command line tool use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod env;
pub mod error;
pub mod estimate;
pub mod exact;
pub mod graphical;
pub mod scalar;
pub mod seed;
pub mod statespace;

pub use env::{Environment, EnvironmentLaw, Regime, RegimeClass};
pub use error::{Result, SepError};
pub use graphical::{CensoringScheme, Coin, Event, EventStream, ThreeSpeciesConfiguration};
pub use scalar::Scalar;
pub use statespace::{Configuration, HeightProfile, StateSpace};

/// Generator over `f64`.
pub type GeneratorMatrix = exact::GeneratorMatrix<f64>;
/// Probability vector over `f64`.
pub type Distribution = exact::Distribution<f64>;
/// Generator over `f32`, for quick low-precision sweeps.
pub type GeneratorMatrixF32 = exact::GeneratorMatrix<f32>;
/// Probability vector over `f32`.
pub type DistributionF32 = exact::Distribution<f32>;
/// Boundary-chain density profile over `f64`.
pub type BoundaryProfile = boundary::BoundaryProfile<f64>;
