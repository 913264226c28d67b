//! Power-sum moment representations of permutation-invariant functions.
//!
//! A symmetric function of a variable-size multiset of points in `[0, ∞)^I`
//! can be written as a function of the pooled multisymmetric power sums
//! `Σ_k η(x_k)`, where `η` collects every monomial of total degree `1..=J`.
//! This crate makes that representation executable:
//!
//! * [`moment_core`] enumerates the monomial basis and pools point sets.
//! * [`reconstruct`] inverts pooled moments back to the sorted, zero-padded
//!   point matrix.
//! * [`extension`] extends a symmetric function to zero-padded inputs.
//! * [`represent`] composes the two into exact aggregators (plain,
//!   conditional on an own point, nested by firm) and decomposes symmetric
//!   games into aggregative form.
//! * [`approx`] fits moment-based policy functions across markets of
//!   different sizes and runs merger counterfactuals.
//! * [`games`] solves desk-scale dynamic oligopolies on full states and on
//!   moment states and compares the two.
//! * [`cli`] is the command-line front end.

pub mod approx;
pub mod cli;
pub mod error;
pub mod extension;
pub mod games;
pub mod moment_core;
pub mod par;
pub mod reconstruct;
pub mod represent;

pub use error::{Error, Result};
pub use moment_core::{
    eta, exponent_basis, kappa, nested_pool, pool, pool_excluding, project_power_sums,
    MomentBasis, MomentVector, MultiIndex, PointSet,
};
pub use par::Execution;
pub use reconstruct::{reconstruct, ReconstructConfig, ReconstructionReport, SortedPaddedMatrix};

/// Library version echoed in every CLI report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
