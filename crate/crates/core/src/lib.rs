//! Nonlocal phase-coexistence energies, fractional perimeters and
//! numerical Γ-limit experiments on uniform grids.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bessel;
pub mod cli;
pub mod domain;
pub mod energies;
pub mod error;
pub mod field;
pub mod kernels;
pub mod lab;
pub mod local_geometry;
pub mod minimize;
pub mod quadrature;
pub mod set;
pub mod waterwave;
pub mod well;

pub use domain::{Domain, Grid, Point, Shape};
pub use error::{Error, Result};
pub use field::{voxelize, ExteriorDatum, ScalarField, ValueRange};
pub use set::GeometricSet;
pub use well::{optimal_profile, DoubleWell, PotentialKind, Profile};
pub use lab::{Experiment, ExperimentName, SweepReport, Verdict};
pub use minimize::{minimize, MinimizeConfig, Minimized, Objective};
