//! Lagrangian finite-difference solver for a spherically symmetric viscous,
//! heat-conducting, radiating and reacting gas outside the unit ball, with
//! run-time monitors for the energy and entropy identities the system
//! satisfies.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod solver;
pub mod tridiag;
pub mod verification;

pub use constitutive::{PhysParams, ThermoPoint};
pub use error::{Error, Result};
pub use geometry::RadiusField;
pub use grid::{BoundaryConditions, Grid, IcFamily, OuterBoundary, State};
pub use solver::{Splitting, StepInfo, Stepper, StepperConfig};
