//! Manufactured solutions, convergence studies and an explicit reference
//! integrator.

pub mod convergence;
pub mod mms;
pub mod oracle;

pub use convergence::{
    convergence_study, run_case, ConvergenceReport, LevelError, Refinement, StudySetup,
};
pub use mms::{mms_forcing, Amplitude, MmsCase};
pub use oracle::{oracle_dt_limit, oracle_integrate, oracle_step};
