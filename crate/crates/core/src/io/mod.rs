//! Run configuration, the solver driver and output files.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, GridSpec, IcSpec, OutputSpec, RunConfig};
pub use output::{config_hash, load_state, read_timeseries, TimeseriesWriter};
pub use run::{resolve_out_dir, run, sweep, InvariantCheck, RunOutcome, RunReport};
