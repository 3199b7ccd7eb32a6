//! Config-driven experiment runs: `suspend`, `sweep`, `verify`, `norms`, `demo`.

pub mod config;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use report::{Check, CheckStatus, EnvironmentStamp, VerificationReport};
pub use run::{
    run_demo, run_norms, run_suspension, run_sweep, run_verify, section_grid, sweep_csv,
    write_atomic, SuspensionOutcome, SweepRow,
};
