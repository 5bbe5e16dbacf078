//! Experiment configuration, studies and the commands built on them.

pub mod commands;
pub mod config;
pub mod experiments;

pub use commands::{
    cmd_check, cmd_convergence, cmd_eqdist, cmd_maxprinciple, cmd_region, cmd_run, CheckReport, CommandOptions,
    ConvergenceSummary, MaxPrincipleSummary, RegionSummary, RunSummary,
};
pub use config::ExperimentConfig;
pub use experiments::{
    convergence_study, count_violations, eqdist_study, max_principle_scan, ConvergenceRow, ConvergenceTable, EqDistSummary, EqDistTrace,
    MaxPrincipleRow, Outcome, RelaxLine,
};
