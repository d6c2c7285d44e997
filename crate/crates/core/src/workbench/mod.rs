//! Command-line orchestration: run configuration, the `ramsey` and `qpt`
//! pipelines, the self-test suite and plot output.

mod commands;
mod config;
pub mod selftest;
pub mod svg;

pub use commands::{
    cmd_qpt, cmd_ramsey, QptOutputs, RamseyOutputs, RamseyRunReport, CURVE_CSV, CURVE_JSON, FIDELITY_SVG, FIT_JSON,
    FRINGE_CSV, OVERLAY_CSV, PHASE_SVG, RAMSEY_SVG,
};
pub use config::{dt_from_env, Grid, RunConfig, DT_ENV};
pub use selftest::{run_selected, run_selftest, CheckResult, SelftestOptions, SelftestReport, CHECKS};
