//! Configuration files, the run driver, sweeps and the CSV verifier.

mod config;
mod run;
mod sweep;
mod verify;

pub use config::{
    config_to_string, parse_config, parse_config_str, write_config, CgnSetting, DiagnosticsSection,
    ExperimentConfig, GridSection, InitialSection, ModelSection, Preset, RunSection, SignalPreset,
    SweepSection,
};
pub use run::{
    read_summary, resolve_cgn, run_scenario, threshold_file, CgnInfo, InvariantFlags,
    MonotoneSummary, RunOptions, RunStatus, Summary, ThresholdFile, MASS_DRIFT_TOL, TAU,
};
pub use sweep::{cell_dir_name, run_sweep, sweep_cells, SweepIndexRow};
pub use verify::{verify_run, VerifyReport};
