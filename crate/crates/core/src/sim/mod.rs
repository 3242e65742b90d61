//! Deterministic closed-loop simulation of the NMPC against the vehicle model.
//!
//! A [`Scenario`] fixes the path, wind, events and every configuration block.
//! [`run`] integrates the plant with a fixed step and calls the controller at
//! its own period; [`report`] turns the resulting [`SimLog`] into CSV rows and
//! summary statistics.

mod file;
pub mod report;
mod run;
mod scenario;

pub use file::{
    load_scenario, parse_scenario, scenario_to_toml, InitialFile, LegFile, OcpFile, PathFile,
    ScenarioFile, SegmentFile, SwitchFile,
};
pub use report::{
    error_stats, settled_error_stats, timing_stats, write_csv, ErrorStats, SimReport, TimingStats,
};
pub use run::{run, AppliedEvent, LogRecord, SimLog, SolverRecord, Transition};
pub use scenario::{
    builtin_scenario, scenario_dubins_course, scenario_helix, scenario_helix_course, scenario_motor_failure,
    scenario_trim_line, Event, EventKind, MeasurementNoise, Scenario, WindStep, BUILTIN_SCENARIOS,
    REFERENCE_ENVELOPE,
};
