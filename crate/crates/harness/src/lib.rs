//! Scenario configuration, file formats and experiment orchestration for the
//! `gossip-sim` command-line tool.

pub mod config;
pub mod error;
pub mod io;
pub mod output;
pub mod scenario;
pub mod verify;

pub use config::{Application, Mode, ScenarioConfig};
pub use error::{HarnessError, Result};
pub use output::{emit_plot_data, PlotKind, TrajectoryLog};
pub use scenario::{run_scenario, ScenarioOutput};
pub use verify::{verify_expectation_cmd, VerifyReport};
