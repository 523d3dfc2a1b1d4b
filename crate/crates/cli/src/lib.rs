//! Scenario runner: reads a JSON suite, runs the checks scenario by
//! scenario, and writes a CSV table plus one JSON report per scenario.

pub mod random;
pub mod run;
pub mod scenario;

pub use run::{run_scenario, run_suite, write_outputs, Metadata, Outcome, Row, RunOptions, Status};
pub use scenario::{Check, Scenario, Suite, SCHEMA_VERSION};
