//! Scenario files, the shipped gallery and the task runner.

pub mod builtin;
pub mod report;
pub mod runner;
pub mod scenario;

pub use builtin::{builtin, builtin_scenarios, extra_scenarios, mutations};
pub use runner::{run, Command, Outcome, RunFlags, RunReport};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioFile};
