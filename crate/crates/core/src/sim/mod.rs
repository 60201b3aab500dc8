//! Deterministic app simulators, workload generation, an oracle agent and
//! the experiment runner.

pub mod app;
pub mod apps;
pub mod episode;
pub mod experiment;
pub mod oracle;
pub mod workload;

pub use app::{AppBuilder, Element, GtStep, Screen, SimApp, SimState, TaskTemplate};
pub use apps::builtin_apps;
pub use episode::SimEpisode;
pub use experiment::{
    estimated_speedup, run_experiment, EmbedderKind, DEFAULT_CAPACITY, ExperimentConfig, ExperimentReport, TaskOutcome,
};
pub use oracle::OracleAgent;
pub use workload::{gen_workload, Distribution, Workload, WorkloadTask};
