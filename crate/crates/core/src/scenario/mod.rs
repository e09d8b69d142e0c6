//! Scenario configuration, orchestration and run reports.

mod config;
mod report;
mod run;

pub use config::{
    AgentSpec, Ball, BoxRegion, DomainSpec, EidSpec, OutputSpec, PhiSource, PriorBelief, RandomPrior, RunSpec, ScenarioConfig,
    SensorModel, SensorSpec, SystemSpec, TargetScript, TargetSpec, Waypoints, Diffusion,
};
pub use report::{
    ErgodicityRow, FilterEvent, HistogramBin, MonteCarloReport, MonteCarloSummary, RunReport, RunSummary,
    ScenarioKind, StepRow, TargetSummary, TrialSummary,
};
pub use run::{build_system, run_coverage, run_localization, run_monte_carlo, run_search_and_localize};

#[cfg(test)]
mod tests;
