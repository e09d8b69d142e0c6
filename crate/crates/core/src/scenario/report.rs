use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::controller::{StepRecord, StepStatus};
use crate::dynamics::StateTrajectory;
use crate::error::Result;
use crate::fourier::SpatialGrid;
use crate::target_estimation::{belief_csv, BeliefRow, TargetTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Coverage,
    Localization,
    Search,
}

/// One controller step of one agent.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub agent: usize,
    pub record: StepRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicityRow {
    pub time: f64,
    pub individual: Vec<f64>,
    pub collective: f64,
}

/// A measurement update that was skipped or rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterEvent {
    pub time: f64,
    pub id: u32,
    pub what: String,
}

/// Detection and localization milestones of one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub id: u32,
    pub appear_at: Option<f64>,
    pub first_measurement_at: Option<f64>,
    /// First detection by measurement; `None` for targets seeded with a
    /// prior belief.
    pub detected_at: Option<f64>,
    /// Start of the first interval of the required length during which the
    /// belief error stayed below the threshold.
    pub localized_at: Option<f64>,
    pub measurements: usize,
    /// Belief error at the end of the run; NaN if never detected.
    pub final_error: f64,
}

impl TargetSummary {
    pub(crate) fn new(t: &TargetTruth) -> Self {
        Self {
            id: t.id,
            appear_at: t.appear_at.is_finite().then_some(t.appear_at),
            first_measurement_at: None,
            detected_at: None,
            localized_at: None,
            measurements: 0,
            final_error: f64::NAN,
        }
    }
}

/// Everything produced by one scenario run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub kind: ScenarioKind,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub steps: Vec<StepRow>,
    pub ergodicity: Vec<ErgodicityRow>,
    pub beliefs: Vec<BeliefRow>,
    /// `(time, target id, belief error)` for detected targets.
    pub errors: Vec<(f64, u32, f64)>,
    pub targets: Vec<TargetSummary>,
    pub floor_drop_at: Option<f64>,
    pub filter_events: Vec<FilterEvent>,
    /// Some target was never measured and the density had no exploration
    /// floor left to reach it.
    pub unreachable: bool,
    /// Reconstructed time-averaged statistics at the end of a coverage run.
    pub snapshot: Option<SpatialGrid>,
    pub final_states: Vec<Vec<f64>>,
    pub trajectories: Vec<StateTrajectory>,
    pub stale_messages: usize,
    pub received_bytes: usize,
    pub wall_seconds: f64,
}

/// Machine-readable run summary, written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub agents: usize,
    pub steps: usize,
    pub simulated_seconds: f64,
    pub wall_seconds: f64,
    pub real_time_factor: f64,
    pub mean_step_wall_us: f64,
    pub final_individual_ergodicity: Vec<f64>,
    pub final_collective_ergodicity: Option<f64>,
    pub accepted_steps: usize,
    pub contraction_violations: usize,
    pub targets: Vec<TargetSummary>,
    pub floor_drop_at: Option<f64>,
    pub filter_events: usize,
    pub unreachable_targets: bool,
    pub stale_messages: usize,
    pub received_bytes: usize,
}

impl RunReport {
    pub(crate) fn new(kind: ScenarioKind, cfg: &ScenarioConfig, seed: u64) -> Self {
        let mut config = cfg.clone();
        config.run.seed = seed;
        Self {
            kind,
            config,
            seed,
            steps: Vec::new(),
            ergodicity: Vec::new(),
            beliefs: Vec::new(),
            errors: Vec::new(),
            targets: Vec::new(),
            floor_drop_at: None,
            filter_events: Vec::new(),
            unreachable: false,
            snapshot: None,
            final_states: Vec::new(),
            trajectories: Vec::new(),
            stale_messages: 0,
            received_bytes: 0,
            wall_seconds: 0.0,
        }
    }

    pub fn simulated_seconds(&self) -> f64 {
        self.ergodicity.last().map_or(0.0, |r| r.time - self.config.run.t0)
    }

    /// Simulated seconds per wall-clock second of controller work, summed
    /// over agents.
    pub fn real_time_factor(&self) -> f64 {
        let agents = self.config.agents.count() as f64;
        let wall: f64 = self.steps.iter().map(|s| s.record.wall_us as f64).sum::<f64>() * 1e-6 / agents;
        if wall > 0.0 {
            self.simulated_seconds() / wall
        } else {
            f64::INFINITY
        }
    }

    pub fn mean_step_wall_us(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.record.wall_us as f64).sum::<f64>() / self.steps.len() as f64
    }

    /// First ergodicity sample at or after `t`.
    pub fn ergodicity_at(&self, t: f64) -> Option<&ErgodicityRow> {
        self.ergodicity.iter().find(|r| r.time >= t - 1e-9)
    }

    /// Steps that took an action but broke the sequential contraction test.
    /// Accepted actions whose plan cost rose by more than the executed
    /// running cost fell, beyond the configured slack.
    pub fn contraction_violations(&self) -> usize {
        let slack = self.config.controller.contraction_slack;
        let mut last: std::collections::HashMap<usize, f64> = Default::default();
        let mut count = 0;
        for s in &self.steps {
            let r = &s.record;
            if let (Some(prev), Some(rhs)) = (last.get(&s.agent), r.contraction_rhs) {
                let tol = slack * r.cost_after.abs().max(prev.abs());
                if r.lambda > 0.0 && r.cost_after - prev > rhs + tol {
                    count += 1;
                }
            }
            last.insert(s.agent, r.cost_after);
        }
        count
    }

    pub fn summary(&self) -> RunSummary {
        let last = self.ergodicity.last();
        RunSummary {
            kind: self.kind,
            seed: self.seed,
            agents: self.config.agents.count(),
            steps: self.steps.len(),
            simulated_seconds: self.simulated_seconds(),
            wall_seconds: self.wall_seconds,
            real_time_factor: self.real_time_factor(),
            mean_step_wall_us: self.mean_step_wall_us(),
            final_individual_ergodicity: last.map_or_else(Vec::new, |r| r.individual.clone()),
            final_collective_ergodicity: last.map(|r| r.collective),
            accepted_steps: self.steps.iter().filter(|s| s.record.status == StepStatus::Accepted).count(),
            contraction_violations: self.contraction_violations(),
            targets: self.targets.clone(),
            floor_drop_at: self.floor_drop_at,
            filter_events: self.filter_events.len(),
            unreachable_targets: self.unreachable,
            stale_messages: self.stale_messages,
            received_bytes: self.received_bytes,
        }
    }

    /// Per-step controller log. Wall-clock times live in [`Self::timing_csv`]
    /// so that this file is reproducible bit for bit.
    pub fn steps_csv(&self) -> String {
        let Some(first) = self.steps.first() else {
            return "agent,step,time,tau,lambda,cost_before,cost_after,contraction_rhs,contraction_bound,status\n"
                .into();
        };
        let (n, m) = (first.record.state.len(), first.record.control.len());
        let mut s = String::from("agent,step,time");
        for i in 0..n {
            write!(s, ",x_{i}").unwrap();
        }
        for i in 0..m {
            write!(s, ",u_{i}").unwrap();
        }
        s.push_str(",tau,lambda");
        for i in 0..m {
            write!(s, ",action_{i}").unwrap();
        }
        s.push_str(",cost_before,cost_after,contraction_rhs,contraction_bound,status\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for row in &self.steps {
            let r = &row.record;
            write!(s, "{},{},{}", row.agent, r.step, r.time).unwrap();
            for v in r.state.iter().chain(&r.control) {
                write!(s, ",{v}").unwrap();
            }
            write!(s, ",{},{}", r.tau, r.lambda).unwrap();
            for v in &r.action_value {
                write!(s, ",{v}").unwrap();
            }
            writeln!(
                s,
                ",{},{},{},{},{:?}",
                r.cost_before,
                r.cost_after,
                opt(r.contraction_rhs),
                opt(r.contraction_bound),
                r.status
            )
            .unwrap();
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("agent,step,wall_us\n");
        for row in &self.steps {
            writeln!(s, "{},{},{}", row.agent, row.record.step, row.record.wall_us).unwrap();
        }
        s
    }

    pub fn ergodicity_csv(&self) -> String {
        let n = self.config.agents.count();
        let mut s = String::from("time");
        for j in 0..n {
            write!(s, ",agent_{j}").unwrap();
        }
        s.push_str(",collective\n");
        for r in &self.ergodicity {
            write!(s, "{}", r.time).unwrap();
            for v in &r.individual {
                write!(s, ",{v}").unwrap();
            }
            writeln!(s, ",{}", r.collective).unwrap();
        }
        s
    }

    pub fn errors_csv(&self) -> String {
        let mut s = String::from("time,id,error\n");
        for (t, id, e) in &self.errors {
            writeln!(s, "{t},{id},{e}").unwrap();
        }
        s
    }

    /// Writes the run directory: `config.toml`, `steps.csv`, `timing.csv`,
    /// `ergodicity.csv`, `summary.json`, plus `beliefs.csv` and
    /// `estimate_error.csv` for estimation runs and `statistics.grid` when a
    /// snapshot was taken.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), self.config.to_toml())?;
        fs::write(dir.join("steps.csv"), self.steps_csv())?;
        fs::write(dir.join("timing.csv"), self.timing_csv())?;
        fs::write(dir.join("ergodicity.csv"), self.ergodicity_csv())?;
        if self.kind != ScenarioKind::Coverage {
            fs::write(dir.join("beliefs.csv"), belief_csv(&self.beliefs))?;
            fs::write(dir.join("estimate_error.csv"), self.errors_csv())?;
        }
        if let Some(g) = &self.snapshot {
            g.write_file(dir.join("statistics.grid"))?;
        }
        let json = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }
}

/// Localization outcome of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub targets: Vec<TargetSummary>,
    pub error: Option<String>,
}

impl TrialSummary {
    pub fn from_report(trial: usize, r: &RunReport) -> Self {
        Self {
            trial,
            seed: r.seed,
            targets: r.targets.clone(),
            error: None,
        }
    }

    pub(crate) fn failed(trial: usize, seed: u64, error: String) -> Self {
        Self {
            trial,
            seed,
            targets: Vec::new(),
            error: Some(error),
        }
    }

    /// Time the first target was localized.
    pub fn first_localized(&self) -> Option<f64> {
        self.targets.iter().filter_map(|t| t.localized_at).min_by(f64::total_cmp)
    }

    /// Time the last target was localized, if all were.
    pub fn all_localized(&self) -> Option<f64> {
        if self.targets.is_empty() || self.error.is_some() {
            return None;
        }
        self.targets
            .iter()
            .map(|t| t.localized_at)
            .collect::<Option<Vec<_>>>()
            .and_then(|v| v.into_iter().max_by(f64::total_cmp))
    }
}

/// Aggregate over seeded trials.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub config: ScenarioConfig,
    pub seed_base: u64,
    pub trials: Vec<TrialSummary>,
    pub wall_seconds: f64,
}

/// Histogram bin of localization times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub first: usize,
    pub all: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub seed_base: u64,
    pub failed_trials: usize,
    pub wall_seconds: f64,
    pub first_localized: Vec<Option<f64>>,
    pub all_localized: Vec<Option<f64>>,
    /// `(t, fraction with a target localized by t, fraction with all)`.
    pub success_by_time: Vec<(f64, f64, f64)>,
    pub histogram: Vec<HistogramBin>,
}

impl MonteCarloReport {
    pub(crate) fn new(config: ScenarioConfig, seed_base: u64, trials: Vec<TrialSummary>, wall_seconds: f64) -> Self {
        Self {
            config,
            seed_base,
            trials,
            wall_seconds,
        }
    }

    fn fraction(&self, f: impl Fn(&TrialSummary) -> bool) -> f64 {
        self.trials.iter().filter(|t| f(t)).count() as f64 / self.trials.len() as f64
    }

    /// Fraction of trials that localized at least one target by `t`.
    pub fn first_within(&self, t: f64) -> f64 {
        self.fraction(|s| s.first_localized().is_some_and(|v| v <= t))
    }

    /// Fraction of trials that localized every target by `t`.
    pub fn all_within(&self, t: f64) -> f64 {
        self.fraction(|s| s.all_localized().is_some_and(|v| v <= t))
    }

    /// Counts of first and last localization times in bins of `width`
    /// seconds from the run start.
    pub fn histogram(&self, width: f64) -> Vec<HistogramBin> {
        let (t0, tf) = (self.config.run.t0, self.config.run.tf);
        let bins = ((tf - t0) / width).ceil().max(1.0) as usize;
        let mut out: Vec<HistogramBin> = (0..bins)
            .map(|b| HistogramBin {
                start: t0 + b as f64 * width,
                end: t0 + (b + 1) as f64 * width,
                first: 0,
                all: 0,
            })
            .collect();
        let bin = |t: f64| (((t - t0) / width) as usize).min(bins - 1);
        for s in &self.trials {
            if let Some(t) = s.first_localized() {
                out[bin(t)].first += 1;
            }
            if let Some(t) = s.all_localized() {
                out[bin(t)].all += 1;
            }
        }
        out
    }

    pub fn summary(&self) -> MonteCarloSummary {
        let (t0, tf) = (self.config.run.t0, self.config.run.tf);
        let width = 10.0;
        let marks = ((tf - t0) / width).ceil() as usize;
        MonteCarloSummary {
            trials: self.trials.len(),
            seed_base: self.seed_base,
            failed_trials: self.trials.iter().filter(|t| t.error.is_some()).count(),
            wall_seconds: self.wall_seconds,
            first_localized: self.trials.iter().map(TrialSummary::first_localized).collect(),
            all_localized: self.trials.iter().map(TrialSummary::all_localized).collect(),
            success_by_time: (1..=marks)
                .map(|k| {
                    let t = (t0 + k as f64 * width).min(tf);
                    (t, self.first_within(t), self.all_within(t))
                })
                .collect(),
            histogram: self.histogram(width),
        }
    }

    pub fn trials_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        let mut s = String::from("trial,seed,target,first_measurement_at,detected_at,localized_at,final_error,error\n");
        for t in &self.trials {
            if let Some(e) = &t.error {
                writeln!(s, "{},{},,,,,,\"{}\"", t.trial, t.seed, e.replace('"', "'")).unwrap();
            }
            for g in &t.targets {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},",
                    t.trial,
                    t.seed,
                    g.id,
                    opt(g.first_measurement_at),
                    opt(g.detected_at),
                    opt(g.localized_at),
                    g.final_error
                )
                .unwrap();
            }
        }
        s
    }

    /// Writes `config.toml`, `trials.csv` and `summary.json`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut config = self.config.clone();
        config.run.seed = self.seed_base;
        config.run.trials = self.trials.len();
        fs::write(dir.join("config.toml"), config.to_toml())?;
        fs::write(dir.join("trials.csv"), self.trials_csv())?;
        let json = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }
}
