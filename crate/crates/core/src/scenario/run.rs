use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{PhiSource, ScenarioConfig, SystemSpec};
use super::report::{
    ErgodicityRow, FilterEvent, MonteCarloReport, RunReport, ScenarioKind, StepRow, TargetSummary, TrialSummary,
};
use crate::controller::{ErgodicController, StepRecord};
use crate::dynamics::{
    make_pd_height_hold, ControlAffineSystem, ControlLaw, DoubleIntegrator, Quadrotor12, StateTrajectory,
};
use crate::error::{Error, Result};
use crate::fourier::{CoefficientVector, FourierBasis, SearchDomain};
use crate::information_density::{build_eid_grid, MeasurementModel};
use crate::multi_agent::Team;
use crate::target_estimation::{
    detect_and_measure, ekf_predict, ekf_update, BeliefRow, Sensing, TargetBelief, TargetTruth,
};

/// Builds the plant and its nominal control law.
pub fn build_system(spec: &SystemSpec) -> Result<(Arc<dyn ControlAffineSystem>, Arc<dyn ControlLaw>)> {
    Ok(match spec {
        SystemSpec::DoubleIntegrator { bound } => (
            Arc::new(DoubleIntegrator::with_bound(*bound)),
            Arc::new(|_t: f64, _x: &[f64], u: &mut [f64]| u.fill(0.0)),
        ),
        SystemSpec::Quadrotor {
            params,
            height,
            kp,
            kd,
            attitude_gains,
            drift_damping,
        } => {
            let sys = Quadrotor12::new(params.clone())?;
            let mut pd = make_pd_height_hold(&sys, *height, *kp, *kd)?;
            if let Some([a, b]) = attitude_gains {
                pd = pd.with_attitude_hold(*a, *b)?;
                if *drift_damping > 0.0 {
                    pd = pd.with_drift_damping(*drift_damping)?;
                }
            }
            (Arc::new(sys), Arc::new(pd))
        }
    })
}

fn build_agents(cfg: &ScenarioConfig, domain: &SearchDomain, phi: &CoefficientVector) -> Result<Vec<ErgodicController>> {
    let (sys, nominal) = build_system(&cfg.system)?;
    cfg.agents
        .initial_states
        .iter()
        .map(|x0| {
            ErgodicController::new(
                sys.clone(),
                nominal.clone(),
                cfg.controller.clone(),
                domain.clone(),
                phi.clone(),
                x0,
                cfg.run.t0,
            )
        })
        .collect()
}

fn step_count(cfg: &ScenarioConfig) -> usize {
    ((cfg.run.tf - cfg.run.t0) / cfg.controller.sample_time - 1e-9).ceil().max(0.0) as usize
}

fn checked(cfg: &ScenarioConfig) -> Result<SearchDomain> {
    cfg.validate()?;
    cfg.domain()
}

/// Static-density coverage: a single controller for one agent, otherwise a
/// hub-connected team.
pub fn run_coverage(cfg: &ScenarioConfig, base: Option<&Path>) -> Result<RunReport> {
    let domain = checked(cfg)?;
    let Some(grid) = cfg.phi.static_grid(&domain, base)? else {
        return Err(Error::Config("coverage needs a static phi source".into()));
    };
    let clock = Instant::now();
    let basis = FourierBasis::new(domain.clone(), cfg.controller.order);
    let phi = basis.distribution_coeffs(&grid)?;
    let mut agents = build_agents(cfg, &domain, &phi)?;
    let mut report = RunReport::new(ScenarioKind::Coverage, cfg, cfg.run.seed);
    let steps = step_count(cfg);
    if steps == 0 {
        report.wall_seconds = clock.elapsed().as_secs_f64();
        return Ok(report);
    }
    let trajectories = if agents.len() == 1 {
        // Same loop as `rhee_run`, sampling the ergodicity after each step.
        let ctrl = &mut agents[0];
        let mut traj = StateTrajectory::single(ctrl.time(), ctrl.state(), ctrl.system().input_dim());
        for _ in 0..steps {
            let out = ctrl.step()?;
            traj.append(&out.executed)?;
            report.steps.push(StepRow::new(0, &out.record));
            let c = ctrl.executed_coeffs().expect("time has elapsed");
            let e = basis.ergodic_metric(&c, &phi);
            report.ergodicity.push(ErgodicityRow {
                time: ctrl.time(),
                individual: vec![e],
                collective: e,
            });
        }
        vec![traj]
    } else {
        let mut team = Team::new(agents, cfg.agents.combine)?;
        let out = team.run(cfg.run.tf - cfg.run.t0)?;
        for (i, t) in out.times.iter().enumerate() {
            report.ergodicity.push(ErgodicityRow {
                time: *t,
                individual: out.individual.iter().map(|s| s[i]).collect(),
                collective: out.collective[i],
            });
            for (j, run) in out.runs.iter().enumerate() {
                report.steps.push(StepRow::new(j, &run.records[i]));
            }
        }
        report.stale_messages = out.stale.len();
        report.received_bytes = out.received_bytes.iter().flatten().sum();
        agents = team.into_agents();
        out.runs.into_iter().map(|r| r.trajectory).collect()
    };
    report.snapshot = snapshot(cfg, &basis, &agents)?;
    report.final_states = agents.iter().map(|a| a.state().to_vec()).collect();
    report.trajectories = trajectories;
    report.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(report)
}

/// Time-averaged statistics of all agents, resynthesized on a grid.
fn snapshot(
    cfg: &ScenarioConfig,
    basis: &FourierBasis,
    agents: &[ErgodicController],
) -> Result<Option<crate::fourier::SpatialGrid>> {
    if cfg.output.snapshot_cells.is_empty() {
        return Ok(None);
    }
    let mut avg = vec![0.0; basis.len()];
    for a in agents {
        let Some(c) = a.executed_coeffs() else {
            return Ok(None);
        };
        for (s, v) in avg.iter_mut().zip(c.iter()) {
            *s += v / agents.len() as f64;
        }
    }
    basis.reconstruct(&avg, &cfg.output.snapshot_cells).map(Some)
}

/// Bearing-only localization driven by the expected information density.
pub fn run_localization(cfg: &ScenarioConfig) -> Result<RunReport> {
    run_estimation(cfg, cfg.run.seed, ScenarioKind::Localization)
}

/// Localization while searching for targets that have not been detected
/// yet; the exploration floor drops to zero once the expected number of
/// targets has been detected.
pub fn run_search_and_localize(cfg: &ScenarioConfig) -> Result<RunReport> {
    run_estimation(cfg, cfg.run.seed, ScenarioKind::Search)
}

/// Runs `trials` localization trials with seeds `seed_base + k` in
/// parallel. Failed trials are recorded and the batch continues.
pub fn run_monte_carlo(cfg: &ScenarioConfig, trials: usize, seed_base: u64) -> Result<MonteCarloReport> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if !cfg.phi.is_eid() {
        return Err(Error::Config("Monte Carlo trials need phi.source = \"eid\"".into()));
    }
    let clock = Instant::now();
    let results: Vec<TrialSummary> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let seed = seed_base.wrapping_add(k as u64);
            match run_estimation(cfg, seed, ScenarioKind::Localization) {
                Ok(r) => TrialSummary::from_report(k, &r),
                Err(e) => {
                    log::warn!("trial {k} (seed {seed}) failed: {e}");
                    TrialSummary::failed(k, seed, e.to_string())
                }
            }
        })
        .collect();
    Ok(MonteCarloReport::new(cfg.clone(), seed_base, results, clock.elapsed().as_secs_f64()))
}

struct Estimation<'a> {
    cfg: &'a ScenarioConfig,
    domain: SearchDomain,
    model: MeasurementModel,
    sensing: Sensing,
    fixed: Vec<f64>,
    truths: Vec<TargetTruth>,
    beliefs: Vec<TargetBelief>,
    rngs: Vec<ChaCha8Rng>,
    summaries: Vec<TargetSummary>,
    /// Start of the current run of below-threshold errors, per target.
    streak: Vec<Option<f64>>,
    floor: f64,
}

impl Estimation<'_> {
    fn sensor_at(&self, traj: &StateTrajectory, projection: &[usize], t: f64) -> Vec<f64> {
        let j = traj.index_at(t + 1e-9);
        let mut s = vec![0.0; projection.len()];
        traj.project(j, projection, &mut s);
        s.extend_from_slice(&self.fixed);
        s
    }

    fn predict(&mut self, dt: f64) {
        let c = self.cfg.sensor.as_ref().expect("validated").process_cov(dt);
        if c.iter().all(|v| *v == 0.0) {
            return;
        }
        for b in self.beliefs.iter_mut().filter(|b| b.detected) {
            *b = ekf_predict(b, &c);
        }
    }

    fn sense(&mut self, sensor: &[f64], t: f64, events: &mut Vec<FilterEvent>) -> Result<()> {
        let meas = detect_and_measure(
            &self.truths,
            &mut self.beliefs,
            sensor,
            &self.model,
            &self.sensing,
            &mut self.rngs,
            t,
        )?;
        for m in meas {
            let i = self.truths.iter().position(|tr| tr.id == m.id).expect("measured target exists");
            let s = &mut self.summaries[i];
            s.measurements += 1;
            s.first_measurement_at.get_or_insert(t);
            if m.new_detection {
                s.detected_at = Some(t);
            }
            let out = ekf_update(&self.beliefs[i], &self.model, sensor, &m.z)?;
            if !out.applied {
                events.push(FilterEvent {
                    time: t,
                    id: m.id,
                    what: "update skipped: singular geometry".into(),
                });
            } else if !out.belief.is_spd() {
                events.push(FilterEvent {
                    time: t,
                    id: m.id,
                    what: "update rejected: covariance lost definiteness".into(),
                });
                continue;
            }
            self.beliefs[i] = out.belief;
        }
        Ok(())
    }

    fn track(&mut self, t: f64, rows: &mut Vec<BeliefRow>, errors: &mut Vec<(f64, u32, f64)>) {
        let (thr, hold) = (self.cfg.run.threshold, self.cfg.run.hold);
        for i in 0..self.truths.len() {
            let b = &self.beliefs[i];
            let truth = self.truths[i].position(t);
            let err = if b.detected { b.error_norm(&truth) } else { f64::NAN };
            let ok = b.detected && err < thr;
            let s = &mut self.summaries[i];
            if ok {
                let start = *self.streak[i].get_or_insert(t);
                if s.localized_at.is_none() && t - start >= hold - 1e-9 {
                    s.localized_at = Some(start);
                }
            } else {
                self.streak[i] = None;
            }
            s.final_error = err;
            rows.push(BeliefRow::new(t, b, ok));
            if b.detected {
                errors.push((t, b.id, err));
            }
        }
    }

    fn detected(&self) -> usize {
        self.beliefs.iter().filter(|b| b.detected).count()
    }

    fn eid_coeffs(&self, basis: &FourierBasis) -> Result<CoefficientVector> {
        let e = self.cfg.eid.as_ref().expect("validated");
        let sensor = self.cfg.sensor.as_ref().expect("validated");
        let grid = build_eid_grid(&self.model, &self.beliefs, &self.domain, &e.grid_config(sensor, self.floor))?;
        basis.distribution_coeffs(&grid)
    }
}

fn ratio(a: f64, b: f64) -> usize {
    (a / b).round().max(1.0) as usize
}

fn run_estimation(cfg: &ScenarioConfig, seed: u64, kind: ScenarioKind) -> Result<RunReport> {
    let domain = checked(cfg)?;
    if !matches!(cfg.phi, PhiSource::Eid) {
        return Err(Error::Config("localization needs phi.source = \"eid\"".into()));
    }
    let eid = cfg.eid.as_ref().expect("validated");
    let sensor = cfg.sensor.as_ref().expect("validated");
    if kind == ScenarioKind::Search && !(eid.exploration_floor > 0.0) {
        return Err(Error::Config("search needs a positive exploration floor".into()));
    }
    let clock = Instant::now();
    let (truths, priors): (Vec<_>, Vec<_>) = cfg.targets_with_priors(seed)?.into_iter().unzip();
    let m = sensor.target_dim();
    let max_targets = match kind {
        ScenarioKind::Search => Some(eid.max_targets.unwrap_or(truths.len())),
        _ => eid.max_targets,
    };
    let rngs = truths
        .iter()
        .map(|t| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(1000 + t.id as u64);
            r
        })
        .collect();
    let mut est = Estimation {
        cfg,
        domain: domain.clone(),
        model: sensor.measurement_model()?,
        sensing: Sensing {
            range: sensor.range,
            nu: domain.nu(),
            init_sigma: sensor.init_sigma,
        },
        fixed: sensor.fixed_coordinates(),
        beliefs: truths.iter().map(|t| TargetBelief::undetected(t.id, m)).collect(),
        summaries: truths.iter().map(TargetSummary::new).collect(),
        streak: vec![None; truths.len()],
        truths,
        rngs,
        floor: eid.exploration_floor,
    };
    for (b, p) in est.beliefs.iter_mut().zip(priors) {
        if let Some(p) = p {
            *b = p;
        }
    }
    let mut report = RunReport::new(kind, cfg, seed);
    // Drops the floor once the expected count is reached, stamped with the
    // time of the detection that completed it. Nothing to wait for when no
    // targets are expected.
    let check_floor = |est: &mut Estimation, t: f64, report: &mut RunReport| -> bool {
        match max_targets {
            Some(n) if n > 0 && est.floor > 0.0 && est.detected() >= n => {
                est.floor = 0.0;
                let last = est.summaries.iter().filter_map(|s| s.detected_at).fold(t, f64::max);
                report.floor_drop_at = Some(last);
                true
            }
            _ => false,
        }
    };
    check_floor(&mut est, cfg.run.t0, &mut report);

    let basis = FourierBasis::new(domain.clone(), cfg.controller.order);
    let phi = est.eid_coeffs(&basis)?;
    let agents = build_agents(cfg, &domain, &phi)?;
    let projection = agents[0].system().ergodic_projection().to_vec();
    let mut team = Team::new(agents, cfg.agents.combine)?;

    let t_s = cfg.controller.sample_time;
    let t_m = 1.0 / sensor.rate;
    let (meas_every, meas_per_step) = if t_m >= t_s { (ratio(t_m, t_s), 1) } else { (1, ratio(t_s, t_m)) };
    let phi_every = ratio(1.0 / eid.rate, t_s);
    let mut trajectories: Vec<StateTrajectory> = team
        .agents()
        .iter()
        .map(|a| StateTrajectory::single(a.time(), a.state(), a.system().input_dim()))
        .collect();
    let mut events = Vec::new();
    let mut next_progress = cfg.run.t0 + cfg.output.progress_every;
    est.track(cfg.run.t0, &mut report.beliefs, &mut report.errors);

    let mut rebuild = false;
    for j in 0..step_count(cfg) {
        if rebuild || (j > 0 && j % phi_every == 0) {
            rebuild = false;
            let phi = est.eid_coeffs(&basis)?;
            for a in team.agents_mut() {
                a.reinitialize(Some(phi.clone()))?;
            }
        }
        let t_i = team.agents()[0].time();
        let st = team.step()?;
        report.stale_messages += st.stale.len();
        report.received_bytes += st.received_bytes.iter().sum::<usize>();
        for (k, (o, traj)) in st.outcomes.iter().zip(&mut trajectories).enumerate() {
            traj.append(&o.executed)?;
            report.steps.push(StepRow::new(k, &o.record));
        }
        if j % meas_every == 0 {
            for q in 0..meas_per_step {
                let t = t_i + q as f64 * t_m.min(t_s);
                est.predict(t_m);
                for o in &st.outcomes {
                    let s = est.sensor_at(&o.executed, &projection, t);
                    est.sense(&s, t, &mut events)?;
                }
            }
            rebuild = check_floor(&mut est, t_i, &mut report);
        }
        let t_next = team.agents()[0].time();
        est.track(t_next, &mut report.beliefs, &mut report.errors);
        report.ergodicity.push(ErgodicityRow {
            time: t_next,
            individual: team.individual_ergodicity(),
            collective: team.collective_ergodicity(),
        });
        if cfg.output.progress_every > 0.0 && t_next >= next_progress - 1e-9 {
            next_progress += cfg.output.progress_every;
            log::info!(
                "t = {t_next:.1}: {}/{} detected, {} localized",
                est.detected(),
                est.truths.len(),
                est.summaries.iter().filter(|s| s.localized_at.is_some()).count()
            );
        }
    }
    for ev in &events {
        log::debug!("t = {:.2} target {}: {}", ev.time, ev.id, ev.what);
    }
    let agents = team.into_agents();
    report.final_states = agents.iter().map(|a| a.state().to_vec()).collect();
    report.filter_events = events;
    report.unreachable = est.floor == 0.0
        && est
            .summaries
            .iter()
            .zip(&est.truths)
            .any(|(s, t)| s.first_measurement_at.is_none() && t.present(cfg.run.tf));
    report.targets = est.summaries;
    report.trajectories = trajectories;
    report.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(report)
}

impl StepRow {
    fn new(agent: usize, rec: &StepRecord) -> Self {
        Self {
            agent,
            record: rec.clone(),
        }
    }
}
