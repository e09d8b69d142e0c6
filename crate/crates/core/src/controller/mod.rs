//! Receding-horizon ergodic exploration: one control action per step,
//! synthesized from the costate of the ergodic cost.

mod action;
mod contraction;
mod costate;
mod objective;

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use action::{
    action_schedule, application_time, duration_line_search, rollout_with_action,
    schedule_integrand, ActionCandidate, ActionSchedule, ContractionTest, LineSearch,
    LineSearchOutcome,
};
pub use contraction::{contraction_bound, ergodic_lagrangian};
pub use costate::{
    integrate_costate, integrate_costate_with, mode_insertion_gradient, running_grad,
    CostateTrajectory,
};
pub use objective::{Barrier, ErgodicObjective, StateLimit};

use crate::dynamics::{
    integrate_with_breaks, Action, ControlAffineSystem, ControlLaw, ControlSignal, Spliced,
    StateTrajectory,
};
use crate::error::{check_dim, usage, Error, Result};
use crate::fourier::{CoefficientVector, FourierBasis, SearchDomain};

/// Desired rate of change of the cost used by the action schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AlphaD {
    /// Fixed negative value.
    Constant(f64),
    /// `-gain * J_def / T`, recomputed every step.
    CostScaled(f64),
}

/// Control weight `R`: a scalar times identity, a diagonal, or a full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlWeight {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl ControlWeight {
    pub fn matrix(&self, m: usize) -> Result<DMatrix<f64>> {
        let r = match self {
            Self::Scalar(v) => DMatrix::from_diagonal_element(m, m, *v),
            Self::Diagonal(d) => {
                check_dim("control weight diagonal", m, d.len())?;
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d))
            }
            Self::Full(rows) => {
                check_dim("control weight rows", m, rows.len())?;
                for row in rows {
                    check_dim("control weight columns", m, row.len())?;
                }
                DMatrix::from_fn(m, m, |i, j| rows[i][j])
            }
        };
        let sym = (&r + r.transpose()) * 0.5;
        if sym.cholesky().is_none() || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("control weight R must be positive definite".into()));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Ergodic cost weight.
    pub q: f64,
    pub r: ControlWeight,
    /// Highest coefficient order per dimension.
    pub order: usize,
    /// Horizon `T` in seconds.
    pub horizon: f64,
    /// Sampling period `t_s`.
    pub sample_time: f64,
    pub alpha_d: AlphaD,
    /// Ergodic memory in seconds; `None` keeps the whole history.
    pub memory: Option<f64>,
    /// First duration tried; defaults to `sample_time`.
    pub lambda_init: Option<f64>,
    pub lambda_shrink: f64,
    pub lambda_max_iter: usize,
    /// Integration step; defaults to `sample_time / 10`.
    pub dt: Option<f64>,
    /// Relative slack of the contraction test.
    pub contraction_slack: f64,
    /// Require the sequential cost bound on top of descent.
    pub enforce_contraction: bool,
    /// Also compute the interval bound over `[t_{i-1} + T, t_i + T]`.
    pub log_contraction_bound: bool,
    /// Weight of the quadratic domain barrier; zero disables it.
    pub barrier_weight: f64,
    /// Width of the band along the domain edge where the barrier acts.
    pub barrier_margin: f64,
    /// Extra penalties on individual state components.
    pub state_limits: Vec<StateLimit>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            q: 1.0,
            r: ControlWeight::Scalar(1e-3),
            order: 10,
            horizon: 0.5,
            sample_time: 0.05,
            alpha_d: AlphaD::CostScaled(1.0),
            memory: None,
            lambda_init: None,
            lambda_shrink: 0.5,
            lambda_max_iter: 10,
            dt: None,
            contraction_slack: 1e-6,
            enforce_contraction: true,
            log_contraction_bound: true,
            barrier_weight: 0.0,
            barrier_margin: 0.0,
            state_limits: Vec::new(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sample_time > 0.0 && self.horizon > self.sample_time) {
            return bad(format!(
                "need horizon > sample_time > 0 (horizon={}, sample_time={})",
                self.horizon, self.sample_time
            ));
        }
        if !(self.q > 0.0) {
            return bad(format!("q must be positive, got {}", self.q));
        }
        if self.order == 0 {
            return bad("order must be at least 1".into());
        }
        match self.alpha_d {
            AlphaD::Constant(a) if !(a < 0.0) => return bad(format!("alpha_d must be negative, got {a}")),
            AlphaD::CostScaled(g) if !(g > 0.0) => return bad(format!("alpha_d gain must be positive, got {g}")),
            _ => {}
        }
        if let Some(m) = self.memory {
            if !(m >= 0.0) {
                return bad(format!("memory must be non-negative, got {m}"));
            }
        }
        let li = self.lambda_init();
        if !(li > 0.0 && li <= self.horizon) {
            return bad(format!("lambda_init must lie in (0, horizon], got {li}"));
        }
        if !(self.lambda_shrink > 0.0 && self.lambda_shrink < 1.0) {
            return bad(format!("lambda_shrink must lie in (0, 1), got {}", self.lambda_shrink));
        }
        let dt = self.dt();
        if !(dt > 0.0 && dt <= self.sample_time) {
            return bad(format!("dt must lie in (0, sample_time], got {dt}"));
        }
        if !(self.barrier_weight >= 0.0 && self.barrier_margin >= 0.0) {
            return bad("barrier weight and margin must be non-negative".into());
        }
        if self.state_limits.iter().any(|l| !(l.min < l.max && l.weight >= 0.0)) {
            return bad("state limits need min < max and a non-negative weight".into());
        }
        if !(self.contraction_slack >= 0.0) {
            return bad("contraction_slack must be non-negative".into());
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(self.sample_time / 10.0)
    }

    pub fn lambda_init(&self) -> f64 {
        self.lambda_init.unwrap_or(self.sample_time)
    }

    pub fn line_search(&self) -> LineSearch {
        LineSearch {
            initial: self.lambda_init(),
            shrink: self.lambda_shrink,
            max_iter: self.lambda_max_iter,
        }
    }
}

/// How a step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Accepted,
    /// No sample had a negative mode insertion gradient.
    NoAction,
    /// Every tried duration failed the contraction test.
    LineSearchExhausted,
    /// The costate or an action rollout diverged.
    Diverged,
}

/// Per-step log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub time: f64,
    pub state: Vec<f64>,
    /// Control applied at the start of the step.
    pub control: Vec<f64>,
    pub tau: f64,
    pub lambda: f64,
    pub action_value: Vec<f64>,
    /// Open-loop cost under the default control.
    pub cost_before: f64,
    /// Open-loop cost of the plan that was kept.
    pub cost_after: f64,
    /// Allowed cost change `-(B(t_i) - B(t_{i-1}))`; `None` when unconstrained.
    pub contraction_rhs: Option<f64>,
    /// Interval bound along the default rollout, logged only.
    pub contraction_bound: Option<f64>,
    /// Running cost `B(t_i)` of the executed trajectory.
    pub running_cost: Option<f64>,
    pub status: StepStatus,
    pub tries: usize,
    pub wall_us: u64,
}

/// Result of one receding-horizon step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub record: StepRecord,
    /// Plan actually executed on `[t_i, t_{i+1}]`.
    pub executed: StateTrajectory,
    /// Full open-loop plan on `[t_i, t_i + T]`.
    pub plan: StateTrajectory,
}

#[derive(Debug, Clone)]
struct PreviousPlan {
    signal: ControlSignal,
    horizon_end: f64,
    cost: f64,
}

#[derive(Debug, Clone)]
struct Increment {
    t_start: f64,
    values: Vec<f64>,
}

/// Single-agent controller state. Each call to [`ErgodicController::step`]
/// solves one open-loop problem and advances the state by one period.
pub struct ErgodicController {
    sys: Arc<dyn ControlAffineSystem>,
    nominal: Arc<dyn ControlLaw>,
    cfg: ControllerConfig,
    r: DMatrix<f64>,
    basis: FourierBasis,
    phi: CoefficientVector,
    x: Vec<f64>,
    t_start: f64,
    /// Step times are `t_origin + step * t_s`.
    t_origin: f64,
    step: u64,
    total_steps: u64,
    t0erg: f64,
    history: Vec<f64>,
    history_prev: Option<Vec<f64>>,
    ring: VecDeque<Increment>,
    prev: Option<PreviousPlan>,
    own_weight: f64,
    offset: Option<CoefficientVector>,
    shared: CoefficientVector,
}

impl ErgodicController {
    pub fn new(
        sys: Arc<dyn ControlAffineSystem>,
        nominal: Arc<dyn ControlLaw>,
        cfg: ControllerConfig,
        domain: SearchDomain,
        phi: CoefficientVector,
        x0: &[f64],
        t0: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        check_dim("initial state", sys.state_dim(), x0.len())?;
        if let Some(l) = cfg.state_limits.iter().find(|l| l.index >= sys.state_dim()) {
            return usage(format!("state limit index {} out of range", l.index));
        }
        check_dim("ergodic projection", domain.nu(), sys.ergodic_projection().len())?;
        let r = cfg.r.matrix(sys.input_dim())?;
        let basis = FourierBasis::new(domain, cfg.order);
        check_dim("target coefficients", basis.len(), phi.len())?;
        let len = basis.len();
        Ok(Self {
            sys,
            nominal,
            cfg,
            r,
            basis,
            phi,
            x: x0.to_vec(),
            t_start: t0,
            t_origin: t0,
            step: 0,
            total_steps: 0,
            t0erg: t0,
            history: vec![0.0; len],
            history_prev: None,
            ring: VecDeque::new(),
            prev: None,
            own_weight: 1.0,
            offset: None,
            shared: CoefficientVector::zeros(len),
        })
    }

    /// Starts the cost window at `t0erg <= t0` instead of `t0`. The history
    /// before `t0` is taken as empty.
    pub fn with_t0erg(mut self, t0erg: f64) -> Result<Self> {
        if t0erg > self.t_start {
            return usage(format!("t0erg {t0erg} is after the start time {}", self.t_start));
        }
        self.t0erg = t0erg;
        Ok(self)
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &FourierBasis {
        &self.basis
    }

    pub fn phi(&self) -> &CoefficientVector {
        &self.phi
    }

    pub fn system(&self) -> &dyn ControlAffineSystem {
        self.sys.as_ref()
    }

    pub fn state(&self) -> &[f64] {
        &self.x
    }

    pub fn time(&self) -> f64 {
        self.t_origin + self.step as f64 * self.cfg.sample_time
    }

    pub fn t0erg(&self) -> f64 {
        self.t0erg
    }

    pub fn steps_taken(&self) -> u64 {
        self.total_steps
    }

    /// Unnormalized integral of the basis along the executed trajectory
    /// since `t0erg`.
    pub fn history_integral(&self) -> &[f64] {
        &self.history
    }

    /// History coefficients normalized by `t_i + T - t0erg`.
    pub fn history_coeffs(&self) -> CoefficientVector {
        let span = self.time() + self.cfg.horizon - self.t0erg;
        self.history.iter().map(|h| h / span).collect::<Vec<_>>().into()
    }

    /// Time-averaged coefficients of the executed trajectory; `None` before
    /// any time has elapsed.
    pub fn executed_coeffs(&self) -> Option<CoefficientVector> {
        let span = self.time() - self.t0erg;
        (span > 0.0).then(|| self.history.iter().map(|h| h / span).collect::<Vec<_>>().into())
    }

    /// Own coefficients of the latest plan over `[t0erg, t_i + T]`, for
    /// sharing with peers.
    pub fn shared_coeffs(&self) -> &CoefficientVector {
        &self.shared
    }

    /// Scores `own_weight * own + offset` instead of the own coefficients.
    pub fn set_blend(&mut self, own_weight: f64, offset: Option<CoefficientVector>) -> Result<()> {
        if let Some(o) = &offset {
            check_dim("peer offset", self.basis.len(), o.len())?;
        }
        self.own_weight = own_weight;
        self.offset = offset;
        Ok(())
    }

    /// Number of scalars held as persistent state; independent of the step
    /// count once the memory ring is full.
    pub fn persistent_len(&self) -> usize {
        let plan = self.prev.as_ref().map_or(0, |p| p.signal.storage_len());
        3 * self.basis.len()
            + self.ring.len() * self.basis.len()
            + plan
            + self.offset.as_ref().map_or(0, |o| o.len())
    }

    fn memory_slots(&self) -> usize {
        match self.cfg.memory {
            Some(m) => (m / self.cfg.sample_time + 1e-9).ceil() as usize,
            None => 0,
        }
    }

    /// Replaces the target and restarts the receding horizon from the
    /// current state: the cost window restarts at `t_curr - memory`
    /// (snapped to a step boundary and not before the run start), the
    /// previous plan is dropped and the next step is unconstrained.
    pub fn reinitialize(&mut self, phi: Option<CoefficientVector>) -> Result<()> {
        if let Some(p) = phi {
            check_dim("target coefficients", self.basis.len(), p.len())?;
            self.phi = p;
        }
        let t_curr = self.time();
        if let Some(m) = self.cfg.memory {
            let lo = t_curr - m - 1e-9 * self.cfg.sample_time;
            while self.ring.front().is_some_and(|inc| inc.t_start < lo) {
                self.ring.pop_front();
            }
            self.t0erg = self.ring.front().map_or(t_curr, |inc| inc.t_start);
            self.history.fill(0.0);
            for inc in &self.ring {
                for (h, v) in self.history.iter_mut().zip(&inc.values) {
                    *h += v;
                }
            }
        }
        self.t_origin = t_curr;
        self.step = 0;
        self.history_prev = None;
        self.prev = None;
        Ok(())
    }

    fn barrier(&self) -> Option<Barrier> {
        (self.cfg.barrier_weight > 0.0).then_some(Barrier {
            weight: self.cfg.barrier_weight,
            margin: self.cfg.barrier_margin,
        })
    }

    fn objective(&self, t_i: f64) -> Result<ErgodicObjective<'_>> {
        Ok(ErgodicObjective::new(
            &self.basis,
            &self.phi,
            self.cfg.q,
            self.sys.ergodic_projection(),
            (self.t0erg, t_i, t_i + self.cfg.horizon),
            &self.history,
        )?
        .with_blend(self.own_weight, self.offset.as_deref())
        .with_barrier(self.barrier())
        .with_limits(&self.cfg.state_limits))
    }

    fn default_plan(&self, t_i: f64, end: f64, extra: &[f64]) -> Result<StateTrajectory> {
        let (sys, dt) = (self.sys.as_ref(), self.cfg.dt());
        match &self.prev {
            Some(p) => {
                let law = Spliced {
                    head: &p.signal,
                    switch: p.horizon_end,
                    tail: self.nominal.as_ref(),
                };
                integrate_with_breaks(sys, &self.x, t_i, end, &law, dt, extra)
            }
            None => integrate_with_breaks(sys, &self.x, t_i, end, self.nominal.as_ref(), dt, extra),
        }
    }

    fn alpha(&self, j_def: f64) -> f64 {
        match self.cfg.alpha_d {
            AlphaD::Constant(a) => a,
            AlphaD::CostScaled(g) => -g * j_def / self.cfg.horizon,
        }
    }

    /// Control weight `R` as a matrix.
    pub fn control_weight(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Action schedule of the current open-loop problem and the `alpha_d`
    /// it was computed with. Useful for inspecting a run; `step` does not
    /// need it.
    pub fn current_schedule(&self) -> Result<(ActionSchedule, f64)> {
        let t_i = self.time();
        let t_next = self.t_origin + (self.step + 1) as f64 * self.cfg.sample_time;
        let end = t_i + self.cfg.horizon;
        let x_def = self.default_plan(t_i, end, &[t_next])?;
        let obj = self.objective(t_i)?;
        let (j_def, c_def) = obj.evaluate(&x_def)?;
        let alpha = self.alpha(j_def);
        let rho = integrate_costate(self.sys.as_ref(), &x_def, &obj, &c_def)?;
        Ok((action_schedule(&rho, &x_def, self.sys.as_ref(), &self.r, alpha)?, alpha))
    }

    /// Solves the open-loop problem at the current time and state without
    /// advancing the controller.
    pub fn solve_open_loop(&self) -> Result<StepOutcome> {
        let clock = Instant::now();
        let cfg = &self.cfg;
        let sys = self.sys.as_ref();
        let t_i = self.time();
        let t_next = self.t_origin + (self.step + 1) as f64 * cfg.sample_time;
        let end = t_i + cfg.horizon;
        let dt = cfg.dt();
        let extra = [t_next];

let x_def = self.default_plan(t_i, end, &extra)?;
        let u_def = ControlSignal::from_trajectory(&x_def);
        let obj = self.objective(t_i)?;
        let (j_def, c_def) = obj.evaluate(&x_def)?;

        let running_now = obj.running_cost(&self.history, t_i);
        let test = match (&self.prev, &self.history_prev, running_now) {
            (Some(p), Some(hp), Some(b_now)) if cfg.enforce_contraction => {
                match obj.running_cost(hp, t_i - cfg.sample_time) {
                    Some(b_prev) => ContractionTest::Bound {
                        previous_cost: p.cost,
                        executed_change: b_now - b_prev,
                        slack: cfg.contraction_slack,
                    },
                    None => ContractionTest::Descent,
                }
            }
            _ => ContractionTest::Descent,
        };
        let bound = match &self.prev {
            Some(p) if cfg.log_contraction_bound => {
                contraction_bound(&obj, &x_def, (p.horizon_end.max(t_i), end))?
            }
            _ => None,
        };

        let alpha = self.alpha(j_def);
        let mut status = StepStatus::NoAction;
        let mut tries = 0;
        let mut chosen: Option<(Action, f64, StateTrajectory)> = None;
        let mut tau = t_i;
        match integrate_costate(sys, &x_def, &obj, &c_def) {
            Ok(rho) => {
                let schedule = action_schedule(&rho, &x_def, sys, &self.r, alpha)?;
                if let Some(c) = application_time(&schedule, (t_i, end)) {
                    tau = c.time;
                    match duration_line_search(
                        Some(&c),
                        sys,
                        &self.x,
                        &u_def,
                        &obj,
                        cfg.line_search(),
                        dt,
                        &extra,
                        test,
                        j_def,
                    ) {
                        Ok(out) => {
                            tries = out.tries;
                            match out.accepted {
                                Some((cost, traj)) => {
                                    status = StepStatus::Accepted;
                                    chosen = Some((out.action, cost, traj));
                                }
                                None => status = StepStatus::LineSearchExhausted,
                            }
                        }
                        Err(Error::IntegrationDiverged { .. }) => status = StepStatus::Diverged,
                        Err(e) => return Err(e),
                    }
                }
            }
            Err(Error::IntegrationDiverged { .. }) => status = StepStatus::Diverged,
            Err(e) => return Err(e),
        }
        if status != StepStatus::Accepted {
            log::debug!("step {} at t={t_i:.4}: default control kept ({status:?})", self.total_steps);
        }
        let (action, cost, plan) = chosen.unwrap_or_else(|| (Action::none(sys.input_dim(), tau), j_def, x_def));
        let k = plan.index_at(t_next);
        if plan.times()[k] != t_next {
            return usage(format!("plan has no sample at the step boundary {t_next}"));
        }
        let executed = plan.truncated(t_next);
        Ok(StepOutcome {
            record: StepRecord {
                step: self.total_steps,
                time: t_i,
                state: self.x.clone(),
                control: executed.control(0).to_vec(),
                tau: action.application_time,
                lambda: action.duration,
                action_value: action.value.clone(),
                cost_before: j_def,
                cost_after: cost,
                contraction_rhs: test.allowed_change(),
                contraction_bound: bound,
                running_cost: running_now,
                status,
                tries,
                wall_us: clock.elapsed().as_micros() as u64,
            },
            executed,
            plan,
        })
    }

    /// Solves the open-loop problem, applies the plan for one period and
    /// updates the history.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let out = self.solve_open_loop()?;
        let t_i = out.record.time;
        let t_next = out.executed.end();
        let end = t_i + self.cfg.horizon;
        let projection = self.sys.ergodic_projection();

        let shared = self.objective(t_i)?.own_coeffs(&out.plan)?;
        let seg = out.executed.ergodic_segment(projection);
        let inc = self.basis.integrate_segment(&seg, t_i, t_next)?;

        let signal = ControlSignal::from_trajectory(&out.plan);
        self.history_prev = Some(self.history.clone());
        for (h, v) in self.history.iter_mut().zip(&inc) {
            *h += v;
        }
        if self.cfg.memory.is_some() {
            self.ring.push_back(Increment {
                t_start: t_i,
                values: inc,
            });
            while self.ring.len() > self.memory_slots() {
                self.ring.pop_front();
            }
        }
        self.shared = shared;
        self.prev = Some(PreviousPlan {
            signal,
            horizon_end: end,
            cost: out.record.cost_after,
        });
        self.x = out.executed.last_state().to_vec();
        self.step += 1;
        self.total_steps += 1;
        Ok(out)
    }
}

/// Closed-loop trajectory and per-step log of a run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: StateTrajectory,
    pub records: Vec<StepRecord>,
}

impl RunOutput {
    pub(crate) fn new(t0: f64, x0: &[f64], m: usize) -> Self {
        Self {
            trajectory: StateTrajectory::single(t0, x0, m),
            records: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, out: StepOutcome) -> Result<()> {
        self.trajectory.append(&out.executed)?;
        self.records.push(out.record);
        Ok(())
    }
}

fn step_count(span: f64, t_s: f64) -> usize {
    (span / t_s - 1e-9).ceil().max(0.0) as usize
}

/// Runs the controller for `duration` seconds.
pub fn rhee_run(ctrl: &mut ErgodicController, duration: f64) -> Result<RunOutput> {
    if !(duration > 0.0) {
        return usage(format!("run duration must be positive, got {duration}"));
    }
    let m = ctrl.system().input_dim();
    let mut run = RunOutput::new(ctrl.time(), ctrl.state(), m);
    for _ in 0..step_count(duration, ctrl.config().sample_time) {
        let out = ctrl.step()?;
        run.push(out)?;
    }
    Ok(run)
}

/// Runs the controller for `duration` seconds, replacing the target every
/// `t_phi` seconds with `update(t, x)` and restarting the horizon.
pub fn reactive_run(
    ctrl: &mut ErgodicController,
    duration: f64,
    t_phi: f64,
    update: &mut dyn FnMut(f64, &[f64]) -> Result<CoefficientVector>,
) -> Result<RunOutput> {
    let t_s = ctrl.config().sample_time;
    if !(t_phi >= t_s - 1e-12) {
        return usage(format!("update period {t_phi} is shorter than the sample time {t_s}"));
    }
    if !(duration > 0.0) {
        return usage(format!("run duration must be positive, got {duration}"));
    }
    let every = (t_phi / t_s).round().max(1.0) as usize;
    let m = ctrl.system().input_dim();
    let mut run = RunOutput::new(ctrl.time(), ctrl.state(), m);
    for j in 0..step_count(duration, t_s) {
        if j > 0 && j % every == 0 {
            let phi = update(ctrl.time(), ctrl.state())?;
            ctrl.reinitialize(Some(phi))?;
        }
        let out = ctrl.step()?;
        run.push(out)?;
    }
    Ok(run)
}
