use nalgebra::{DMatrix, DVector};

use super::costate::CostateTrajectory;
use super::objective::ErgodicObjective;
use crate::dynamics::{
    integrate_with_breaks, saturate_in_place, Action, ControlAffineSystem, ControlSignal,
    StateTrajectory,
};
use crate::error::{check_dim, Result};

/// Candidate infinitesimal actions at every sample of the default rollout.
#[derive(Debug, Clone)]
pub struct ActionSchedule {
    pub(super) m: usize,
    pub(super) times: Vec<f64>,
    /// Saturated candidate values.
    pub(super) values: Vec<f64>,
    /// Unconstrained minimizers, before saturation.
    pub(super) raw: Vec<f64>,
    pub(super) defaults: Vec<f64>,
    /// `h^T rho` at each sample.
    pub(super) sensitivities: Vec<f64>,
    /// Mode insertion gradient of each saturated candidate.
    pub(super) gradients: Vec<f64>,
}

impl ActionSchedule {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.m..(j + 1) * self.m]
    }

    pub fn raw_value(&self, j: usize) -> &[f64] {
        &self.raw[j * self.m..(j + 1) * self.m]
    }

    pub fn default_value(&self, j: usize) -> &[f64] {
        &self.defaults[j * self.m..(j + 1) * self.m]
    }

    pub fn sensitivity(&self, j: usize) -> &[f64] {
        &self.sensitivities[j * self.m..(j + 1) * self.m]
    }

    pub fn gradients(&self) -> &[f64] {
        &self.gradients
    }
}

/// Pointwise integrand `1/2 (b^T (u - u_def) - alpha_d)^2 + 1/2 u^T R u`
/// minimized by the schedule, with `b = h^T rho`.
pub fn schedule_integrand(b: &[f64], u: &[f64], u_def: &[f64], r: &DMatrix<f64>, alpha_d: f64) -> f64 {
    let lin: f64 = b.iter().zip(u.iter().zip(u_def)).map(|(bi, (a, d))| bi * (a - d)).sum();
    let uv = DVector::from_column_slice(u);
    0.5 * (lin - alpha_d).powi(2) + 0.5 * (uv.transpose() * r * &uv)[(0, 0)]
}

/// Closed-form schedule
/// `u_s = (Lambda + R^T)^{-1} [Lambda u_def + h^T rho alpha_d]`,
/// `Lambda = h^T rho rho^T h`, saturated to the input bounds.
pub fn action_schedule(
    rho: &CostateTrajectory,
    x_def: &StateTrajectory,
    sys: &dyn ControlAffineSystem,
    r: &DMatrix<f64>,
    alpha_d: f64,
) -> Result<ActionSchedule> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    check_dim("costate samples", x_def.len(), rho.len())?;
    check_dim("control weight", m, r.nrows())?;
    let len = x_def.len();
    let mut out = ActionSchedule {
        m,
        times: x_def.times().to_vec(),
        values: vec![0.0; len * m],
        raw: vec![0.0; len * m],
        defaults: vec![0.0; len * m],
        sensitivities: vec![0.0; len * m],
        gradients: vec![0.0; len],
    };
    let rt = r.transpose();
    let mut h = vec![0.0; n * m];
    for j in 0..len {
        let t = x_def.times()[j];
        let x = x_def.state(j);
        let u_def = if len > 1 { x_def.control(j.min(len - 2)) } else { &out.defaults[..m] }.to_vec();
        sys.input_map(t, x, &mut h);
        let p = rho.value(j);
        let b: Vec<f64> = (0..m).map(|c| (0..n).map(|i| h[i * m + c] * p[i]).sum()).collect();
        let bv = DVector::from_column_slice(&b);
        let lhs = &bv * bv.transpose() + &rt;
        let rhs = &bv * (bv.dot(&DVector::from_column_slice(&u_def)) + alpha_d);
        let raw = lhs.lu().solve(&rhs).unwrap_or_else(|| DVector::from_column_slice(&u_def));
        let mut u = raw.as_slice().to_vec();
        saturate_in_place(&mut u, sys.u_min(), sys.u_max());
        out.gradients[j] = b.iter().zip(u.iter().zip(&u_def)).map(|(bi, (a, d))| bi * (a - d)).sum();
        out.raw[j * m..(j + 1) * m].copy_from_slice(raw.as_slice());
        out.values[j * m..(j + 1) * m].copy_from_slice(&u);
        out.defaults[j * m..(j + 1) * m].copy_from_slice(&u_def);
        out.sensitivities[j * m..(j + 1) * m].copy_from_slice(&b);
    }
    Ok(out)
}

/// Candidate chosen from the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionCandidate {
    pub index: usize,
    pub time: f64,
    pub value: Vec<f64>,
    /// Mode insertion gradient at the candidate, always negative.
    pub gradient: f64,
}

/// Sample in `[window.0, window.1)` with the most negative mode insertion
/// gradient; earliest on ties. `None` if no candidate improves the cost.
pub fn application_time(schedule: &ActionSchedule, window: (f64, f64)) -> Option<ActionCandidate> {
    let mut best: Option<usize> = None;
    for (j, (&t, &g)) in schedule.times.iter().zip(&schedule.gradients).enumerate() {
        if t < window.0 || t >= window.1 {
            continue;
        }
        if best.map_or(true, |b| g < schedule.gradients[b]) {
            best = Some(j);
        }
    }
    let j = best?;
    let g = schedule.gradients[j];
    if !(g < 0.0) {
        return None;
    }
    Some(ActionCandidate {
        index: j,
        time: schedule.times[j],
        value: schedule.value(j).to_vec(),
        gradient: g,
    })
}

/// Acceptance rule for a finite action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContractionTest {
    /// Only require improvement over the default control.
    Descent,
    /// Improvement over default plus
    /// `J_new - J_prev <= -(B(t_i) - B(t_{i-1})) + slack * |J|`.
    Bound {
        previous_cost: f64,
        executed_change: f64,
        slack: f64,
    },
}

impl ContractionTest {
    /// Right-hand side `-(B(t_i) - B(t_{i-1}))` of the sequential test.
    pub fn allowed_change(&self) -> Option<f64> {
        match self {
            Self::Descent => None,
            Self::Bound { executed_change, .. } => Some(-executed_change),
        }
    }

    /// Whether the sequential inequality holds for `cost_new`.
    pub fn contracts(&self, cost_new: f64) -> bool {
        match *self {
            Self::Descent => true,
            Self::Bound {
                previous_cost,
                executed_change,
                slack,
            } => {
                let tol = slack * cost_new.abs().max(previous_cost.abs());
                cost_new - previous_cost <= -executed_change + tol
            }
        }
    }

    pub fn admits(&self, cost_new: f64, cost_default: f64) -> bool {
        cost_new < cost_default && self.contracts(cost_new)
    }
}

/// Duration search parameters: `lambda_j = initial * shrink^j`,
/// `j = 0..=max_iter`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub initial: f64,
    pub shrink: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct LineSearchOutcome {
    /// `duration == 0` when nothing was accepted.
    pub action: Action,
    /// Cost and rollout of the accepted action.
    pub accepted: Option<(f64, StateTrajectory)>,
    pub tries: usize,
}

/// Rollout of `u_def` with `action` inserted, sampled at `extra_times` too.
#[allow(clippy::too_many_arguments)]
pub fn rollout_with_action(
    sys: &dyn ControlAffineSystem,
    x_i: &[f64],
    window: (f64, f64),
    u_def: &ControlSignal,
    action: Action,
    dt: f64,
    extra_times: &[f64],
) -> Result<StateTrajectory> {
    let signal = u_def.clone().with_action(action);
    integrate_with_breaks(sys, x_i, window.0, window.1, &signal, dt, extra_times)
}

/// Tries successively shorter durations for `candidate` until the realized
/// cost passes `test` against `cost_default`.
#[allow(clippy::too_many_arguments)]
pub fn duration_line_search(
    candidate: Option<&ActionCandidate>,
    sys: &dyn ControlAffineSystem,
    x_i: &[f64],
    u_def: &ControlSignal,
    objective: &ErgodicObjective,
    search: LineSearch,
    dt: f64,
    extra_times: &[f64],
    test: ContractionTest,
    cost_default: f64,
) -> Result<LineSearchOutcome> {
    let m = sys.input_dim();
    let (t_i, end) = (objective.t_now, objective.horizon_end);
    let Some(c) = candidate else {
        return Ok(LineSearchOutcome {
            action: Action::none(m, t_i),
            accepted: None,
            tries: 0,
        });
    };
    let mut lambda = search.initial;
    for j in 0..=search.max_iter {
        let duration = lambda.min(end - c.time);
        if duration > 0.0 {
            let action = Action {
                value: c.value.clone(),
                application_time: c.time,
                duration,
            };
            let traj =
                rollout_with_action(sys, x_i, (t_i, end), u_def, action.clone(), dt, extra_times)?;
            let cost = objective.cost(&traj)?;
            if test.admits(cost, cost_default) {
                return Ok(LineSearchOutcome {
                    action,
                    accepted: Some((cost, traj)),
                    tries: j + 1,
                });
            }
        }
        lambda *= search.shrink;
    }
    Ok(LineSearchOutcome {
        action: Action::none(m, c.time),
        accepted: None,
        tries: search.max_iter + 1,
    })
}
