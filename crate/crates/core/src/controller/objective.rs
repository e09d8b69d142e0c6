use serde::{Deserialize, Serialize};

use crate::dynamics::StateTrajectory;
use crate::error::{check_dim, usage, Result};
use crate::fourier::{CoefficientVector, FourierBasis};

/// The ergodic cost seen by one agent at one step.
///
/// `history` is the unnormalized integral `int_{t0erg}^{t_now} F_k dt` of the
/// executed trajectory. A rollout on `[t_now, horizon_end]` contributes the
/// rest; the agent's own coefficients are the sum divided by
/// `horizon_end - t0erg`. With peers, the scored coefficients are
/// `own_weight * own + offset`.
#[derive(Debug, Clone, Copy)]
pub struct ErgodicObjective<'a> {
    pub basis: &'a FourierBasis,
    pub phi: &'a [f64],
    pub q: f64,
    pub projection: &'a [usize],
    pub t0erg: f64,
    pub t_now: f64,
    pub horizon_end: f64,
    pub history: &'a [f64],
    pub own_weight: f64,
    pub offset: Option<&'a [f64]>,
    pub barrier: Option<Barrier>,
    pub limits: &'a [StateLimit],
}

/// Quadratic penalty `weight * d^2` on the distance `d` by which an ergodic
/// coordinate enters the band of width `margin` along the domain edge, or
/// leaves the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Barrier {
    pub weight: f64,
    pub margin: f64,
}

impl Barrier {
    pub fn value(&self, bounds: &[f64], s: &[f64]) -> f64 {
        let mut v = 0.0;
        for (x, l) in s.iter().zip(bounds) {
            let lo = (self.margin - x).max(0.0);
            let hi = (x - (l - self.margin)).max(0.0);
            v += lo * lo + hi * hi;
        }
        self.weight * v
    }

    /// Adds the gradient to `out`.
    pub fn add_grad(&self, bounds: &[f64], s: &[f64], out: &mut [f64]) {
        for ((o, x), l) in out.iter_mut().zip(s).zip(bounds) {
            let lo = (self.margin - x).max(0.0);
            let hi = (x - (l - self.margin)).max(0.0);
            *o += 2.0 * self.weight * (hi - lo);
        }
    }
}

/// Quadratic penalty `weight * d^2` on the distance `d` by which state
/// `index` leaves `[min, max]`. Keeps states the ergodic cost cannot see,
/// such as a quadrotor's tilt, in a sane range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateLimit {
    pub index: usize,
    pub min: f64,
    pub max: f64,
    pub weight: f64,
}

impl StateLimit {
    fn excess(&self, x: &[f64]) -> f64 {
        let v = x[self.index];
        (v - self.max).max(0.0) - (self.min - v).max(0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d = self.excess(x);
        self.weight * d * d
    }

    /// Adds the gradient with respect to the full state to `out`.
    pub fn add_grad(&self, x: &[f64], out: &mut [f64]) {
        out[self.index] += 2.0 * self.weight * self.excess(x);
    }
}

impl<'a> ErgodicObjective<'a> {
    /// Single-agent objective.
    pub fn new(
        basis: &'a FourierBasis,
        phi: &'a [f64],
        q: f64,
        projection: &'a [usize],
        window: (f64, f64, f64),
        history: &'a [f64],
    ) -> Result<Self> {
        let (t0erg, t_now, horizon_end) = window;
        check_dim("target coefficients", basis.len(), phi.len())?;
        check_dim("history coefficients", basis.len(), history.len())?;
        check_dim("ergodic projection", basis.nu(), projection.len())?;
        if !(t0erg <= t_now && t_now < horizon_end) {
            return usage(format!("invalid cost window [{t0erg}, {t_now}, {horizon_end}]"));
        }
        Ok(Self {
            basis,
            phi,
            q,
            projection,
            t0erg,
            t_now,
            horizon_end,
            history,
            own_weight: 1.0,
            offset: None,
            barrier: None,
            limits: &[],
        })
    }

    pub fn with_blend(mut self, own_weight: f64, offset: Option<&'a [f64]>) -> Self {
        self.own_weight = own_weight;
        self.offset = offset;
        self
    }

    pub fn with_barrier(mut self, barrier: Option<Barrier>) -> Self {
        self.barrier = barrier;
        self
    }

    pub fn with_limits(mut self, limits: &'a [StateLimit]) -> Self {
        self.limits = limits;
        self
    }

    pub fn span(&self) -> f64 {
        self.horizon_end - self.t0erg
    }

    /// Own coefficients of the history followed by `traj` on
    /// `[t_now, horizon_end]`.
    pub fn own_coeffs(&self, traj: &StateTrajectory) -> Result<CoefficientVector> {
        let seg = traj.ergodic_segment(self.projection);
        let tail = self.basis.integrate_segment(&seg, self.t_now, self.horizon_end)?;
        let span = self.span();
        Ok(self
            .history
            .iter()
            .zip(&tail)
            .map(|(h, f)| (h + f) / span)
            .collect::<Vec<_>>()
            .into())
    }

    pub fn combine(&self, own: &[f64]) -> CoefficientVector {
        let mut c: Vec<f64> = own.iter().map(|v| self.own_weight * v).collect();
        if let Some(off) = self.offset {
            for (a, b) in c.iter_mut().zip(off) {
                *a += b;
            }
        }
        c.into()
    }

    /// `Q * sum_k Lambda_k (c_k - phi_k)^2`.
    pub fn cost_of(&self, combined: &[f64]) -> f64 {
        self.q * self.basis.ergodic_metric(combined, self.phi)
    }

    /// Cost of `traj` together with the scored coefficients.
    pub fn evaluate(&self, traj: &StateTrajectory) -> Result<(f64, CoefficientVector)> {
        let c = self.combine(&self.own_coeffs(traj)?);
        Ok((self.cost_of(&c) + self.barrier_cost(traj), c))
    }

    /// Trapezoid integral of the barrier and state limits along `traj`.
    pub fn barrier_cost(&self, traj: &StateTrajectory) -> f64 {
        if self.barrier.is_none() && self.limits.is_empty() {
            return 0.0;
        }
        let bounds = self.basis.domain().bounds();
        let mut s = vec![0.0; self.projection.len()];
        let mut total = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..traj.len() {
            traj.project(j, self.projection, &mut s);
            let x = traj.state(j);
            let mut v = self.barrier.map_or(0.0, |b| b.value(bounds, &s));
            v += self.limits.iter().map(|l| l.value(x)).sum::<f64>();
            let t = traj.times()[j];
            if let Some((tp, vp)) = prev {
                total += 0.5 * (t - tp) * (v + vp);
            }
            prev = Some((t, v));
        }
        total
    }

    pub fn cost(&self, traj: &StateTrajectory) -> Result<f64> {
        self.evaluate(traj).map(|(j, _)| j)
    }

    /// Weights `w_k` with `l(x) = sum_k w_k dF_k/dx`.
    pub fn gradient_weights(&self, combined: &[f64]) -> Vec<f64> {
        let scale = 2.0 * self.q * self.own_weight / self.span();
        self.basis
            .lambda()
            .iter()
            .zip(combined.iter().zip(self.phi))
            .map(|(l, (c, p))| scale * l * (c - p))
            .collect()
    }

    /// Running cost `B(t) = Q sum_k Lambda_k (c_k(t) - phi_k)^2` of an
    /// executed history integral up to `t`; `None` at `t = t0erg`.
    pub fn running_cost(&self, history_at_t: &[f64], t: f64) -> Option<f64> {
        let span = t - self.t0erg;
        if span <= 0.0 {
            return None;
        }
        let own: Vec<f64> = history_at_t.iter().map(|h| h / span).collect();
        Some(self.cost_of(&self.combine(&own)))
    }
}
