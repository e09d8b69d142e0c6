use super::{CoefficientVector, FourierBasis};
use crate::error::{check_dim, usage, Result};

/// Time-stamped samples of the ergodic coordinates of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySegment {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl TrajectorySegment {
    /// `states` is flat, `dim` values per sample.
    pub fn new(dim: usize, times: Vec<f64>, states: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return usage("trajectory dimension must be positive");
        }
        if times.is_empty() {
            return usage("trajectory needs at least one sample");
        }
        check_dim("trajectory states", times.len() * dim, states.len())?;
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return usage("trajectory times must be strictly increasing");
        }
        Ok(Self { dim, times, states })
    }

    pub fn from_points(times: Vec<f64>, points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return usage("trajectory points have inconsistent dimensions");
        }
        Self::new(dim, times, points.concat())
    }

    /// Empty segment to be filled with [`push`](Self::push).
    pub fn with_dim(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, s: &[f64]) -> Result<()> {
        check_dim("trajectory point", self.dim, s.len())?;
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return usage(format!("sample time {t} does not follow {last}"));
            }
        }
        self.times.push(t);
        self.states.extend_from_slice(s);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, j: usize) -> &[f64] {
        &self.states[j * self.dim..(j + 1) * self.dim]
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Same path with every time multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            times: self.times.iter().map(|t| t * factor).collect(),
            states: self.states.clone(),
        }
    }
}

/// Timing of one recursion step: the previous and current step start times,
/// the horizon length and the start of the ergodic window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionWindow {
    pub t_prev: f64,
    pub t_curr: f64,
    pub horizon: f64,
    pub t0erg: f64,
}

impl RecursionWindow {
    fn validate(&self) -> Result<()> {
        let ok = [self.t_prev, self.t_curr, self.horizon, self.t0erg]
            .iter()
            .all(|v| v.is_finite());
        if !ok || self.t_curr < self.t_prev || self.t_prev < self.t0erg || self.horizon <= 0.0 {
            return usage(format!("inconsistent recursion window {self:?}"));
        }
        Ok(())
    }
}

/// Advances the history coefficients `c_bar` from step `i-1` to step `i`.
///
/// `c_bar` is the history integral `int_{t0erg}^{t_i} F_k dt` normalized by
/// the full window length `t_i + T - t0erg`, so the update only needs the new
/// samples on `[t_prev, t_curr]`.
pub fn recursive_coeff_update(
    basis: &FourierBasis,
    prev: &[f64],
    window: &RecursionWindow,
    new_segment: &TrajectorySegment,
) -> Result<CoefficientVector> {
    window.validate()?;
    check_dim("coefficient vector", basis.len(), prev.len())?;
    let old_span = window.t_prev + window.horizon - window.t0erg;
    let new_span = window.t_curr + window.horizon - window.t0erg;
    let inc = basis.integrate_segment(new_segment, window.t_prev, window.t_curr)?;
    let keep = old_span / new_span;
    Ok(prev
        .iter()
        .zip(&inc)
        .map(|(c, f)| keep * c + f / new_span)
        .collect::<Vec<_>>()
        .into())
}
