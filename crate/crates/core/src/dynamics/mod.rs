//! Control-affine systems `x' = g(t, x) + h(t, x) u`, fixed-step RK4
//! integration and piecewise-constant control signals.

mod double_integrator;
mod nominal;
mod quadrotor;

pub use double_integrator::{make_double_integrator, DoubleIntegrator};
pub use nominal::{make_pd_height_hold, PdHeightHold};
pub use quadrotor::{make_quadrotor12, Quadrotor12, QuadrotorParams};

use nalgebra::DMatrix;

use crate::error::{check_dim, usage, Error, Result};

/// Step used by finite-difference Jacobians.
pub const FD_STEP: f64 = 1e-6;

pub trait ControlAffineSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// Drift term `g(t, x)`.
    fn drift(&self, t: f64, x: &[f64], g: &mut [f64]);

    /// Input map `h(t, x)`, row-major `n x m`.
    fn input_map(&self, t: f64, x: &[f64], h: &mut [f64]);

    fn u_min(&self) -> &[f64];
    fn u_max(&self) -> &[f64];

    /// Indices of the states that are explored ergodically.
    fn ergodic_projection(&self) -> &[usize];

    /// `f(t, x, u)`.
    fn dynamics(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        let (n, m) = (self.state_dim(), self.input_dim());
        let mut h = vec![0.0; n * m];
        self.drift(t, x, out);
        self.input_map(t, x, &mut h);
        for i in 0..n {
            out[i] += (0..m).map(|j| h[i * m + j] * u[j]).sum::<f64>();
        }
    }

    /// `D_x f(t, x, u)`, row-major `n x n`. Central differences unless
    /// overridden.
    fn jacobian(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        fd_jacobian(self, t, x, u, out);
    }
}

/// Central-difference `D_x f` with step [`FD_STEP`].
pub fn fd_jacobian<S: ControlAffineSystem + ?Sized>(
    sys: &S,
    t: f64,
    x: &[f64],
    u: &[f64],
    out: &mut [f64],
) {
    let n = sys.state_dim();
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        xp[j] = x[j] + FD_STEP;
        sys.dynamics(t, &xp, u, &mut fp);
        xp[j] = x[j] - FD_STEP;
        sys.dynamics(t, &xp, u, &mut fm);
        xp[j] = x[j];
        for i in 0..n {
            out[i * n + j] = (fp[i] - fm[i]) / (2.0 * FD_STEP);
        }
    }
}

/// `D_x f` as a matrix.
pub fn linearize(sys: &dyn ControlAffineSystem, t: f64, x: &[f64], u: &[f64]) -> DMatrix<f64> {
    let n = sys.state_dim();
    let mut a = vec![0.0; n * n];
    sys.jacobian(t, x, u, &mut a);
    DMatrix::from_row_slice(n, n, &a)
}

/// Componentwise clamp into `[u_min, u_max]`.
pub fn saturate(u: &[f64], u_min: &[f64], u_max: &[f64]) -> Vec<f64> {
    let mut out = u.to_vec();
    saturate_in_place(&mut out, u_min, u_max);
    out
}

pub fn saturate_in_place(u: &mut [f64], u_min: &[f64], u_max: &[f64]) {
    for ((v, lo), hi) in u.iter_mut().zip(u_min).zip(u_max) {
        *v = v.clamp(*lo, *hi);
    }
}

/// System assembled from closures; Jacobians by central differences.
pub struct FnSystem<G, H> {
    n: usize,
    m: usize,
    drift: G,
    input_map: H,
    u_min: Vec<f64>,
    u_max: Vec<f64>,
    projection: Vec<usize>,
}

impl<G, H> FnSystem<G, H>
where
    G: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
    H: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(
        n: usize,
        drift: G,
        input_map: H,
        u_min: Vec<f64>,
        u_max: Vec<f64>,
        projection: Vec<usize>,
    ) -> Result<Self> {
        let m = u_min.len();
        check_dim("input bounds", m, u_max.len())?;
        if u_min.iter().zip(&u_max).any(|(lo, hi)| !(lo < hi)) {
            return usage("input bounds must satisfy u_min < u_max");
        }
        validate_projection(&projection, n)?;
        Ok(Self {
            n,
            m,
            drift,
            input_map,
            u_min,
            u_max,
            projection,
        })
    }
}

pub(crate) fn validate_projection(projection: &[usize], n: usize) -> Result<()> {
    if projection.is_empty() || projection.iter().any(|&i| i >= n) {
        return usage(format!("invalid ergodic projection {projection:?} for {n} states"));
    }
    for (a, i) in projection.iter().enumerate() {
        if projection[a + 1..].contains(i) {
            return usage("ergodic projection indices must be distinct");
        }
    }
    Ok(())
}

impl<G, H> ControlAffineSystem for FnSystem<G, H>
where
    G: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
    H: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    fn state_dim(&self) -> usize {
        self.n
    }
    fn input_dim(&self) -> usize {
        self.m
    }
    fn drift(&self, t: f64, x: &[f64], g: &mut [f64]) {
        (self.drift)(t, x, g)
    }
    fn input_map(&self, t: f64, x: &[f64], h: &mut [f64]) {
        (self.input_map)(t, x, h)
    }
    fn u_min(&self) -> &[f64] {
        &self.u_min
    }
    fn u_max(&self) -> &[f64] {
        &self.u_max
    }
    fn ergodic_projection(&self) -> &[usize] {
        &self.projection
    }
}

/// Single control action: value `u_A` held on `[tau, tau + lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub value: Vec<f64>,
    pub application_time: f64,
    pub duration: f64,
}

impl Action {
    pub fn none(m: usize, t: f64) -> Self {
        Self {
            value: vec![0.0; m],
            application_time: t,
            duration: 0.0,
        }
    }

    pub fn is_none(&self) -> bool {
        self.duration <= 0.0
    }

    pub fn end(&self) -> f64 {
        self.application_time + self.duration
    }

    fn active(&self, t: f64) -> bool {
        self.duration > 0.0 && t >= self.application_time && t < self.end()
    }
}

/// Anything that produces a control from `(t, x)`.
///
/// The integrator holds the returned control constant over each substep.
/// Substeps never straddle a reported breakpoint, and the control for a
/// substep is requested at its midpoint time with its initial state.
pub trait ControlLaw: Send + Sync {
    fn control(&self, t: f64, x: &[f64], u: &mut [f64]);

    /// Times in `(t0, t1)` where the control may jump.
    fn breakpoints(&self, _t0: f64, _t1: f64, _out: &mut Vec<f64>) {}
}

impl<F> ControlLaw for F
where
    F: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    fn control(&self, t: f64, x: &[f64], u: &mut [f64]) {
        self(t, x, u)
    }
}

/// Piecewise-constant open-loop schedule with an optional inserted action.
///
/// Segment `j` holds `values[j]` from `starts[j]` until `starts[j + 1]`;
/// before the first start the first value applies and the last value is
/// held forever.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    m: usize,
    starts: Vec<f64>,
    values: Vec<f64>,
    action: Option<Action>,
}

impl ControlSignal {
    pub fn constant(u: Vec<f64>) -> Self {
        Self {
            m: u.len(),
            starts: vec![f64::NEG_INFINITY],
            values: u,
            action: None,
        }
    }

    pub fn piecewise(m: usize, starts: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if starts.is_empty() {
            return usage("control schedule needs at least one segment");
        }
        check_dim("control schedule values", starts.len() * m, values.len())?;
        if starts.windows(2).any(|w| !(w[1] > w[0])) {
            return usage("control schedule starts must be increasing");
        }
        Ok(Self {
            m,
            starts,
            values,
            action: None,
        })
    }

    /// Replays the controls applied along `traj`.
    pub fn from_trajectory(traj: &StateTrajectory) -> Self {
        let n = traj.times.len().saturating_sub(1).max(1);
        let starts = traj.times[..n].to_vec();
        let values = if traj.controls.is_empty() {
            vec![0.0; traj.m]
        } else {
            traj.controls.clone()
        };
        Self {
            m: traj.m,
            starts,
            values,
            action: None,
        }
    }

    pub fn with_action(mut self, action: Action) -> Self {
        self.action = if action.is_none() { None } else { Some(action) };
        self
    }

    pub fn action(&self) -> Option<&Action> {
        self.action.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    /// Number of stored scalars (segment starts and values).
    pub fn storage_len(&self) -> usize {
        self.starts.len() + self.values.len() + self.action.as_ref().map_or(0, |a| a.value.len() + 2)
    }

    /// Open-loop value at `t` (without the saturation applied by the
    /// integrator).
    pub fn eval(&self, t: f64, u: &mut [f64]) {
        if let Some(a) = &self.action {
            if a.active(t) {
                u.copy_from_slice(&a.value);
                return;
            }
        }
        let j = self.starts.partition_point(|s| *s <= t).saturating_sub(1);
        u.copy_from_slice(&self.values[j * self.m..(j + 1) * self.m]);
    }

    pub fn value_at(&self, t: f64) -> Vec<f64> {
        let mut u = vec![0.0; self.m];
        self.eval(t, &mut u);
        u
    }
}

impl ControlLaw for ControlSignal {
    fn control(&self, t: f64, _x: &[f64], u: &mut [f64]) {
        self.eval(t, u)
    }

    fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        let lo = self.starts.partition_point(|s| *s <= t0);
        out.extend(self.starts[lo..].iter().take_while(|s| **s < t1));
        if let Some(a) = &self.action {
            for t in [a.application_time, a.end()] {
                if t > t0 && t < t1 {
                    out.push(t);
                }
            }
        }
    }
}

/// `head` before `switch`, `tail` from `switch` on.
pub struct Spliced<'a> {
    pub head: &'a dyn ControlLaw,
    pub switch: f64,
    pub tail: &'a dyn ControlLaw,
}

impl ControlLaw for Spliced<'_> {
    fn control(&self, t: f64, x: &[f64], u: &mut [f64]) {
        if t < self.switch {
            self.head.control(t, x, u)
        } else {
            self.tail.control(t, x, u)
        }
    }

    fn breakpoints(&self, t0: f64, t1: f64, out: &mut Vec<f64>) {
        self.head.breakpoints(t0, t1.min(self.switch), out);
        if self.switch > t0 && self.switch < t1 {
            out.push(self.switch);
        }
        self.tail.breakpoints(t0.max(self.switch), t1, out);
    }
}

/// Sampled states plus the control held on each interval.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    n: usize,
    m: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    controls: Vec<f64>,
}

impl StateTrajectory {
    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
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
        &self.states[j * self.n..(j + 1) * self.n]
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    /// Control held on `[times[j], times[j + 1])`.
    pub fn control(&self, j: usize) -> &[f64] {
        &self.controls[j * self.m..(j + 1) * self.m]
    }

    pub fn last_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Index of the last sample with time `<= t`.
    pub fn index_at(&self, t: f64) -> usize {
        self.times.partition_point(|s| *s <= t).saturating_sub(1)
    }

    /// Projected coordinates of sample `j`.
    pub fn project(&self, j: usize, projection: &[usize], out: &mut [f64]) {
        let x = self.state(j);
        for (o, &i) in out.iter_mut().zip(projection) {
            *o = x[i];
        }
    }

    /// Ergodic coordinates as a [`TrajectorySegment`](crate::fourier::TrajectorySegment).
    pub fn ergodic_segment(&self, projection: &[usize]) -> crate::fourier::TrajectorySegment {
        let nu = projection.len();
        let mut flat = vec![0.0; self.len() * nu];
        for j in 0..self.len() {
            self.project(j, projection, &mut flat[j * nu..(j + 1) * nu]);
        }
        crate::fourier::TrajectorySegment::new(nu, self.times.clone(), flat)
            .expect("integrator output has increasing times")
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn append(&mut self, other: &StateTrajectory) -> Result<()> {
        check_dim("appended state", self.n, other.n)?;
        if self.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if other.is_empty() {
            return Ok(());
        }
        if other.start() != self.end() {
            return usage(format!("cannot append a trajectory starting at {} to one ending at {}", other.start(), self.end()));
        }
        self.times.extend_from_slice(&other.times[1..]);
        self.states.extend_from_slice(&other.states[self.n..]);
        self.controls.extend_from_slice(&other.controls);
        Ok(())
    }

    /// Trajectory holding only `x0` at `t0`.
    pub fn single(t0: f64, x0: &[f64], m: usize) -> Self {
        Self {
            n: x0.len(),
            m,
            times: vec![t0],
            states: x0.to_vec(),
            controls: Vec::new(),
        }
    }

    /// Keeps the samples with `t <= t_end` (plus the one at `t_end` if it
    /// exists).
    pub fn truncated(&self, t_end: f64) -> Self {
        let k = self.times.partition_point(|s| *s <= t_end).max(1);
        Self {
            n: self.n,
            m: self.m,
            times: self.times[..k].to_vec(),
            states: self.states[..k * self.n].to_vec(),
            controls: self.controls[..(k - 1) * self.m].to_vec(),
        }
    }
}

/// Relative tolerance for merging breakpoints into the step grid.
const SNAP: f64 = 1e-9;

fn step_times(t0: f64, t1: f64, dt: f64, law: &dyn ControlLaw, extra: &[f64]) -> Vec<f64> {
    let steps = ((t1 - t0) / dt - SNAP).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..steps).map(|j| t0 + j as f64 * dt).collect();
    grid.push(t1);
    let mut breaks = Vec::new();
    law.breakpoints(t0, t1, &mut breaks);
    breaks.extend(extra.iter().filter(|t| **t > t0 && **t < t1));
    if breaks.is_empty() {
        return grid;
    }
    breaks.sort_by(|a, b| a.total_cmp(b));
    // Breakpoints are exact; a grid point within `eps` of one is replaced.
    let eps = SNAP * dt;
    let mut merged: Vec<f64> = Vec::with_capacity(grid.len() + breaks.len());
    let mut b = breaks.into_iter().peekable();
    for g in grid {
        while let Some(&t) = b.peek() {
            if t < g - eps {
                if merged.last().map_or(true, |l| t - l > eps) {
                    merged.push(t);
                }
                b.next();
            } else {
                break;
            }
        }
        let mut v = g;
        while let Some(&t) = b.peek() {
            if (t - g).abs() <= eps {
                if g != t0 && g != t1 {
                    v = t;
                }
                b.next();
            } else {
                break;
            }
        }
        if merged.last().map_or(true, |l| v - l > eps) {
            merged.push(v);
        }
    }
    // Forced samples win over nearby law breakpoints.
    for &e in extra.iter().filter(|t| **t > t0 && **t < t1) {
        let j = merged.partition_point(|t| *t < e);
        for k in [j.wrapping_sub(1), j] {
            if k < merged.len() && (merged[k] - e).abs() <= eps {
                merged[k] = e;
            }
        }
    }
    merged
}

/// Fixed-step RK4 rollout of `sys` under `law` on `[t0, t1]`.
///
/// Steps are `dt` long except where a control breakpoint of `law` falls
/// inside a step; the step is then split at the breakpoint. Controls are
/// saturated to the system bounds.
pub fn integrate(
    sys: &dyn ControlAffineSystem,
    x0: &[f64],
    t0: f64,
    t1: f64,
    law: &dyn ControlLaw,
    dt: f64,
) -> Result<StateTrajectory> {
    integrate_with_breaks(sys, x0, t0, t1, law, dt, &[])
}

/// [`integrate`] with additional times at which samples are forced.
pub fn integrate_with_breaks(
    sys: &dyn ControlAffineSystem,
    x0: &[f64],
    t0: f64,
    t1: f64,
    law: &dyn ControlLaw,
    dt: f64,
    extra: &[f64],
) -> Result<StateTrajectory> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    check_dim("initial state", n, x0.len())?;
    if !(dt > 0.0) || !(t1 > t0) {
        return usage(format!("integration needs dt > 0 and t1 > t0 (dt={dt}, [{t0}, {t1}])"));
    }
    let times = step_times(t0, t1, dt, law, extra);
    let mut states = Vec::with_capacity(times.len() * n);
    let mut controls = Vec::with_capacity((times.len() - 1) * m);
    states.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut u = vec![0.0; m];
    let mut ws = Rk4Workspace::new(n);
    for w in times.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        law.control(0.5 * (ta + tb), &x, &mut u);
        saturate_in_place(&mut u, sys.u_min(), sys.u_max());
        ws.step(sys, ta, tb - ta, &mut x, &u);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: tb });
        }
        states.extend_from_slice(&x);
        controls.extend_from_slice(&u);
    }
    Ok(StateTrajectory {
        n,
        m,
        times,
        states,
        controls,
    })
}

struct Rk4Workspace {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, sys: &dyn ControlAffineSystem, t: f64, h: f64, x: &mut [f64], u: &[f64]) {
        let n = x.len();
        let [k1, k2, k3, k4] = &mut self.k;
        sys.dynamics(t, x, u, k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        sys.dynamics(t + 0.5 * h, &self.tmp, u, k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        sys.dynamics(t + 0.5 * h, &self.tmp, u, k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * k3[i];
        }
        sys.dynamics(t + h, &self.tmp, u, k4);
        for i in 0..n {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_integrator_closed_forms() {
        let sys = make_double_integrator();
        let zero = ControlSignal::constant(vec![0.0, 0.0]);
        let tr = integrate(&sys, &[0.0, 1.0, 0.0, 0.0], 0.0, 1.0, &zero, 0.01).unwrap();
        assert_eq!(tr.start(), 0.0);
        assert!((tr.last_state()[0] - 1.0).abs() < 1e-9);
        let push = ControlSignal::constant(vec![1.0, 0.0]);
        let tr = integrate(&sys, &[0.0; 4], 0.0, 1.0, &push, 0.01).unwrap();
        assert!((tr.last_state()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(saturate(&[1.0, -2.0], &[-50.0, -50.0], &[50.0, 50.0]), vec![1.0, -2.0]);
        assert_eq!(saturate(&[100.0, -100.0], &[-50.0, -50.0], &[50.0, 50.0]), vec![50.0, -50.0]);
        assert_eq!(saturate(&[50.0, -50.0], &[-50.0, -50.0], &[50.0, 50.0]), vec![50.0, -50.0]);
    }

    #[test]
    fn action_splits_steps_and_is_saturated() {
        let sys = make_double_integrator();
        let sig = ControlSignal::constant(vec![0.0, 0.0]).with_action(Action {
            value: vec![80.0, -3.0],
            application_time: 0.0123,
            duration: 1e-4,
        });
        let tr = integrate(&sys, &[0.0; 4], 0.0, 0.05, &sig, 0.01).unwrap();
        assert!(tr.times().contains(&0.0123));
        assert!(tr.times().iter().any(|t| (t - 0.0124).abs() < 1e-15));
        let j = tr.index_at(0.0123);
        assert_eq!(tr.control(j), &[50.0, -3.0]);
        // Velocity gain is exactly u * lambda.
        assert!((tr.last_state()[1] - 50.0 * 1e-4).abs() < 1e-12);
        for j in 0..tr.len() - 1 {
            assert!(tr.control(j).iter().all(|u| u.abs() <= 50.0));
        }
    }

    #[test]
    fn signal_evaluation_is_stable() {
        let sig = ControlSignal::piecewise(1, vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(sig.value_at(-1.0), vec![1.0]);
        assert_eq!(sig.value_at(0.5), vec![2.0]);
        assert_eq!(sig.value_at(0.5), vec![2.0]);
        assert_eq!(sig.value_at(7.0), vec![3.0]);
        let mut bp = Vec::new();
        sig.breakpoints(0.0, 0.9, &mut bp);
        assert_eq!(bp, vec![0.5]);
    }

    #[test]
    fn replaying_applied_controls_reproduces_the_rollout() {
        let sys = make_quadrotor12();
        let pd = make_pd_height_hold(&sys, 1.0, 4.0, 4.0).unwrap();
        let mut x0 = vec![0.0; 12];
        x0[2] = 0.6;
        x0[6] = 0.05;
        let a = integrate(&sys, &x0, 0.0, 1.3, &pd, 0.01).unwrap();
        let replay = ControlSignal::from_trajectory(&a);
        let b = integrate(&sys, &x0, 0.0, 1.3, &replay, 0.01).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn integration_is_deterministic() {
        let sys = make_quadrotor12();
        let x0: Vec<f64> = (0..12).map(|i| 0.01 * i as f64).collect();
        let u = ControlSignal::constant(vec![1.5, 1.6, 1.4, 1.5]);
        let a = integrate(&sys, &x0, 0.0, 2.0, &u, 0.01).unwrap();
        let b = integrate(&sys, &x0, 0.0, 2.0, &u, 0.01).unwrap();
        assert_eq!(a.states(), b.states());
    }

    #[test]
    fn divergence_reports_time() {
        let sys = FnSystem::new(
            1,
            |_, x: &[f64], g: &mut [f64]| g[0] = x[0] * x[0],
            |_, _: &[f64], h: &mut [f64]| h[0] = 0.0,
            vec![-1.0],
            vec![1.0],
            vec![0],
        )
        .unwrap();
        let u = ControlSignal::constant(vec![0.0]);
        match integrate(&sys, &[1.0], 0.0, 5.0, &u, 0.01) {
            Err(Error::IntegrationDiverged { time }) => assert!(time > 0.9 && time < 1.2),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn rk4_is_fourth_order_on_the_quadrotor() {
        let sys = make_quadrotor12();
        let mut x0 = vec![0.0; 12];
        x0[6] = 0.2;
        x0[7] = -0.1;
        x0[9] = 0.5;
        x0[11] = 0.3;
        let u = ControlSignal::constant(vec![1.6, 1.3, 1.5, 1.4]);
        let end = |dt: f64| integrate(&sys, &x0, 0.0, 1.0, &u, dt).unwrap().last_state().to_vec();
        let dt = 0.05;
        let reference = end(dt / 64.0);
        let err = |x: Vec<f64>| -> f64 {
            x.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        };
        let ratio = err(end(dt)) / err(end(dt / 2.0));
        assert!((8.0..=32.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn fd_system_linearization_is_affine_in_control() {
        let sys = make_quadrotor12();
        let mut x = vec![0.0; 12];
        x[6] = 0.3;
        x[7] = -0.2;
        x[8] = 0.7;
        let u = [1.0, 2.0, 3.0, 4.0];
        let du = [0.5, -0.25, 0.125, 1.0];
        let u2: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + b).collect();
        let (mut f1, mut f2) = (vec![0.0; 12], vec![0.0; 12]);
        sys.dynamics(0.0, &x, &u, &mut f1);
        sys.dynamics(0.0, &x, &u2, &mut f2);
        let mut h = vec![0.0; 48];
        sys.input_map(0.0, &x, &mut h);
        for i in 0..12 {
            let hdu: f64 = (0..4).map(|j| h[i * 4 + j] * du[j]).sum();
            assert!((f2[i] - f1[i] - hdu).abs() < 1e-12);
        }
    }
}
