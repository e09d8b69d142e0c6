use super::objective::ErgodicObjective;
use crate::dynamics::{ControlAffineSystem, StateTrajectory};
use crate::error::{check_dim, usage, Error, Result};
use crate::fourier::FourierBasis;

/// `rho(t)` sampled on the forward time grid of the trajectory it was
/// integrated along.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    n: usize,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl CostateTrajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.n..(j + 1) * self.n]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Sensitivity `l(x)` of the ergodic cost to the state at one instant,
/// lifted from the ergodic coordinates to all `n` states.
///
/// `window` is `(t0erg, horizon_end)`.
#[allow(clippy::too_many_arguments)]
pub fn running_grad(
    basis: &FourierBasis,
    c_now: &[f64],
    phi: &[f64],
    q: f64,
    window: (f64, f64),
    s: &[f64],
    projection: &[usize],
    n: usize,
) -> Result<Vec<f64>> {
    check_dim("coefficient vector", basis.len(), c_now.len())?;
    check_dim("coefficient vector", basis.len(), phi.len())?;
    check_dim("ergodic point", basis.nu(), s.len())?;
    let span = window.1 - window.0;
    if span <= 0.0 {
        return usage("running gradient needs a window of positive length");
    }
    let weights: Vec<f64> = basis
        .lambda()
        .iter()
        .zip(c_now.iter().zip(phi))
        .map(|(l, (c, p))| 2.0 * q / span * l * (c - p))
        .collect();
    let mut g = vec![0.0; basis.nu()];
    basis.weighted_grad(s, &weights, &mut g);
    let mut out = vec![0.0; n];
    for (gi, &i) in g.iter().zip(projection) {
        out[i] = *gi;
    }
    Ok(out)
}

/// Backward RK4 solve of `rho' = -l(t, x)^T - D_x f^T rho`, `rho(end) = 0`,
/// along `traj`, with a caller-supplied forcing `l`.
///
/// Midpoint states come from cubic Hermite interpolation of the samples and
/// their derivatives; the control on each interval is the one recorded in
/// `traj`.
pub fn integrate_costate_with(
    sys: &dyn ControlAffineSystem,
    traj: &StateTrajectory,
    forcing: &mut dyn FnMut(f64, &[f64], &mut [f64]),
) -> Result<CostateTrajectory> {
    let n = sys.state_dim();
    check_dim("trajectory state", n, traj.state_dim())?;
    let len = traj.len();
    let mut values = vec![0.0; len * n];
    let times = traj.times().to_vec();
    if len < 2 {
        return Ok(CostateTrajectory { n, times, values });
    }
    let mut fa = vec![0.0; n];
    let mut fb = vec![0.0; n];
    let mut xm = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    let mut rhs = Rhs {
        ell: vec![0.0; n],
        jac: vec![0.0; n * n],
    };
    for j in (0..len - 1).rev() {
        let (ta, tb) = (times[j], times[j + 1]);
        let h = tb - ta;
        let u = traj.control(j);
        let (xa, xb) = (traj.state(j), traj.state(j + 1));
        sys.dynamics(ta, xa, u, &mut fa);
        sys.dynamics(tb, xb, u, &mut fb);
        for i in 0..n {
            xm[i] = 0.5 * (xa[i] + xb[i]) + h * (fa[i] - fb[i]) / 8.0;
        }
        let tm = 0.5 * (ta + tb);
        let (head, tail) = values.split_at_mut((j + 1) * n);
        let rho_b = &tail[..n];
        let rho_a = &mut head[j * n..];

        rhs.eval(sys, forcing, tb, xb, u, rho_b, &mut k[0]);
        for i in 0..n {
            tmp[i] = rho_b[i] - 0.5 * h * k[0][i];
        }
        rhs.eval(sys, forcing, tm, &xm, u, &tmp, &mut k[1]);
        for i in 0..n {
            tmp[i] = rho_b[i] - 0.5 * h * k[1][i];
        }
        rhs.eval(sys, forcing, tm, &xm, u, &tmp, &mut k[2]);
        for i in 0..n {
            tmp[i] = rho_b[i] - h * k[2][i];
        }
        rhs.eval(sys, forcing, ta, xa, u, &tmp, &mut k[3]);
        for i in 0..n {
            rho_a[i] = rho_b[i] - h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if rho_a[..n].iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationDiverged { time: ta });
        }
    }
    Ok(CostateTrajectory { n, times, values })
}

struct Rhs {
    ell: Vec<f64>,
    jac: Vec<f64>,
}

impl Rhs {
    #[allow(clippy::too_many_arguments)]
    fn eval(
        &mut self,
        sys: &dyn ControlAffineSystem,
        forcing: &mut dyn FnMut(f64, &[f64], &mut [f64]),
        t: f64,
        x: &[f64],
        u: &[f64],
        rho: &[f64],
        out: &mut [f64],
    ) {
        let n = rho.len();
        forcing(t, x, &mut self.ell);
        sys.jacobian(t, x, u, &mut self.jac);
        for i in 0..n {
            let mut at_rho = 0.0;
            for r in 0..n {
                at_rho += self.jac[r * n + i] * rho[r];
            }
            out[i] = -self.ell[i] - at_rho;
        }
    }
}

/// Costate of the ergodic cost along `x_def`, with forcing
/// `l = sum_k w_k dF_k/dx` evaluated from the scored coefficients `combined`.
pub fn integrate_costate(
    sys: &dyn ControlAffineSystem,
    x_def: &StateTrajectory,
    objective: &ErgodicObjective,
    combined: &[f64],
) -> Result<CostateTrajectory> {
    let basis = objective.basis;
    let weights = objective.gradient_weights(combined);
    let projection = objective.projection;
    let nu = basis.nu();
    let mut s = vec![0.0; nu];
    let mut g = vec![0.0; nu];
    let mut forcing = |_t: f64, x: &[f64], out: &mut [f64]| {
        for (si, &i) in s.iter_mut().zip(projection) {
            *si = x[i];
        }
        basis.weighted_grad(&s, &weights, &mut g);
        if let Some(b) = objective.barrier {
            b.add_grad(basis.domain().bounds(), &s, &mut g);
        }
        out.fill(0.0);
        for (gi, &i) in g.iter().zip(projection) {
            out[i] = *gi;
        }
        for l in objective.limits {
            l.add_grad(x, out);
        }
    };
    integrate_costate_with(sys, x_def, &mut forcing)
}

/// `rho^T [f(t, x, u_candidate) - f(t, x, u_default)]`.
pub fn mode_insertion_gradient(
    rho: &[f64],
    sys: &dyn ControlAffineSystem,
    t: f64,
    x: &[f64],
    u_candidate: &[f64],
    u_default: &[f64],
) -> f64 {
    let n = sys.state_dim();
    let mut f1 = vec![0.0; n];
    let mut f0 = vec![0.0; n];
    sys.dynamics(t, x, u_candidate, &mut f1);
    sys.dynamics(t, x, u_default, &mut f0);
    rho.iter().zip(f1.iter().zip(&f0)).map(|(r, (a, b))| r * (a - b)).sum()
}
