use super::objective::ErgodicObjective;
use crate::dynamics::StateTrajectory;
use crate::error::{usage, Result};

/// `L(t) = dB/dt` along a trajectory whose running history integral at `t`
/// is `hist` and whose current ergodic coordinates are `s`:
/// `(2Q / (t - t0erg)) sum_k Lambda_k (c_k(t) - phi_k) (F_k(s) - c_k(t))`,
/// with `c(t)` the blended running coefficients.
pub fn ergodic_lagrangian(objective: &ErgodicObjective, hist: &[f64], t: f64, s: &[f64]) -> Option<f64> {
    let span = t - objective.t0erg;
    if span <= 0.0 {
        return None;
    }
    let basis = objective.basis;
    let own: Vec<f64> = hist.iter().map(|h| h / span).collect();
    let c = objective.combine(&own);
    let f = basis.eval_vec(s);
    let sum: f64 = basis
        .lambda()
        .iter()
        .zip(c.iter().zip(objective.phi))
        .zip(f.iter().zip(&own))
        .map(|((l, (ck, pk)), (fk, ok))| l * (ck - pk) * (fk - ok))
        .sum();
    Some(2.0 * objective.q * objective.own_weight * sum / span)
}

/// Integral of [`ergodic_lagrangian`] over `interval` along `traj`, which
/// must start at `objective.t_now` where the running history integral is
/// `objective.history`. Returns `None` when the interval touches `t0erg`.
pub fn contraction_bound(
    objective: &ErgodicObjective,
    traj: &StateTrajectory,
    interval: (f64, f64),
) -> Result<Option<f64>> {
    let (a, b) = interval;
    if b < a || a < traj.start() || b > traj.end() + 1e-12 {
        return usage(format!("contraction interval [{a}, {b}] outside the trajectory"));
    }
    if b == a {
        return Ok(Some(0.0));
    }
    if a <= objective.t0erg {
        return Ok(None);
    }
    let basis = objective.basis;
    let nu = basis.nu();
    let mut hist = objective.history.to_vec();
    let mut s = vec![0.0; nu];
    let mut f_prev = vec![0.0; basis.len()];
    let mut f_next = vec![0.0; basis.len()];
    traj.project(0, objective.projection, &mut s);
    basis.eval_all(&s, &mut f_prev);
    let mut total = 0.0;
    let mut l_prev: Option<(f64, f64)> = None;
    for j in 0..traj.len() {
        let t = traj.times()[j];
        if j > 0 {
            let dt = t - traj.times()[j - 1];
            traj.project(j, objective.projection, &mut s);
            basis.eval_all(&s, &mut f_next);
            for ((h, p), q) in hist.iter_mut().zip(&f_prev).zip(&f_next) {
                *h += 0.5 * dt * (p + q);
            }
            std::mem::swap(&mut f_prev, &mut f_next);
        }
        if t < a - 1e-12 || t > b + 1e-12 {
            continue;
        }
        traj.project(j, objective.projection, &mut s);
        let l = ergodic_lagrangian(objective, &hist, t, &s).unwrap_or(0.0);
        if let Some((tp, lp)) = l_prev {
            total += 0.5 * (t - tp) * (l + lp);
        }
        l_prev = Some((t, l));
    }
    Ok(Some(total))
}
