//! Gaussian target beliefs maintained by an extended Kalman filter, with
//! sensor-range gating and detection bookkeeping.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, usage, Error, Result};
use crate::information_density::MeasurementModel;

/// Gaussian belief over one target's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetBelief {
    pub id: u32,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub detected: bool,
}

impl TargetBelief {
    pub fn new(id: u32, mean: Vec<f64>, cov: DMatrix<f64>, detected: bool) -> Result<Self> {
        check_dim("belief covariance", mean.len(), cov.nrows())?;
        check_dim("belief covariance", mean.len(), cov.ncols())?;
        let b = Self {
            id,
            mean: DVector::from_vec(mean),
            cov,
            detected,
        };
        if !b.is_spd() {
            return usage("belief covariance must be symmetric positive definite");
        }
        Ok(b)
    }

    /// Placeholder for a target nobody has seen yet.
    pub fn undetected(id: u32, m: usize) -> Self {
        Self {
            id,
            mean: DVector::zeros(m),
            cov: DMatrix::identity(m, m),
            detected: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.cov.clone().symmetric_eigen().eigenvalues.min()
    }

    /// Symmetric within 1e-12 (relative) with positive eigenvalues.
    pub fn is_spd(&self) -> bool {
        let asym = (&self.cov - self.cov.transpose()).amax();
        asym <= 1e-12 * self.cov.amax().max(1.0) && self.min_eigenvalue() > 0.0
    }

    pub fn error_norm(&self, truth: &[f64]) -> f64 {
        self.mean.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Identity transition: the mean stays, `C` is added to the covariance.
pub fn ekf_predict(belief: &TargetBelief, process_cov: &DMatrix<f64>) -> TargetBelief {
    let mut out = belief.clone();
    out.cov += process_cov;
    out
}

/// Result of [`ekf_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    pub belief: TargetBelief,
    /// `false` when the update was skipped because the innovation
    /// covariance or the model was singular at the prior mean.
    pub applied: bool,
}

/// Reciprocal condition number below which an innovation covariance is
/// treated as singular.
const MIN_RCOND: f64 = 1e-12;

/// EKF measurement update linearized at the prior mean, with wrapped angle
/// innovations and the Joseph-form covariance.
pub fn ekf_update(
    belief: &TargetBelief,
    model: &MeasurementModel,
    sensor: &[f64],
    z: &[f64],
) -> Result<UpdateOutcome> {
    check_dim("measurement", model.mu(), z.len())?;
    check_dim("belief dimension", model.m(), belief.dim())?;
    let skipped = |why: &str| {
        log::warn!("target {}: update skipped ({why})", belief.id);
        Ok(UpdateOutcome {
            belief: belief.clone(),
            applied: false,
        })
    };
    let mean = belief.mean.as_slice();
    let (pred, h) = match (model.predict(mean, sensor), model.jacobian(mean, sensor)) {
        (Ok(p), Ok(h)) => (p, h),
        (Err(Error::ModelSingular(_)), _) | (_, Err(Error::ModelSingular(_))) => {
            return skipped("model singular at the prior mean")
        }
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let p = &belief.cov;
    let s = &h * p * h.transpose() + model.noise_cov();
    let eig = s.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > MIN_RCOND * hi) {
        return skipped("innovation covariance near singular");
    }
    let Some(s_inv) = s.try_inverse() else {
        return skipped("innovation covariance not invertible");
    };
    let k = p * h.transpose() * s_inv;
    let nu = DVector::from_vec(model.innovation(z, &pred));
    let m = belief.dim();
    let ikh = DMatrix::identity(m, m) - &k * &h;
    let cov = &ikh * p * ikh.transpose() + &k * model.noise_cov() * k.transpose();
    let mut out = belief.clone();
    out.mean += &k * nu;
    out.cov = (&cov + cov.transpose()) * 0.5;
    Ok(UpdateOutcome {
        belief: out,
        applied: true,
    })
}

/// Whether a target is within sensor range: strict `|sensor - target| < r`.
pub fn range_gate(sensor: &[f64], target: &[f64], r: f64) -> bool {
    let d2: f64 = sensor.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum();
    d2.sqrt() < r
}

/// Localized when detected and strictly within `threshold` of the truth.
pub fn localization_status(belief: &TargetBelief, truth: &[f64], threshold: f64) -> bool {
    belief.detected && belief.error_norm(truth) < threshold
}

/// Ground-truth motion of one target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTruth {
    pub id: u32,
    /// Time from which the target exists and can be detected.
    pub appear_at: f64,
    m: usize,
    times: Vec<f64>,
    points: Vec<f64>,
}

impl TargetTruth {
    pub fn fixed(id: u32, position: Vec<f64>) -> Self {
        Self {
            id,
            appear_at: f64::NEG_INFINITY,
            m: position.len(),
            times: vec![0.0],
            points: position,
        }
    }

    /// Linear interpolation through waypoints; held constant outside them.
    pub fn waypoints(id: u32, times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != points.len() {
            return usage("waypoint times and points must be nonempty and aligned");
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return usage("waypoint times must increase");
        }
        let m = points[0].len();
        for p in &points {
            check_dim("waypoint", m, p.len())?;
        }
        Ok(Self {
            id,
            appear_at: f64::NEG_INFINITY,
            m,
            times,
            points: points.concat(),
        })
    }

    /// Brownian path from `start` on `[t0, t1]` sampled every `dt`, with
    /// per-coordinate increment variance `sigma2 * dt`. Coordinates listed
    /// in `bounds` are reflected into `[0, L]`.
    pub fn diffusion(
        id: u32,
        start: Vec<f64>,
        sigma2: f64,
        (t0, t1, dt): (f64, f64, f64),
        bounds: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if !(dt > 0.0) || !(t1 >= t0) || !(sigma2 >= 0.0) {
            return usage("diffusion needs dt > 0, t1 >= t0 and sigma2 >= 0");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = start.len();
        let steps = ((t1 - t0) / dt).ceil() as usize;
        let mut times = Vec::with_capacity(steps + 1);
        let mut points = Vec::with_capacity((steps + 1) * m);
        let mut x = start;
        let sd = (sigma2 * dt).sqrt();
        for j in 0..=steps {
            times.push(t0 + j as f64 * dt);
            points.extend_from_slice(&x);
            for (i, xi) in x.iter_mut().enumerate() {
                let step: f64 = rng.sample(StandardNormal);
                *xi += sd * step;
                if let Some(&l) = bounds.get(i) {
                    *xi = reflect(*xi, l);
                }
            }
        }
        Ok(Self {
            id,
            appear_at: f64::NEG_INFINITY,
            m,
            times,
            points,
        })
    }

    pub fn appearing_at(mut self, t: f64) -> Self {
        self.appear_at = t;
        self
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn present(&self, t: f64) -> bool {
        t >= self.appear_at
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        let m = self.m;
        let k = self.times.partition_point(|s| *s <= t);
        if k == 0 {
            return self.points[..m].to_vec();
        }
        if k == self.times.len() {
            return self.points[(k - 1) * m..k * m].to_vec();
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let f = (t - ta) / (tb - ta);
        let a = &self.points[(k - 1) * m..k * m];
        let b = &self.points[k * m..(k + 1) * m];
        a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect()
    }
}

fn reflect(x: f64, l: f64) -> f64 {
    let p = x.rem_euclid(2.0 * l);
    if p > l {
        2.0 * l - p
    } else {
        p
    }
}

/// One labeled measurement taken in a sensing tick.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub id: u32,
    pub z: Vec<f64>,
    /// This measurement triggered the target's first detection.
    pub new_detection: bool,
}

/// Sensing parameters used by [`detect_and_measure`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensing {
    /// Sensor range over the first `nu` coordinates.
    pub range: f64,
    pub nu: usize,
    /// Standard deviation of a fresh belief along every coordinate.
    pub init_sigma: f64,
}

/// Belief of a freshly detected target: `range / 2` from the sensor along
/// the measured bearing, covariance `init_sigma^2 I`.
pub fn initial_belief(id: u32, sensor: &[f64], z: &[f64], m: usize, sensing: &Sensing) -> Result<TargetBelief> {
    let reach = 0.5 * sensing.range;
    let dir = match (m, z.len()) {
        (2, 1) => vec![z[0].sin(), z[0].cos()],
        (3, 2) => vec![z[1].cos() * z[0].sin(), z[1].cos() * z[0].cos(), z[1].sin()],
        _ => return usage(format!("no bearing initializer for {m} parameters from {} angles", z.len())),
    };
    let mean = dir.iter().zip(sensor).map(|(d, s)| s + reach * d).collect();
    let cov = DMatrix::from_diagonal_element(m, m, sensing.init_sigma.powi(2));
    TargetBelief::new(id, mean, cov, true)
}

/// One sensing tick: every present target within range yields one noisy
/// measurement drawn from its own stream `rngs[i]`; targets seen for the
/// first time get an initial belief. `beliefs[i]` must track `truths[i]`.
pub fn detect_and_measure(
    truths: &[TargetTruth],
    beliefs: &mut [TargetBelief],
    sensor: &[f64],
    model: &MeasurementModel,
    sensing: &Sensing,
    rngs: &mut [ChaCha8Rng],
    t: f64,
) -> Result<Vec<Measurement>> {
    check_dim("target beliefs", truths.len(), beliefs.len())?;
    check_dim("target noise streams", truths.len(), rngs.len())?;
    let mut out = Vec::new();
    for ((truth, belief), rng) in truths.iter().zip(beliefs.iter_mut()).zip(rngs.iter_mut()) {
        if truth.id != belief.id {
            return usage(format!("belief {} paired with target {}", belief.id, truth.id));
        }
        if !truth.present(t) {
            continue;
        }
        let pos = truth.position(t);
        if !range_gate(&sensor[..sensing.nu], &pos[..sensing.nu], sensing.range) {
            continue;
        }
        let z = match model.sample(&pos, sensor, rng) {
            Ok(z) => z,
            Err(Error::ModelSingular(_)) => continue,
            Err(e) => return Err(e),
        };
        let new_detection = !belief.detected;
        if new_detection {
            *belief = initial_belief(truth.id, sensor, &z, model.m(), sensing)?;
        }
        out.push(Measurement {
            id: truth.id,
            z,
            new_detection,
        });
    }
    Ok(out)
}

/// One row of the belief trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefRow {
    pub time: f64,
    pub id: u32,
    pub detected: bool,
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub localized: bool,
}

impl BeliefRow {
    pub fn new(time: f64, belief: &TargetBelief, localized: bool) -> Self {
        Self {
            time,
            id: belief.id,
            detected: belief.detected,
            mean: belief.mean.iter().copied().collect(),
            cov_diag: belief.cov.diagonal().iter().copied().collect(),
            localized,
        }
    }
}

/// Belief trace as CSV: `time,id,detected,mean_0..,cov_0..,localized`.
pub fn belief_csv(rows: &[BeliefRow]) -> String {
    let m = rows.first().map_or(0, |r| r.mean.len());
    let mut s = String::from("time,id,detected");
    for i in 0..m {
        write!(s, ",mean_{i}").unwrap();
    }
    for i in 0..m {
        write!(s, ",cov_{i}{i}").unwrap();
    }
    s.push_str(",localized\n");
    for r in rows {
        write!(s, "{},{},{}", r.time, r.id, r.detected as u8).unwrap();
        for v in r.mean.iter().chain(&r.cov_diag) {
            write!(s, ",{v}").unwrap();
        }
        writeln!(s, ",{}", r.localized as u8).unwrap();
    }
    s
}

#[cfg(test)]
mod tests;
