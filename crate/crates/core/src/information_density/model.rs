use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};

/// `(alpha, sensor, out)`; writes a prediction or a row-major Jacobian.
pub type ModelFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync>;

/// Measurement `z = Y(alpha, sensor) + noise`, noise `N(0, Sigma)`.
#[derive(Clone)]
pub struct MeasurementModel {
    m: usize,
    mu: usize,
    sensor_dim: usize,
    predict: ModelFn,
    jacobian: ModelFn,
    noise_cov: DMatrix<f64>,
    noise_inv: DMatrix<f64>,
    noise_chol: DMatrix<f64>,
    angular: Vec<bool>,
}

impl fmt::Debug for MeasurementModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementModel")
            .field("m", &self.m)
            .field("mu", &self.mu)
            .field("sensor_dim", &self.sensor_dim)
            .field("noise_cov", &self.noise_cov)
            .field("angular", &self.angular)
            .finish()
    }
}

impl MeasurementModel {
    /// `angular[i]` marks measurement components whose innovations wrap
    /// to `(-pi, pi]`. Fails if `noise_cov` is not symmetric positive
    /// definite.
    pub fn new(
        m: usize,
        mu: usize,
        sensor_dim: usize,
        predict: ModelFn,
        jacobian: ModelFn,
        noise_cov: DMatrix<f64>,
        angular: Vec<bool>,
    ) -> Result<Self> {
        check_dim("noise covariance rows", mu, noise_cov.nrows())?;
        check_dim("noise covariance cols", mu, noise_cov.ncols())?;
        check_dim("angular flags", mu, angular.len())?;
        let asym = (&noise_cov - noise_cov.transpose()).amax();
        if asym > 1e-12 * noise_cov.amax().max(1.0) {
            return Err(Error::Config("noise covariance is not symmetric".into()));
        }
        let chol = noise_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("noise covariance is not positive definite".into()))?;
        Ok(Self {
            m,
            mu,
            sensor_dim,
            predict,
            jacobian,
            noise_inv: chol.inverse(),
            noise_chol: chol.l(),
            noise_cov,
            angular,
        })
    }

    /// Target parameter dimension `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Measurement dimension.
    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn sensor_dim(&self) -> usize {
        self.sensor_dim
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn noise_inv(&self) -> &DMatrix<f64> {
        &self.noise_inv
    }

    pub fn angular(&self) -> &[bool] {
        &self.angular
    }

    pub fn predict_into(&self, alpha: &[f64], sensor: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("target parameters", self.m, alpha.len())?;
        check_dim("sensor state", self.sensor_dim, sensor.len())?;
        (self.predict)(alpha, sensor, out)
    }

    pub fn predict(&self, alpha: &[f64], sensor: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.mu];
        self.predict_into(alpha, sensor, &mut out)?;
        Ok(out)
    }

    /// `dY/dalpha`, row-major `mu x M`.
    pub fn jacobian_into(&self, alpha: &[f64], sensor: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim("target parameters", self.m, alpha.len())?;
        check_dim("sensor state", self.sensor_dim, sensor.len())?;
        (self.jacobian)(alpha, sensor, out)
    }

    pub fn jacobian(&self, alpha: &[f64], sensor: &[f64]) -> Result<DMatrix<f64>> {
        let mut out = vec![0.0; self.mu * self.m];
        self.jacobian_into(alpha, sensor, &mut out)?;
        Ok(DMatrix::from_row_slice(self.mu, self.m, &out))
    }

    /// `z - pred`, with angular components wrapped to `(-pi, pi]`.
    pub fn innovation(&self, z: &[f64], pred: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(pred)
            .zip(&self.angular)
            .map(|((a, b), ang)| if *ang { wrap_angle(a - b) } else { a - b })
            .collect()
    }

    /// Noisy measurement of `alpha`.
    pub fn sample<R: Rng + ?Sized>(&self, alpha: &[f64], sensor: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        let mut z = self.predict(alpha, sensor)?;
        let n: Vec<f64> = (0..self.mu).map(|_| rng.sample(StandardNormal)).collect();
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += (0..=i).map(|j| self.noise_chol[(i, j)] * n[j]).sum::<f64>();
            if self.angular[i] {
                *zi = wrap_angle(*zi);
            }
        }
        Ok(z)
    }
}

/// Maps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Planar squared range below which the azimuth is undefined.
const SINGULAR_RANGE2: f64 = 1e-24;

/// Azimuth and elevation of a 3D target seen from a 3D sensor position.
///
/// Both angles are taken from the target-minus-sensor vector `d`:
/// azimuth `atan2(d_x, d_y)` is measured from `+y` toward `+x`, and
/// elevation `atan2(d_z, |d_xy|)` is negative for targets below the
/// sensor. Noise covariance defaults to `diag(0.1, 0.1)` rad^2.
pub fn bearing_model_3d() -> MeasurementModel {
    bearing_model_3d_with(DMatrix::from_diagonal_element(2, 2, 0.1)).expect("default noise is positive definite")
}

pub fn bearing_model_3d_with(noise_cov: DMatrix<f64>) -> Result<MeasurementModel> {
    let predict: ModelFn = Arc::new(|a: &[f64], s: &[f64], out: &mut [f64]| {
        let (dx, dy, dz) = (a[0] - s[0], a[1] - s[1], a[2] - s[2]);
        let rho2 = dx * dx + dy * dy;
        if rho2 + dz * dz <= SINGULAR_RANGE2 {
            return Err(Error::ModelSingular("sensor coincides with target".into()));
        }
        out[0] = dx.atan2(dy);
        out[1] = dz.atan2(rho2.sqrt());
        Ok(())
    });
    let jacobian: ModelFn = Arc::new(|a: &[f64], s: &[f64], out: &mut [f64]| {
        let (dx, dy, dz) = (a[0] - s[0], a[1] - s[1], a[2] - s[2]);
        let rho2 = dx * dx + dy * dy;
        if rho2 <= SINGULAR_RANGE2 {
            return Err(Error::ModelSingular("target on the sensor's vertical axis".into()));
        }
        let rho = rho2.sqrt();
        let r2 = rho2 + dz * dz;
        out[0] = dy / rho2;
        out[1] = -dx / rho2;
        out[2] = 0.0;
        out[3] = -dz * dx / (rho * r2);
        out[4] = -dz * dy / (rho * r2);
        out[5] = rho / r2;
        Ok(())
    });
    MeasurementModel::new(3, 2, 3, predict, jacobian, noise_cov, vec![true, true])
}

/// Azimuth-only reduction of [`bearing_model_3d`] for planar targets and
/// sensors, with measurement variance `variance` rad^2.
pub fn bearing_model_2d(variance: f64) -> Result<MeasurementModel> {
    let predict: ModelFn = Arc::new(|a: &[f64], s: &[f64], out: &mut [f64]| {
        let (dx, dy) = (a[0] - s[0], a[1] - s[1]);
        if dx * dx + dy * dy <= SINGULAR_RANGE2 {
            return Err(Error::ModelSingular("sensor coincides with target".into()));
        }
        out[0] = dx.atan2(dy);
        Ok(())
    });
    let jacobian: ModelFn = Arc::new(|a: &[f64], s: &[f64], out: &mut [f64]| {
        let (dx, dy) = (a[0] - s[0], a[1] - s[1]);
        let rho2 = dx * dx + dy * dy;
        if rho2 <= SINGULAR_RANGE2 {
            return Err(Error::ModelSingular("sensor coincides with target".into()));
        }
        out[0] = dy / rho2;
        out[1] = -dx / rho2;
        Ok(())
    });
    MeasurementModel::new(2, 1, 2, predict, jacobian, DMatrix::from_element(1, 1, variance), vec![true])
}
