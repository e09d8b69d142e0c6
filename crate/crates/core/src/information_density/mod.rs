//! Expected information density: Fisher information of a measurement model
//! averaged over a target belief and compressed by its determinant.

mod model;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use model::{bearing_model_2d, bearing_model_3d, bearing_model_3d_with, wrap_angle, MeasurementModel, ModelFn};

use crate::error::{check_dim, usage, Error, Result};
use crate::fourier::{SearchDomain, SpatialGrid};
use crate::target_estimation::TargetBelief;

/// `I = J^T Sigma^-1 J` with `J = dY/dalpha` at `(alpha, sensor)`.
pub fn fim(model: &MeasurementModel, sensor: &[f64], alpha: &[f64]) -> Result<DMatrix<f64>> {
    let m = model.m();
    let mut ws = Workspace::new(model);
    let mut out = vec![0.0; m * m];
    ws.accumulate(model, sensor, alpha, 1.0, &mut out)?;
    Ok(DMatrix::from_row_slice(m, m, &out))
}

/// Scratch buffers for repeated FIM accumulation.
struct Workspace {
    jac: Vec<f64>,
    weighted: Vec<f64>,
}

impl Workspace {
    fn new(model: &MeasurementModel) -> Self {
        let len = model.mu() * model.m();
        Self {
            jac: vec![0.0; len],
            weighted: vec![0.0; len],
        }
    }

    /// `out += w * J^T Sigma^-1 J`, row-major `M x M`.
    fn accumulate(&mut self, model: &MeasurementModel, sensor: &[f64], alpha: &[f64], w: f64, out: &mut [f64]) -> Result<()> {
        let (m, mu) = (model.m(), model.mu());
        model.jacobian_into(alpha, sensor, &mut self.jac)?;
        let inv = model.noise_inv();
        for r in 0..mu {
            for j in 0..m {
                self.weighted[r * m + j] = (0..mu).map(|q| inv[(r, q)] * self.jac[q * m + j]).sum();
            }
        }
        for i in 0..m {
            for j in 0..m {
                let v: f64 = (0..mu).map(|r| self.jac[r * m + i] * self.weighted[r * m + j]).sum();
                out[i * m + j] += w * v;
            }
        }
        Ok(())
    }
}

/// Discretized belief `p(alpha)`: support points and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    m: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl BeliefGrid {
    /// `points` holds `weights.len()` consecutive `m`-vectors.
    pub fn new(m: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_dim("belief support", weights.len() * m, points.len())?;
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return usage("belief weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return usage(format!("belief weights sum to {total}, not 1"));
        }
        Ok(Self { m, points, weights })
    }

    pub fn point_mass(alpha: &[f64]) -> Self {
        Self {
            m: alpha.len(),
            points: alpha.to_vec(),
            weights: vec![1.0],
        }
    }

    /// Axis-aligned grid of `cells` points per axis over `mean +- extent *
    /// sigma_i`, weighted by the Gaussian density.
    pub fn from_gaussian(mean: &[f64], cov: &DMatrix<f64>, cells: usize, extent: f64) -> Result<Self> {
        let m = mean.len();
        check_dim("belief covariance", m, cov.nrows())?;
        if cells == 0 || !(extent > 0.0) {
            return usage("belief grid needs cells > 0 and a positive extent");
        }
        let inv = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Usage("belief covariance is not positive definite".into()))?
            .inverse();
        let half: Vec<f64> = (0..m).map(|i| extent * cov[(i, i)].sqrt()).collect();
        let n = cells.pow(m as u32);
        let mut points = Vec::with_capacity(n * m);
        let mut weights = Vec::with_capacity(n);
        let mut d = vec![0.0; m];
        for flat in 0..n {
            let mut rem = flat;
            for i in (0..m).rev() {
                let j = rem % cells;
                rem /= cells;
                d[i] = if cells == 1 {
                    0.0
                } else {
                    -half[i] + 2.0 * half[i] * j as f64 / (cells - 1) as f64
                };
            }
            let q: f64 = (0..m).map(|i| (0..m).map(|j| d[i] * inv[(i, j)] * d[j]).sum::<f64>()).sum();
            points.extend(d.iter().zip(mean).map(|(a, b)| a + b));
            weights.push((-0.5 * q).exp());
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { m, points, weights })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.m..(i + 1) * self.m]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Planar distances (over the first `nu` coordinates) at which a belief
/// point is informative: `min <= d < max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeGate {
    pub nu: usize,
    pub min: f64,
    pub max: f64,
}

impl RangeGate {
    fn sees(&self, sensor: &[f64], alpha: &[f64]) -> bool {
        let d2: f64 = (0..self.nu).map(|i| (sensor[i] - alpha[i]).powi(2)).sum();
        d2 >= self.min * self.min && d2 < self.max * self.max
    }
}

/// `sum_cells I(sensor, alpha_cell) w_cell`. Belief points where the
/// model is singular contribute nothing.
pub fn expected_info_matrix(model: &MeasurementModel, sensor: &[f64], belief: &BeliefGrid) -> Result<DMatrix<f64>> {
    expected_info_gated(model, sensor, belief, None)
}

/// [`expected_info_matrix`] restricted to belief points within `gate`.
pub fn expected_info_gated(
    model: &MeasurementModel,
    sensor: &[f64],
    belief: &BeliefGrid,
    gate: Option<RangeGate>,
) -> Result<DMatrix<f64>> {
    let m = model.m();
    check_dim("belief dimension", m, belief.dim())?;
    let mut out = vec![0.0; m * m];
    let mut ws = Workspace::new(model);
    accumulate_expected(model, sensor, belief, gate, &mut ws, &mut out)?;
    Ok(DMatrix::from_row_slice(m, m, &out))
}

fn accumulate_expected(
    model: &MeasurementModel,
    sensor: &[f64],
    belief: &BeliefGrid,
    gate: Option<RangeGate>,
    ws: &mut Workspace,
    out: &mut [f64],
) -> Result<()> {
    for (i, &w) in belief.weights().iter().enumerate() {
        let alpha = belief.point(i);
        if w == 0.0 || gate.is_some_and(|g| !g.sees(sensor, alpha)) {
            continue;
        }
        match ws.accumulate(model, sensor, alpha, w, out) {
            Ok(()) | Err(Error::ModelSingular(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

/// Determinant of a row-major square matrix, closed form up to 3x3.
fn det(a: &[f64], m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => DMatrix::from_row_slice(m, m, a).determinant(),
    }
}

/// D-optimality value: the determinant, with negative round-off clipped
/// to zero.
pub fn eid_value(info: &DMatrix<f64>) -> f64 {
    let m = info.nrows();
    let a: Vec<f64> = info.transpose().iter().copied().collect();
    det(&a, m).max(0.0)
}

/// How an EID map is built from beliefs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EidConfig {
    /// Sensor grid shape over the ergodic coordinates.
    pub cells: Vec<usize>,
    /// Minimum of the max-normalized field, in `[0, 1]`.
    pub exploration_floor: f64,
    /// Belief grid points per target coordinate.
    pub belief_cells: usize,
    /// Belief grid half-width in standard deviations.
    pub belief_extent: f64,
    /// Sensor coordinates beyond the ergodic ones, held fixed (e.g. height).
    pub fixed_coordinates: Vec<f64>,
    /// Belief points farther than this from the sensor carry no information.
    pub sensor_range: Option<f64>,
    /// Belief points closer than this carry no information either.
    pub blind_radius: f64,
}

impl Default for EidConfig {
    fn default() -> Self {
        Self {
            cells: vec![40, 40],
            exploration_floor: 0.5,
            belief_cells: 11,
            belief_extent: 3.0,
            fixed_coordinates: Vec::new(),
            sensor_range: None,
            blind_radius: 0.0,
        }
    }
}

impl EidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.exploration_floor) {
            return Err(Error::Config(format!("exploration_floor {} outside [0, 1]", self.exploration_floor)));
        }
        if self.cells.iter().any(|c| *c == 0) || self.cells.is_empty() {
            return Err(Error::Config("EID grid needs at least one cell per dimension".into()));
        }
        if self.belief_cells == 0 || !(self.belief_extent > 0.0) {
            return Err(Error::Config("belief grid needs cells > 0 and a positive extent".into()));
        }
        if self.sensor_range.is_some_and(|r| !(r > self.blind_radius)) {
            return Err(Error::Config("sensor range must exceed the blind radius".into()));
        }
        if !(self.blind_radius >= 0.0) {
            return Err(Error::Config("blind radius must be nonnegative".into()));
        }
        Ok(())
    }
}

/// EID density over `domain`. Each cell is a candidate sensor position
/// (cell center followed by `cfg.fixed_coordinates`); its value is the sum
/// over detected beliefs of the D-optimality of the expected information.
/// The field is max-normalized, raised to `cfg.exploration_floor` where
/// lower, and normalized to a density. An all-zero field becomes uniform.
pub fn build_eid_grid(
    model: &MeasurementModel,
    beliefs: &[TargetBelief],
    domain: &SearchDomain,
    cfg: &EidConfig,
) -> Result<SpatialGrid> {
    cfg.validate()?;
    check_dim("EID grid shape", domain.nu(), cfg.cells.len())?;
    check_dim("sensor state", model.sensor_dim(), domain.nu() + cfg.fixed_coordinates.len())?;
    let grids = beliefs
        .iter()
        .filter(|b| b.detected)
        .map(|b| BeliefGrid::from_gaussian(b.mean.as_slice(), &b.cov, cfg.belief_cells, cfg.belief_extent))
        .collect::<Result<Vec<_>>>()?;
    let gate = (cfg.sensor_range.is_some() || cfg.blind_radius > 0.0).then(|| RangeGate {
        nu: domain.nu(),
        min: cfg.blind_radius,
        max: cfg.sensor_range.unwrap_or(f64::INFINITY),
    });
    let mut grid = SpatialGrid::uniform(domain.clone(), cfg.cells.clone())?;
    let m = model.m();
    if !grids.is_empty() {
        let values = (0..grid.len())
            .into_par_iter()
            .map_init(
                || (Workspace::new(model), vec![0.0; m * m], vec![0.0; model.sensor_dim()]),
                |(ws, info, sensor), cell| -> Result<f64> {
                    grid.cell_center_into(cell, &mut sensor[..domain.nu()]);
                    sensor[domain.nu()..].copy_from_slice(&cfg.fixed_coordinates);
                    let mut total = 0.0;
                    for g in &grids {
                        info.fill(0.0);
                        accumulate_expected(model, sensor, g, gate, ws, info)?;
                        total += det(info, m).max(0.0);
                    }
                    Ok(total)
                },
            )
            .collect::<Result<Vec<_>>>()?;
        grid.values_mut().copy_from_slice(&values);
    } else {
        grid.values_mut().fill(0.0);
    }
    let max = grid.values().iter().copied().fold(0.0, f64::max);
    let v = grid.values_mut();
    if max > 0.0 {
        v.iter_mut().for_each(|x| *x /= max);
    }
    v.iter_mut().for_each(|x| *x = x.max(cfg.exploration_floor));
    if v.iter().all(|x| *x == 0.0) {
        v.fill(1.0);
    }
    grid.normalize()?;
    Ok(grid)
}

#[cfg(test)]
mod tests;
