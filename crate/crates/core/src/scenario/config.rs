use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::dynamics::QuadrotorParams;
use crate::error::{Error, Result};
use crate::fourier::{SearchDomain, SpatialGrid};
use crate::information_density::{bearing_model_2d, bearing_model_3d_with, EidConfig, MeasurementModel};
use crate::multi_agent::CombineRule;
use crate::target_estimation::{TargetBelief, TargetTruth};

/// A complete, self-describing scenario. Parsed from TOML; unknown keys are
/// rejected everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub domain: DomainSpec,
    pub system: SystemSpec,
    #[serde(default)]
    pub controller: ControllerConfig,
    pub phi: PhiSource,
    #[serde(default)]
    pub sensor: Option<SensorSpec>,
    #[serde(default)]
    pub eid: Option<EidSpec>,
    #[serde(default)]
    pub targets: TargetSpec,
    pub agents: AgentSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    DoubleIntegrator {
        #[serde(default = "default_di_bound")]
        bound: f64,
    },
    Quadrotor {
        #[serde(default)]
        params: QuadrotorParams,
        /// Height held by the nominal PD controller.
        height: f64,
        #[serde(default = "default_kp")]
        kp: f64,
        #[serde(default = "default_kd")]
        kd: f64,
        /// Optional attitude PD gains `[kp, kd]` added to the height hold.
        #[serde(default)]
        attitude_gains: Option<[f64; 2]>,
        /// Horizontal velocity damping through the attitude setpoint.
        /// Only used with `attitude_gains`.
        #[serde(default)]
        drift_damping: f64,
    },
}

fn default_di_bound() -> f64 {
    50.0
}

fn default_kp() -> f64 {
    4.0
}

fn default_kd() -> f64 {
    4.0
}

impl SystemSpec {
    pub fn state_dim(&self) -> usize {
        match self {
            Self::DoubleIntegrator { .. } => 4,
            Self::Quadrotor { .. } => 12,
        }
    }

    /// Number of explored coordinates.
    pub fn nu(&self) -> usize {
        2
    }
}

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Where the target distribution comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSource {
    Uniform {
        cells: Vec<usize>,
    },
    /// Uniform outside the listed obstacles, zero inside.
    Occlusion {
        cells: Vec<usize>,
        #[serde(default)]
        circles: Vec<Ball>,
        #[serde(default)]
        rectangles: Vec<BoxRegion>,
    },
    /// Binary grid file; relative paths resolve against the config file.
    GridFile {
        path: PathBuf,
    },
    /// Expected information density built from the target beliefs.
    Eid,
}

impl PhiSource {
    pub fn is_eid(&self) -> bool {
        matches!(self, Self::Eid)
    }

    /// Builds the static grid; `None` for the EID source.
    pub fn static_grid(&self, domain: &SearchDomain, base: Option<&Path>) -> Result<Option<SpatialGrid>> {
        let grid = match self {
            Self::Uniform { cells } => SpatialGrid::uniform(domain.clone(), cells.clone())?,
            Self::Occlusion {
                cells,
                circles,
                rectangles,
            } => SpatialGrid::from_fn(domain.clone(), cells.clone(), |s| {
                let in_circle = circles.iter().any(|c| {
                    c.center.iter().zip(s).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < c.radius * c.radius
                });
                let in_rect = rectangles
                    .iter()
                    .any(|r| s.iter().enumerate().all(|(d, v)| r.min[d] <= *v && *v <= r.max[d]));
                if in_circle || in_rect {
                    0.0
                } else {
                    1.0
                }
            })?
            .normalized()?,
            Self::GridFile { path } => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let g = SpatialGrid::read_file(&path)?;
                if g.domain() != domain {
                    return Err(Error::Config(format!("grid file {} has a different domain", path.display())));
                }
                g.normalized()?
            }
            Self::Eid => return Ok(None),
        };
        Ok(Some(grid))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorModel {
    /// Azimuth only, planar targets.
    #[serde(rename = "bearing_2d")]
    Bearing2d,
    /// Azimuth and elevation, targets on the ground plane.
    #[serde(rename = "bearing_3d")]
    Bearing3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub model: SensorModel,
    /// Detection range `r` over the explored coordinates.
    pub range: f64,
    /// Measurement rate `f_m` in Hz.
    pub rate: f64,
    /// Diagonal of the angular noise covariance, rad^2.
    pub noise: Vec<f64>,
    /// Height of the sensor above the target plane, for the 3D model.
    #[serde(default)]
    pub height: Option<f64>,
    /// Standard deviation of a fresh belief.
    #[serde(default = "default_init_sigma")]
    pub init_sigma: f64,
    /// Diagonal of the EKF process noise added per second.
    #[serde(default)]
    pub process_noise: Vec<f64>,
}

fn default_init_sigma() -> f64 {
    0.1
}

impl SensorSpec {
    /// Target parameter dimension.
    pub fn target_dim(&self) -> usize {
        match self.model {
            SensorModel::Bearing2d => 2,
            SensorModel::Bearing3d => 3,
        }
    }

    pub fn measurement_model(&self) -> Result<MeasurementModel> {
        match self.model {
            SensorModel::Bearing2d => {
                if self.noise.len() != 1 {
                    return Err(Error::Config("bearing_2d takes one noise variance".into()));
                }
                bearing_model_2d(self.noise[0])
            }
            SensorModel::Bearing3d => {
                if self.noise.len() != 2 {
                    return Err(Error::Config("bearing_3d takes two noise variances".into()));
                }
                bearing_model_3d_with(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.noise)))
            }
        }
    }

    /// Coordinates appended to the explored position to form the sensor
    /// position.
    pub fn fixed_coordinates(&self) -> Vec<f64> {
        match self.model {
            SensorModel::Bearing2d => Vec::new(),
            SensorModel::Bearing3d => vec![self.height.unwrap_or(0.0)],
        }
    }

    pub fn process_cov(&self, dt: f64) -> DMatrix<f64> {
        let m = self.target_dim();
        if self.process_noise.is_empty() {
            DMatrix::zeros(m, m)
        } else {
            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                m,
                self.process_noise.iter().map(|v| v * dt),
            ))
        }
    }
}

/// EID grid and update settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EidSpec {
    pub cells: Vec<usize>,
    /// Rebuild rate `f_phi` in Hz.
    pub rate: f64,
    pub exploration_floor: f64,
    #[serde(default = "default_belief_cells")]
    pub belief_cells: usize,
    #[serde(default = "default_belief_extent")]
    pub belief_extent: f64,
    /// Count only belief points within the sensor range.
    #[serde(default = "default_true")]
    pub range_gated: bool,
    #[serde(default)]
    pub blind_radius: f64,
    /// Drop the floor to zero once this many targets are detected.
    #[serde(default)]
    pub max_targets: Option<usize>,
}

fn default_belief_cells() -> usize {
    7
}

fn default_belief_extent() -> f64 {
    3.0
}

fn default_true() -> bool {
    true
}

impl EidSpec {
    pub fn grid_config(&self, sensor: &SensorSpec, floor: f64) -> EidConfig {
        EidConfig {
            cells: self.cells.clone(),
            exploration_floor: floor,
            belief_cells: self.belief_cells,
            belief_extent: self.belief_extent,
            fixed_coordinates: sensor.fixed_coordinates(),
            sensor_range: self.range_gated.then_some(sensor.range),
            blind_radius: self.blind_radius,
        }
    }
}

/// Scripted target. Fixed at `position` unless `waypoints` are given;
/// with `diffusion` it random-walks from `position`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetScript {
    #[serde(default)]
    pub position: Option<Vec<f64>>,
    #[serde(default)]
    pub waypoints: Option<Waypoints>,
    #[serde(default)]
    pub diffusion: Option<Diffusion>,
    #[serde(default)]
    pub appear_at: f64,
    /// Belief held before the first measurement; the target then counts as
    /// detected from the start.
    #[serde(default)]
    pub prior: Option<PriorBelief>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoints {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

/// Reflected random walk with variance `sigma2` per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diffusion {
    pub sigma2: f64,
    #[serde(default = "default_diffusion_dt")]
    pub dt: f64,
    /// Offset mixed into the run seed.
    #[serde(default)]
    pub seed: u64,
}

fn default_diffusion_dt() -> f64 {
    0.05
}

impl TargetScript {
    fn check(&self, m: usize) -> Result<()> {
        match (&self.position, &self.waypoints, &self.diffusion) {
            (Some(p), None, None) if p.len() == m => {}
            (Some(p), None, Some(d)) if p.len() == m && d.sigma2 >= 0.0 && d.dt > 0.0 => {}
            (None, Some(w), None)
                if !w.times.is_empty() && w.times.len() == w.points.len() && w.points.iter().all(|p| p.len() == m) => {}
            _ => {
                return bad(format!(
                    "a target needs a {m}-D position (optionally with diffusion) or waypoints, but not both"
                ))
            }
        }
        if let Some(p) = &self.prior {
            if p.mean.len() != m || !(p.sigma > 0.0) {
                return bad(format!("target prior needs {m} mean entries and a positive sigma"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorBelief {
    pub mean: Vec<f64>,
    /// Isotropic standard deviation.
    pub sigma: f64,
}

impl PriorBelief {
    pub fn belief(&self, id: u32) -> Result<TargetBelief> {
        let m = self.mean.len();
        TargetBelief::new(id, self.mean.clone(), DMatrix::from_diagonal_element(m, m, self.sigma * self.sigma), true)
    }
}

/// Scripted targets plus targets drawn uniformly from the seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default)]
    pub scripted: Vec<TargetScript>,
    #[serde(default)]
    pub random_count: usize,
    /// Distance kept from the domain edge by random targets.
    #[serde(default)]
    pub random_margin: f64,
    /// Gives every random target a prior belief whose mean is displaced
    /// from the truth.
    #[serde(default)]
    pub random_prior: Option<RandomPrior>,
}

/// Prior belief for random targets: mean at distance `offset` from the
/// truth in a random direction, kept inside the margin box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPrior {
    pub offset: f64,
    pub sigma: f64,
}

impl TargetSpec {
    pub fn count(&self) -> usize {
        self.scripted.len() + self.random_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub initial_states: Vec<Vec<f64>>,
    #[serde(default)]
    pub combine: CombineRule,
}

impl AgentSpec {
    pub fn count(&self) -> usize {
        self.initial_states.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default)]
    pub t0: f64,
    pub tf: f64,
    #[serde(default)]
    pub seed: u64,
    /// Localization threshold on the belief mean error.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// How long the threshold must hold to count as localized.
    #[serde(default = "default_hold")]
    pub hold: f64,
    /// Monte Carlo trials.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_threshold() -> f64 {
    0.05
}

fn default_hold() -> f64 {
    2.0
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Cells per dimension of the reconstructed statistics snapshot; empty
    /// disables it.
    #[serde(default = "default_snapshot_cells")]
    pub snapshot_cells: Vec<usize>,
    /// Log a progress line every this many simulated seconds; 0 disables.
    #[serde(default)]
    pub progress_every: f64,
}

fn default_snapshot_cells() -> Vec<usize> {
    vec![50, 50]
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            snapshot_cells: default_snapshot_cells(),
            progress_every: 0.0,
        }
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Reads and validates a config file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_toml(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario configs always serialize")
    }

    pub fn domain(&self) -> Result<SearchDomain> {
        SearchDomain::new(self.domain.bounds.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every cross-field constraint that can be checked without
    /// running anything.
    pub fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        let nu = self.system.nu();
        if domain.nu() != nu {
            return bad(format!("domain has {} dimensions, the system explores {nu}", domain.nu()));
        }
        self.controller.validate().map_err(|e| Error::Config(e.to_string()))?;
        match &self.system {
            SystemSpec::DoubleIntegrator { bound } if !(*bound > 0.0) => {
                return bad("double integrator bound must be positive")
            }
            SystemSpec::Quadrotor { kp, kd, attitude_gains, .. }
                if !(*kp > 0.0 && *kd > 0.0) || attitude_gains.is_some_and(|g| !(g[0] > 0.0 && g[1] > 0.0)) =>
            {
                return bad("height and attitude gains must be positive")
            }
            SystemSpec::Quadrotor {
                attitude_gains,
                drift_damping,
                ..
            } if !(*drift_damping >= 0.0) || (*drift_damping > 0.0 && attitude_gains.is_none()) => {
                return bad("drift_damping must be non-negative and needs attitude_gains")
            }
            _ => {}
        }
        if self.agents.count() == 0 {
            return bad("at least one agent is required");
        }
        for x in &self.agents.initial_states {
            if x.len() != self.system.state_dim() {
                return bad(format!(
                    "initial state has {} entries, the system has {}",
                    x.len(),
                    self.system.state_dim()
                ));
            }
        }
        if !(self.run.tf >= self.run.t0) {
            return bad("run.tf must not precede run.t0");
        }
        if self.run.trials == 0 {
            return bad("run.trials must be at least 1");
        }
        if !(self.run.threshold > 0.0 && self.run.hold >= 0.0) {
            return bad("localization threshold must be positive and hold nonnegative");
        }
        match &self.phi {
            PhiSource::Uniform { cells } | PhiSource::Occlusion { cells, .. } if cells.len() != nu => {
                return bad("phi.cells must have one entry per explored dimension")
            }
            PhiSource::Occlusion {
                circles, rectangles, ..
            } => {
                if circles.iter().any(|c| c.center.len() != nu || !(c.radius > 0.0))
                    || rectangles.iter().any(|r| r.min.len() != nu || r.max.len() != nu)
                {
                    return bad("malformed occlusion");
                }
            }
            _ => {}
        }
        let needs_sensor = self.phi.is_eid() || self.targets.count() > 0;
        match (&self.sensor, needs_sensor) {
            (None, true) => return bad("EID-driven phi and targets require a [sensor] section"),
            (Some(s), _) => {
                if !(s.range > 0.0 && s.rate > 0.0 && s.init_sigma > 0.0) {
                    return bad("sensor range, rate and init_sigma must be positive");
                }
                if !s.process_noise.is_empty() && s.process_noise.len() != s.target_dim() {
                    return bad("sensor.process_noise needs one entry per target coordinate");
                }
                if s.process_noise.iter().any(|v| !(*v >= 0.0)) {
                    return bad("sensor.process_noise must be nonnegative");
                }
                if s.model == SensorModel::Bearing3d && s.height.is_none() {
                    return bad("bearing_3d needs sensor.height");
                }
                s.measurement_model().map_err(|e| Error::Config(e.to_string()))?;
                let t_s = self.controller.sample_time;
                if ((1.0 / s.rate) / t_s - (1.0 / s.rate / t_s).round()).abs() > 1e-9
                    && (t_s * s.rate - (t_s * s.rate).round()).abs() > 1e-9
                {
                    return bad("sensor period must be a multiple or divisor of the sample time");
                }
            }
            _ => {}
        }
        match (&self.eid, self.phi.is_eid()) {
            (None, true) => return bad("EID-driven phi requires an [eid] section"),
            (Some(_), false) => return bad("[eid] is only used with phi.source = \"eid\""),
            (Some(e), true) => {
                let sensor = self.sensor.as_ref().expect("checked above");
                if e.cells.len() != nu {
                    return bad("eid.cells must have one entry per explored dimension");
                }
                if !(e.rate > 0.0) || e.rate > 1.0 / self.controller.sample_time + 1e-9 {
                    return bad("eid.rate must be positive and at most 1 / sample_time");
                }
                e.grid_config(sensor, e.exploration_floor)
                    .validate()
                    .map_err(|err| Error::Config(err.to_string()))?;
                if e.max_targets == Some(0) {
                    return bad("eid.max_targets must be at least 1");
                }
            }
            (None, false) => {}
        }
        let m = self.sensor.as_ref().map_or(nu, SensorSpec::target_dim);
        for t in &self.targets.scripted {
            t.check(m)?;
        }
        if self.targets.random_count > 0 {
            let margin = self.targets.random_margin;
            if !(margin >= 0.0) || domain.bounds().iter().any(|l| 2.0 * margin >= *l) {
                return bad("targets.random_margin leaves no room in the domain");
            }
        }
        if let Some(p) = &self.targets.random_prior {
            let room = domain.bounds().iter().map(|l| l - 2.0 * self.targets.random_margin).fold(f64::INFINITY, f64::min);
            if !(p.offset >= 0.0 && p.sigma > 0.0) || p.offset >= room {
                return bad("targets.random_prior needs 0 <= offset < usable domain width and sigma > 0");
            }
        }
        if !self.output.snapshot_cells.is_empty() && self.output.snapshot_cells.len() != nu {
            return bad("output.snapshot_cells must have one entry per explored dimension");
        }
        Ok(())
    }

    /// Scripted targets followed by `random_count` uniform draws, with ids
    /// in that order.
    pub fn target_truths(&self, seed: u64) -> Result<Vec<TargetTruth>> {
        Ok(self.targets_with_priors(seed)?.into_iter().map(|(t, _)| t).collect())
    }

    /// Targets paired with the belief held before any measurement.
    pub fn targets_with_priors(&self, seed: u64) -> Result<Vec<(TargetTruth, Option<TargetBelief>)>> {
        use rand::{Rng, SeedableRng};
        let domain = self.domain()?;
        let sensor = self.sensor.as_ref();
        let m = sensor.map_or(domain.nu(), SensorSpec::target_dim);
        let mut out = Vec::with_capacity(self.targets.count());
        for (i, t) in self.targets.scripted.iter().enumerate() {
            let id = i as u32;
            let truth = match (&t.position, &t.waypoints, &t.diffusion) {
                (_, Some(w), _) => TargetTruth::waypoints(id, w.times.clone(), w.points.clone())?,
                (Some(p), None, Some(d)) => TargetTruth::diffusion(
                    id,
                    p.clone(),
                    d.sigma2,
                    (self.run.t0, self.run.tf, d.dt),
                    domain.bounds(),
                    seed ^ d.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                )?,
                (Some(p), None, None) => TargetTruth::fixed(id, p.clone()),
                (None, None, _) => return bad("target without position or waypoints"),
            };
            let prior = t.prior.as_ref().map(|p| p.belief(id)).transpose()?;
            out.push((truth.appearing_at(t.appear_at), prior));
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let margin = self.targets.random_margin;
        for i in 0..self.targets.random_count {
            let mut p: Vec<f64> = domain
                .bounds()
                .iter()
                .map(|l| rng.gen_range(margin..l - margin))
                .collect();
            let id = (self.targets.scripted.len() + i) as u32;
            let prior = match &self.targets.random_prior {
                Some(rp) => Some(displaced_prior(id, &p, rp, margin, domain.bounds(), m, &mut rng)?),
                None => None,
            };
            p.resize(m, 0.0);
            out.push((TargetTruth::fixed(id, p), prior));
        }
        Ok(out)
    }
}

fn displaced_prior(
    id: u32,
    truth: &[f64],
    rp: &RandomPrior,
    margin: f64,
    bounds: &[f64],
    m: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<TargetBelief> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    for _ in 0..1000 {
        let dir: Vec<f64> = truth.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut mean: Vec<f64> = truth.iter().zip(&dir).map(|(t, d)| t + rp.offset * d / norm).collect();
        if mean.iter().zip(bounds).all(|(v, l)| (margin..=l - margin).contains(v)) {
            mean.resize(m, 0.0);
            return PriorBelief { mean, sigma: rp.sigma }.belief(id);
        }
    }
    bad(format!("no prior mean at distance {} from target {id} fits the domain", rp.offset))
}
