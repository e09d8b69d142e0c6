use super::{saturate_in_place, ControlLaw, Quadrotor12};
use crate::error::{usage, Result};

/// Equal-thrust height regulator for [`Quadrotor12`].
///
/// Total thrust is `m (g + kp (z* - z) - kd z')`, divided by the tilt
/// factor `cos(roll) cos(pitch)` so that the vertical component is what the
/// PD law asks for. The tilt factor is floored at 0.5.
///
/// An optional attitude term levels the vehicle with differential thrust;
/// it is off unless enabled with [`PdHeightHold::with_attitude_hold`].
#[derive(Debug, Clone)]
pub struct PdHeightHold {
    target: f64,
    kp: f64,
    kd: f64,
    mass: f64,
    gravity: f64,
    arm: f64,
    yaw_coeff: f64,
    inertia: [f64; 3],
    attitude: Option<(f64, f64)>,
    drift_gain: f64,
    u_min: [f64; 4],
    u_max: [f64; 4],
}

pub fn make_pd_height_hold(sys: &Quadrotor12, target: f64, kp: f64, kd: f64) -> Result<PdHeightHold> {
    if !(kp > 0.0 && kd > 0.0) {
        return usage("PD gains must be positive");
    }
    let p = sys.params();
    Ok(PdHeightHold {
        target,
        kp,
        kd,
        mass: p.mass,
        gravity: p.gravity,
        arm: p.arm,
        yaw_coeff: p.yaw_coeff,
        inertia: [p.ixx, p.iyy, p.izz],
        attitude: None,
        drift_gain: 0.0,
        u_min: [p.u_min; 4],
        u_max: [p.u_max; 4],
    })
}

impl PdHeightHold {
    pub fn target(&self) -> f64 {
        self.target
    }

    /// Adds `tau = -I (kp angle + kd rate)` on roll, pitch and yaw.
    pub fn with_attitude_hold(mut self, kp: f64, kd: f64) -> Result<Self> {
        if !(kp > 0.0 && kd > 0.0) {
            return usage("attitude gains must be positive");
        }
        self.attitude = Some((kp, kd));
        Ok(self)
    }

    /// Tilts against horizontal velocity so coasting dies out: the attitude
    /// setpoint becomes `pitch = -kv vx / g`, `roll = kv vy / g` (yaw taken
    /// as small), clamped to 0.3 rad. Needs the attitude hold.
    pub fn with_drift_damping(mut self, kv: f64) -> Result<Self> {
        if self.attitude.is_none() || !(kv >= 0.0) {
            return usage("drift damping needs the attitude hold and a non-negative gain");
        }
        self.drift_gain = kv;
        Ok(self)
    }
}

impl ControlLaw for PdHeightHold {
    fn control(&self, _t: f64, x: &[f64], u: &mut [f64]) {
        let accel = self.gravity + self.kp * (self.target - x[2]) - self.kd * x[5];
        let tilt = (x[6].cos() * x[7].cos()).max(0.5);
        u[..4].fill(self.mass * accel / (4.0 * tilt));
        if let Some((kp, kd)) = self.attitude {
            let lim = 0.3;
            let set = [
                (self.drift_gain * x[4] / self.gravity).clamp(-lim, lim),
                (-self.drift_gain * x[3] / self.gravity).clamp(-lim, lim),
                0.0,
            ];
            let tau: Vec<f64> = (0..3)
                .map(|i| -self.inertia[i] * (kp * (x[6 + i] - set[i]) + kd * x[9 + i]))
                .collect();
            let (rx, ry) = (tau[0] / (2.0 * self.arm), tau[1] / (2.0 * self.arm));
            let rz = tau[2] / (4.0 * self.yaw_coeff);
            u[0] += -ry + rz;
            u[1] += rx - rz;
            u[2] += ry + rz;
            u[3] += -rx - rz;
        }
        saturate_in_place(u, &self.u_min, &self.u_max);
    }
}

#[cfg(test)]
mod tests {
    use super::super::{integrate, make_quadrotor12};
    use super::*;

    #[test]
    fn attitude_hold_levels_a_tilted_vehicle() {
        let sys = make_quadrotor12();
        let pd = make_pd_height_hold(&sys, 1.0, 4.0, 4.0).unwrap().with_attitude_hold(25.0, 10.0).unwrap();
        let mut x = vec![0.0; 12];
        x[2] = 1.0;
        x[6] = 0.2;
        x[7] = -0.15;
        x[8] = 0.1;
        x[9] = 0.5;
        let traj = integrate(&sys, &x, 0.0, 4.0, &pd, 1e-3).unwrap();
        let end = traj.last_state();
        for i in [6, 7, 8, 9, 10, 11] {
            assert!(end[i].abs() < 1e-3, "state {i} = {}", end[i]);
        }
        assert!((end[2] - 1.0).abs() < 0.05);
    }

    #[test]
    fn drift_damping_stops_a_coasting_vehicle() {
        let sys = make_quadrotor12();
        let pd = make_pd_height_hold(&sys, 1.0, 4.0, 4.0)
            .unwrap()
            .with_attitude_hold(25.0, 10.0)
            .unwrap()
            .with_drift_damping(2.0)
            .unwrap();
        let mut x = vec![0.0; 12];
        x[2] = 1.0;
        x[3] = 1.0;
        x[4] = -0.5;
        let traj = integrate(&sys, &x, 0.0, 8.0, &pd, 1e-3).unwrap();
        let end = traj.last_state();
        assert!(end[3].abs() < 1e-2 && end[4].abs() < 1e-2, "{:?}", &end[3..5]);
        assert!((end[2] - 1.0).abs() < 0.05);
        assert!(make_pd_height_hold(&sys, 1.0, 4.0, 4.0).unwrap().with_drift_damping(1.0).is_err());
    }

    #[test]
    fn hover_at_target() {
        let sys = make_quadrotor12();
        let pd = make_pd_height_hold(&sys, 1.0, 4.0, 4.0).unwrap();
        let mut x = vec![0.0; 12];
        x[2] = 1.0;
        let mut u = [0.0; 4];
        pd.control(0.0, &x, &mut u);
        assert_eq!(u, [sys.hover_thrust(); 4]);
        x[2] = 0.5;
        pd.control(0.0, &x, &mut u);
        assert!(u.iter().all(|v| *v > sys.hover_thrust()));
        assert!(make_pd_height_hold(&sys, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn settles_from_one_metre_below() {
        let sys = make_quadrotor12();
        let pd = make_pd_height_hold(&sys, 2.0, 4.0, 4.0).unwrap();
        let mut x0 = vec![0.0; 12];
        x0[2] = 1.0;
        let tr = integrate(&sys, &x0, 0.0, 8.0, &pd, 0.01).unwrap();
        let settle = tr.index_at(4.0);
        for j in settle..tr.len() {
            assert!((tr.state(j)[2] - 2.0).abs() < 0.05);
        }
    }
}
