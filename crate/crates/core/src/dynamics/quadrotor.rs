use serde::{Deserialize, Serialize};

use super::ControlAffineSystem;
use crate::error::{usage, Result};

/// Physical constants of the quadrotor model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub gravity: f64,
    /// Rotor arm length.
    pub arm: f64,
    pub ixx: f64,
    pub iyy: f64,
    pub izz: f64,
    /// Reaction torque per unit rotor force.
    pub yaw_coeff: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass: 0.6,
            gravity: 9.81,
            arm: 0.2,
            ixx: 0.01,
            iyy: 0.01,
            izz: 0.02,
            yaw_coeff: 0.01,
            u_min: 0.0,
            u_max: 12.0,
        }
    }
}

/// Rigid-body quadrotor in "+" configuration.
///
/// State: `[x, y, z, vx, vy, vz, roll, pitch, yaw, p, q, r]` with inertial
/// position/velocity, ZYX Euler angles and body angular rates. Inputs are the
/// four rotor forces; rotor 1 sits on `+x`, 2 on `+y`, 3 on `-x`, 4 on `-y`.
#[derive(Debug, Clone)]
pub struct Quadrotor12 {
    p: QuadrotorParams,
    u_min: [f64; 4],
    u_max: [f64; 4],
}

impl Quadrotor12 {
    pub fn new(p: QuadrotorParams) -> Result<Self> {
        let positive = [p.mass, p.gravity, p.arm, p.ixx, p.iyy, p.izz];
        if positive.iter().any(|v| !(*v > 0.0)) || !(p.u_min < p.u_max) {
            return usage(format!("invalid quadrotor parameters {p:?}"));
        }
        Ok(Self {
            u_min: [p.u_min; 4],
            u_max: [p.u_max; 4],
            p,
        })
    }

    pub fn params(&self) -> &QuadrotorParams {
        &self.p
    }

    /// Per-rotor force that balances gravity.
    pub fn hover_thrust(&self) -> f64 {
        self.p.mass * self.p.gravity / 4.0
    }
}

pub fn make_quadrotor12() -> Quadrotor12 {
    Quadrotor12::new(QuadrotorParams::default()).expect("default parameters are valid")
}

impl ControlAffineSystem for Quadrotor12 {
    fn state_dim(&self) -> usize {
        12
    }

    fn input_dim(&self) -> usize {
        4
    }

    fn drift(&self, _t: f64, x: &[f64], g: &mut [f64]) {
        let p = &self.p;
        let (sr, cr) = x[6].sin_cos();
        let (tp, cp) = (x[7].tan(), x[7].cos());
        let (wp, wq, wr) = (x[9], x[10], x[11]);
        g[0] = x[3];
        g[1] = x[4];
        g[2] = x[5];
        g[3] = 0.0;
        g[4] = 0.0;
        g[5] = -p.gravity;
        g[6] = wp + tp * (sr * wq + cr * wr);
        g[7] = cr * wq - sr * wr;
        g[8] = (sr * wq + cr * wr) / cp;
        g[9] = (p.iyy - p.izz) * wq * wr / p.ixx;
        g[10] = (p.izz - p.ixx) * wp * wr / p.iyy;
        g[11] = (p.ixx - p.iyy) * wp * wq / p.izz;
    }

    fn input_map(&self, _t: f64, x: &[f64], h: &mut [f64]) {
        let p = &self.p;
        h.fill(0.0);
        let z = body_z(x);
        for (row, zi) in z.iter().enumerate() {
            h[(3 + row) * 4..(4 + row) * 4].fill(zi / p.mass);
        }
        let (lx, ly, k) = (p.arm / p.ixx, p.arm / p.iyy, p.yaw_coeff / p.izz);
        h[9 * 4..10 * 4].copy_from_slice(&[0.0, lx, 0.0, -lx]);
        h[10 * 4..11 * 4].copy_from_slice(&[-ly, 0.0, ly, 0.0]);
        h[11 * 4..12 * 4].copy_from_slice(&[k, -k, k, -k]);
    }

    fn u_min(&self) -> &[f64] {
        &self.u_min
    }

    fn u_max(&self) -> &[f64] {
        &self.u_max
    }

    fn ergodic_projection(&self) -> &[usize] {
        &[0, 1]
    }

    fn dynamics(&self, t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        let p = &self.p;
        self.drift(t, x, out);
        let thrust = (u[0] + u[1] + u[2] + u[3]) / p.mass;
        let z = body_z(x);
        out[3] += thrust * z[0];
        out[4] += thrust * z[1];
        out[5] += thrust * z[2];
        out[9] += p.arm * (u[1] - u[3]) / p.ixx;
        out[10] += p.arm * (u[2] - u[0]) / p.iyy;
        out[11] += p.yaw_coeff * (u[0] - u[1] + u[2] - u[3]) / p.izz;
    }

    fn jacobian(&self, _t: f64, x: &[f64], u: &[f64], a: &mut [f64]) {
        let p = &self.p;
        a.fill(0.0);
        let n = 12;
        let mut set = |i: usize, j: usize, v: f64| a[i * n + j] = v;
        set(0, 3, 1.0);
        set(1, 4, 1.0);
        set(2, 5, 1.0);

        let (sr, cr) = x[6].sin_cos();
        let (sp, cp) = x[7].sin_cos();
        let (sy, cy) = x[8].sin_cos();
        let tp = sp / cp;
        let w = (u[0] + u[1] + u[2] + u[3]) / p.mass;
        // Partials of the body z axis with respect to roll, pitch, yaw.
        let dz = [
            [-sr * sp * cy + cr * sy, cr * cp * cy, -cr * sp * sy + sr * cy],
            [-sr * sp * sy - cr * cy, cr * cp * sy, cr * sp * cy + sr * sy],
            [-sr * cp, -cr * sp, 0.0],
        ];
        for (row, d) in dz.iter().enumerate() {
            for (col, v) in d.iter().enumerate() {
                set(3 + row, 6 + col, w * v);
            }
        }

        let (wp, wq, wr) = (x[9], x[10], x[11]);
        let s = sr * wq + cr * wr;
        let c = cr * wq - sr * wr;
        set(6, 6, tp * c);
        set(6, 7, s / (cp * cp));
        set(6, 9, 1.0);
        set(6, 10, sr * tp);
        set(6, 11, cr * tp);
        set(7, 6, -s);
        set(7, 10, cr);
        set(7, 11, -sr);
        set(8, 6, c / cp);
        set(8, 7, s * sp / (cp * cp));
        set(8, 10, sr / cp);
        set(8, 11, cr / cp);

        let (ax, ay, az) = (
            (p.iyy - p.izz) / p.ixx,
            (p.izz - p.ixx) / p.iyy,
            (p.ixx - p.iyy) / p.izz,
        );
        set(9, 10, ax * wr);
        set(9, 11, ax * wq);
        set(10, 9, ay * wr);
        set(10, 11, ay * wp);
        set(11, 9, az * wq);
        set(11, 10, az * wp);
    }
}

/// Third column of the body-to-inertial rotation.
fn body_z(x: &[f64]) -> [f64; 3] {
    let (sr, cr) = x[6].sin_cos();
    let (sp, cp) = x[7].sin_cos();
    let (sy, cy) = x[8].sin_cos();
    [cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp]
}
