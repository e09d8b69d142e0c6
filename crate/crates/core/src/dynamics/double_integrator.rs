use super::ControlAffineSystem;

/// Planar double integrator `x = [x1, x1', x3, x3']`, `f = [x2, u1, x4, u2]`.
#[derive(Debug, Clone)]
pub struct DoubleIntegrator {
    u_min: [f64; 2],
    u_max: [f64; 2],
}

impl DoubleIntegrator {
    pub fn with_bound(bound: f64) -> Self {
        Self {
            u_min: [-bound; 2],
            u_max: [bound; 2],
        }
    }
}

/// Bounds `+-50` on both inputs.
pub fn make_double_integrator() -> DoubleIntegrator {
    DoubleIntegrator::with_bound(50.0)
}

impl ControlAffineSystem for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        4
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn drift(&self, _t: f64, x: &[f64], g: &mut [f64]) {
        g[0] = x[1];
        g[1] = 0.0;
        g[2] = x[3];
        g[3] = 0.0;
    }

    fn input_map(&self, _t: f64, _x: &[f64], h: &mut [f64]) {
        h.fill(0.0);
        h[2] = 1.0;
        h[7] = 1.0;
    }

    fn u_min(&self) -> &[f64] {
        &self.u_min
    }

    fn u_max(&self) -> &[f64] {
        &self.u_max
    }

    fn ergodic_projection(&self) -> &[usize] {
        &[0, 2]
    }

    fn dynamics(&self, _t: f64, x: &[f64], u: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = u[0];
        out[2] = x[3];
        out[3] = u[1];
    }

    fn jacobian(&self, _t: f64, _x: &[f64], _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[1] = 1.0;
        out[11] = 1.0;
    }
}
