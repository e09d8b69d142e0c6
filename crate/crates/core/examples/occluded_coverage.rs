//! Single-agent coverage around two obstacles, driven directly through the
//! controller API rather than a config file.

use std::sync::Arc;

use rhee::controller::{rhee_run, AlphaD, ControlWeight, ControllerConfig, ErgodicController, StepStatus};
use rhee::dynamics::{make_double_integrator, ControlLaw};
use rhee::fourier::{FourierBasis, SearchDomain, SpatialGrid};

fn main() -> rhee::Result<()> {
    let domain = SearchDomain::unit(2);
    let phi_grid = SpatialGrid::from_fn(domain.clone(), vec![100, 100], |s| {
        let circle = (s[0] - 0.3).powi(2) + (s[1] - 0.7).powi(2) < 0.15f64.powi(2);
        let rect = (0.55..0.85).contains(&s[0]) && (0.15..0.35).contains(&s[1]);
        if circle || rect {
            0.0
        } else {
            1.0
        }
    })?
    .normalized()?;

    let cfg = ControllerConfig {
        order: 20,
        horizon: 0.1,
        sample_time: 0.02,
        r: ControlWeight::Scalar(1e-3),
        alpha_d: AlphaD::Constant(-100.0),
        lambda_init: Some(0.1),
        barrier_weight: 100.0,
        barrier_margin: 0.05,
        ..Default::default()
    };
    let basis = FourierBasis::new(domain.clone(), cfg.order);
    let phi = basis.distribution_coeffs(&phi_grid)?;
    let nominal: Arc<dyn ControlLaw> = Arc::new(|_t: f64, _x: &[f64], u: &mut [f64]| u.fill(0.0));
    let mut ctrl = ErgodicController::new(
        Arc::new(make_double_integrator()),
        nominal,
        cfg,
        domain,
        phi.clone(),
        &[0.5, 0.0, 0.5, 0.0],
        0.0,
    )?;

    let seconds: f64 = std::env::args().nth(1).map_or(Ok(60.0), |a| a.parse()).expect("duration in seconds");
    let run = rhee_run(&mut ctrl, seconds)?;
    let accepted = run.records.iter().filter(|r| r.status == StepStatus::Accepted).count();
    println!("{} steps, {accepted} with an accepted action", run.records.len());
    for r in run.records.iter().filter(|r| (r.time + 1e-9) % 10.0 < 0.02) {
        if let Some(b) = r.running_cost {
            println!("  t = {:>5.2} s  running ergodic cost {b:.3e}", r.time);
        }
    }
    let c = ctrl.executed_coeffs().expect("time has passed");
    println!("final ergodic cost {:.3e}\n", basis.ergodic_metric(&c, &phi));
    println!("time-averaged statistics of the trajectory:");
    print!("{}", basis.reconstruct(&c, &[40, 20])?.to_ascii().expect("planar"));
    Ok(())
}
