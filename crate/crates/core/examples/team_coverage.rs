//! Several agents share coefficient vectors through a hub each step, so
//! their combined statistics approach the target faster than any one alone.
//! Usage: `team_coverage [agents] [seconds]`.

use std::sync::Arc;

use rhee::controller::{AlphaD, ControlWeight, ControllerConfig, ErgodicController};
use rhee::dynamics::{make_double_integrator, ControlLaw};
use rhee::fourier::{FourierBasis, SearchDomain, SpatialGrid};
use rhee::multi_agent::{payload_bit_rate, CombineRule, Team};

fn main() -> rhee::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(3, |a| a.parse().expect("agent count"));
    let seconds: f64 = args.next().map_or(10.0, |a| a.parse().expect("duration"));

    let domain = SearchDomain::unit(2);
    let cfg = ControllerConfig {
        order: 10,
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
    let phi = basis.distribution_coeffs(&SpatialGrid::uniform(domain.clone(), vec![50, 50])?)?;
    let agents = (0..n)
        .map(|j| {
            let a = std::f64::consts::TAU * j as f64 / n as f64;
            let x0 = [0.5 + 0.2 * a.cos(), 0.0, 0.5 + 0.17 * a.sin(), 0.0];
            let nominal: Arc<dyn ControlLaw> = Arc::new(|_t: f64, _x: &[f64], u: &mut [f64]| u.fill(0.0));
            ErgodicController::new(Arc::new(make_double_integrator()), nominal, cfg.clone(), domain.clone(), phi.clone(), &x0, 0.0)
        })
        .collect::<rhee::Result<Vec<_>>>()?;

    let mut team = Team::new(agents, CombineRule::OwnPlusPeerMean)?;
    let out = team.run(seconds)?;
    let last = out.times.len() - 1;
    for i in [out.times.len() / 10, out.times.len() / 2, last] {
        let each: Vec<String> = out.individual.iter().map(|s| format!("{:.4}", s[i])).collect();
        println!("t = {:>5.2} s  collective {:.4}  individual [{}]", out.times[i], out.collective[i], each.join(", "));
    }
    let bytes: usize = out.received_bytes[last].iter().sum::<usize>() / n;
    println!(
        "each agent receives {bytes} bytes per step; payload rate {:.1} kbit/s per agent",
        payload_bit_rate(n, basis.len(), cfg.sample_time) / 1e3
    );
    Ok(())
}
