//! 12-state quadrotor exploring a uniform density while its nominal
//! controller holds height. Reports the real-time factor.

use rhee::scenario::{run_coverage, ScenarioConfig};

fn main() -> rhee::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/quadrotor_coverage.toml");
    let cfg = ScenarioConfig::load(path)?;
    let report = run_coverage(&cfg, None)?;
    let s = report.summary();
    println!(
        "{:.0} simulated s in {:.2} s wall: real-time factor {:.1}, {:.0} us per step",
        s.simulated_seconds, s.wall_seconds, s.real_time_factor, s.mean_step_wall_us
    );
    for t in [1.0, 10.0, 20.0, 30.0] {
        if let Some(row) = report.ergodicity_at(t) {
            println!("  ergodicity at {t:>4} s: {:.3e}", row.collective);
        }
    }
    let x = &report.final_states[0];
    println!("final position ({:.2}, {:.2}, {:.2}), roll {:.3}, pitch {:.3}", x[0], x[1], x[2], x[6], x[7]);
    Ok(())
}
