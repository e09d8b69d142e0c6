//! With an exploration floor the agent eventually measures a target whose
//! prior belief is far from the truth; without a floor, a target outside
//! the support of the density is never seen.

use rhee::scenario::{run_localization, ScenarioConfig};

fn main() -> rhee::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs");
    let mut floored = ScenarioConfig::load(format!("{dir}/misplaced_prior.toml"))?;
    let mut hits = 0;
    for seed in 0..10 {
        floored.run.seed = seed;
        let r = run_localization(&floored)?;
        match r.targets[0].first_measurement_at {
            Some(t) => {
                hits += 1;
                println!("seed {seed}: first measurement at {t:.1} s");
            }
            None => println!("seed {seed}: never measured"),
        }
    }
    println!("{hits}/10 runs measured the target\n");

    let zero = ScenarioConfig::load(format!("{dir}/disjoint_support.toml"))?;
    let r = run_localization(&zero)?;
    println!(
        "zero floor, target outside the density: {} measurements, unreachable flagged: {}",
        r.targets[0].measurements, r.unreachable
    );
    Ok(())
}
