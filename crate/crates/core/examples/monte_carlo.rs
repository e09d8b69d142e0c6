//! Twenty seeded trials of localizing two random static targets, run in
//! parallel, summarized as success rates and a histogram of localization
//! times. Usage: `monte_carlo [trials] [seed_base]`.

use rhee::scenario::{run_monte_carlo, ScenarioConfig};

fn main() -> rhee::Result<()> {
    let cfg = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/localize_two_targets.toml"))?;
    let mut args = std::env::args().skip(1);
    let trials = args.next().map_or(cfg.run.trials, |a| a.parse().expect("trial count"));
    let seed_base = args.next().map_or(cfg.run.seed, |a| a.parse().expect("seed"));
    let mc = run_monte_carlo(&cfg, trials, seed_base)?;
    println!("{trials} trials in {:.1} s wall", mc.wall_seconds);
    println!("first target localized within 60 s: {:.0}%", 100.0 * mc.first_within(60.0));
    println!("both targets localized within 100 s: {:.0}%", 100.0 * mc.all_within(100.0));
    println!("\n  window     first  both");
    for b in mc.histogram(5.0).iter().filter(|b| b.first + b.all > 0) {
        println!("  {:>3.0}-{:<3.0} s   {:>4}  {:>4}", b.start, b.end, b.first, b.all);
    }
    Ok(())
}
