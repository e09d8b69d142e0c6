//! Bearing-only localization of randomly placed targets, one agent
//! following the expected information density. Pass another config path
//! (for example `examples/configs/moving_target.toml`) and a seed to vary it.

use rhee::scenario::{run_localization, ScenarioConfig};

fn main() -> rhee::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/localize_two_targets.toml").into());
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = args.next() {
        cfg.run.seed = seed.parse().expect("seed");
    }
    let report = run_localization(&cfg)?;
    for (truth, t) in cfg.target_truths(cfg.run.seed)?.iter().zip(&report.targets) {
        let p = truth.position(cfg.run.t0);
        let at = |v: Option<f64>| v.map_or("never".into(), |v| format!("{v:.1} s"));
        println!(
            "target {} at ({:.2}, {:.2}): first measured {}, localized {}, final error {:.4}",
            t.id,
            p[0],
            p[1],
            at(t.first_measurement_at),
            at(t.localized_at),
            t.final_error
        );
    }
    println!("{} filter events, {:.1} s wall", report.filter_events.len(), report.wall_seconds);
    Ok(())
}
