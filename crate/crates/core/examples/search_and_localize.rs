//! Searching for five targets, two of which appear at t = 7 s, while
//! localizing the ones already found. The exploration floor is dropped once
//! all five are detected.

use rhee::scenario::{run_search_and_localize, ScenarioConfig};

fn main() -> rhee::Result<()> {
    let cfg = ScenarioConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/search_and_localize.toml"))?;
    let report = run_search_and_localize(&cfg)?;
    for t in &report.targets {
        println!(
            "target {} (appears {:>4.1} s): detected {:>5.2} s, localized {}",
            t.id,
            t.appear_at.unwrap_or(0.0),
            t.detected_at.unwrap_or(f64::NAN),
            t.localized_at.map_or("never".into(), |v| format!("{v:.2} s"))
        );
    }
    match report.floor_drop_at {
        Some(t) => println!("exploration floor dropped at {t:.2} s"),
        None => println!("exploration floor never dropped"),
    }
    Ok(())
}
