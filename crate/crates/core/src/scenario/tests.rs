use super::*;
use crate::error::Error;

const COVERAGE: &str = r#"
[domain]
bounds = [1.0, 1.0]

[system]
kind = "double_integrator"

[controller]
order = 6
horizon = 0.1
sample_time = 0.02
r = 1e-3
alpha_d = { constant = -100.0 }
lambda_init = 0.1
barrier_weight = 100.0
barrier_margin = 0.05

[phi]
source = "uniform"
cells = [30, 30]

[agents]
initial_states = [[0.3, 0.0, 0.4, 0.0]]

[run]
tf = 2.0
"#;

fn shipped(name: &str) -> ScenarioConfig {
    let text = match name {
        "localize" => include_str!("../../examples/configs/localize_two_targets.toml"),
        "search" => include_str!("../../examples/configs/search_and_localize.toml"),
        "moving" => include_str!("../../examples/configs/moving_target.toml"),
        "misplaced" => include_str!("../../examples/configs/misplaced_prior.toml"),
        "disjoint" => include_str!("../../examples/configs/disjoint_support.toml"),
        "occlusion" => include_str!("../../examples/configs/occlusion.toml"),
        "three" => include_str!("../../examples/configs/three_agent_coverage.toml"),
        "quadrotor" => include_str!("../../examples/configs/quadrotor_coverage.toml"),
        _ => unreachable!(),
    };
    let cfg = ScenarioConfig::from_toml(text).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn coverage() -> ScenarioConfig {
    ScenarioConfig::from_toml(COVERAGE).unwrap()
}

fn is_config_error<T: std::fmt::Debug>(r: crate::Result<T>) -> bool {
    matches!(r, Err(Error::Config(_)))
}

#[test]
fn shipped_configs_validate_and_round_trip() {
    for name in ["localize", "search", "moving", "misplaced", "disjoint", "occlusion", "three", "quadrotor"] {
        let cfg = shipped(name);
        let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg, "{name}");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let typo = COVERAGE.replace("tf = 2.0", "tf = 2.0\nsed = 3");
    assert!(is_config_error(ScenarioConfig::from_toml(&typo)));
    let nested = COVERAGE.replace("barrier_margin", "barier_margin");
    assert!(is_config_error(ScenarioConfig::from_toml(&nested)));
}

#[test]
fn cross_field_validation() {
    let mut eid_without_sensor = shipped("localize");
    eid_without_sensor.sensor = None;
    assert!(is_config_error(eid_without_sensor.validate()));

    let mut eid_section_on_static_phi = shipped("localize");
    eid_section_on_static_phi.phi = PhiSource::Uniform { cells: vec![10, 10] };
    assert!(is_config_error(eid_section_on_static_phi.validate()));

    let mut wrong_state = coverage();
    wrong_state.agents.initial_states = vec![vec![0.5, 0.5]];
    assert!(is_config_error(wrong_state.validate()));

    let mut no_agents = coverage();
    no_agents.agents.initial_states.clear();
    assert!(is_config_error(no_agents.validate()));

    let mut backwards = coverage();
    backwards.run.tf = -1.0;
    assert!(is_config_error(backwards.validate()));

    let mut no_height = shipped("localize");
    no_height.sensor.as_mut().unwrap().model = SensorModel::Bearing3d;
    no_height.sensor.as_mut().unwrap().noise = vec![0.01, 0.01];
    assert!(is_config_error(no_height.validate()));

    let mut fast_eid = shipped("localize");
    fast_eid.eid.as_mut().unwrap().rate = 1000.0;
    assert!(is_config_error(fast_eid.validate()));

    let mut drift_without_attitude = shipped("quadrotor");
    if let SystemSpec::Quadrotor { attitude_gains, .. } = &mut drift_without_attitude.system {
        *attitude_gains = None;
    }
    assert!(is_config_error(drift_without_attitude.validate()));

    assert!(is_config_error(run_coverage(&shipped("localize"), None)));
    assert!(is_config_error(run_localization(&coverage())));
    assert!(is_config_error(run_monte_carlo(&shipped("localize"), 0, 0)));
}

#[test]
fn missing_config_file_is_a_config_error() {
    assert!(is_config_error(ScenarioConfig::load("/nonexistent/scenario.toml")));
}

#[test]
fn zero_duration_coverage_is_an_empty_report() {
    let mut cfg = coverage();
    cfg.run.tf = cfg.run.t0;
    let r = run_coverage(&cfg, None).unwrap();
    assert!(r.steps.is_empty() && r.ergodicity.is_empty());
    assert_eq!(r.summary().steps, 0);
}

#[test]
fn coverage_reports_are_bit_identical_and_replayable() {
    let a = run_coverage(&coverage(), None).unwrap();
    let b = run_coverage(&coverage(), None).unwrap();
    assert_eq!(a.steps_csv(), b.steps_csv());
    assert_eq!(a.ergodicity_csv(), b.ergodicity_csv());

    let echoed = ScenarioConfig::from_toml(&a.config.to_toml()).unwrap();
    let replay = run_coverage(&echoed, None).unwrap();
    assert_eq!(a.steps_csv(), replay.steps_csv());

    let first = a.ergodicity.first().unwrap().collective;
    let last = a.ergodicity.last().unwrap().collective;
    assert!(last < first, "{first} -> {last}");
    assert_eq!(a.contraction_violations(), 0);
    assert!(a.snapshot.is_some());
}

#[test]
fn run_directory_layout() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_coverage(&coverage(), None).unwrap();
    r.write_dir(dir.path()).unwrap();
    for f in ["config.toml", "steps.csv", "timing.csv", "ergodicity.csv", "summary.json", "statistics.grid"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let echoed = ScenarioConfig::load(dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, r.config);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["steps"], 100);
}

#[test]
fn three_agents_cover_better_together() {
    let mut cfg = shipped("three");
    cfg.run.tf = 8.0;
    let r = run_coverage(&cfg, None).unwrap();
    let last = r.ergodicity.last().unwrap();
    assert_eq!(last.individual.len(), 3);
    for e in &last.individual {
        assert!(last.collective < *e, "collective {} vs {e}", last.collective);
    }
    assert!(last.collective < r.ergodicity_at(1.0).unwrap().collective);
    assert_eq!(r.final_states.len(), 3);
    assert_eq!(r.stale_messages, 0);
    assert!(r.received_bytes > 0);
}

#[test]
fn localization_is_deterministic_and_localizes() {
    let mut cfg = shipped("localize");
    cfg.run.tf = 30.0;
    let a = run_localization(&cfg).unwrap();
    let b = run_localization(&cfg).unwrap();
    assert_eq!(a.steps_csv(), b.steps_csv());
    assert_eq!(a.errors_csv(), b.errors_csv());
    assert!(a.targets.iter().all(|t| t.localized_at.is_some()), "{:?}", a.targets);
    assert!(a.targets.iter().all(|t| t.final_error < 0.05));
    assert!(!a.unreachable);

    let dir = tempfile::tempdir().unwrap();
    a.write_dir(dir.path()).unwrap();
    for f in ["beliefs.csv", "estimate_error.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn monte_carlo_is_deterministic_and_matches_single_runs() {
    let mut cfg = shipped("localize");
    cfg.run.tf = 15.0;
    let a = run_monte_carlo(&cfg, 3, 40).unwrap();
    let b = run_monte_carlo(&cfg, 3, 40).unwrap();
    assert_eq!(a.trials, b.trials);
    assert_eq!(a.trials_csv(), b.trials_csv());

    let one = run_monte_carlo(&cfg, 1, 41).unwrap();
    cfg.run.seed = 41;
    let single = run_localization(&cfg).unwrap();
    assert_eq!(one.trials[0].targets, single.targets);
    assert_eq!(one.trials[0].targets, a.trials[1].targets);
    assert!(one.trials[0].error.is_none());

    let bins = a.histogram(5.0);
    assert_eq!(bins.len(), 3);
    let counted: usize = bins.iter().map(|b| b.first).sum();
    assert_eq!(counted, a.trials.iter().filter(|t| t.first_localized().is_some()).count());
}

#[test]
fn floor_drops_exactly_at_the_last_expected_detection() {
    let mut cfg = shipped("search");
    cfg.run.tf = 30.0;
    let r = run_search_and_localize(&cfg).unwrap();
    let detected: Vec<f64> = r.targets.iter().map(|t| t.detected_at.expect("every target found")).collect();
    assert_eq!(detected.len(), 5);
    let late: Vec<f64> = r.targets.iter().filter_map(|t| t.appear_at).filter(|a| *a > 0.0).collect();
    assert_eq!(late, [7.0, 7.0]);
    for t in &r.targets {
        assert!(t.detected_at.unwrap() >= t.appear_at.unwrap_or(0.0));
    }
    let last = detected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.floor_drop_at, Some(last));
}

#[test]
fn search_without_targets_is_floored_coverage() {
    let mut cfg = shipped("search");
    cfg.targets.scripted.clear();
    cfg.eid.as_mut().unwrap().max_targets = None;
    cfg.run.tf = 5.0;
    let r = run_search_and_localize(&cfg).unwrap();
    assert!(r.targets.is_empty() && r.floor_drop_at.is_none());
    assert_eq!(r.steps.len(), 50);
    let first = r.ergodicity_at(1.0).unwrap().collective;
    assert!(r.ergodicity.last().unwrap().collective < first);
}

#[test]
fn two_agents_share_one_belief_trace() {
    let mut cfg = shipped("localize");
    cfg.agents.initial_states.push(vec![0.7, 0.0, 0.6, 0.0]);
    cfg.run.tf = 10.0;
    let r = run_localization(&cfg).unwrap();
    assert_eq!(r.final_states.len(), 2);
    assert!(r.steps.iter().any(|s| s.agent == 1));
    assert_eq!(r.steps.len(), 2 * 100);
    let ids: std::collections::BTreeSet<u32> = r.beliefs.iter().map(|b| b.id).collect();
    assert!(ids.len() <= 2);
    assert!(r.targets.iter().all(|t| t.measurements > 0));
}

#[test]
fn moving_target_error_dips_below_threshold() {
    let mut cfg = shipped("moving");
    cfg.run.tf = 30.0;
    let r = run_localization(&cfg).unwrap();
    let truths = cfg.target_truths(cfg.run.seed).unwrap();
    let (start, end) = (truths[0].position(0.0), truths[0].position(30.0));
    assert!(start.iter().zip(&end).any(|(a, b)| a != b), "target should move");
    assert!(r.errors.iter().any(|(_, _, e)| *e < 0.05));
    assert!(r.targets[0].localized_at.is_some());
}

#[test]
fn prior_far_from_truth_is_still_corrected() {
    let mut cfg = shipped("misplaced");
    cfg.run.tf = 30.0;
    for seed in 0..3 {
        cfg.run.seed = seed;
        let truths = cfg.targets_with_priors(seed).unwrap();
        let (truth, prior) = &truths[0];
        let p = prior.as_ref().unwrap();
        let gap = truth.position(0.0).iter().zip(p.mean.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!((gap - 0.45).abs() < 1e-9);
        let r = run_localization(&cfg).unwrap();
        assert!(r.targets[0].first_measurement_at.is_some(), "seed {seed}");
    }
}

#[test]
fn zero_floor_cannot_reach_a_disjoint_target() {
    let mut cfg = shipped("disjoint");
    cfg.run.tf = 20.0;
    let r = run_localization(&cfg).unwrap();
    assert_eq!(r.targets[0].measurements, 0);
    assert!(r.targets[0].first_measurement_at.is_none());
    assert!(r.unreachable);
    assert!(r.summary().unreachable_targets);
}

#[test]
fn quadrotor_holds_height_while_covering() {
    let mut cfg = shipped("quadrotor");
    cfg.run.tf = 5.0;
    let r = run_coverage(&cfg, None).unwrap();
    for row in &r.steps {
        let x = &row.record.state;
        assert!(x[2] > 0.5 && x[2] < 1.5, "height {} at {}", x[2], row.record.time);
        assert!(x[6].abs() < 1.0 && x[7].abs() < 1.0);
    }
    assert!(r.real_time_factor() > 0.0);
}
