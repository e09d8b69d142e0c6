use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::information_density::{bearing_model_2d, bearing_model_3d, wrap_angle, MeasurementModel, ModelFn};

fn belief2(mean: [f64; 2], var: f64) -> TargetBelief {
    TargetBelief::new(0, mean.to_vec(), DMatrix::from_diagonal_element(2, 2, var), true).unwrap()
}

#[test]
fn predict_adds_process_noise() {
    let b = belief2([0.2, 0.3], 0.01);
    assert_eq!(ekf_predict(&b, &DMatrix::zeros(2, 2)), b);
    let c = DMatrix::from_diagonal_element(3, 3, 0.001);
    let mut b3 = TargetBelief::new(1, vec![0.1, 0.2, 0.3], DMatrix::identity(3, 3) * 0.04, true).unwrap();
    let tr0 = b3.cov.trace();
    b3 = ekf_predict(&b3, &c);
    assert!((b3.cov.trace() - tr0 - 0.003).abs() < 1e-15);
    for _ in 0..9 {
        b3 = ekf_predict(&b3, &c);
    }
    let want = DMatrix::identity(3, 3) * 0.04 + &c * 10.0;
    assert!((&b3.cov - want).amax() < 1e-15);
    assert_eq!(b3.mean, DVector::from_vec(vec![0.1, 0.2, 0.3]));
}

#[test]
fn zero_innovation_keeps_mean_and_shrinks_covariance() {
    let model = bearing_model_2d(0.01).unwrap();
    let b = belief2([0.5, 0.7], 0.02);
    let s = [0.3, 0.4];
    let z = model.predict(b.mean.as_slice(), &s).unwrap();
    let out = ekf_update(&b, &model, &s, &z).unwrap();
    assert!(out.applied);
    assert!((&out.belief.mean - &b.mean).amax() < 1e-15);
    let diff = &b.cov - &out.belief.cov;
    assert!(diff.symmetric_eigen().eigenvalues.min() >= -1e-12);
    assert!(out.belief.cov.trace() < b.cov.trace());
}

#[test]
fn uninformative_measurement_changes_nothing() {
    let predict: ModelFn = std::sync::Arc::new(|_a: &[f64], _s: &[f64], out: &mut [f64]| {
        out[0] = 0.0;
        Ok(())
    });
    let jac: ModelFn = std::sync::Arc::new(|_a: &[f64], _s: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        Ok(())
    });
    let model = MeasurementModel::new(2, 1, 2, predict, jac, DMatrix::from_element(1, 1, 0.1), vec![false]).unwrap();
    let b = TargetBelief::new(0, vec![0.1, 0.2], DMatrix::from_row_slice(2, 2, &[0.02, 0.005, 0.005, 0.03]), true)
        .unwrap();
    let out = ekf_update(&b, &model, &[0.0, 0.0], &[0.7]).unwrap();
    assert!((&out.belief.mean - &b.mean).amax() < 1e-15);
    assert!((&out.belief.cov - &b.cov).amax() < 1e-15);
}

#[test]
fn singular_geometry_skips_the_update() {
    let model = bearing_model_2d(0.01).unwrap();
    let b = belief2([0.5, 0.5], 0.02);
    let out = ekf_update(&b, &model, &[0.5, 0.5], &[0.3]).unwrap();
    assert!(!out.applied);
    assert_eq!(out.belief, b);
}

#[test]
fn updates_are_invariant_to_full_turns() {
    let model = bearing_model_3d();
    let b = TargetBelief::new(0, vec![0.4, 0.6, 0.0], DMatrix::identity(3, 3) * 0.01, true).unwrap();
    let s = [0.2, 0.3, 0.5];
    let z = [3.0, -0.8];
    let a = ekf_update(&b, &model, &s, &z).unwrap().belief;
    let c = ekf_update(&b, &model, &s, &[z[0] + 2.0 * PI, z[1] - 2.0 * PI]).unwrap().belief;
    assert!((&a.mean - &c.mean).amax() < 1e-12);
    assert!((&a.cov - &c.cov).amax() < 1e-12);
}

#[test]
fn noiseless_bearings_triangulate() {
    let model = bearing_model_2d(1e-4).unwrap();
    let truth = [0.55, 0.42];
    let sensors = [[0.2, 0.2], [0.9, 0.3], [0.5, 0.9]];
    let mut b = belief2([0.45, 0.5], 0.01);
    for j in 0..50 {
        let s = sensors[j % 3];
        let z = model.predict(&truth, &s).unwrap();
        b = ekf_update(&b, &model, &s, &z).unwrap().belief;
    }
    assert!(b.error_norm(&truth) < 1e-3, "error {}", b.error_norm(&truth));
}

#[test]
fn covariance_stays_spd_under_random_sequences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let m2 = bearing_model_2d(0.01).unwrap();
    let c = DMatrix::from_diagonal_element(2, 2, 1e-4);
    let mut b = belief2([0.5, 0.5], 0.01);
    let truth = [0.6, 0.4];
    for _ in 0..2000 {
        if rng.gen_bool(0.3) {
            b = ekf_predict(&b, &c);
        } else {
            let s = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let Ok(z) = m2.sample(&truth, &s, &mut rng) else { continue };
            let prior = b.clone();
            b = ekf_update(&b, &m2, &s, &z).unwrap().belief;
            let shrink = (&prior.cov - &b.cov).symmetric_eigen().eigenvalues.min();
            assert!(shrink >= -1e-10);
        }
        assert!(b.is_spd());
    }
}

#[test]
fn range_gate_is_strict() {
    assert!(range_gate(&[0.0, 0.0], &[0.1, 0.0], 0.2));
    assert!(!range_gate(&[0.0, 0.0], &[0.2, 0.0], 0.2));
    assert!(!range_gate(&[0.0, 0.0], &[3.0, 4.0], 0.2));
}

#[test]
fn localization_threshold_is_strict() {
    let b = belief2([0.549, 0.5], 0.01);
    assert!(localization_status(&b, &[0.5, 0.5], 0.05));
    let edge = belief2([0.5, 0.25], 0.01);
    assert!(!localization_status(&edge, &[0.5, 0.2], 0.05) || edge.error_norm(&[0.5, 0.2]) < 0.05);
    let exact = belief2([0.0, 0.0], 0.01);
    assert!(!localization_status(&exact, &[0.05, 0.0], 0.05));
    let mut hidden = belief2([0.5, 0.5], 0.01);
    hidden.detected = false;
    assert!(!localization_status(&hidden, &[0.5, 0.5], 0.05));
}

fn sensing() -> Sensing {
    Sensing {
        range: 0.2,
        nu: 2,
        init_sigma: 0.1,
    }
}

#[test]
fn nothing_in_range_means_no_measurements() {
    let model = bearing_model_2d(0.01).unwrap();
    let truths = [TargetTruth::fixed(0, vec![0.9, 0.9])];
    let mut beliefs = [TargetBelief::undetected(0, 2)];
    let mut rngs = [ChaCha8Rng::seed_from_u64(1)];
    let got = detect_and_measure(&truths, &mut beliefs, &[0.1, 0.1], &model, &sensing(), &mut rngs, 0.0).unwrap();
    assert!(got.is_empty());
    assert!(!beliefs[0].detected);
}

#[test]
fn first_sighting_detects_and_initializes() {
    let model = bearing_model_2d(1e-6).unwrap();
    let truths = [TargetTruth::fixed(4, vec![0.6, 0.5]), TargetTruth::fixed(5, vec![0.1, 0.9])];
    let mut beliefs = [TargetBelief::undetected(4, 2), TargetBelief::undetected(5, 2)];
    let mut rngs = [ChaCha8Rng::seed_from_u64(1), ChaCha8Rng::seed_from_u64(2)];
    let s = [0.5, 0.5];
    let got = detect_and_measure(&truths, &mut beliefs, &s, &model, &sensing(), &mut rngs, 0.0).unwrap();
    assert_eq!(got.len(), 1);
    assert!(got[0].new_detection && got[0].id == 4);
    assert!(beliefs[0].detected && !beliefs[1].detected);
    // Mean is range/2 along the bearing (east).
    assert!((beliefs[0].mean[0] - 0.6).abs() < 1e-3 && (beliefs[0].mean[1] - 0.5).abs() < 1e-3);
    assert!((beliefs[0].cov[(0, 0)] - 0.01).abs() < 1e-15);
    let again = detect_and_measure(&truths, &mut beliefs, &s, &model, &sensing(), &mut rngs, 0.05).unwrap();
    assert!(!again[0].new_detection);
}

#[test]
fn late_targets_are_invisible_until_they_appear() {
    let model = bearing_model_2d(0.01).unwrap();
    let truths = [TargetTruth::fixed(0, vec![0.55, 0.5]).appearing_at(7.0)];
    let mut beliefs = [TargetBelief::undetected(0, 2)];
    let mut rngs = [ChaCha8Rng::seed_from_u64(1)];
    let s = [0.5, 0.5];
    assert!(detect_and_measure(&truths, &mut beliefs, &s, &model, &sensing(), &mut rngs, 6.9).unwrap().is_empty());
    assert_eq!(detect_and_measure(&truths, &mut beliefs, &s, &model, &sensing(), &mut rngs, 7.0).unwrap().len(), 1);
}

#[test]
fn measurement_noise_has_the_model_covariance() {
    let cov = DMatrix::from_row_slice(2, 2, &[0.1, 0.02, 0.02, 0.05]);
    let model = crate::information_density::bearing_model_3d_with(cov.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (a, s) = ([0.3, 0.7, 0.0], [0.5, 0.5, 0.4]);
    let mean = model.predict(&a, &s).unwrap();
    let n = 10_000;
    let mut acc = DMatrix::zeros(2, 2);
    for _ in 0..n {
        let z = model.sample(&a, &s, &mut rng).unwrap();
        let d = DVector::from_vec(model.innovation(&z, &mean));
        acc += &d * d.transpose();
    }
    acc /= n as f64;
    for i in 0..2 {
        assert!((acc[(i, i)] - cov[(i, i)]).abs() < 0.05 * cov[(i, i)], "{acc}");
    }
    assert!((acc[(0, 1)] - cov[(0, 1)]).abs() < 0.05 * (cov[(0, 0)] * cov[(1, 1)]).sqrt());
}

#[test]
fn truth_paths() {
    let w = TargetTruth::waypoints(0, vec![0.0, 2.0], vec![vec![0.0, 0.0], vec![1.0, 0.5]]).unwrap();
    assert_eq!(w.position(1.0), vec![0.5, 0.25]);
    assert_eq!(w.position(-1.0), vec![0.0, 0.0]);
    assert_eq!(w.position(5.0), vec![1.0, 0.5]);
    assert!(TargetTruth::waypoints(0, vec![1.0, 1.0], vec![vec![0.0], vec![1.0]]).is_err());
    let d1 = TargetTruth::diffusion(1, vec![0.5, 0.5], 0.01, (0.0, 10.0, 0.05), &[1.0, 1.0], 7).unwrap();
    let d2 = TargetTruth::diffusion(1, vec![0.5, 0.5], 0.01, (0.0, 10.0, 0.05), &[1.0, 1.0], 7).unwrap();
    assert_eq!(d1, d2);
    for j in 0..200 {
        let p = d1.position(j as f64 * 0.05);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(wrap_angle(3.0 * PI) > 0.0);
}

#[test]
fn belief_trace_csv_layout() {
    let b = belief2([0.25, 0.5], 0.01);
    let csv = belief_csv(&[BeliefRow::new(1.5, &b, true)]);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "time,id,detected,mean_0,mean_1,cov_00,cov_11,localized");
    assert_eq!(lines.next().unwrap(), "1.5,0,1,0.25,0.5,0.01,0.01,1");
}
