use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn scalar_identity_model(variance: f64) -> MeasurementModel {
    let predict: ModelFn = Arc::new(|a: &[f64], _s: &[f64], out: &mut [f64]| {
        out[0] = a[0];
        Ok(())
    });
    let jac: ModelFn = Arc::new(|_a: &[f64], _s: &[f64], out: &mut [f64]| {
        out[0] = 1.0;
        Ok(())
    });
    MeasurementModel::new(1, 1, 1, predict, jac, DMatrix::from_element(1, 1, variance), vec![false]).unwrap()
}

/// Central-difference Jacobian of `predict`, wrapping angle differences.
fn fd_jacobian(model: &MeasurementModel, alpha: &[f64], sensor: &[f64]) -> DMatrix<f64> {
    let (m, mu) = (model.m(), model.mu());
    let h = 1e-6;
    let mut j = DMatrix::zeros(mu, m);
    for c in 0..m {
        let mut ap = alpha.to_vec();
        ap[c] += h;
        let mut am = alpha.to_vec();
        am[c] -= h;
        let d = model.innovation(&model.predict(&ap, sensor).unwrap(), &model.predict(&am, sensor).unwrap());
        for r in 0..mu {
            j[(r, c)] = d[r] / (2.0 * h);
        }
    }
    j
}

fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn random_geometry(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    loop {
        let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rho = ((a[0] - s[0]).powi(2) + (a[1] - s[1]).powi(2)).sqrt();
        if rho > 0.05 {
            return (s, a);
        }
    }
}

#[test]
fn fim_of_insensitive_model_is_zero() {
    let predict: ModelFn = Arc::new(|_a: &[f64], _s: &[f64], out: &mut [f64]| {
        out.fill(0.3);
        Ok(())
    });
    let jac: ModelFn = Arc::new(|_a: &[f64], _s: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        Ok(())
    });
    let model = MeasurementModel::new(2, 2, 1, predict, jac, DMatrix::identity(2, 2), vec![false; 2]).unwrap();
    let f = fim(&model, &[0.0], &[1.0, 2.0]).unwrap();
    assert!(f.iter().all(|v| *v == 0.0));
}

#[test]
fn fim_of_direct_observation_is_inverse_variance() {
    let f = fim(&scalar_identity_model(0.04), &[0.0], &[3.0]).unwrap();
    assert!((f[(0, 0)] - 25.0).abs() < 1e-12);
}

#[test]
fn singular_noise_is_rejected_at_construction() {
    let m = scalar_identity_model(1.0);
    let p: ModelFn = Arc::new(|_a: &[f64], _s: &[f64], _o: &mut [f64]| Ok(()));
    assert!(MeasurementModel::new(1, 1, 1, p.clone(), p.clone(), DMatrix::zeros(1, 1), vec![false]).is_err());
    let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(MeasurementModel::new(1, 2, 1, p.clone(), p, asym, vec![false; 2]).is_err());
    assert!(bearing_model_2d(0.0).is_err());
    assert_eq!(m.mu(), 1);
}

#[test]
fn bearing_angles_on_the_axes() {
    let model = bearing_model_3d();
    let z = model.predict(&[0.0, 2.0, 1.0], &[0.0, 0.0, 1.0]).unwrap();
    assert_eq!(z, vec![0.0, 0.0]);
    let east = model.predict(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]).unwrap();
    assert!((east[0] - FRAC_PI_2).abs() < 1e-15);
    let below = model.predict(&[0.4, 0.4, 0.0], &[0.4, 0.4, 1.5]).unwrap();
    assert!((below[1] + FRAC_PI_2).abs() < 1e-15);
    assert!(matches!(model.predict(&[0.4, 0.4, 0.0], &[0.4, 0.4, 0.0]), Err(Error::ModelSingular(_))));
    assert!(matches!(model.jacobian(&[0.4, 0.4, 0.0], &[0.4, 0.4, 1.0]), Err(Error::ModelSingular(_))));

    let planar = bearing_model_2d(0.01).unwrap();
    assert_eq!(planar.predict(&[0.0, 1.0], &[0.0, 0.0]).unwrap(), vec![0.0]);
    let south = planar.predict(&[0.0, -1.0], &[0.0, 0.0]).unwrap();
    assert!((south[0] - PI).abs() < 1e-15);
    assert!(matches!(planar.predict(&[0.2, 0.2], &[0.2, 0.2]), Err(Error::ModelSingular(_))));
    assert!(matches!(planar.jacobian(&[0.2, 0.2], &[0.2, 0.2]), Err(Error::ModelSingular(_))));
}

#[test]
fn bearing_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m3 = bearing_model_3d();
    let m2 = bearing_model_2d(0.01).unwrap();
    for _ in 0..100 {
        let (s, a) = random_geometry(&mut rng);
        let j = m3.jacobian(&a, &s).unwrap();
        assert!(rel_frobenius(&j, &fd_jacobian(&m3, &a, &s)) < 1e-5);
        let j = m2.jacobian(&a[..2], &s[..2]).unwrap();
        assert!(rel_frobenius(&j, &fd_jacobian(&m2, &a[..2], &s[..2])) < 1e-5);
    }
}

#[test]
fn fim_matches_finite_difference_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let model = bearing_model_3d();
    for _ in 0..20 {
        let (s, a) = random_geometry(&mut rng);
        let j = fd_jacobian(&model, &a, &s);
        let want = j.transpose() * model.noise_cov().clone().try_inverse().unwrap() * &j;
        let got = fim(&model, &s, &a).unwrap();
        assert!(rel_frobenius(&got, &want) < 1e-4);
    }
}

proptest! {
    #[test]
    fn fim_is_symmetric_psd(
        s in prop::array::uniform3(-1.0f64..1.0),
        a in prop::array::uniform3(-1.0f64..1.0),
    ) {
        prop_assume!((a[0] - s[0]).hypot(a[1] - s[1]) > 1e-3);
        let f = fim(&bearing_model_3d(), &s, &a).unwrap();
        prop_assert!((&f - f.transpose()).amax() <= 1e-12 * f.amax());
        let lo = f.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(lo >= -1e-10 * f.amax().max(1.0));
    }
}

#[test]
fn expected_info_of_point_masses() {
    let model = bearing_model_3d();
    let s = [0.1, 0.2, 1.0];
    let (a, b) = ([0.5, 0.4, 0.0], [0.2, 0.8, 0.1]);
    let one = expected_info_matrix(&model, &s, &BeliefGrid::point_mass(&a)).unwrap();
    assert_eq!(one, fim(&model, &s, &a).unwrap());
    let two = BeliefGrid::new(3, [a, b].concat(), vec![0.5, 0.5]).unwrap();
    let got = expected_info_matrix(&model, &s, &two).unwrap();
    let want = (fim(&model, &s, &a).unwrap() + fim(&model, &s, &b).unwrap()) * 0.5;
    assert!(rel_frobenius(&got, &want) < 1e-14);
}

#[test]
fn expected_info_is_linear_in_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let model = bearing_model_2d(0.01).unwrap();
    let s = [0.5, 0.5];
    let pts: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
    let raw_w: Vec<f64> = (0..10).map(|_| rng.gen_range(0.1..1.0)).collect();
    let raw_v: Vec<f64> = (0..10).map(|_| rng.gen_range(0.1..1.0)).collect();
    let norm = |w: &[f64]| {
        let t: f64 = w.iter().sum();
        w.iter().map(|x| x / t).collect::<Vec<_>>()
    };
    let (w, v) = (norm(&raw_w), norm(&raw_v));
    let t = 0.3;
    let mix: Vec<f64> = w.iter().zip(&v).map(|(a, b)| t * a + (1.0 - t) * b).collect();
    let e = |weights: Vec<f64>| expected_info_matrix(&model, &s, &BeliefGrid::new(2, pts.clone(), weights).unwrap()).unwrap();
    let got = e(mix);
    let want = e(w) * t + e(v) * (1.0 - t);
    assert!(rel_frobenius(&got, &want) < 1e-12);
}

#[test]
fn gaussian_belief_grid_converges() {
    let model = bearing_model_2d(0.01).unwrap();
    let cov = DMatrix::from_row_slice(2, 2, &[0.01, 0.003, 0.003, 0.02]);
    let mean = [0.5, 0.5];
    let s = [0.2, 0.9];
    let e30 = expected_info_matrix(&model, &s, &BeliefGrid::from_gaussian(&mean, &cov, 30, 3.0).unwrap()).unwrap();
    let e60 = expected_info_matrix(&model, &s, &BeliefGrid::from_gaussian(&mean, &cov, 60, 3.0).unwrap()).unwrap();
    assert!(rel_frobenius(&e30, &e60) < 0.02);
    let g = BeliefGrid::from_gaussian(&mean, &cov, 7, 3.0).unwrap();
    assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(g.len(), 49);
}

#[test]
fn range_gate_drops_unseen_belief_points() {
    let model = bearing_model_2d(0.01).unwrap();
    let belief = BeliefGrid::new(2, vec![0.5, 0.5, 0.9, 0.9], vec![0.5, 0.5]).unwrap();
    let s = [0.4, 0.5];
    let gate = RangeGate { nu: 2, min: 0.0, max: 0.2 };
    let got = expected_info_gated(&model, &s, &belief, Some(gate)).unwrap();
    let want = fim(&model, &s, &[0.5, 0.5]).unwrap() * 0.5;
    assert!(rel_frobenius(&got, &want) < 1e-14);
    let blind = RangeGate { nu: 2, min: 0.15, max: f64::INFINITY };
    let got = expected_info_gated(&model, &s, &belief, Some(blind)).unwrap();
    let want = fim(&model, &s, &[0.9, 0.9]).unwrap() * 0.5;
    assert!(rel_frobenius(&got, &want) < 1e-14);
}

/// Determinant by Laplace expansion along the first row.
fn cofactor_det(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    if n == 1 {
        return a[(0, 0)];
    }
    (0..n)
        .map(|c| {
            let minor = a.clone().remove_row(0).remove_column(c);
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            sign * a[(0, c)] * cofactor_det(&minor)
        })
        .sum()
}

fn random_psd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    &b * b.transpose() + DMatrix::identity(m, m) * 0.1
}

fn random_rotation(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0)).qr().q()
}

#[test]
fn eid_value_trivial_cases() {
    assert_eq!(eid_value(&DMatrix::zeros(3, 3)), 0.0);
    assert_eq!(eid_value(&DMatrix::identity(3, 3)), 1.0);
    let neg = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0 - 1e-17]);
    assert!(eid_value(&neg) >= 0.0);
}

#[test]
fn eid_value_matches_cofactor_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for m in 1..=5 {
        for _ in 0..10 {
            let a = random_psd(&mut rng, m);
            let want = cofactor_det(&a);
            assert!((eid_value(&a) - want).abs() <= 1e-10 * want.abs(), "m={m}");
        }
    }
}

#[test]
fn eid_value_is_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for m in 2..=4 {
        for _ in 0..20 {
            let a = random_psd(&mut rng, m);
            let q = random_rotation(&mut rng, m);
            let b = &q * &a * q.transpose();
            let (va, vb) = (eid_value(&a), eid_value(&b));
            assert!((va - vb).abs() <= 1e-9 * va, "{va} vs {vb}");
        }
    }
}

fn planar_belief(id: u32, mean: [f64; 2], sigma: f64) -> TargetBelief {
    TargetBelief::new(id, mean.to_vec(), DMatrix::from_diagonal_element(2, 2, sigma * sigma), true).unwrap()
}

#[test]
fn eid_without_detections_is_uniform() {
    let model = bearing_model_2d(0.01).unwrap();
    let domain = SearchDomain::unit(2);
    let undetected = [TargetBelief::undetected(0, 2)];
    for floor in [0.5, 0.0] {
        let cfg = EidConfig {
            cells: vec![20, 20],
            exploration_floor: floor,
            ..Default::default()
        };
        let g = build_eid_grid(&model, &undetected, &domain, &cfg).unwrap();
        assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}

#[test]
fn zero_floor_eid_is_the_normalized_determinant_field() {
    let model = bearing_model_2d(0.01).unwrap();
    let domain = SearchDomain::unit(2);
    let b = planar_belief(0, [0.3, 0.6], 0.08);
    let cfg = EidConfig {
        cells: vec![16, 16],
        exploration_floor: 0.0,
        belief_cells: 9,
        ..Default::default()
    };
    let g = build_eid_grid(&model, &[b.clone()], &domain, &cfg).unwrap();
    let belief = BeliefGrid::from_gaussian(b.mean.as_slice(), &b.cov, 9, 3.0).unwrap();
    let raw: Vec<f64> = (0..g.len())
        .map(|i| eid_value(&expected_info_matrix(&model, &g.cell_center(i), &belief).unwrap()))
        .collect();
    let total: f64 = raw.iter().sum::<f64>() * g.cell_volume();
    for (got, r) in g.values().iter().zip(&raw) {
        assert!((got - r / total).abs() <= 1e-9 * (r / total).max(1e-6));
    }
    assert!(g.is_normalized());
}

#[test]
fn eid_sums_targets_and_respects_the_floor() {
    let model = bearing_model_2d(0.01).unwrap();
    let domain = SearchDomain::unit(2);
    let beliefs = [planar_belief(0, [0.25, 0.25], 0.05), planar_belief(1, [0.75, 0.7], 0.05)];
    let cfg = EidConfig {
        cells: vec![30, 30],
        exploration_floor: 0.5,
        sensor_range: Some(0.2),
        blind_radius: 0.05,
        ..Default::default()
    };
    let g = build_eid_grid(&model, &beliefs, &domain, &cfg).unwrap();
    assert!(g.is_normalized());
    let lo = g.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g.values().iter().copied().fold(0.0, f64::max);
    assert!((lo / hi - 0.5).abs() < 1e-12);
    // Both targets attract information once the near-field spike is gated.
    let near = |c: [f64; 2]| g.values()[g.cell_of(&c)];
    assert!(near([0.25, 0.25]) > lo && near([0.75, 0.7]) > lo);
    assert_eq!(near([0.05, 0.95]), lo);
}

#[test]
fn tight_belief_peaks_inside_its_three_sigma_disk() {
    // Bearing information grows without bound as the planar range
    // shrinks, so the field peaks over the belief rather than on a ring.
    let model = bearing_model_3d();
    let domain = SearchDomain::unit(2);
    let sigma = 0.05;
    let target = [0.5, 0.5, 0.0];
    let b = TargetBelief::new(0, target.to_vec(), DMatrix::from_diagonal_element(3, 3, sigma * sigma), true).unwrap();
    for blind in [0.0, 0.02] {
        let cfg = EidConfig {
            cells: vec![50, 50],
            exploration_floor: 0.0,
            belief_cells: 9,
            fixed_coordinates: vec![0.3],
            blind_radius: blind,
            ..Default::default()
        };
        let g = build_eid_grid(&model, &[b.clone()], &domain, &cfg).unwrap();
        let best = g.cell_center(g.argmax());
        let d = (best[0] - target[0]).hypot(best[1] - target[1]);
        assert!(d < 3.0 * sigma, "argmax {best:?} at {d}");
        let far = g.values()[g.cell_of(&[0.9, 0.1])];
        assert!(far < 1e-2 * g.values()[g.argmax()]);
    }
}

#[test]
fn eid_config_validation() {
    let bad = [
        EidConfig { exploration_floor: 1.5, ..Default::default() },
        EidConfig { cells: vec![0, 4], ..Default::default() },
        EidConfig { belief_cells: 0, ..Default::default() },
        EidConfig { sensor_range: Some(0.0), ..Default::default() },
        EidConfig { sensor_range: Some(0.1), blind_radius: 0.2, ..Default::default() },
        EidConfig { blind_radius: -1.0, ..Default::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err());
    }
    let model = bearing_model_3d();
    let domain = SearchDomain::unit(2);
    assert!(build_eid_grid(&model, &[], &domain, &EidConfig::default()).is_err());
}
