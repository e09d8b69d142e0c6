//! Triangulating a target from noisy bearings taken along a circle, with
//! the EKF covariance shrinking as the vantage point changes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rhee::information_density::bearing_model_2d;
use rhee::target_estimation::{ekf_update, initial_belief, localization_status, Sensing};

fn main() -> rhee::Result<()> {
    let model = bearing_model_2d(0.01)?;
    let truth = [0.6, 0.55];
    let sensing = Sensing { range: 0.3, nu: 2, init_sigma: 0.1 };
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let sensor_at = |k: usize| {
        let a = 0.05 * k as f64;
        vec![truth[0] + 0.15 * a.cos(), truth[1] + 0.15 * a.sin()]
    };
    let first = sensor_at(0);
    let z = model.sample(&truth, &first, &mut rng)?;
    let mut belief = initial_belief(0, &first, &z, 2, &sensing)?;
    for k in 1..=200 {
        let s = sensor_at(k);
        let z = model.sample(&truth, &s, &mut rng)?;
        belief = ekf_update(&belief, &model, &s, &z)?.belief;
        if k % 40 == 0 || k == 1 {
            println!(
                "{k:>4} bearings: error {:.4}  sigma ({:.4}, {:.4})  localized {}",
                belief.error_norm(&truth),
                belief.cov[(0, 0)].sqrt(),
                belief.cov[(1, 1)].sqrt(),
                localization_status(&belief, &truth, 0.05)
            );
        }
    }
    Ok(())
}
