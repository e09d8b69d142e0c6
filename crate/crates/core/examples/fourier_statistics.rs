//! Fourier coefficients of a density and of a trajectory, the ergodic
//! metric between them, and the statistics resynthesized from coefficients.

use rhee::fourier::{FourierBasis, SearchDomain, SpatialGrid, TrajectorySegment};

fn main() -> rhee::Result<()> {
    let domain = SearchDomain::unit(2);
    let basis = FourierBasis::new(domain.clone(), 10);

    // A Gaussian bump in the lower left.
    let grid = SpatialGrid::from_fn(domain.clone(), vec![60, 60], |s| {
        (-((s[0] - 0.3).powi(2) + (s[1] - 0.3).powi(2)) / 0.02).exp()
    })?
    .normalized()?;
    let phi = basis.distribution_coeffs(&grid)?;

    // Two trajectories sampled at 100 Hz for 10 s: one circles the bump,
    // one circles the opposite corner.
    let circle = |cx: f64, cy: f64| {
        let times: Vec<f64> = (0..=1000).map(|i| i as f64 * 0.01).collect();
        let points: Vec<Vec<f64>> = times
            .iter()
            .map(|t| vec![cx + 0.12 * (2.0 * t).cos(), cy + 0.12 * (2.0 * t).sin()])
            .collect();
        TrajectorySegment::from_points(times, &points)
    };
    for (name, seg) in [("near the bump", circle(0.3, 0.3)?), ("far corner", circle(0.7, 0.7)?)] {
        let c = basis.trajectory_coeffs(&seg, 0.0, 10.0)?;
        println!("{name:>14}: ergodic metric {:.5}", basis.ergodic_metric(&c, &phi));
    }

    println!("\nstatistics of the target density, resynthesized from {} coefficients:", basis.len());
    let stats = basis.reconstruct(&phi, &[20, 20])?;
    print!("{}", stats.to_ascii().expect("planar grid"));
    Ok(())
}
