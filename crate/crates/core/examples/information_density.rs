//! Expected information density for a bearing-only sensor, first with one
//! uncertain target belief and then with the exploration floor added.

use nalgebra::DMatrix;
use rhee::fourier::SearchDomain;
use rhee::information_density::{bearing_model_2d, build_eid_grid, EidConfig};
use rhee::target_estimation::TargetBelief;

fn main() -> rhee::Result<()> {
    let model = bearing_model_2d(0.01)?;
    let domain = SearchDomain::unit(2);
    let beliefs = [
        TargetBelief::new(0, vec![0.35, 0.6], DMatrix::from_diagonal_element(2, 2, 0.05f64.powi(2)), true)?,
        TargetBelief::new(1, vec![0.75, 0.25], DMatrix::from_diagonal_element(2, 2, 0.03f64.powi(2)), true)?,
    ];
    for floor in [0.0, 0.3] {
        let cfg = EidConfig {
            cells: vec![48, 24],
            exploration_floor: floor,
            belief_cells: 9,
            sensor_range: Some(0.2),
            blind_radius: 0.02,
            ..Default::default()
        };
        let grid = build_eid_grid(&model, &beliefs, &domain, &cfg)?;
        let peak = grid.cell_center(grid.argmax());
        println!("exploration floor {floor}: peak at ({:.2}, {:.2})", peak[0], peak[1]);
        print!("{}", grid.to_ascii().expect("planar"));
        println!();
    }
    Ok(())
}
