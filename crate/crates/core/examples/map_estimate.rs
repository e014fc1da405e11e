//! Tikhonov-regularised MAP estimate from simulated data.

use gofinv::estimators::{map_estimate, simulate_dataset, MapConfig};
use gofinv::gof::NullClass;
use gofinv::{DensitySpec, GaussianPrior, GridSpec, MaternSpec, Metric, OdeModel, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gofinv::Result<()> {
    let model = OdeModel::two_compartment(vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0], 1.0, 1.0)?;
    let grid = GridSpec::interval(0.0, 1.0, 33)?;
    let density = DensitySpec::uniform(&grid);
    let prior = GaussianPrior::new(
        PriorSpec { matern: MaternSpec::with_defaults(2.0, &grid), kappa: 0.0, components: 4, jitter: 1e-10 },
        grid.clone(),
    )?;
    let class = NullClass::saturable_exp(
        grid.clone(),
        vec![0.0, 0.5, 0.5, 0.5, 0.5, 0.5],
        vec![0.9, 6.0, 2.0, 2.0, 2.0, 2.0],
        1.0,
    )?;
    let truth = class.theta_tau(&[0.5, 3.0, 1.0, 1.0, 1.0, 1.5])?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [50, 200, 800, 3200] {
        let data = simulate_dataset(&model, &truth, n, 0.1, &density, &mut rng)?;
        let fit = map_estimate(&model, &prior, &data, 0.1, &MapConfig::default(), &mut rng)?;
        let err = Metric::L2Mu.distance(&fit.estimate, &truth, &density, &model)?;
        println!("N = {n:>5}  L2 error {err:.4}  {:.2}s", fit.wall_time);
    }
    Ok(())
}
