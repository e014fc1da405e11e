//! pCN posterior mean started from the MAP, with chain diagnostics.

use gofinv::estimators::{pcn_posterior_mean, simulate_dataset, MapConfig, PcnConfig, PcnInit};
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

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let data = simulate_dataset(&model, &truth, 200, 0.1, &density, &mut rng)?;
    let cfg = PcnConfig { init: PcnInit::Map, ..PcnConfig::default() };
    let fit = pcn_posterior_mean(&model, &prior, &data, 0.1, &cfg, &MapConfig::default(), &mut rng)?;
    println!("{:?}", fit.diagnostics);
    println!("L2 error {:.4}", Metric::L2Mu.distance(&fit.estimate, &truth, &density, &model)?);
    for i in (0..grid.n_points()).step_by(8) {
        println!("x = {:.3}  estimate {:?}", grid.point(i)[0], fit.estimate.node(i));
    }
    Ok(())
}
