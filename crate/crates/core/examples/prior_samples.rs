//! Matérn prior draws, the N-dependent rescaling and the RKHS proxy norm.

use gofinv::prior::rkhs_proxy_norm;
use gofinv::{GaussianPrior, GridSpec, MaternSpec, PriorSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> gofinv::Result<()> {
    let grid = GridSpec::interval(0.0, 1.0, 41)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for alpha in [1.0, 2.0, 4.0] {
        let spec = PriorSpec { matern: MaternSpec::with_defaults(alpha, &grid), kappa: 0.0, components: 1, jitter: 1e-10 };
        let prior = GaussianPrior::new(spec, grid.clone())?;
        let draw = prior.sample(&mut rng);
        let v = draw.values();
        let rough: f64 = v.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        println!(
            "alpha = {alpha}: range [{:.3}, {:.3}], total variation {rough:.3}, RKHS proxy {:.3}",
            v.iter().cloned().fold(f64::INFINITY, f64::min),
            v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            rkhs_proxy_norm(&prior.whiten(&draw, 1.0)?),
        );
        for n in [10, 1_000, 100_000] {
            println!("    N = {n:>6}  rescale factor {:.4}", prior.rescale_factor(n));
        }
    }
    Ok(())
}
