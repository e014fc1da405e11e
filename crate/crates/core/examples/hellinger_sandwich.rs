//! Hellinger distance between the regression laws of two CPMs and its bounds by d_G.

use gofinv::forward::forward_on_grid;
use gofinv::metrics::{c_u, d_g, hellinger};
use gofinv::{DensitySpec, GridFunction, GridSpec, OdeModel};

fn main() -> gofinv::Result<()> {
    let model = OdeModel::two_compartment(vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0], 1.0, 1.0)?;
    let grid = GridSpec::interval(0.0, 1.0, 33)?;
    let density = DensitySpec::uniform(&grid);
    let base = GridFunction::from_fn(grid.clone(), 4, |x| Ok(vec![0.2 * x[0], 0.5, 0.0, 0.3]))?;

    println!("{:>6} {:>10} {:>10} {:>10} {:>10}", "shift", "lower", "h", "upper", "U");
    for shift in [0.01, 0.05, 0.1, 0.3, 1.0] {
        let other = base.add_scaled(1.0, &GridFunction::constant(grid.clone(), &[shift, 0.0, 0.0, 0.0]))?;
        let u = [&base, &other]
            .iter()
            .flat_map(|t| forward_on_grid(&model, t).unwrap())
            .collect::<Vec<_>>()
            .chunks(6)
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let dg = d_g(&model, &base, &other, &density)?;
        let h = hellinger(&model, &base, &other, 1.0, &density)?;
        println!("{shift:>6} {:>10.5} {h:>10.5} {:>10.5} {u:>10.3}", c_u(u)?.sqrt() * dg, dg / 2.0);
    }
    Ok(())
}
