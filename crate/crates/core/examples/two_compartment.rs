//! Closed-form two-compartment solution and the lifted forward map.
//!
//! `cargo run --example two_compartment`

use gofinv::forward::forward_on_grid;
use gofinv::{GridFunction, GridSpec, OdeModel};

fn main() -> gofinv::Result<()> {
    let times = vec![0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
    let model = OdeModel::two_compartment(times.clone(), 1.0, 1.0)?;

    let p = [0.0, 0.5, -0.3, 0.2];
    let coeffs = model.coefficient_map(&p)?;
    println!("amplitudes {:?}", coeffs.amps);
    println!("rates      {:?}", coeffs.rates);
    for t in [0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        println!("s1({t:>4}) = {:.6}", model.solve_s1(&coeffs, t)?);
    }

    // A covariate-dependent parameter field: log-clearance rises with x.
    let grid = GridSpec::interval(0.0, 1.0, 5)?;
    let theta = GridFunction::from_fn(grid.clone(), 4, |x| Ok(vec![-0.5 + x[0], 0.5, -0.3, 0.2]))?;
    let g = forward_on_grid(&model, &theta)?;
    for (i, row) in g.chunks(times.len()).enumerate() {
        let x = grid.point(i);
        let shown: Vec<String> = row.iter().map(|v| format!("{v:7.3}")).collect();
        println!("x = {:.2}  log s1 = [{}]", x[0], shown.join(" "));
    }
    Ok(())
}
