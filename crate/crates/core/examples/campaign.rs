//! Calibrated type-1/type-2 campaign on a small config.

use gofinv::harness::{run_test_campaign, ExperimentConfig};

fn main() -> gofinv::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quick.toml").into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let rep = run_test_campaign(&cfg)?;
    let e = &rep.estimate;
    if let Some(c) = &rep.calibration {
        println!("calibrated t_N = {:.4e} from {} null draws", c.critical_value, c.draws.len());
    }
    println!("type-1 {:.3} [{:.3}, {:.3}]", e.type1_hat, e.type1_ci.lo, e.type1_ci.hi);
    println!("type-2 {:.3} [{:.3}, {:.3}]", e.type2_hat, e.type2_ci.lo, e.type2_ci.hi);
    println!("sup-probe {:.3}, bound holds: {}", e.sup_probe, e.lemma_holds);
    for a in &rep.alternatives {
        println!("alternative amplitude {:.3} separation {:.4}", a.amplitude, a.separation);
    }
    Ok(())
}
