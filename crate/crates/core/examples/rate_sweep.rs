//! Error-versus-N sweep driven by a config file, written as CSV.
//!
//! `cargo run --release --example rate_sweep [config.toml]`

use gofinv::harness::output::write_rate_report;
use gofinv::harness::{run_rate_experiment, ExperimentConfig};

fn main() -> gofinv::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/quick.toml").into());
    let cfg = ExperimentConfig::load(path.as_ref())?;
    let rep = run_rate_experiment(&cfg)?;
    for c in &rep.cells {
        println!("N = {:>5}  median {:.4e}  IQR {:.2e}  ({} ok, {} failed)", c.n, c.median, c.iqr, c.successes, c.failures);
    }
    if let Some(s) = &rep.slope {
        println!("log-log slope {:.3} ± {:.3}, theory {:.3}", s.slope, s.stderr, rep.theoretical_slope);
    }
    for p in write_rate_report(&cfg.output_dir, &cfg, &rep)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
