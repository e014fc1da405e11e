use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gofinv::estimators::{estimate, simulate_dataset, simulate_noiseless};
use gofinv::gof::{critical_value, run_test, CriticalMode};
use gofinv::harness::config::TruthSection;
use gofinv::harness::output::{self, read_dataset, write_dataset};
use gofinv::harness::{run_calibration, run_rate_experiment, run_test_campaign, Context, ExperimentConfig};
use gofinv::seeding::{derive_rng, derive_seed, rng_from_seed, stream};
use gofinv::{Error, GridFunction, Result};

/// Goodness-of-fit tests for covariate-to-parameter mappings of ODE models.
#[derive(Parser)]
#[command(name = "gofinv", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `root_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script next to each CSV.
    #[arg(long, global = true)]
    emit_plotscript: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from the configured truth.
    Simulate {
        /// Sample size; defaults to the first entry of N_grid.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Compute one estimate from a dataset file.
    Estimate {
        #[arg(long)]
        data: PathBuf,
    },
    /// Null-distribution draws of T_N and the calibrated critical value.
    Calibrate,
    /// Run one test on an estimate file.
    Test {
        #[arg(long)]
        estimate: PathBuf,
        /// Critical value; otherwise from theory mode or --calibration.
        #[arg(long)]
        critical: Option<f64>,
        /// A `*_calibration.json` written by `calibrate`.
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
    /// Rate sweep over N_grid.
    Rates,
    /// Full type-1/type-2 study.
    Campaign,
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, m: &log::Metadata) -> bool {
        m.level() <= log::Level::Warn
    }

    fn log(&self, r: &log::Record) {
        if self.enabled(r.metadata()) {
            eprintln!("[{}] {}", r.level(), r.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

fn load(common: &Common) -> Result<ExperimentConfig> {
    let path = common.config.as_ref().ok_or_else(|| Error::Config("--config <file> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.root_seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn report(paths: &[PathBuf], common: &Common, dir: &Path) -> Result<()> {
    for p in paths {
        println!("wrote {}", p.display());
        if common.emit_plotscript && p.extension().is_some_and(|e| e == "csv") {
            println!("wrote {}", output::write_plotscript(dir, p)?.display());
        }
    }
    Ok(())
}

fn truth_for(cfg: &ExperimentConfig, ctx: &Context) -> Result<GridFunction> {
    match cfg.truth {
        TruthSection::NullElement { .. } => cfg.fixed_truth(ctx.class()?),
        TruthSection::PriorDraw { scale } => {
            Ok(ctx.prior.sample(&mut derive_rng(cfg.root_seed, stream::TRUTH, 0)).scaled(scale))
        }
    }
}

/// Returns `true` when some replicates failed.
fn run(cli: &Cli) -> Result<bool> {
    let cfg = load(&cli.common)?;
    let dir = cfg.output_dir.clone();
    let id = cfg.experiment_id.clone();
    match &cli.command {
        Command::Simulate { n } => {
            let ctx = Context::build(&cfg)?;
            let truth = truth_for(&cfg, &ctx)?;
            let n = n.unwrap_or(cfg.n_grid[0]);
            let seed = derive_seed(cfg.root_seed, stream::DATA, 0);
            let mut rng = rng_from_seed(seed);
            let mut data = if cfg.sigma > 0.0 {
                simulate_dataset(&ctx.model, &truth, n, cfg.sigma, &ctx.density, &mut rng)?
            } else {
                simulate_noiseless(&ctx.model, &truth, n, &ctx.density, &mut rng)?
            };
            data.seed = Some(seed);
            let path = dir.join(format!("{id}_dataset.csv"));
            write_dataset(&path, Some(&cfg), &data)?;
            println!("wrote {}", path.display());
            Ok(false)
        }
        Command::Estimate { data } => {
            let ctx = Context::build(&cfg)?;
            let data = read_dataset(data)?;
            let mut rng = rng_from_seed(derive_seed(cfg.root_seed, stream::DATA, 1));
            let est = estimate(&ctx.model, &ctx.prior, &data, cfg.likelihood_sigma(), &ctx.estimator, &mut rng)?;
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{id}_estimate.json"));
            let body = serde_json::json!({ "config": cfg, "root_seed": cfg.root_seed, "result": est });
            std::fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")?;
            println!("wrote {}", path.display());
            Ok(false)
        }
        Command::Calibrate => {
            let rep = run_calibration(&cfg)?;
            println!("t_N = {}", rep.critical_value);
            report(&output::write_calibration_report(&dir, &cfg, &rep)?, &cli.common, &dir)?;
            Ok(rep.failed > 0)
        }
        Command::Test { estimate, critical, calibration } => {
            let ctx = Context::build(&cfg)?;
            let text = std::fs::read_to_string(estimate)?;
            let v: serde_json::Value = serde_json::from_str(&text)?;
            let theta: GridFunction = serde_json::from_value(v["result"]["estimate"].clone())?;
            let t = cfg.test_section()?;
            let t_n = match (critical, calibration, t.mode) {
                (Some(c), _, _) => *c,
                (None, Some(path), _) => {
                    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                    v["critical_value"]
                        .as_f64()
                        .ok_or_else(|| Error::Config(format!("{}: no critical_value", path.display())))?
                }
                (None, None, CriticalMode::Theory { .. }) => critical_value(&cfg.test_spec(t.n)?, None)?,
                (None, None, CriticalMode::Calibrated { .. }) => {
                    return Err(Error::Config("calibrated mode needs --critical or --calibration".into()));
                }
            };
            let dist = gofinv::gof::Distance::new(t.metric, &ctx.density, &ctx.model);
            let rep = run_test(&theta, ctx.class()?, &dist, t_n, &cfg.optimizer)?;
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{id}_test.json"));
            let body = serde_json::json!({ "config": cfg, "root_seed": cfg.root_seed, "report": rep });
            std::fs::write(&path, serde_json::to_string_pretty(&body)? + "\n")?;
            println!("T_N = {} t_N = {} psi = {}", rep.statistic, rep.critical_value, rep.psi());
            println!("wrote {}", path.display());
            Ok(false)
        }
        Command::Rates => {
            let rep = run_rate_experiment(&cfg)?;
            for c in &rep.cells {
                println!("N = {:>6}  median = {:.5e}  iqr = {:.3e}  ok = {}", c.n, c.median, c.iqr, c.successes);
            }
            match &rep.slope {
                Some(s) => println!("slope = {:.4} ± {:.4} (theory {:.4})", s.slope, s.stderr, rep.theoretical_slope),
                None => println!("slope undefined: {}", rep.notes.join("; ")),
            }
            report(&output::write_rate_report(&dir, &cfg, &rep)?, &cli.common, &dir)?;
            Ok(rep.cells.iter().any(|c| c.failures > 0))
        }
        Command::Campaign => {
            let rep = run_test_campaign(&cfg)?;
            let e = &rep.estimate;
            println!(
                "t_N = {:.5e}  type1 = {:.3}  type2 = {:.3}  gamma = {:.3}",
                rep.critical_value, e.type1_hat, e.type2_hat, e.gamma_hat
            );
            report(&output::write_campaign_report(&dir, &cfg, &rep)?, &cli.common, &dir)?;
            let cal_failed = rep.calibration.as_ref().is_some_and(|c| c.failed > 0);
            Ok(cal_failed || e.null_failed + e.alt_failed > 0)
        }
    }
}

fn main() -> ExitCode {
    let _ = log::set_logger(&LOGGER).map(|()| log::set_max_level(log::LevelFilter::Warn));
    let cli = Cli::parse();
    if let Some(jobs) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => {
            eprintln!("warning: some replicates failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
