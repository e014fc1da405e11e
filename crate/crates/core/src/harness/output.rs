//! CSV and JSON writers. Every file carries the resolved config and root seed; CSV files as
//! leading `#` lines, JSON files under `"config"`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gof::TruthLabel;
use crate::harness::campaign::{CalibrationReport, CampaignReport};
use crate::harness::config::ExperimentConfig;
use crate::harness::rates::RateReport;
use crate::harness::RowStatus;

/// Columns shared by rate and calibration CSVs.
pub const RATE_COLUMNS: [&str; 7] = ["experiment_id", "N", "replicate", "seed", "metric", "value", "status"];

/// Columns of campaign CSVs.
pub const CAMPAIGN_COLUMNS: [&str; 11] = [
    "experiment_id",
    "N",
    "replicate",
    "seed",
    "label",
    "truth_index",
    "T_N",
    "t_N",
    "psi",
    "estimator_error",
    "status",
];

/// Writes the `#` provenance header: tool version, root seed and the resolved config.
pub fn write_provenance<W: Write>(w: &mut W, cfg: &ExperimentConfig) -> Result<()> {
    writeln!(w, "# gofinv {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# root_seed = {}", cfg.root_seed)?;
    for line in cfg.to_toml()?.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Strips `#` lines; what remains is the CSV body compared across runs.
pub fn csv_body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((path.clone(), BufWriter::new(File::create(path)?)))
}

fn csv_file<F>(dir: &Path, name: &str, cfg: &ExperimentConfig, header: &[&str], rows: F) -> Result<PathBuf>
where
    F: FnOnce(&mut csv::Writer<&mut BufWriter<File>>) -> Result<()>,
{
    let (path, mut file) = create(dir, name)?;
    write_provenance(&mut file, cfg)?;
    {
        let mut w = csv::Writer::from_writer(&mut file);
        w.write_record(header)?;
        rows(&mut w)?;
        w.flush()?;
    }
    file.flush()?;
    Ok(path)
}

#[derive(Serialize)]
struct WithConfig<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    root_seed: u64,
    #[serde(flatten)]
    summary: T,
}

fn json_file<T: Serialize>(dir: &Path, name: &str, cfg: &ExperimentConfig, summary: T) -> Result<PathBuf> {
    let (path, mut file) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut file, &WithConfig { config: cfg, root_seed: cfg.root_seed, summary })?;
    writeln!(file)?;
    file.flush()?;
    Ok(path)
}

fn status_str(s: RowStatus) -> &'static str {
    match s {
        RowStatus::Ok => "ok",
        RowStatus::Failed => "failed",
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Writes `<id>_rates.csv` and `<id>_rates.json`.
pub fn write_rate_report(dir: &Path, cfg: &ExperimentConfig, report: &RateReport) -> Result<Vec<PathBuf>> {
    let id = &report.experiment_id;
    let csv_path = csv_file(dir, &format!("{id}_rates.csv"), cfg, &RATE_COLUMNS, |w| {
        for r in &report.rows {
            w.write_record([
                id.clone(),
                r.n.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                report.metric.clone(),
                num(r.value),
                status_str(r.status).into(),
            ])?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Summary<'a> {
        experiment_id: &'a str,
        metric: &'a str,
        cells: &'a [crate::harness::CellSummary],
        slope: &'a Option<crate::harness::SlopeFit>,
        theoretical_slope: f64,
        notes: &'a [String],
    }
    let json_path = json_file(
        dir,
        &format!("{id}_rates.json"),
        cfg,
        Summary {
            experiment_id: id,
            metric: &report.metric,
            cells: &report.cells,
            slope: &report.slope,
            theoretical_slope: report.theoretical_slope,
            notes: &report.notes,
        },
    )?;
    Ok(vec![csv_path, json_path])
}

/// Writes `<id>_calibration.csv` and `<id>_calibration.json`.
pub fn write_calibration_report(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &CalibrationReport,
) -> Result<Vec<PathBuf>> {
    let id = &report.experiment_id;
    let csv_path = csv_file(dir, &format!("{id}_calibration.csv"), cfg, &RATE_COLUMNS, |w| {
        for (r, seed, t) in &report.draws {
            w.write_record([
                id.clone(),
                report.n.to_string(),
                r.to_string(),
                seed.to_string(),
                format!("T_N:{}", report.metric),
                num(*t),
                "ok".into(),
            ])?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Summary<'a> {
        experiment_id: &'a str,
        #[serde(rename = "N")]
        n: usize,
        metric: &'a str,
        level: f64,
        draws: usize,
        failed: usize,
        critical_value: f64,
    }
    let json_path = json_file(
        dir,
        &format!("{id}_calibration.json"),
        cfg,
        Summary {
            experiment_id: id,
            n: report.n,
            metric: &report.metric,
            level: report.level,
            draws: report.draws.len(),
            failed: report.failed,
            critical_value: report.critical_value,
        },
    )?;
    Ok(vec![csv_path, json_path])
}

/// Writes `<id>_campaign.csv` (one row per replicate) and `<id>_campaign.json`.
pub fn write_campaign_report(dir: &Path, cfg: &ExperimentConfig, report: &CampaignReport) -> Result<Vec<PathBuf>> {
    let id = &report.experiment_id;
    let csv_path = csv_file(dir, &format!("{id}_campaign.csv"), cfg, &CAMPAIGN_COLUMNS, |w| {
        for r in &report.replicates {
            let label = match r.label {
                TruthLabel::Null => "null",
                TruthLabel::Alternative => "alternative",
            };
            w.write_record([
                id.clone(),
                report.n.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                label.into(),
                r.truth_index.to_string(),
                num(r.statistic),
                num(r.critical_value),
                if r.ok() { (r.reject as u8).to_string() } else { String::new() },
                num(r.estimator_error),
                if r.ok() { "ok".into() } else { "failed".into() },
            ])?;
        }
        Ok(())
    })?;
    #[derive(Serialize)]
    struct Summary<'a> {
        experiment_id: &'a str,
        #[serde(rename = "N")]
        n: usize,
        metric: &'a str,
        critical_value: f64,
        seeds_disjoint: bool,
        calibration_draws: Option<usize>,
        alternatives: &'a [crate::harness::AlternativeSummary],
        estimate: &'a crate::gof::ErrorEstimate,
    }
    let json_path = json_file(
        dir,
        &format!("{id}_campaign.json"),
        cfg,
        Summary {
            experiment_id: id,
            n: report.n,
            metric: &report.metric,
            critical_value: report.critical_value,
            seeds_disjoint: report.seeds_disjoint,
            calibration_draws: report.calibration.as_ref().map(|c| c.draws.len()),
            alternatives: &report.alternatives,
            estimate: &report.estimate,
        },
    )?;
    Ok(vec![csv_path, json_path])
}

/// A gnuplot script plotting a rate CSV (log-log errors against N) or a campaign CSV
/// (statistic per replicate against the critical value).
pub fn write_plotscript(dir: &Path, csv: &Path) -> Result<PathBuf> {
    let name = csv
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::InvalidInput("output path has no file name".into()))?;
    let stem = name.trim_end_matches(".csv");
    let body = if stem.ends_with("_campaign") {
        format!(
            "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n\
             set terminal pngcairo size 900,600\nset output '{stem}.png'\nset xlabel 'replicate'\nset ylabel 'T_N'\n\
             plot '{name}' using 3:(stringcolumn(5) eq 'null' ? $7 : 1/0) title 'null' with points, \\\n\
             \x20    '{name}' using 3:(stringcolumn(5) eq 'alternative' ? $7 : 1/0) title 'alternative' with points, \\\n\
             \x20    '{name}' using 3:8 title 't_N' with lines\n"
        )
    } else {
        format!(
            "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n\
             set terminal pngcairo size 900,600\nset output '{stem}.png'\nset logscale xy\nset xlabel 'N'\n\
             set ylabel 'error'\nplot '{name}' using 2:6 title 'replicate error' with points\n"
        )
    };
    let (path, mut file) = create(dir, &format!("{stem}.gp"))?;
    file.write_all(body.as_bytes())?;
    file.flush()?;
    Ok(path)
}

/// Writes a dataset as CSV with columns `x1..x_d, y1..y_m`; `sigma` and `seed` go in `#` lines.
pub fn write_dataset(path: &Path, cfg: Option<&ExperimentConfig>, data: &crate::estimators::Dataset) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut file = BufWriter::new(File::create(path)?);
    if let Some(cfg) = cfg {
        write_provenance(&mut file, cfg)?;
    }
    writeln!(file, "# sigma = {}", data.sigma)?;
    if let Some(seed) = data.seed {
        writeln!(file, "# seed = {seed}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut file);
        let header: Vec<String> = (1..=data.d_x)
            .map(|k| format!("x{k}"))
            .chain((1..=data.d_y).map(|k| format!("y{k}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..data.len() {
            w.write_record(data.x(i).iter().chain(data.y(i)).map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    file.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<crate::estimators::Dataset> {
    let text = std::fs::read_to_string(path)?;
    let mut sigma = None;
    let mut seed = None;
    for line in text.lines().filter(|l| l.starts_with('#')) {
        let kv = line.trim_start_matches('#').trim();
        if let Some(v) = kv.strip_prefix("sigma = ") {
            sigma = v.parse::<f64>().ok();
        } else if let Some(v) = kv.strip_prefix("seed = ") {
            seed = v.parse::<u64>().ok();
        }
    }
    let body = csv_body(&text);
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers()?.clone();
    let d_x = header.iter().filter(|h| h.starts_with('x')).count();
    let d_y = header.iter().filter(|h| h.starts_with('y')).count();
    if d_x + d_y != header.len() || d_x == 0 || d_y == 0 {
        return Err(Error::InvalidInput(format!("{}: expected columns x1.., y1..", path.display())));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("{}: bad number {field:?}", path.display())))?;
            if k < d_x {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let mut data = crate::estimators::Dataset::new(d_x, d_y, xs, ys, sigma.unwrap_or(0.0))?;
    data.seed = seed;
    Ok(data)
}
