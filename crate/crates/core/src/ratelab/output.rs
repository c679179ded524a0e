//! Run directories: `{out}/{name}/{timestamp}/` holding the configuration,
//! `distances.csv`, `summary.csv` and `report.json`. The CSV files carry no
//! timestamps, so identical configurations give byte-identical CSVs.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{ExperimentConfig, RateReport, RatelabError};

pub fn write_distances_csv<W: Write>(report: &RateReport, w: W) -> Result<(), RatelabError> {
    let mut out = csv::Writer::from_writer(w);
    for r in &report.distances {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(report: &RateReport, w: W) -> Result<(), RatelabError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "n", "median", "q1", "q3", "iqr", "replicates"])?;
    for m in &report.metrics {
        for p in &m.points {
            out.write_record([
                m.metric.name().to_owned(),
                p.n.to_string(),
                p.median.to_string(),
                p.q1.to_string(),
                p.q3.to_string(),
                p.iqr.to_string(),
                p.replicates.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A fresh directory `{root}/{name}/{UTC timestamp}`, suffixed when a run
/// already claimed the same second.
fn run_dir(root: &Path, name: &str) -> Result<PathBuf, RatelabError> {
    let parent = root.join(name);
    fs::create_dir_all(&parent)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    for k in 0u32.. {
        let dir = if k == 0 {
            parent.join(&stamp)
        } else {
            parent.join(format!("{stamp}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// Writes the run under `root` and returns its directory.
pub fn write_outputs(
    report: &RateReport,
    cfg: &ExperimentConfig,
    root: &Path,
) -> Result<PathBuf, RatelabError> {
    let dir = run_dir(root, &cfg.name)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_distances_csv(report, fs::File::create(dir.join("distances.csv"))?)?;
    write_summary_csv(report, fs::File::create(dir.join("summary.csv"))?)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    Ok(dir)
}
