//! Result files.
//!
//! `summary.json` is always JSON. The loss curve and occupancy traces are
//! written as `loss_curve.csv` / `occupancy.csv` or as `.json` twins.
//! Channels and slots are numbered from 1 in every file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{OutputFormat, OutputKind};
use crate::harness::run::AggregateStats;

/// Formats `x` with 9 significant digits, in plain notation where that
/// stays short.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("float formatting round-trips");
    if (1e-5..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig9).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct OccupancyRow {
    slot: usize,
    channel: usize,
    fraction: f64,
}

fn occupancy_rows(stats: &AggregateStats) -> impl Iterator<Item = OccupancyRow> + '_ {
    let occ = &stats.occupancy;
    (1..=occ.n_slots()).flat_map(move |slot| {
        (0..occ.n_channels).map(move |c| OccupancyRow {
            slot,
            channel: c + 1,
            fraction: occ.get(slot, c),
        })
    })
}

pub fn loss_curve_csv(stats: &AggregateStats) -> String {
    let mut out = String::from("slot,mean_cumulative_loss,stderr\n");
    for p in &stats.loss_curve {
        out.push_str(&format!("{},{},{}\n", p.slot, format_sig9(p.mean_cumulative_loss), opt(p.stderr)));
    }
    out
}

pub fn occupancy_csv(stats: &AggregateStats) -> String {
    let mut out = String::from("slot,channel,fraction\n");
    for r in occupancy_rows(stats) {
        out.push_str(&format!("{},{},{}\n", r.slot, r.channel, format_sig9(r.fraction)));
    }
    out
}

pub fn summary_json(stats: &AggregateStats) -> String {
    let mut s = serde_json::to_string_pretty(&stats.summary).expect("summary serializes");
    s.push('\n');
    s
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// File name and contents of each requested output.
pub fn render(stats: &AggregateStats, outputs: &[OutputKind], format: OutputFormat) -> Vec<(&'static str, String)> {
    outputs
        .iter()
        .map(|kind| match (kind, format) {
            (OutputKind::LossCurve, OutputFormat::Csv) => ("loss_curve.csv", loss_curve_csv(stats)),
            (OutputKind::LossCurve, OutputFormat::Json) => ("loss_curve.json", to_json(&stats.loss_curve)),
            (OutputKind::Occupancy, OutputFormat::Csv) => ("occupancy.csv", occupancy_csv(stats)),
            (OutputKind::Occupancy, OutputFormat::Json) => {
                let rows: Vec<OccupancyRow> = occupancy_rows(stats).collect();
                ("occupancy.json", to_json(&rows))
            }
            (OutputKind::Summary, _) => ("summary.json", summary_json(stats)),
        })
        .collect()
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes the requested outputs into `dir` (created if missing) and returns
/// the paths written.
pub fn emit_results(stats: &AggregateStats, outputs: &[OutputKind], format: OutputFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in render(stats, outputs, format) {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        log::info!("wrote {}", path.display());
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{ExperimentConfig, StrategyId};
    use crate::harness::run::{run_multi_user, Summary};
    use crate::model::ThetaVector;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig9(2.0 / 3.0), "0.666666667");
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(-0.0), "0");
        assert_eq!(format_sig9(1234.5), "1234.5");
        assert_eq!(format_sig9(123456789012.0), "123456789000");
        assert_eq!(format_sig9(1.0 / 3.0 * 1e-9), "3.33333333e-10");
        assert_eq!(format_sig9(-0.1), "-0.1");
        assert_eq!(format_sig9(10.0), "10");
    }

    fn stats() -> AggregateStats {
        let theta = ThetaVector::new(vec![0.8, 0.4]).unwrap();
        let c = ExperimentConfig::fixed(theta, StrategyId::SymmetricOpt, 20).with_users(2).with_replications(3);
        run_multi_user(&c).unwrap()
    }

    #[test]
    fn csv_schemas() {
        let s = stats();
        let curve = loss_curve_csv(&s);
        let mut lines = curve.lines();
        assert_eq!(lines.next(), Some("slot,mean_cumulative_loss,stderr"));
        assert!(lines.next().unwrap().starts_with("1,"));
        assert_eq!(curve.lines().count(), 21);
        let occ = occupancy_csv(&s);
        let mut lines = occ.lines();
        assert_eq!(lines.next(), Some("slot,channel,fraction"));
        assert!(lines.next().unwrap().starts_with("1,1,"));
        assert_eq!(occ.lines().count(), 41);
    }

    #[test]
    fn summary_round_trips() {
        let s = stats();
        let text = summary_json(&s);
        assert!(text.contains("\"lambda_star\": 0.533333333"));
        let back: Summary = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s.summary);
    }

    #[test]
    fn writes_requested_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = stats();
        let all = [OutputKind::LossCurve, OutputKind::Occupancy, OutputKind::Summary];
        let csv = emit_results(&s, &all, OutputFormat::Csv, dir.path()).unwrap();
        let names: Vec<_> = csv.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_owned()).collect();
        assert_eq!(names, ["loss_curve.csv", "occupancy.csv", "summary.json"]);
        let json = emit_results(&s, &all[..2], OutputFormat::Json, dir.path()).unwrap();
        let rows: Vec<OccupancyRow> = serde_json::from_str(&fs::read_to_string(&json[1]).unwrap()).unwrap();
        assert_eq!(rows.len(), 40);
        let blocked = dir.path().join("summary.json").join("nested");
        assert!(matches!(emit_results(&s, &all, OutputFormat::Csv, &blocked), Err(Error::Io { .. })));
    }
}
