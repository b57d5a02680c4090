//! CSV and JSON persistence.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::metrics::Metrics;
use crate::harness::sim::{DetectionEvent, Trace};
use crate::platoon::VehicleId;

pub const TRACE_COLUMNS: [&str; 14] = [
    "t",
    "vehicle",
    "s_true",
    "v_true",
    "s_bar",
    "v_bar",
    "s_hat",
    "v_hat",
    "u",
    "rho",
    "gamma_set",
    "theta_set",
    "det1_fired",
    "det2_fired",
];

/// `"2;3"`, empty for the empty set.
pub fn format_set(set: &BTreeSet<VehicleId>) -> String {
    set.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(";")
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_trace<W: Write>(trace: &Trace, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.rows {
        w.write_record([
            r.t.to_string(),
            r.vehicle.0.to_string(),
            r.truth.s.to_string(),
            r.truth.v.to_string(),
            r.x_bar[0].to_string(),
            r.x_bar[1].to_string(),
            r.x_hat[0].to_string(),
            r.x_hat[1].to_string(),
            r.u.to_string(),
            r.rho.to_string(),
            format_set(&r.gamma),
            format_set(&r.theta),
            u8::from(r.det1_fired).to_string(),
            u8::from(r.det2_fired).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_trace(trace, create(path)?).map_err(|e| csv_error(path, e))
}

pub fn export_events(events: &[DetectionEvent], path: impl AsRef<Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        t: u64,
        vehicle: usize,
        detector: &'static str,
        residual: f64,
        threshold: f64,
    }
    let path = path.as_ref();
    let mut w = csv::Writer::from_writer(create(path)?);
    for e in events {
        let detector = match e.detector {
            crate::harness::sim::DetectorKind::PairAhead => "pair-ahead",
            crate::harness::sim::DetectorKind::PairBehind => "pair-behind",
            crate::harness::sim::DetectorKind::OwnGps => "own-gps",
        };
        w.serialize(Row {
            t: e.t,
            vehicle: e.vehicle.0,
            detector,
            residual: e.residual,
            threshold: e.threshold,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn export_metrics(metrics: &Metrics, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, metrics).map_err(|e| Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn load_metrics(path: impl AsRef<Path>) -> Result<Metrics> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Serialization {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::RunConfig;
    use crate::harness::monte_carlo::run_monte_carlo;
    use crate::harness::sim::simulate;

    #[test]
    fn horizon_one_trace_has_header_and_one_row_per_vehicle() {
        let mut cfg = RunConfig::reference();
        cfg.horizon = 1;
        let trace = simulate(&cfg, 0).unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], TRACE_COLUMNS.join(","));
        assert!(lines[3].starts_with("1,3,"));
    }

    #[test]
    fn metrics_json_round_trip_is_lossless() {
        let mut cfg = RunConfig::reference();
        cfg.runs = 2;
        cfg.horizon = 30;
        let m = run_monte_carlo(&cfg, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/metrics.json");
        export_metrics(&m, &path).unwrap();
        assert_eq!(load_metrics(&path).unwrap(), m);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let err = load_metrics("/nonexistent/metrics.json").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/metrics.json"));
    }

    #[test]
    fn set_formatting() {
        assert_eq!(format_set(&BTreeSet::new()), "");
        assert_eq!(format_set(&[VehicleId(3), VehicleId(2)].into_iter().collect()), "2;3");
    }
}
