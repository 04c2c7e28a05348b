//! Byte-reproducible writers: fixed column order, `{:.16e}` floats.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use revolve_core::simulator::{EndpointEnsemble, Trajectory};
use revolve_core::stats::ConvergenceSweep;
use serde::Serialize;

use crate::CliError;

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &to_json_string(value))
}

fn header(columns: &str, n: usize) -> String {
    let mut line = columns.to_string();
    for i in 1..=n {
        let _ = write!(line, ",x{i}");
    }
    line.push('\n');
    line
}

/// `path_index,x1,...,xn`
pub fn endpoints_csv(ensemble: &EndpointEnsemble) -> String {
    let mut out = header("path_index", ensemble.dimension);
    for (i, row) in ensemble.rows().enumerate() {
        let _ = write!(out, "{i}");
        for x in row {
            let _ = write!(out, ",{x:.16e}");
        }
        out.push('\n');
    }
    out
}

/// `path_index,t,x1,...,xn`, one line per segment boundary.
pub fn trajectories_csv(dimension: usize, trajectories: &[Trajectory]) -> String {
    let mut out = header("path_index,t", dimension);
    for (i, path) in trajectories.iter().enumerate() {
        for (t, x) in path.switch_times.iter().zip(&path.positions) {
            let _ = write!(out, "{i},{t:.16e}");
            for v in x {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
    }
    out
}

/// `eps,seed,metric,noise,ks_p1,...,ks_pn`
pub fn sweep_csv(sweep: &ConvergenceSweep) -> String {
    let n = sweep.points.first().map_or(0, |p| p.ks_pvalues.len());
    let mut out = String::from("eps,seed,metric,noise");
    for i in 1..=n {
        let _ = write!(out, ",ks_p{i}");
    }
    out.push('\n');
    for p in &sweep.points {
        let _ = write!(out, "{:.16e},{},{:.16e},{:.16e}", p.eps, p.seed, p.metric, p.noise);
        for v in &p.ks_pvalues {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}
