//! Writing a run to disk: CSV time series, JSON-lines logs and the metrics summary.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::metrics::{Metrics, RunLog, StateRecord};

/// Decimal places of every CSV field.
const CSV_DECIMALS: usize = 9;

fn push_fields(line: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        if !line.is_empty() {
            line.push(',');
        }
        let _ = write!(line, "{v:.CSV_DECIMALS$}");
    }
}

fn states_header(quads: usize) -> String {
    let mut cols: Vec<String> = vec!["t".into()];
    let body = |prefix: &str, cols: &mut Vec<String>| {
        for name in ["x", "y", "z", "vx", "vy", "vz", "roll", "pitch", "yaw", "wx", "wy", "wz"] {
            cols.push(format!("{prefix}_{name}"));
        }
    };
    body("payload", &mut cols);
    for i in 0..quads {
        body(&format!("quad{i}"), &mut cols);
        for name in ["thrust", "mx", "my", "mz", "tension", "att_err"] {
            cols.push(format!("quad{i}_{name}"));
        }
    }
    cols.push("clearance".into());
    cols.join(",")
}

fn body_fields(b: &crate::dynamics::BodyState) -> [f64; 12] {
    let a = &b.attitude;
    [
        b.position.x,
        b.position.y,
        b.position.z,
        b.velocity.x,
        b.velocity.y,
        b.velocity.z,
        a.phi,
        a.theta,
        a.psi,
        b.body_rates.x,
        b.body_rates.y,
        b.body_rates.z,
    ]
}

fn states_row(s: &StateRecord) -> String {
    let mut line = String::new();
    push_fields(&mut line, [s.t]);
    push_fields(&mut line, body_fields(&s.payload));
    for (i, q) in s.quads.iter().enumerate() {
        push_fields(&mut line, body_fields(q));
        push_fields(&mut line, [s.thrust[i], s.moments[i].x, s.moments[i].y, s.moments[i].z]);
        push_fields(&mut line, [s.tensions[i], s.attitude_errors[i]]);
    }
    push_fields(&mut line, [s.clearance]);
    line
}

fn reference_row(s: &StateRecord) -> String {
    let r = &s.reference;
    let mut line = String::new();
    push_fields(&mut line, [s.t]);
    push_fields(&mut line, r.p_d.iter().chain(r.v_d.iter()).chain(r.a_d.iter()).copied());
    push_fields(&mut line, [r.attitude.psi, s.tracking_error()]);
    line
}

fn write_lines(path: &Path, header: Option<String>, rows: impl Iterator<Item = String>) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    if let Some(h) = header {
        writeln!(w, "{h}")?;
    }
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> io::Result<()> {
    write_lines(path, None, items.iter().map(|x| serde_json::to_string(x).expect("records serialize")))
}

/// Pretty-printed metrics summary. Non-finite numbers become `null`.
pub fn metrics_json(metrics: &Metrics) -> String {
    serde_json::to_string_pretty(metrics).expect("metrics serialize") + "\n"
}

/// Writes `states.csv`, `reference.csv`, `events.jsonl`, `nmpc.jsonl`,
/// `plans.jsonl` and `metrics.json` into `dir`, creating it if needed.
pub fn export_run(dir: &Path, log: &RunLog, metrics: &Metrics) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let quads = log.states.first().map_or(0, |s| s.quads.len());
    write_lines(&dir.join("states.csv"), Some(states_header(quads)), log.states.iter().map(states_row))?;
    write_lines(
        &dir.join("reference.csv"),
        Some("t,x_d,y_d,z_d,vx_d,vy_d,vz_d,ax_d,ay_d,az_d,yaw_d,tracking_error".into()),
        log.states.iter().map(reference_row),
    )?;
    write_jsonl(&dir.join("events.jsonl"), &log.events)?;
    write_jsonl(&dir.join("nmpc.jsonl"), &log.nmpc)?;
    write_jsonl(&dir.join("plans.jsonl"), &log.plans)?;
    fs::write(dir.join("metrics.json"), metrics_json(metrics))
}
