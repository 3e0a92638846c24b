//! Deterministic artifact emission: CSV bodies with 17-significant-digit
//! scientific formatting, and the run manifest that records every resolved
//! setting and per-point status. Nothing here depends on wall-clock time,
//! so identical runs produce identical bytes.

use crate::config::{kind_name, variant_name, RunSpec};
use catsim_core::model::effective_params;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

/// What one sweep point produced: the resolved integrator settings, the
/// files it wrote, and the failure message if it aborted.
#[derive(Debug)]
pub struct PointReport {
    pub label: String,
    pub step: Option<f64>,
    pub truncation: Option<usize>,
    pub files: Vec<String>,
    pub error: Option<String>,
}

/// One CSV cell; `None` renders as an empty field (used where a branch
/// state is undefined, e.g. the odd cat at alpha = 0).
pub type Row = Vec<Option<f64>>;

fn push_value(body: &mut String, value: f64) {
    let _ = write!(body, "{value:.16e}");
}

pub fn write_csv(dir: &Path, name: &str, header: &str, rows: &[Row]) -> io::Result<()> {
    let mut body = String::with_capacity(32 * (rows.len() + 1));
    body.push_str(header);
    body.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                body.push(',');
            }
            if let Some(value) = cell {
                push_value(&mut body, *value);
            }
        }
        body.push('\n');
    }
    std::fs::write(dir.join(name), body)
}

/// Shortest round-trip decimal form, used for sweep tags and the catalog.
pub fn short(value: f64) -> String {
    format!("{value}")
}

pub fn write_manifest(spec: &RunSpec, reports: &[PointReport]) -> io::Result<()> {
    let eff = effective_params(&spec.params);
    let mut body = String::new();
    let _ = writeln!(body, "catsim {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(body, "command: simulate");
    let _ = writeln!(body, "name: {}", spec.name);
    let _ = writeln!(body, "kind: {}", kind_name(spec.kind));
    let _ = writeln!(body, "variant: {}", variant_name(spec.params.variant));
    for (key, value) in [
        ("omega_q", spec.params.omega_q),
        ("omega_0", spec.params.omega_0),
        ("omega_r", spec.params.omega_r),
        ("xi", spec.params.xi),
        ("g0", spec.params.g0),
        ("gamma_q", spec.rates.gamma_q),
        ("nbar_q", spec.rates.nbar_q),
        ("kappa_r", spec.rates.kappa_r),
        ("nbar_r", spec.rates.nbar_r),
        ("delta", eff.delta),
        ("g", eff.g),
        ("alpha_max", eff.alpha_max),
        ("t_peak", eff.t_peak),
        ("t_end_gt", spec.t_end_gt),
        ("sample_gt", spec.sample_gt),
    ] {
        let _ = writeln!(body, "{key}: {value:.16e}");
    }
    let _ = writeln!(body, "n0: {}", eff.n0);
    match &spec.sweep {
        Some((parameter, values)) => {
            let list: Vec<String> = values.iter().map(|v| short(*v)).collect();
            let _ = writeln!(body, "sweep: {} = {}", parameter.key(), list.join(","));
        }
        None => {
            let _ = writeln!(body, "sweep: none");
        }
    }
    let _ = writeln!(body, "workers: {}", spec.workers);
    let _ = writeln!(body, "points: {}", reports.len());
    for report in reports {
        let step = match report.step {
            Some(step) => format!("{step:.16e}"),
            None => "none".into(),
        };
        let truncation = match report.truncation {
            Some(n_d) => n_d.to_string(),
            None => "none".into(),
        };
        let status = match &report.error {
            None => "ok".to_string(),
            Some(message) => format!("failed ({message})"),
        };
        let _ = writeln!(
            body,
            "point {}: status={} step={} truncation={} files={}",
            report.label,
            status,
            step,
            truncation,
            if report.files.is_empty() {
                "none".to_string()
            } else {
                report.files.join(",")
            },
        );
    }
    std::fs::write(spec.out_dir.join("manifest.txt"), body)
}
