//! CSV and JSON writers. Floats use Rust's shortest round-trip formatting,
//! so every value parses back bit-exactly.

use std::fs::File;
use std::path::Path;

use rank_surfaces::design::{Design, GridClassification, TraceRow};

use crate::commands::{BenchRow, MethodSummary, NoiseRow};
use crate::error::CliError;

pub fn float(v: f64) -> String {
    v.to_string()
}

fn optional(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Output { path: path.display().to_string(), source }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    io_error(path, std::io::Error::other(e))
}

fn write_csv(path: &Path, header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn coordinate_names(dim: usize) -> impl Iterator<Item = String> {
    (1..=dim).map(|k| format!("x{k}"))
}

pub fn write_design(path: &Path, design: &Design, dim: usize) -> Result<(), CliError> {
    let mut header = vec!["step".to_string()];
    header.extend(coordinate_names(dim));
    header.extend(["surface", "sample_mean", "noise_var", "batch_size"].map(String::from));
    let rows = design.records.iter().map(|r| {
        let mut row = vec![r.step.to_string()];
        row.extend(r.location.iter().copied().map(float));
        row.extend([r.surface.to_string(), float(r.sample_mean), float(r.noise_variance), r.batch_size.to_string()]);
        row
    });
    write_csv(path, header, rows)
}

pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), CliError> {
    let header = ["step", "empirical_loss", "true_loss", "error_prob"].map(String::from).to_vec();
    let rows = trace
        .iter()
        .map(|r| vec![r.k.to_string(), float(r.empirical_loss), optional(r.true_loss), float(r.error_probability)]);
    write_csv(path, header, rows)
}

pub fn write_classifier(path: &Path, points: &[Vec<f64>], grid: &GridClassification) -> Result<(), CliError> {
    let dim = points.first().map_or(0, Vec::len);
    let mut header = vec!["point".to_string()];
    header.extend(coordinate_names(dim));
    header.extend(["chosen", "m_gap", "p_best"].map(String::from));
    let rows = points.iter().enumerate().map(|(n, x)| {
        let mut row = vec![n.to_string()];
        row.extend(x.iter().copied().map(float));
        row.extend([grid.classifier[n].to_string(), float(grid.m_gap[n]), float(grid.p_best[n])]);
        row
    });
    write_csv(path, header, rows)
}

pub fn write_bench(path: &Path, rows: &[BenchRow], surfaces: usize) -> Result<(), CliError> {
    let mut header = ["method", "replicate", "seed", "failed", "empirical_loss", "true_loss", "error_prob"]
        .map(String::from)
        .to_vec();
    header.extend((1..=surfaces).map(|l| format!("d_{l}")));
    header.push("message".into());
    let lines = rows.iter().map(|r| {
        let mut row = vec![r.method.clone(), r.replicate.to_string(), r.seed.to_string()];
        match &r.outcome {
            Ok(done) => {
                row.extend([
                    "false".into(),
                    float(done.metrics.empirical_loss),
                    optional(done.metrics.true_loss),
                    float(done.metrics.error_probability),
                ]);
                row.extend(done.counts.iter().map(usize::to_string));
                row.push(String::new());
            }
            Err(message) => {
                row.push("true".into());
                row.extend(std::iter::repeat_n(String::new(), 3 + surfaces));
                row.push(message.clone());
            }
        }
        row
    });
    write_csv(path, header, lines)
}

pub fn write_bench_summary(path: &Path, summaries: &[MethodSummary], surfaces: usize) -> Result<(), CliError> {
    let mut header = [
        "method",
        "completed",
        "failed",
        "empirical_loss",
        "empirical_loss_se",
        "true_loss",
        "true_loss_se",
        "error_prob",
        "error_prob_se",
    ]
    .map(String::from)
    .to_vec();
    header.extend((1..=surfaces).map(|l| format!("mean_d_{l}")));
    let rows = summaries.iter().map(|s| {
        let mut row = vec![s.method.clone(), s.completed.to_string(), s.failed.to_string()];
        for stat in [Some(s.empirical_loss), s.true_loss, Some(s.error_prob)] {
            row.push(optional(stat.map(|t| t.mean)));
            row.push(optional(stat.and_then(|t| t.se)));
        }
        row.extend(s.mean_counts.iter().copied().map(float));
        row
    });
    write_csv(path, header, rows)
}

/// Per-regime noise levels on the SIR lattice.
pub fn write_noise(path: &Path, rows: &[NoiseRow], names: &[String]) -> Result<(), CliError> {
    let mut header = vec!["s".to_string(), "i".to_string()];
    header.extend(names.iter().map(|n| format!("sd_{n}")));
    let lines = rows.iter().map(|r| r.x.iter().chain(&r.sd).copied().map(float).collect());
    write_csv(path, header, lines)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
