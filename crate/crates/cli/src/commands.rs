//! The `run`, `bench` and `sir` commands, split into an in-memory part that
//! tests call directly and a thin layer that writes the output files.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rank_surfaces::design::{regular_grid, Designer, GridClassification, MetricsGrid, RunReport, TraceRow};
use rank_surfaces::parallel::{map_indexed, resolve_jobs};
use rank_surfaces::problems::{batch_sample, SurfaceFamily};
use serde_json::json;

use crate::config::{ExperimentConfig, MethodEntry, ProblemBlock};
use crate::error::CliError;
use crate::output;

pub const VERSION: &str = env!("RANK_SURFACES_VERSION");

/// Command-line options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: PathBuf,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Invocation {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), CliError> {
        let config = ExperimentConfig::from_path(&self.config)?;
        let base = self.config.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((config, base))
    }

    fn out_dir(&self, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| config.output.dir.clone());
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Output { path: dir.display().to_string(), source })?;
        Ok(dir)
    }
}

pub struct RunOutcome {
    pub report: RunReport,
    pub grid: MetricsGrid,
    /// Ranking at the configured checkpoints, in order.
    pub checkpoints: GridClassification,
    pub surface_names: Vec<String>,
    pub seed: u64,
    pub wall_time: Duration,
}

/// One seeded design run with metrics after every step.
pub fn execute_run(config: &ExperimentConfig, base: &Path, seed: u64) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let family = config.problem.build()?;
    let grid = config.metrics_grid(family.as_ref(), base)?;
    let mut designer = Designer::initialize(config.designer_config(seed)?, family.as_ref())?;
    designer.attach_metrics(grid.clone())?;
    designer.run_to_budget()?;
    let report = designer.report()?;
    let checkpoints = designer.classify_points(&config.metrics.checkpoints)?;
    Ok(RunOutcome {
        report,
        grid,
        checkpoints,
        surface_names: family.surface_names(),
        seed,
        wall_time: started.elapsed(),
    })
}

fn write_run(dir: &Path, config: &ExperimentConfig, outcome: &RunOutcome) -> Result<(), CliError> {
    let report = &outcome.report;
    let dim = outcome.grid.points.first().map_or(0, Vec::len);
    output::write_design(&dir.join("design.csv"), &report.design, dim)?;
    output::write_trace(&dir.join("trace.csv"), &report.trace)?;
    output::write_classifier(&dir.join("classifier.csv"), &outcome.grid.points, &report.final_grid)?;
    let last = report.final_metrics();
    let checkpoints: Vec<_> = config
        .metrics
        .checkpoints
        .iter()
        .enumerate()
        .map(|(n, x)| {
            let chosen = outcome.checkpoints.classifier[n];
            json!({
                "x": x,
                "chosen": chosen,
                "chosen_name": outcome.surface_names[chosen],
                "m_gap": outcome.checkpoints.m_gap[n],
                "p_best": outcome.checkpoints.p_best[n],
            })
        })
        .collect();
    let summary = json!({
        "version": VERSION,
        "problem": config.problem.name(),
        "seed": outcome.seed,
        "surfaces": outcome.surface_names,
        "final": {
            "k": last.k,
            "empirical_loss": last.empirical_loss,
            "true_loss": last.true_loss,
            "error_prob": last.error_probability,
        },
        "counts": report.design.per_surface_counts,
        "stopped_early": report.stopped_early,
        "kernels": report.kernels,
        "checkpoints": checkpoints,
        "wall_time_s": outcome.wall_time.as_secs_f64(),
        "config": config,
    });
    output::write_json(&dir.join("summary.json"), &summary)
}

fn seed_for(inv: &Invocation, config: &ExperimentConfig) -> u64 {
    inv.seed.unwrap_or(config.designer.seed)
}

pub fn cmd_run(inv: &Invocation) -> Result<PathBuf, CliError> {
    let (config, base) = inv.load()?;
    let outcome = execute_run(&config, &base, seed_for(inv, &config))?;
    let dir = inv.out_dir(&config)?;
    write_run(&dir, &config, &outcome)?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub metrics: TraceRow,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub method: String,
    pub replicate: usize,
    pub seed: u64,
    /// The error message of a failed replicate.
    pub outcome: Result<ReplicateResult, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation over √n; absent below two values.
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = (values.len() > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        });
        Some(Stat { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub completed: usize,
    pub failed: usize,
    pub empirical_loss: Stat,
    pub true_loss: Option<Stat>,
    pub error_prob: Stat,
    pub mean_counts: Vec<f64>,
}

/// The methods a bench compares: the configured list, else the designer's own rule.
pub fn bench_methods(config: &ExperimentConfig) -> Vec<MethodEntry> {
    match config.replication.as_ref().map(|r| r.methods.clone()) {
        Some(methods) if !methods.is_empty() => methods,
        _ => vec![MethodEntry { label: None, acquisition: config.designer.acquisition.clone() }],
    }
}

/// Every (method, replicate) pair, replicates running in parallel. Replicate
/// `r` uses seed `base_seed + r` under every method.
pub fn execute_bench(
    config: &ExperimentConfig,
    base: &Path,
    base_seed: u64,
    jobs: usize,
) -> Result<Vec<BenchRow>, CliError> {
    let replication =
        config.replication.as_ref().ok_or_else(|| CliError::Config("bench needs a replication block".into()))?;
    let family = config.problem.build()?;
    let grid = config.metrics_grid(family.as_ref(), base)?;
    let methods = bench_methods(config);
    let count = replication.count;
    let jobs_config: Vec<_> = methods
        .iter()
        .map(|m| {
            let mut c = config.designer_config(0)?;
            c.acquisition = m.acquisition.clone();
            Ok((m.label(), c))
        })
        .collect::<Result<_, CliError>>()?;

    let family = family.as_ref();
    Ok(map_indexed(methods.len() * count, jobs, |n| {
        let (label, template) = &jobs_config[n / count];
        let replicate = n % count;
        let seed = base_seed.wrapping_add(replicate as u64);
        let mut designer_config = template.clone();
        designer_config.seed = seed;
        let outcome = rank_surfaces::design::run(designer_config, family, grid.clone())
            .map(|report| ReplicateResult {
                metrics: *report.final_metrics(),
                counts: report.design.per_surface_counts,
            })
            .map_err(|e| e.to_string());
        BenchRow { method: label.clone(), replicate, seed, outcome }
    }))
}

/// Per-method means and standard errors over completed replicates.
pub fn summarize(rows: &[BenchRow], surfaces: usize) -> Vec<MethodSummary> {
    let mut order: Vec<&str> = Vec::new();
    for row in rows {
        if !order.contains(&row.method.as_str()) {
            order.push(&row.method);
        }
    }
    order
        .into_iter()
        .map(|method| {
            let done: Vec<&ReplicateResult> =
                rows.iter().filter(|r| r.method == method).filter_map(|r| r.outcome.as_ref().ok()).collect();
            let failed = rows.iter().filter(|r| r.method == method && r.outcome.is_err()).count();
            let column = |f: &dyn Fn(&ReplicateResult) -> f64| done.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let true_losses: Option<Vec<f64>> = done.iter().map(|r| r.metrics.true_loss).collect();
            let nan = Stat { mean: f64::NAN, se: None };
            MethodSummary {
                method: method.to_string(),
                completed: done.len(),
                failed,
                empirical_loss: Stat::of(&column(&|r| r.metrics.empirical_loss)).unwrap_or(nan),
                true_loss: true_losses.and_then(|v| Stat::of(&v)),
                error_prob: Stat::of(&column(&|r| r.metrics.error_probability)).unwrap_or(nan),
                mean_counts: (0..surfaces)
                    .map(|l| Stat::of(&column(&|r| r.counts[l] as f64)).map_or(f64::NAN, |s| s.mean))
                    .collect(),
            }
        })
        .collect()
}

pub fn cmd_bench(inv: &Invocation) -> Result<PathBuf, CliError> {
    let (config, base) = inv.load()?;
    let base_seed = inv.seed.unwrap_or_else(|| config.replication.as_ref().map_or(0, |r| r.base_seed));
    let rows = execute_bench(&config, &base, base_seed, resolve_jobs(inv.jobs))?;
    let surfaces = config.kernels.len();
    let dir = inv.out_dir(&config)?;
    output::write_bench(&dir.join("bench.csv"), &rows, surfaces)?;
    output::write_bench_summary(&dir.join("bench_summary.csv"), &summarize(&rows, surfaces), surfaces)?;
    let failed: Vec<&BenchRow> = rows.iter().filter(|r| r.outcome.is_err()).collect();
    for row in &failed {
        eprintln!("warning: {} replicate {} failed: {}", row.method, row.replicate, row.outcome.as_ref().unwrap_err());
    }
    if !rows.is_empty() && failed.len() == rows.len() {
        return Err(CliError::AllReplicatesFailed(format!("all {} replicates failed", rows.len())));
    }
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRow {
    pub x: Vec<f64>,
    /// Sample standard deviation of one draw, per surface.
    pub sd: Vec<f64>,
}

/// Batch estimates of the noise level on a regular grid of the domain.
pub fn noise_surfaces(
    family: &dyn SurfaceFamily,
    per_axis: &[usize],
    batch: usize,
    seed: u64,
) -> Result<Vec<NoiseRow>, CliError> {
    let points =
        regular_grid(family.domain(), per_axis).map_err(|e| CliError::Config(format!("sir.noise_grid: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // keep clear of the designer's streams
    rng.set_stream(7);
    points
        .into_iter()
        .map(|x| {
            let sd = (0..family.surfaces())
                .map(|l| batch_sample(family, l, &x, batch, &mut rng).map(|b| b.sample_variance.sqrt()))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(NoiseRow { x, sd })
        })
        .collect()
}

pub fn cmd_sir(inv: &Invocation) -> Result<PathBuf, CliError> {
    let (config, base) = inv.load()?;
    if !matches!(config.problem, ProblemBlock::Sir { .. }) {
        return Err(CliError::Config(format!("sir needs problem \"sir\", got \"{}\"", config.problem.name())));
    }
    let seed = seed_for(inv, &config);
    let outcome = execute_run(&config, &base, seed)?;
    let family = config.problem.build()?;
    let noise = noise_surfaces(family.as_ref(), &config.sir.noise_grid, config.sir.noise_batch, seed)?;
    let dir = inv.out_dir(&config)?;
    write_run(&dir, &config, &outcome)?;
    output::write_noise(&dir.join("noise_surfaces.csv"), &noise, &outcome.surface_names)?;
    Ok(dir)
}
