//! Experiment configuration: one JSON document, validated before any run.

use std::path::{Path, PathBuf};

use rank_surfaces::acquisition::AcquisitionSpec;
use rank_surfaces::design::{
    lattice_grid, regular_grid, DesignerConfig, FitSettings, InitialDesign, KernelChoice, LhsAllocation, MetricsGrid,
    NoiseMode, RefitSchedule,
};
use rank_surfaces::gp::{KernelForm, KernelSpec};
use rank_surfaces::problems::{SirDomain, SirParams, SirProblem, SurfaceFamily, Synth2d, Toy1d};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemBlock,
    pub designer: DesignerBlock,
    pub kernels: Vec<KernelEntry>,
    #[serde(default)]
    pub metrics: MetricsBlock,
    #[serde(default)]
    pub replication: Option<ReplicationBlock>,
    #[serde(default)]
    pub sir: SirOutputBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemBlock {
    Toy1d,
    Synth2d,
    Sir {
        #[serde(default)]
        params: SirParams,
        #[serde(default)]
        domain: SirDomain,
    },
}

impl ProblemBlock {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemBlock::Toy1d => "toy1d",
            ProblemBlock::Synth2d => "synth2d",
            ProblemBlock::Sir { .. } => "sir",
        }
    }

    pub fn build(&self) -> Result<Box<dyn SurfaceFamily>, CliError> {
        Ok(match self {
            ProblemBlock::Toy1d => Box::new(Toy1d::new()),
            ProblemBlock::Synth2d => Box::new(Synth2d::new()),
            ProblemBlock::Sir { params, domain } => {
                Box::new(SirProblem::new(*params, *domain).map_err(|e| CliError::Config(e.to_string()))?)
            }
        })
    }
}

fn default_candidates() -> usize {
    100
}

fn default_batch() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignerBlock {
    pub initial_size: usize,
    pub budget: usize,
    #[serde(default = "default_candidates")]
    pub candidate_count: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub acquisition: AcquisitionSpec,
    #[serde(default)]
    pub refit: RefitSchedule,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub stop_cost: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_design: InitialDesign,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub lhs_allocation: LhsAllocation,
}

/// Kernel of one surface: `"fit"` or `{"fixed": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelEntry {
    Fit,
    Fixed(FixedKernel),
}

/// Exactly one of `lengthscales` (θ = 1/L²) or `theta` (weights of the
/// squared distance) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedKernel {
    /// Amplitude variance s².
    pub scale: f64,
    #[serde(default)]
    pub lengthscales: Option<Vec<f64>>,
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    pub trend: f64,
    #[serde(default)]
    pub form: KernelForm,
}

impl FixedKernel {
    fn to_spec(&self) -> Result<KernelSpec, CliError> {
        let spec = match (&self.lengthscales, &self.theta) {
            (Some(l), None) => KernelSpec::from_lengthscales(self.scale, l, self.trend),
            (None, Some(t)) => KernelSpec::new(self.scale, t.clone(), self.trend),
            _ => return Err(CliError::Config("a fixed kernel needs exactly one of lengthscales or theta".into())),
        };
        spec.map(|s| s.with_form(self.form)).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Evenly spaced points per axis, endpoints included.
    Regular { per_axis: Vec<usize> },
    /// Every `stride`-th point of an integer lattice domain.
    Lattice { stride: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    #[default]
    Uniform,
    /// One weight per grid point, one per line, optional `weight` header.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MetricsBlock {
    /// Defaults per problem: 1000 points in 1-D, 51×51 in 2-D, lattice stride (10, 4) for SIR.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub weights: WeightSource,
    /// Extra points whose ranking is reported in the summary.
    #[serde(default)]
    pub checkpoints: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicationBlock {
    pub count: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Methods compared by `bench`; empty means the designer's own acquisition.
    #[serde(default)]
    pub methods: Vec<MethodEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    #[serde(default)]
    pub label: Option<String>,
    pub acquisition: AcquisitionSpec,
}

impl MethodEntry {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.acquisition.method.name().to_string())
    }
}

fn default_noise_grid() -> Vec<usize> {
    vec![13, 11]
}

fn default_noise_batch() -> usize {
    100
}

/// Extra output of the `sir` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirOutputBlock {
    #[serde(default = "default_noise_grid")]
    pub noise_grid: Vec<usize>,
    #[serde(default = "default_noise_batch")]
    pub noise_batch: usize,
}

impl Default for SirOutputBlock {
    fn default() -> Self {
        SirOutputBlock { noise_grid: default_noise_grid(), noise_batch: default_noise_batch() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: default_dir() }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates; parse errors carry serde's line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let family = self.problem.build()?;
        let designer = self.designer_config(self.designer.seed)?;
        designer.validate(family.as_ref()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(rep) = &self.replication {
            if rep.count == 0 {
                return Err(CliError::Config("replication.count must be positive".into()));
            }
            for m in &rep.methods {
                let mut alt = designer.clone();
                alt.acquisition = m.acquisition.clone();
                alt.validate(family.as_ref()).map_err(|e| CliError::Config(format!("method {}: {e}", m.label())))?;
            }
        }
        let d = family.domain().dim();
        if self.metrics.checkpoints.iter().any(|p| p.len() != d || !family.domain().contains(p)) {
            return Err(CliError::Config("metrics.checkpoints must lie in the problem domain".into()));
        }
        if self.sir.noise_grid.len() != 2 || self.sir.noise_batch < 2 {
            return Err(CliError::Config("sir.noise_grid needs two axes and sir.noise_batch >= 2".into()));
        }
        Ok(())
    }

    pub fn designer_config(&self, seed: u64) -> Result<DesignerConfig, CliError> {
        let kernels = self
            .kernels
            .iter()
            .map(|k| match k {
                KernelEntry::Fit => Ok(KernelChoice::Fit),
                KernelEntry::Fixed(f) => f.to_spec().map(KernelChoice::Fixed),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let b = &self.designer;
        Ok(DesignerConfig {
            initial_size: b.initial_size,
            budget: b.budget,
            candidate_count: b.candidate_count,
            batch_size: b.batch_size,
            acquisition: b.acquisition.clone(),
            refit: b.refit,
            noise_mode: b.noise_mode,
            stop_cost: b.stop_cost,
            seed,
            initial_design: b.initial_design.clone(),
            kernels,
            fit: b.fit.clone(),
            lhs_allocation: b.lhs_allocation,
        })
    }

    /// Test grid and weights; relative weight paths resolve against `base`.
    pub fn metrics_grid(&self, family: &dyn SurfaceFamily, base: &Path) -> Result<MetricsGrid, CliError> {
        let domain = family.domain();
        let spec = self.metrics.grid.clone().unwrap_or_else(|| match &self.problem {
            ProblemBlock::Toy1d => GridSpec::Regular { per_axis: vec![1000] },
            ProblemBlock::Synth2d => GridSpec::Regular { per_axis: vec![51, 51] },
            ProblemBlock::Sir { .. } => GridSpec::Lattice { stride: vec![10, 4] },
        });
        let points = match &spec {
            GridSpec::Regular { per_axis } => regular_grid(domain, per_axis),
            GridSpec::Lattice { stride } => lattice_grid(domain, stride),
        }
        .map_err(|e| CliError::Config(format!("metrics.grid: {e}")))?;
        let weights = match &self.metrics.weights {
            WeightSource::Uniform => return Ok(MetricsGrid::uniform(points)),
            WeightSource::File(path) => read_weights(&base.join(path))?,
        };
        if weights.len() != points.len() {
            return Err(CliError::Config(format!(
                "weight file has {} entries for {} grid points",
                weights.len(),
                points.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(CliError::Config("weights must be nonnegative with a positive sum".into()));
        }
        Ok(MetricsGrid { points, weights: weights.iter().map(|w| w / total).collect() })
    }
}

fn read_weights(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read weights {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line == "weight") {
            continue;
        }
        out.push(line.parse::<f64>().map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), n + 1)))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {"name": "toy1d"},
        "designer": {"initial_size": 10, "budget": 20, "acquisition": {"method": "gap_sur"}},
        "kernels": [
            {"fixed": {"scale": 0.01, "lengthscales": [0.18], "trend": 0.5}},
            {"fixed": {"scale": 0.01, "theta": [1.0], "trend": 0.5}}
        ]
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.designer.candidate_count, 100);
        assert_eq!(c.output.dir, PathBuf::from("out"));
        let d = c.designer_config(3).unwrap();
        match &d.kernels[0] {
            KernelChoice::Fixed(k) => assert!((k.theta[0] - 1.0 / 0.0324).abs() < 1e-9),
            KernelChoice::Fit => panic!("expected a fixed kernel"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("\"budget\": 20", "\"budget\": 20, \"budgte\": 3");
        let err = ExperimentConfig::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn missing_problem_is_a_config_error() {
        let bad = MINIMAL.replace("\"problem\": {\"name\": \"toy1d\"},", "");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn kernel_needs_one_convention() {
        let bad = MINIMAL.replace("\"theta\": [1.0]", "\"theta\": [1.0], \"lengthscales\": [1.0]");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }
}
