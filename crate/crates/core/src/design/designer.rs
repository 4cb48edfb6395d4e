//! The sequential design loop.

use std::collections::VecDeque;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lhs::{candidate_set, lhs_candidates, regular_grid};
use super::stop::stop_rule;
use crate::acquisition::{select_pair, AcquisitionSpec, Method, NoiseModel, ScoringContext, Selection, TrueMeans};
use crate::error::{Error, Result};
use crate::gp::{
    fit_hyperparameters, min_observations, FitOptions, HyperBounds, KernelSpec, KrigingModel, ObservationSet,
    TrackedPosterior, TrendMode,
};
use crate::problems::{batch_sample, SurfaceFamily};
use crate::ranking::{classify, m_gap_parts, min_prob_of, PosteriorAtPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitSchedule {
    #[default]
    Never,
    /// Refit a surface whenever its record count reaches a power of two.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// The simulator's noise sd is known; entries carry `σ²/r`.
    #[default]
    Known,
    /// Noise is estimated from each batch of `r ≥ 2` replicates.
    BatchEstimated,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialDesign {
    /// Separate Latin hypercube per surface, interleaved round-robin.
    #[default]
    Lhs,
    /// The same regular grid for every surface.
    Grid { per_axis: Vec<usize> },
}

/// How the non-adaptive `lhs` method splits the budget across surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LhsAllocation {
    /// Proportional to the known noise variances (equal when unknown).
    #[default]
    NoiseWeighted,
    Equal,
}

/// Kernel of one surface: fixed, or estimated by maximum likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    Fixed(KernelSpec),
    Fit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub fit_nugget: bool,
}

fn default_restarts() -> usize {
    5
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings { restarts: default_restarts(), fit_nugget: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignerConfig {
    pub initial_size: usize,
    pub budget: usize,
    pub candidate_count: usize,
    pub batch_size: usize,
    pub acquisition: AcquisitionSpec,
    pub refit: RefitSchedule,
    pub noise_mode: NoiseMode,
    /// Per-step cost in the stopping rule; 0 runs to the full budget.
    pub stop_cost: f64,
    pub seed: u64,
    pub initial_design: InitialDesign,
    pub kernels: Vec<KernelChoice>,
    pub fit: FitSettings,
    pub lhs_allocation: LhsAllocation,
}

impl DesignerConfig {
    /// Defaults: 20% initial design, 100 candidates, no batching, fixed budget.
    pub fn new(budget: usize, acquisition: AcquisitionSpec, kernels: Vec<KernelChoice>) -> Self {
        DesignerConfig {
            initial_size: (budget / 5).max(kernels.len()),
            budget,
            candidate_count: 100,
            batch_size: 1,
            acquisition,
            refit: RefitSchedule::Never,
            noise_mode: NoiseMode::Known,
            stop_cost: 0.0,
            seed: 0,
            initial_design: InitialDesign::Lhs,
            kernels,
            fit: FitSettings::default(),
            lhs_allocation: LhsAllocation::NoiseWeighted,
        }
    }

    pub fn validate(&self, family: &dyn SurfaceFamily) -> Result<()> {
        let l = family.surfaces();
        if self.kernels.len() != l {
            return Err(Error::invalid(format!("{} kernels given for {l} surfaces", self.kernels.len())));
        }
        if self.initial_size < l {
            return Err(Error::invalid("initial design needs at least one site per surface"));
        }
        if self.initial_size > self.budget {
            return Err(Error::invalid("initial design exceeds the budget"));
        }
        if self.candidate_count == 0 || self.batch_size == 0 {
            return Err(Error::invalid("candidate_count and batch_size must be positive"));
        }
        if !(self.stop_cost >= 0.0) {
            return Err(Error::invalid("stop_cost must be nonnegative"));
        }
        self.acquisition.validate(l)?;
        match self.noise_mode {
            NoiseMode::Known if !family.has_known_noise() => {
                return Err(Error::invalid("noise_mode known needs a problem with known noise"));
            }
            NoiseMode::BatchEstimated if self.batch_size < 2 => {
                return Err(Error::invalid("noise_mode batch_estimated needs batch_size >= 2"));
            }
            _ => {}
        }
        if self.acquisition.method.needs_truth() && !family.has_truth() {
            return Err(Error::invalid("known_gap_ucb needs a problem with known means"));
        }
        if let InitialDesign::Grid { per_axis } = &self.initial_design {
            let sites: usize = per_axis.iter().product();
            if per_axis.len() != family.domain().dim() || sites * l != self.initial_size {
                return Err(Error::invalid(format!(
                    "initial grid {per_axis:?} does not give initial_size = {} sites over {l} surfaces",
                    self.initial_size
                )));
            }
        }
        let d = family.domain().dim();
        for (ell, choice) in self.kernels.iter().enumerate() {
            if let KernelChoice::Fixed(spec) = choice {
                spec.validate()?;
                if spec.input_dim() != d {
                    return Err(Error::invalid(format!("kernel {ell} has dimension {}, domain {d}", spec.input_dim())));
                }
            }
        }
        Ok(())
    }
}

impl GridClassification {
    fn with_capacity(n: usize) -> Self {
        GridClassification {
            classifier: Vec::with_capacity(n),
            m_gap: Vec::with_capacity(n),
            p_best: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, post: PosteriorAtPoint) {
        let best = classify(&post);
        self.m_gap.push(m_gap_parts(&post.means, &post.variances));
        self.p_best.push(min_prob_of(&post, best));
        self.classifier.push(best);
    }
}

/// One entry of the design: a batch of samples summarized at one site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignRecord {
    pub step: usize,
    pub location: Vec<f64>,
    pub surface: usize,
    pub sample_mean: f64,
    /// Noise variance of `sample_mean` (known `σ²/r` or estimated `σ̃²/r`).
    pub noise_variance: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Design {
    pub records: Vec<DesignRecord>,
    pub per_surface_counts: Vec<usize>,
}

impl Design {
    fn with_surfaces(l: usize) -> Self {
        Design { records: Vec::new(), per_surface_counts: vec![0; l] }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn push(&mut self, record: DesignRecord) {
        self.per_surface_counts[record.surface] += 1;
        self.records.push(record);
    }
}

/// Test grid and integration weights for the loss metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsGrid {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl MetricsGrid {
    pub fn uniform(points: Vec<Vec<f64>>) -> Self {
        let weights = crate::ranking::uniform_weights(points.len());
        MetricsGrid { points, weights }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub empirical_loss: f64,
    pub true_loss: Option<f64>,
    pub error_probability: f64,
}

/// Final per-grid-point ranking.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GridClassification {
    pub classifier: Vec<usize>,
    pub m_gap: Vec<f64>,
    pub p_best: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub design: Design,
    pub trace: Vec<TraceRow>,
    pub final_grid: GridClassification,
    pub kernels: Vec<KernelSpec>,
    pub stopped_early: bool,
}

impl RunReport {
    pub fn final_metrics(&self) -> &TraceRow {
        self.trace.last().expect("a run records at least the initial metrics")
    }
}

/// Independent random streams derived from one seed.
struct Streams {
    candidates: ChaCha8Rng,
    selection: ChaCha8Rng,
    sampler: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Streams { candidates: stream(0), selection: stream(1), sampler: stream(2) }
    }
}

/// Entry noise used by acquisition rules.
struct DesignNoise<'a> {
    family: &'a dyn SurfaceFamily,
    design: &'a Design,
    mode: NoiseMode,
    batch_size: usize,
}

impl NoiseModel for DesignNoise<'_> {
    fn entry_noise_variance(&self, surface: usize, x: &[f64]) -> f64 {
        match self.mode {
            NoiseMode::Known => {
                let sd = self.family.noise_sd(surface, x).unwrap_or(0.0);
                sd * sd / self.batch_size as f64
            }
            NoiseMode::BatchEstimated => nearest_noise(self.family, self.design, surface, x),
        }
    }
}

/// Stored noise at the nearest design site of `surface` (box-normalized
/// distance), or the surface's average when it has no sites.
fn nearest_noise(family: &dyn SurfaceFamily, design: &Design, surface: usize, x: &[f64]) -> f64 {
    let domain = family.domain();
    let target = domain.normalize(x);
    let mut best: Option<(f64, f64)> = None;
    let (mut sum, mut count) = (0.0, 0usize);
    for r in design.records.iter().filter(|r| r.surface == surface) {
        let p = domain.normalize(&r.location);
        let dist: f64 = p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, r.noise_variance));
        }
        sum += r.noise_variance;
        count += 1;
    }
    match best {
        Some((_, v)) => v,
        None if count > 0 => sum / count as f64,
        None => 0.0,
    }
}

struct FamilyTruth<'a>(&'a dyn SurfaceFamily);

impl TrueMeans for FamilyTruth<'_> {
    fn true_means(&self, x: &[f64]) -> Vec<f64> {
        (0..self.0.surfaces()).map(|ell| self.0.true_mean(ell, x).unwrap_or(f64::NAN)).collect()
    }
}

struct MetricsState {
    grid: MetricsGrid,
    tracked: Vec<TrackedPosterior>,
    truths: Option<Vec<Vec<f64>>>,
}

/// State of Algorithm 1 between steps.
pub struct Designer<'a> {
    config: DesignerConfig,
    family: &'a dyn SurfaceFamily,
    design: Design,
    models: Vec<KrigingModel>,
    /// Fitted constant noise folded into each surface's entries.
    nuggets: Vec<f64>,
    streams: Streams,
    /// Remaining sites of the non-adaptive `lhs` method.
    planned: VecDeque<(Vec<f64>, usize)>,
    metrics: Option<MetricsState>,
    trace: Vec<TraceRow>,
    stopped_early: bool,
}

impl<'a> Designer<'a> {
    /// Draws the initial design, samples it and builds the surface models.
    pub fn initialize(config: DesignerConfig, family: &'a dyn SurfaceFamily) -> Result<Self> {
        config.validate(family)?;
        let l = family.surfaces();
        let mut designer = Designer {
            streams: Streams::new(config.seed),
            design: Design::with_surfaces(l),
            models: Vec::new(),
            nuggets: vec![0.0; l],
            planned: VecDeque::new(),
            metrics: None,
            trace: Vec::new(),
            stopped_early: false,
            config,
            family,
        };
        for (x, ell) in designer.initial_sites()? {
            designer.sample_and_record(x, ell, 0)?;
        }
        designer.models = (0..l).map(|ell| designer.build_model(ell)).collect::<Result<_>>()?;
        if designer.config.acquisition.method == Method::Lhs {
            designer.planned = designer.plan_lhs()?;
        }
        Ok(designer)
    }

    fn initial_sites(&mut self) -> Result<Vec<(Vec<f64>, usize)>> {
        let l = self.family.surfaces();
        let domain = self.family.domain();
        let per_surface: Vec<Vec<Vec<f64>>> = match &self.config.initial_design {
            InitialDesign::Lhs => {
                let k0 = self.config.initial_size;
                (0..l)
                    .map(|ell| {
                        let n = k0 / l + usize::from(ell < k0 % l);
                        let pts = lhs_candidates(domain, n, &mut self.streams.candidates)?;
                        Ok(if domain.lattice {
                            pts.into_iter().map(|p| p.into_iter().map(f64::round).collect()).collect()
                        } else {
                            pts
                        })
                    })
                    .collect::<Result<_>>()?
            }
            InitialDesign::Grid { per_axis } => {
                let grid = regular_grid(domain, per_axis)?;
                vec![grid; l]
            }
        };
        Ok(interleave(per_surface))
    }

    /// Per-surface LHS for the rest of the budget, interleaved so that every
    /// prefix of the plan keeps the target proportions.
    fn plan_lhs(&mut self) -> Result<VecDeque<(Vec<f64>, usize)>> {
        let l = self.family.surfaces();
        let center: Vec<f64> =
            self.family.domain().lower.iter().zip(&self.family.domain().upper).map(|(a, b)| 0.5 * (a + b)).collect();
        let weights: Vec<f64> = match self.config.lhs_allocation {
            LhsAllocation::NoiseWeighted if self.family.has_known_noise() => {
                (0..l).map(|ell| self.family.noise_sd(ell, &center).unwrap_or(1.0).powi(2)).collect()
            }
            _ => vec![1.0; l],
        };
        let totals = largest_remainder(self.config.budget, &weights);
        let mut remaining: Vec<usize> =
            (0..l).map(|ell| totals[ell].saturating_sub(self.design.per_surface_counts[ell])).collect();
        // trim or pad so the plan exactly fills the budget
        let target = self.config.budget - self.design.len();
        while remaining.iter().sum::<usize>() > target {
            let ell = (0..l).max_by_key(|&e| (remaining[e], usize::MAX - e)).unwrap_or(0);
            remaining[ell] -= 1;
        }
        while remaining.iter().sum::<usize>() < target {
            let ell = (0..l).max_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a))).unwrap_or(0);
            remaining[ell] += 1;
        }
        let mut entries = Vec::new();
        for (ell, &n) in remaining.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let pts = candidate_set_exact(self.family.domain(), n, &mut self.streams.candidates)?;
            for (i, p) in pts.into_iter().enumerate() {
                entries.push(((i as f64 + 0.5) / n as f64, ell, p));
            }
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(entries.into_iter().map(|(_, ell, p)| (p, ell)).collect())
    }

    /// Samples `(x, ℓ)` per the noise mode and appends a record.
    fn sample_and_record(&mut self, x: Vec<f64>, ell: usize, step: usize) -> Result<()> {
        let r = self.config.batch_size;
        let wrap = |e: Error, x: &[f64]| Error::Sampler { x: x.to_vec(), surface: ell, source: Box::new(e) };
        let (mean, noise) = match self.config.noise_mode {
            NoiseMode::BatchEstimated => {
                let est = batch_sample(self.family, ell, &x, r, &mut self.streams.sampler).map_err(|e| wrap(e, &x))?;
                (est.mean, est.variance_of_mean)
            }
            NoiseMode::Known => {
                let mut total = 0.0;
                for _ in 0..r {
                    total += self.family.sample(ell, &x, &mut self.streams.sampler).map_err(|e| wrap(e, &x))?;
                }
                let sd = self.family.noise_sd(ell, &x).unwrap_or(0.0);
                (total / r as f64, sd * sd / r as f64)
            }
        };
        self.design.push(DesignRecord {
            step,
            location: x,
            surface: ell,
            sample_mean: mean,
            noise_variance: noise,
            batch_size: r,
        });
        Ok(())
    }

    fn observations_of(&self, ell: usize) -> Result<ObservationSet> {
        let mut obs = ObservationSet::new();
        for r in self.design.records.iter().filter(|r| r.surface == ell) {
            obs.push(r.location.clone(), r.sample_mean, r.noise_variance + self.nuggets[ell])?;
        }
        Ok(obs)
    }

    /// Model of surface `ell` from all its records, fitting the kernel if requested.
    fn build_model(&mut self, ell: usize) -> Result<KrigingModel> {
        match &self.config.kernels[ell] {
            KernelChoice::Fixed(spec) => KrigingModel::new(spec.clone(), self.observations_of(ell)?),
            KernelChoice::Fit => {
                self.nuggets[ell] = 0.0;
                let raw = self.observations_of(ell)?;
                let options = FitOptions {
                    restarts: self.config.fit.restarts,
                    fit_nugget: self.config.fit.fit_nugget,
                    trend: TrendMode::Gls,
                    seed: self.config.seed ^ ((ell as u64) << 32) ^ raw.len() as u64,
                    ..FitOptions::default()
                };
                let fit = fit_hyperparameters(&raw, &HyperBounds::from_data(&raw)?, &options)?;
                self.nuggets[ell] = fit.nugget.unwrap_or(0.0);
                KrigingModel::new(fit.kernel.clone(), fit.adjusted_observations(&raw))
            }
        }
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn models(&self) -> &[KrigingModel] {
        &self.models
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.stopped_early || self.design.len() >= self.config.budget
    }

    /// One iteration: fresh candidates, selection, sampling, model update.
    pub fn step(&mut self) -> Result<()> {
        if self.is_done() {
            return Err(Error::invalid("budget exhausted"));
        }
        let k = self.design.len();
        let picks: Vec<(Vec<f64>, usize)> = if self.config.acquisition.method == Method::Lhs {
            vec![self.planned.pop_front().ok_or_else(|| Error::Numerical("LHS plan ran out".into()))?]
        } else {
            let candidates =
                candidate_set(self.family.domain(), self.config.candidate_count, &mut self.streams.candidates)?;
            let noise = DesignNoise {
                family: self.family,
                design: &self.design,
                mode: self.config.noise_mode,
                batch_size: self.config.batch_size,
            };
            let truth = FamilyTruth(self.family);
            let ctx = ScoringContext {
                models: &self.models,
                noise: &noise,
                truth: self.family.has_truth().then_some(&truth as &dyn TrueMeans),
            };
            match select_pair(&self.config.acquisition, &ctx, &candidates, k, &mut self.streams.selection)? {
                Selection::Pair { candidate, surface } => vec![(candidates[candidate].clone(), surface)],
                Selection::AllSurfaces { candidate } => {
                    let room = self.config.budget - k;
                    (0..self.family.surfaces().min(room)).map(|ell| (candidates[candidate].clone(), ell)).collect()
                }
            }
        };
        for (x, ell) in picks {
            self.sample_and_record(x, ell, k + 1)?;
            self.assimilate_last(ell)?;
        }
        Ok(())
    }

    fn assimilate_last(&mut self, ell: usize) -> Result<()> {
        let count = self.design.per_surface_counts[ell];
        let refit = self.config.refit == RefitSchedule::Doubling
            && matches!(self.config.kernels[ell], KernelChoice::Fit)
            && count.is_power_of_two()
            && count >= min_observations(self.family.domain().dim());
        if refit {
            self.models[ell] = self.build_model(ell)?;
            return Ok(());
        }
        let record = self.design.records.last().expect("record just pushed");
        let placeholder = KrigingModel::prior(self.models[ell].kernel().clone())?;
        let model = std::mem::replace(&mut self.models[ell], placeholder);
        self.models[ell] =
            model.updated(record.location.clone(), record.sample_mean, record.noise_variance + self.nuggets[ell])?;
        Ok(())
    }

    /// Starts tracking the loss metrics on `grid`.
    pub fn attach_metrics(&mut self, grid: MetricsGrid) -> Result<()> {
        if grid.points.is_empty() || grid.points.len() != grid.weights.len() {
            return Err(Error::invalid("metrics grid needs points with matching weights"));
        }
        let tracked = self.models.iter().map(|m| TrackedPosterior::new(m, grid.points.clone())).collect();
        let truths = self.family.has_truth().then(|| {
            let truth = FamilyTruth(self.family);
            grid.points.iter().map(|x| truth.true_means(x)).collect()
        });
        self.metrics = Some(MetricsState { grid, tracked, truths });
        Ok(())
    }

    /// Loss metrics of the current models on the attached grid.
    pub fn record_metrics(&mut self) -> Result<TraceRow> {
        let grid = self.evaluate_grid()?;
        let state = self.metrics.as_ref().expect("metrics attached");
        let w = &state.grid.weights;
        let empirical_loss = grid.m_gap.iter().zip(w).map(|(m, w)| m * w).sum();
        let error_probability = grid.p_best.iter().zip(w).map(|(p, w)| (1.0 - p) * w).sum();
        let true_loss = state.truths.as_ref().map(|t| crate::ranking::true_loss(&grid.classifier, t, w)).transpose()?;
        let row = TraceRow { k: self.design.len(), empirical_loss, true_loss, error_probability };
        self.trace.push(row);
        if self.config.stop_cost > 0.0 {
            let pairs: Vec<(usize, f64)> = self.trace.iter().map(|r| (r.k, r.empirical_loss)).collect();
            self.stopped_early = stop_rule(&pairs, self.config.stop_cost);
        }
        Ok(row)
    }

    /// Classifier, M-gap and best-probability at every grid point.
    pub fn evaluate_grid(&mut self) -> Result<GridClassification> {
        let state = self.metrics.as_mut().ok_or_else(|| Error::invalid("no metrics grid attached"))?;
        for (tracked, model) in state.tracked.iter_mut().zip(&self.models) {
            tracked.sync(model);
        }
        let n = state.grid.points.len();
        let mut out = GridClassification::with_capacity(n);
        for g in 0..n {
            let means = state.tracked.iter().map(|t| t.means()[g]).collect();
            let variances = state.tracked.iter().map(|t| t.variances()[g]).collect();
            out.push(PosteriorAtPoint::new(means, variances)?);
        }
        Ok(out)
    }

    /// Ranking of the current models at arbitrary points.
    pub fn classify_points(&self, points: &[Vec<f64>]) -> Result<GridClassification> {
        let mut out = GridClassification::with_capacity(points.len());
        for x in points {
            let mut means = Vec::with_capacity(self.models.len());
            let mut variances = Vec::with_capacity(self.models.len());
            for model in &self.models {
                let (m, v) = model.predict(x)?;
                means.push(m);
                variances.push(v);
            }
            out.push(PosteriorAtPoint::new(means, variances)?);
        }
        Ok(out)
    }

    /// Steps to the budget (or until the stop rule fires), recording metrics.
    pub fn run_to_budget(&mut self) -> Result<()> {
        if self.trace.is_empty() {
            self.record_metrics()?;
        }
        while !self.is_done() {
            self.step()?;
            self.record_metrics()?;
        }
        Ok(())
    }

    pub fn report(&mut self) -> Result<RunReport> {
        Ok(RunReport {
            final_grid: self.evaluate_grid()?,
            kernels: self.models.iter().map(|m| m.kernel().clone()).collect(),
            design: self.design.clone(),
            trace: self.trace.clone(),
            stopped_early: self.stopped_early,
        })
    }
}

/// Algorithm 1 end to end with metrics recorded after every step.
pub fn run(config: DesignerConfig, family: &dyn SurfaceFamily, grid: MetricsGrid) -> Result<RunReport> {
    let mut designer = Designer::initialize(config, family)?;
    designer.attach_metrics(grid)?;
    designer.run_to_budget()?;
    designer.report()
}

/// Round-robin merge: first site of each surface, then the second, ...
fn interleave(per_surface: Vec<Vec<Vec<f64>>>) -> Vec<(Vec<f64>, usize)> {
    let longest = per_surface.iter().map(Vec::len).max().unwrap_or(0);
    let mut iters: Vec<_> = per_surface.into_iter().map(Vec::into_iter).collect();
    let mut out = Vec::new();
    for _ in 0..longest {
        for (ell, it) in iters.iter_mut().enumerate() {
            if let Some(x) = it.next() {
                out.push((x, ell));
            }
        }
    }
    out
}

/// Integer split of `total` proportional to `weights` (largest remainders,
/// ties to the lowest index).
fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let mut missing = total - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    counts
}

/// `n` LHS points; on lattices duplicates after snapping are kept so the
/// plan has exactly `n` entries.
fn candidate_set_exact(domain: &crate::problems::Domain, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    let pts = lhs_candidates(domain, n, rng)?;
    Ok(if domain.lattice { pts.into_iter().map(|p| p.into_iter().map(f64::round).collect()).collect() } else { pts })
}
