//! Maximum-likelihood estimation of kernel hyperparameters.
//!
//! The negative log marginal likelihood is minimized in log-parameter space
//! with a bounded Nelder-Mead simplex from several seeded starting points.
//! The constant trend is either held fixed or profiled out as the
//! generalized-least-squares intercept. With noise-free data and no nugget
//! the scale s² is profiled out in closed form as well.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelForm, KernelSpec};
use super::model::JITTER_LEVELS;
use super::observations::ObservationSet;
use crate::error::{Error, Result};

/// Box constraints in natural (not log) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    /// Bounds on each θ component (weights of the squared distance).
    pub theta: Vec<(f64, f64)>,
    pub scale: (f64, f64),
    pub nugget: (f64, f64),
}

impl HyperBounds {
    /// Data-driven default box: lengthscales between 1/50 and 5 times the
    /// design span per axis, scale between 1e-4 and 1e2 times the sample variance.
    pub fn from_data(obs: &ObservationSet) -> Result<Self> {
        let d = obs.dim().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let theta = (0..d)
            .map(|k| {
                let (lo, hi) = obs
                    .locations()
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x[k]), hi.max(x[k])));
                let span = if hi > lo { hi - lo } else { 1.0 };
                let (lmin, lmax) = (span / 50.0, span * 5.0);
                (1.0 / (lmax * lmax), 1.0 / (lmin * lmin))
            })
            .collect();
        let n = obs.len() as f64;
        let mean = obs.values().iter().sum::<f64>() / n;
        let var = obs.values().iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let v = var.max(1e-10 * (1.0 + mean * mean));
        Ok(HyperBounds { theta, scale: (1e-4 * v, 1e2 * v), nugget: (1e-6 * v, 2.0 * v) })
    }

    fn validate(&self, d: usize) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if self.theta.len() != d {
            return Err(Error::invalid(format!(
                "bounds have {} theta entries, data has dimension {d}",
                self.theta.len()
            )));
        }
        if !self.theta.iter().all(|b| ok(*b)) || !ok(self.scale) || !ok(self.nugget) {
            return Err(Error::invalid("hyperparameter bounds must satisfy 0 < lo <= hi < inf"));
        }
        Ok(())
    }
}

/// How the constant trend is treated during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMode {
    Fixed(f64),
    Gls,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub fit_nugget: bool,
    pub trend: TrendMode,
    /// Seed for the random starting points.
    pub seed: u64,
    /// Evaluation budget per local search.
    pub max_evals: usize,
    pub form: KernelForm,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 5,
            fit_nugget: false,
            trend: TrendMode::Gls,
            seed: 0,
            max_evals: 400,
            form: KernelForm::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperFit {
    pub kernel: KernelSpec,
    /// Constant noise variance estimated jointly, when requested.
    pub nugget: Option<f64>,
    pub log_likelihood: f64,
}

impl HyperFit {
    /// Observations with the fitted nugget folded into the noise variances.
    pub fn adjusted_observations(&self, obs: &ObservationSet) -> ObservationSet {
        match self.nugget {
            Some(n) => obs.with_added_noise(n),
            None => obs.clone(),
        }
    }
}

/// Minimum number of observations accepted for fitting a `d`-dimensional kernel.
pub fn min_observations(d: usize) -> usize {
    2 * (d + 2)
}

struct Objective<'a> {
    obs: &'a ObservationSet,
    /// Squared coordinate differences per dimension, row-major n×n.
    sq_diffs: Vec<Vec<f64>>,
    trend: TrendMode,
    profile_scale: bool,
    fit_nugget: bool,
    d: usize,
    form: KernelForm,
}

struct Evaluation {
    nll: f64,
    trend: f64,
    scale: f64,
}

impl<'a> Objective<'a> {
    fn new(obs: &'a ObservationSet, trend: TrendMode, fit_nugget: bool, form: KernelForm) -> Self {
        let n = obs.len();
        let d = obs.dim().unwrap_or(0);
        let locs = obs.locations();
        let sq_diffs = (0..d)
            .map(|k| {
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..i {
                        let diff = locs[i][k] - locs[j][k];
                        m[i * n + j] = diff * diff;
                        m[j * n + i] = diff * diff;
                    }
                }
                m
            })
            .collect();
        let profile_scale = !fit_nugget && obs.noise_variances().iter().all(|&v| v == 0.0);
        Objective { obs, sq_diffs, trend, profile_scale, fit_nugget, d, form }
    }

    fn dim(&self) -> usize {
        self.d + usize::from(!self.profile_scale) + usize::from(self.fit_nugget)
    }

    /// Splits a log-parameter vector into (θ, s², nugget).
    fn unpack(&self, z: &[f64]) -> (Vec<f64>, f64, f64) {
        let theta = z[..self.d].iter().map(|v| v.exp()).collect();
        let mut idx = self.d;
        let scale = if self.profile_scale {
            1.0
        } else {
            idx += 1;
            z[idx - 1].exp()
        };
        let nugget = if self.fit_nugget { z[idx].exp() } else { 0.0 };
        (theta, scale, nugget)
    }

    fn evaluate(&self, theta: &[f64], scale: f64, nugget: f64, scale_bounds: (f64, f64)) -> Option<Evaluation> {
        let n = self.obs.len();
        let unit = KernelSpec { scale: 1.0, theta: theta.to_vec(), trend: 0.0, form: self.form };
        let mut corr = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let r2: f64 = (0..self.d).map(|k| theta[k] * self.sq_diffs[k][i * n + j]).sum();
                let c = unit.of_sq_distance(r2);
                corr[(i, j)] = c;
                corr[(j, i)] = c;
            }
        }
        let y = DVector::from_column_slice(self.obs.values());
        let ones = DVector::from_element(n, 1.0);
        for &rel in &JITTER_LEVELS {
            let mut a = &corr * scale;
            for i in 0..n {
                a[(i, i)] += self.obs.noise_variances()[i] + nugget + rel * scale;
            }
            let Some(chol) = Cholesky::new(a) else { continue };
            let trend = match self.trend {
                TrendMode::Fixed(t) => t,
                TrendMode::Gls => {
                    let ai_one = chol.solve(&ones);
                    let denom = ones.dot(&ai_one);
                    if !(denom > 0.0) {
                        return None;
                    }
                    ai_one.dot(&y) / denom
                }
            };
            let resid = &y - &ones * trend;
            let quad = resid.dot(&chol.solve(&resid));
            let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let ln2pi = (2.0 * std::f64::consts::PI).ln();
            let (nll, fitted_scale) = if self.profile_scale {
                // A = s²·C: minimize over s² in closed form, clamped to the box
                let s2 = (quad / n as f64).clamp(scale_bounds.0, scale_bounds.1);
                let nll = 0.5 * quad / s2 + 0.5 * n as f64 * s2.ln() + 0.5 * logdet + 0.5 * n as f64 * ln2pi;
                (nll, s2)
            } else {
                (0.5 * quad + 0.5 * logdet + 0.5 * n as f64 * ln2pi, scale)
            };
            if nll.is_finite() {
                return Some(Evaluation { nll, trend, scale: fitted_scale });
            }
            return None;
        }
        None
    }
}

/// Log marginal likelihood of `obs` under `kernel` (plus an optional constant
/// nugget). Returns the likelihood and the trend used.
pub fn log_marginal_likelihood(
    obs: &ObservationSet,
    kernel: &KernelSpec,
    nugget: f64,
    trend: TrendMode,
) -> Result<(f64, f64)> {
    if obs.dim() != Some(kernel.input_dim()) {
        return Err(Error::invalid("observation dimension does not match kernel"));
    }
    let mut objective = Objective::new(obs, trend, true, kernel.form);
    objective.profile_scale = false;
    objective
        .evaluate(&kernel.theta, kernel.scale, nugget, (kernel.scale, kernel.scale))
        .map(|e| (-e.nll, e.trend))
        .ok_or_else(|| Error::Numerical("log-likelihood is not finite".into()))
}

/// Maximizes the log marginal likelihood over the box `bounds`.
pub fn fit_hyperparameters(obs: &ObservationSet, bounds: &HyperBounds, opts: &FitOptions) -> Result<HyperFit> {
    let d = obs.dim().unwrap_or(0);
    let needed = min_observations(d.max(1));
    if obs.len() < needed {
        return Err(Error::InsufficientData { needed, got: obs.len() });
    }
    bounds.validate(d)?;
    if opts.restarts == 0 {
        return Err(Error::invalid("restarts must be positive"));
    }
    let objective = Objective::new(obs, opts.trend, opts.fit_nugget, opts.form);
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for &(a, b) in &bounds.theta {
        lo.push(a.ln());
        hi.push(b.ln());
    }
    if !objective.profile_scale {
        lo.push(bounds.scale.0.ln());
        hi.push(bounds.scale.1.ln());
    }
    if opts.fit_nugget {
        lo.push(bounds.nugget.0.ln());
        hi.push(bounds.nugget.1.ln());
    }
    debug_assert_eq!(lo.len(), objective.dim());

    let f = |z: &[f64]| -> f64 {
        let (theta, scale, nugget) = objective.unpack(z);
        objective.evaluate(&theta, scale, nugget, bounds.scale).map_or(f64::INFINITY, |e| e.nll)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..opts.restarts {
        let z0: Vec<f64> = if start == 0 {
            lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
        } else {
            lo.iter().zip(&hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
        };
        let (z, fz) = nelder_mead(&f, z0, &lo, &hi, opts.max_evals);
        if fz.is_finite() && best.as_ref().is_none_or(|(_, fb)| fz < *fb) {
            best = Some((z, fz));
        }
    }
    let (z, _) = best.ok_or_else(|| Error::Numerical("all likelihood optimizations failed".into()))?;
    let (theta, scale, nugget) = objective.unpack(&z);
    let eval = objective
        .evaluate(&theta, scale, nugget, bounds.scale)
        .ok_or_else(|| Error::Numerical("likelihood not finite at the optimum".into()))?;
    let kernel = KernelSpec::new(eval.scale, theta, eval.trend)?.with_form(opts.form);
    Ok(HyperFit { kernel, nugget: opts.fit_nugget.then_some(nugget), log_likelihood: -eval.nll })
}

/// Bounded Nelder-Mead; vertices are clamped to the box.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: &F, x0: Vec<f64>, lo: &[f64], hi: &[f64], max_evals: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let clamp = |mut x: Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
        x
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let x0 = clamp(x0);
    let f0 = f(&x0);
    simplex.push((x0.clone(), f0));
    for i in 0..n {
        let step = 0.1 * (hi[i] - lo[i]).max(1e-8);
        let mut x = x0.clone();
        x[i] = if x[i] + step <= hi[i] { x[i] + step } else { x[i] - step };
        let x = clamp(x);
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let mut evals = n + 1;
    let key = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
    while evals < max_evals {
        simplex.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
        let (fb, fw) = (simplex[0].1, simplex[n].1);
        let spread = (fw - fb).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if fb.is_finite() && spread <= 1e-9 * (1.0 + fb.abs()) && diameter < 1e-6 {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64).collect();
        let along =
            |t: f64| -> Vec<f64> { clamp((0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect()) };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if key(fr) < key(simplex[0].1) {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[n] = if key(fe) < key(fr) { (xe, fe) } else { (xr, fr) };
        } else if key(fr) < key(simplex[n - 1].1) {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if key(fr) < key(simplex[n].1) {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if key(fc) < key(fr.min(simplex[n].1)) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    let x = clamp(v.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect());
                    let fx = f(&x);
                    *v = (x, fx);
                }
                evals += n;
            }
        }
    }
    simplex.sort_by(|a, b| key(a.1).total_cmp(&key(b.1)));
    simplex.swap_remove(0)
}
