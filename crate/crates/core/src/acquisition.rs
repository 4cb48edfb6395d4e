//! Acquisition scores over candidate (location, surface) pairs and the
//! selection rule built on them.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{hypothetical_variance, KrigingModel};
use crate::ranking::{gaps, m_gap_parts, min_prob, two_lowest, PosteriorAtPoint};

/// Acquisition rule names as used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GapSur,
    GapUcb,
    GapAlc,
    GammaEntUcb,
    GammaBvsbUcb,
    GammaBestUcb,
    /// Γ-score plus summed UCB bonus; samples every surface at the chosen site.
    ConcGamma,
    /// Largest M-gap; samples every surface at the chosen site.
    ConcMgap,
    PureMgap,
    TwoStep,
    Uniform,
    KnownGapUcb,
    /// Non-adaptive per-surface Latin hypercubes (handled by the designer).
    Lhs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GapSur => "gap_sur",
            Method::GapUcb => "gap_ucb",
            Method::GapAlc => "gap_alc",
            Method::GammaEntUcb => "gamma_ent_ucb",
            Method::GammaBvsbUcb => "gamma_bvsb_ucb",
            Method::GammaBestUcb => "gamma_best_ucb",
            Method::ConcGamma => "conc_gamma",
            Method::ConcMgap => "conc_mgap",
            Method::PureMgap => "pure_mgap",
            Method::TwoStep => "two_step",
            Method::Uniform => "uniform",
            Method::KnownGapUcb => "known_gap_ucb",
            Method::Lhs => "lhs",
        }
    }

    /// Whether one selection yields a sample from every surface.
    pub fn is_concurrent(self) -> bool {
        matches!(self, Method::ConcGamma | Method::ConcMgap)
    }

    pub fn needs_truth(self) -> bool {
        self == Method::KnownGapUcb
    }
}

/// Classification-complexity score Γ(x) of the minimum probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaVariant {
    Ent,
    Bvsb,
    #[default]
    Best,
}

fn default_ucb_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSpec {
    pub method: Method,
    /// `c` in the exploration weight `γ_k = c·√(log k)`.
    #[serde(default = "default_ucb_scale")]
    pub ucb_scale: f64,
    /// Probability of replacing the greedy choice by a uniform draw.
    #[serde(default)]
    pub epsilon: f64,
    /// Γ variant used by `conc_gamma`.
    #[serde(default)]
    pub gamma_variant: GammaVariant,
    /// Per-surface overrides of `ucb_scale`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_scales: Option<Vec<f64>>,
}

impl AcquisitionSpec {
    pub fn new(method: Method) -> Self {
        AcquisitionSpec {
            method,
            ucb_scale: default_ucb_scale(),
            epsilon: 0.0,
            gamma_variant: GammaVariant::default(),
            surface_scales: None,
        }
    }

    pub fn with_ucb_scale(mut self, c: f64) -> Self {
        self.ucb_scale = c;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self, surfaces: usize) -> Result<()> {
        if !(self.ucb_scale >= 0.0) || !self.ucb_scale.is_finite() {
            return Err(Error::invalid(format!("ucb_scale must be >= 0, got {}", self.ucb_scale)));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if let Some(scales) = &self.surface_scales {
            if scales.len() != surfaces || scales.iter().any(|c| !(*c >= 0.0)) {
                return Err(Error::invalid(format!("surface_scales needs {surfaces} nonnegative entries")));
            }
        }
        Ok(())
    }

    fn scale_for(&self, surface: usize) -> f64 {
        self.surface_scales.as_ref().map_or(self.ucb_scale, |s| s[surface])
    }
}

/// `γ_k = c·√(log k)`, with `k` raised to 2 so the logarithm is positive.
pub fn gamma_schedule(c: f64, k: usize) -> f64 {
    c * (k.max(2) as f64).ln().sqrt()
}

pub fn gap_ucb_score(post: &PosteriorAtPoint, ell: usize, gamma: f64) -> f64 {
    let (per_surface, _) = gaps(post);
    -per_surface[ell] + gamma * post.sd(ell)
}

/// `−Δ̂_ℓ + γ(δ_ℓ − δ_ℓ^after)` where `delta_after` is the posterior sd after
/// the hypothetical sample.
pub fn gap_alc_score(post: &PosteriorAtPoint, ell: usize, gamma: f64, delta_after: f64) -> f64 {
    let (per_surface, _) = gaps(post);
    -per_surface[ell] + gamma * (post.sd(ell) - delta_after)
}

/// Expected one-step reduction of the M-gap at `x` from sampling surface
/// `ell` there with entry noise variance `noise_var`. Means are unchanged in
/// expectation, so only `δ_ℓ(x)` moves.
pub fn gap_sur_score(post: &PosteriorAtPoint, ell: usize, noise_var: f64) -> f64 {
    let current = m_gap_parts(&post.means, &post.variances);
    let mut after = post.variances.clone();
    let v = post.variances[ell];
    after[ell] = hypothetical_variance(v, v, v, noise_var);
    (current - m_gap_parts(&post.means, &after)).max(0.0)
}

/// Γ(x) for the chosen variant; larger means harder to classify.
pub fn gamma_score(post: &PosteriorAtPoint, variant: GammaVariant) -> Result<f64> {
    let p = min_prob(post)?;
    Ok(gamma_from_probs(&p, &post.means, variant))
}

fn gamma_from_probs(p: &[f64], means: &[f64], variant: GammaVariant) -> f64 {
    let (best, second) = two_lowest(means);
    match variant {
        GammaVariant::Ent => -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>(),
        GammaVariant::Bvsb => -(p[best] - p[second]),
        GammaVariant::Best => -p[best],
    }
}

/// Entry noise variance (per design entry, after batching) expected for a
/// sample of surface `surface` at `x`.
pub trait NoiseModel {
    fn entry_noise_variance(&self, surface: usize, x: &[f64]) -> f64;
}

/// True mean responses, available only for synthetic problems.
pub trait TrueMeans {
    fn true_means(&self, x: &[f64]) -> Vec<f64>;
}

/// What the designer should sample next.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Pair { candidate: usize, surface: usize },
    AllSurfaces { candidate: usize },
}

impl Selection {
    pub fn candidate(&self) -> usize {
        match *self {
            Selection::Pair { candidate, .. } | Selection::AllSurfaces { candidate } => candidate,
        }
    }
}

/// Inputs shared by all scores for one selection.
pub struct ScoringContext<'a> {
    pub models: &'a [KrigingModel],
    pub noise: &'a dyn NoiseModel,
    pub truth: Option<&'a dyn TrueMeans>,
}

/// Posterior of every surface at every candidate.
pub fn candidate_posteriors(models: &[KrigingModel], candidates: &[Vec<f64>]) -> Result<Vec<PosteriorAtPoint>> {
    candidates
        .iter()
        .map(|x| {
            let mut means = Vec::with_capacity(models.len());
            let mut variances = Vec::with_capacity(models.len());
            for model in models {
                let (m, v) = model.predict(x)?;
                means.push(m);
                variances.push(v);
            }
            PosteriorAtPoint::new(means, variances)
        })
        .collect()
}

/// Scores of every (candidate, surface) pair, row-major by candidate.
/// Concurrent and hierarchical rules return one score per candidate.
pub fn score_table(
    spec: &AcquisitionSpec,
    ctx: &ScoringContext<'_>,
    candidates: &[Vec<f64>],
    posts: &[PosteriorAtPoint],
    k: usize,
) -> Result<Vec<f64>> {
    let l = ctx.models.len();
    let gamma = |ell: usize| gamma_schedule(spec.scale_for(ell), k);
    let mut scores = Vec::with_capacity(candidates.len() * l);
    for (x, post) in candidates.iter().zip(posts) {
        match spec.method {
            Method::GapSur => {
                for ell in 0..l {
                    let noise = ctx.noise.entry_noise_variance(ell, x) + ctx.models[ell].jitter();
                    scores.push(gap_sur_score(post, ell, noise));
                }
            }
            Method::GapUcb => scores.extend((0..l).map(|ell| gap_ucb_score(post, ell, gamma(ell)))),
            Method::GapAlc => {
                for ell in 0..l {
                    let v = post.variances[ell];
                    let noise = ctx.noise.entry_noise_variance(ell, x) + ctx.models[ell].jitter();
                    let after = hypothetical_variance(v, v, v, noise).sqrt();
                    scores.push(gap_alc_score(post, ell, gamma(ell), after));
                }
            }
            Method::KnownGapUcb => {
                let truth =
                    ctx.truth.ok_or_else(|| Error::invalid("known_gap_ucb needs a problem with known means"))?;
                let true_post = PosteriorAtPoint::new(truth.true_means(x), vec![0.0; l])?;
                let (true_gaps, _) = gaps(&true_post);
                scores.extend((0..l).map(|ell| -true_gaps[ell] + gamma(ell) * post.sd(ell)));
            }
            Method::GammaEntUcb | Method::GammaBvsbUcb | Method::GammaBestUcb => {
                let variant = match spec.method {
                    Method::GammaEntUcb => GammaVariant::Ent,
                    Method::GammaBvsbUcb => GammaVariant::Bvsb,
                    _ => GammaVariant::Best,
                };
                let g = gamma_score(post, variant)?;
                scores.extend((0..l).map(|ell| g + gamma(ell) * post.sd(ell)));
            }
            Method::ConcGamma => {
                let bonus: f64 = (0..l).map(|ell| gamma(ell) * post.sd(ell)).sum();
                scores.push(gamma_score(post, spec.gamma_variant)? + bonus);
            }
            Method::ConcMgap | Method::PureMgap => scores.push(m_gap_parts(&post.means, &post.variances)),
            Method::TwoStep => scores.push(-gaps(post).1),
            Method::Uniform => scores.push(0.0),
            Method::Lhs => return Err(Error::invalid("lhs is a non-adaptive design and has no scores")),
        }
    }
    Ok(scores)
}

/// First index of the largest score (NaN never wins).
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}

/// Picks the next (candidate, surface) pair.
///
/// With probability ε (and always for `uniform`) the pick is uniform over
/// candidates × surfaces; otherwise the greedy argmax of the method's score,
/// ties going to the lowest candidate and then the lowest surface.
pub fn select_pair(
    spec: &AcquisitionSpec,
    ctx: &ScoringContext<'_>,
    candidates: &[Vec<f64>],
    k: usize,
    rng: &mut dyn RngCore,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::invalid("candidate set is empty"));
    }
    let l = ctx.models.len();
    spec.validate(l)?;
    let explore = spec.method == Method::Uniform || (spec.epsilon > 0.0 && rng.random::<f64>() < spec.epsilon);
    if explore {
        let candidate = rng.random_range(0..candidates.len());
        if spec.method.is_concurrent() {
            return Ok(Selection::AllSurfaces { candidate });
        }
        return Ok(Selection::Pair { candidate, surface: rng.random_range(0..l) });
    }
    let posts = candidate_posteriors(ctx.models, candidates)?;
    let scores = score_table(spec, ctx, candidates, &posts, k)?;
    Ok(match spec.method {
        Method::ConcGamma | Method::ConcMgap => Selection::AllSurfaces { candidate: argmax(&scores) },
        Method::PureMgap | Method::TwoStep => {
            let candidate = argmax(&scores);
            Selection::Pair { candidate, surface: argmax(&posts[candidate].variances) }
        }
        _ => {
            let best = argmax(&scores);
            Selection::Pair { candidate: best / l, surface: best % l }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::pdf;
    use crate::ranking::m_gap;

    fn post(means: &[f64], variances: &[f64]) -> PosteriorAtPoint {
        PosteriorAtPoint::new(means.to_vec(), variances.to_vec()).unwrap()
    }

    #[test]
    fn schedule_values() {
        assert_eq!(gamma_schedule(0.0, 50), 0.0);
        assert!((gamma_schedule(4.0, 100) - 8.583_864_105).abs() < 1e-9);
        assert_eq!(gamma_schedule(1.0, 0), gamma_schedule(1.0, 2));
    }

    #[test]
    fn ucb_and_alc_arithmetic() {
        let eq = post(&[0.3, 0.3], &[0.04, 0.01]);
        assert_eq!(gap_ucb_score(&eq, 0, 0.0), 0.0);
        let p = post(&[0.0, 0.2], &[0.01, 0.04]);
        assert!((gap_ucb_score(&p, 0, 1.0) + 0.1).abs() < 1e-15);
        let d = 0.1;
        assert!((gap_alc_score(&p, 0, 1.0, 0.0) - (-0.2 + d)).abs() < 1e-15);
        let flat = post(&[0.0, 0.2], &[0.0, 0.04]);
        assert_eq!(gap_alc_score(&flat, 0, 1.0, 0.0), -0.2);
        // δ = σ: the sd falls to δ/√2
        let after = hypothetical_variance(0.01, 0.01, 0.01, 0.01).sqrt();
        assert!((p.sd(0) - after - d * (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn gap_sur_two_state_value() {
        let p = post(&[0.0, 0.0], &[1.0, 1.0]);
        let expected = 2f64.sqrt() * pdf(0.0) - m_gap(&post(&[0.0, 0.0], &[0.5, 1.0]));
        assert!((gap_sur_score(&p, 0, 1.0) - expected).abs() < 1e-15);
        assert_eq!(gap_sur_score(&post(&[0.0, 0.1], &[0.0, 0.2]), 0, 0.5), 0.0);
        assert!(gap_sur_score(&post(&[0.0, 50.0], &[0.01, 0.01]), 1, 0.0) < 1e-8);
    }

    #[test]
    fn gamma_values() {
        let tie = post(&[0.0, 0.0], &[1.0, 1.0]);
        assert!((gamma_score(&tie, GammaVariant::Ent).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(gamma_score(&tie, GammaVariant::Bvsb).unwrap(), 0.0);
        assert_eq!(gamma_score(&tie, GammaVariant::Best).unwrap(), -0.5);
        assert_eq!(gamma_from_probs(&[1.0, 0.0], &[0.0, 1.0], GammaVariant::Ent), 0.0);
    }
}
