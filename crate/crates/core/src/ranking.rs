//! Ranking statistics of L independent Gaussian posteriors at one location.
//!
//! Surface indices are 0-based throughout the library.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{cdf, pdf};

static NEGATIVE_MGAP_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// Number of times a negative M-gap (from the L > 2 moment-matching
/// approximation) has been clamped to zero in this process.
pub fn m_gap_clamp_count() -> u64 {
    NEGATIVE_MGAP_CLAMPS.load(Ordering::Relaxed)
}

/// Posterior means and variances of all surfaces at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorAtPoint {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl PosteriorAtPoint {
    pub fn new(means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::invalid(format!("{} means but {} variances", means.len(), variances.len())));
        }
        if means.len() < 2 {
            return Err(Error::invalid("ranking needs at least two surfaces"));
        }
        if means.iter().any(|m| !m.is_finite()) || variances.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid("means must be finite and variances finite and nonnegative"));
        }
        Ok(PosteriorAtPoint { means, variances })
    }

    pub fn surfaces(&self) -> usize {
        self.means.len()
    }

    pub fn sd(&self, ell: usize) -> f64 {
        self.variances[ell].sqrt()
    }
}

/// Everything the acquisition rules and metrics need at one location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSummary {
    pub classifier_index: usize,
    pub gap_per_surface: Vec<f64>,
    pub min_gap: f64,
    pub min_probs: Vec<f64>,
    pub min_mean: f64,
    pub m_gap: f64,
}

pub fn summarize(post: &PosteriorAtPoint) -> Result<RankingSummary> {
    let (gap_per_surface, min_gap) = gaps(post);
    Ok(RankingSummary {
        classifier_index: classify(post),
        gap_per_surface,
        min_gap,
        min_probs: min_prob(post)?,
        min_mean: min_mean(post),
        m_gap: m_gap(post),
    })
}

/// Index of the smallest posterior mean, ties to the lowest index.
pub fn classify(post: &PosteriorAtPoint) -> usize {
    argmin(&post.means)
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Indices of the smallest and second-smallest means (ties to lower index).
pub(crate) fn two_lowest(means: &[f64]) -> (usize, usize) {
    let first = argmin(means);
    let mut second = usize::MAX;
    for (i, v) in means.iter().enumerate() {
        if i != first && (second == usize::MAX || *v < means[second]) {
            second = i;
        }
    }
    (first, second)
}

/// Per-surface gaps `|μ_ℓ − min_{j≠ℓ} μ_j|` and the gap between the two smallest means.
pub fn gaps(post: &PosteriorAtPoint) -> (Vec<f64>, f64) {
    let (first, second) = two_lowest(&post.means);
    let per_surface = post
        .means
        .iter()
        .enumerate()
        .map(|(ell, m)| {
            let other = if ell == first { post.means[second] } else { post.means[first] };
            (m - other).abs()
        })
        .collect();
    (per_surface, (post.means[first] - post.means[second]).abs())
}

/// Closed-form minimum probabilities for two surfaces.
pub fn min_prob_two(mu1: f64, var1: f64, mu2: f64, var2: f64) -> [f64; 2] {
    let d2 = var1 + var2;
    if d2 <= 0.0 {
        return if mu1 < mu2 {
            [1.0, 0.0]
        } else if mu2 < mu1 {
            [0.0, 1.0]
        } else {
            [0.5, 0.5]
        };
    }
    let p1 = cdf((mu2 - mu1) / d2.sqrt());
    [p1, 1.0 - p1]
}

/// Floors variances at `1e-12·scale²` so the Gaussians are nondegenerate.
fn floored_variances(post: &PosteriorAtPoint) -> Option<Vec<f64>> {
    let scale = post.means.iter().map(|m| m.abs()).chain(post.variances.iter().map(|v| v.sqrt())).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let floor = 1e-12 * scale * scale;
    Some(post.variances.iter().map(|v| v.max(floor)).collect())
}

/// Posterior probability that each surface is the minimal one.
///
/// Exact for independent Gaussians: closed form for two surfaces, otherwise
/// `p_ℓ = ∫ φ(z) ∏_{j≠ℓ} Φ((μ_j − μ_ℓ − δ_ℓ z)/δ_j) dz` by adaptive quadrature.
pub fn min_prob(post: &PosteriorAtPoint) -> Result<Vec<f64>> {
    if post.surfaces() == 2 {
        return Ok(min_prob_two(post.means[0], post.variances[0], post.means[1], post.variances[1]).to_vec());
    }
    let Some(vars) = floored_variances(post) else {
        let l = post.surfaces() as f64;
        return Ok(vec![1.0 / l; post.surfaces()]);
    };
    let raw: Vec<f64> = (0..post.surfaces()).map(|ell| min_prob_exact(&post.means, &vars, ell)).collect();
    // quadrature error is ~1e-13; renormalize so the vector is a distribution
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Numerical("minimum probabilities vanished".into()));
    }
    Ok(raw.into_iter().map(|p| (p / total).clamp(0.0, 1.0)).collect())
}

/// Probability that surface `ell` is minimal (see [`min_prob`]).
pub fn min_prob_of(post: &PosteriorAtPoint, ell: usize) -> f64 {
    if post.surfaces() == 2 {
        return min_prob_two(post.means[0], post.variances[0], post.means[1], post.variances[1])[ell];
    }
    match floored_variances(post) {
        Some(vars) => min_prob_exact(&post.means, &vars, ell).clamp(0.0, 1.0),
        None => 1.0 / post.surfaces() as f64,
    }
}

/// Beyond this many standard deviations a pairwise comparison is decided.
const DECIDED_Z: f64 = 9.0;

fn min_prob_exact(means: &[f64], vars: &[f64], ell: usize) -> f64 {
    let sd_l = vars[ell].sqrt();
    let mut rivals = Vec::with_capacity(means.len() - 1);
    for j in (0..means.len()).filter(|&j| j != ell) {
        let z = (means[j] - means[ell]) / (vars[j] + vars[ell]).sqrt();
        if z < -DECIDED_Z {
            return 0.0;
        }
        if z < DECIDED_Z {
            rivals.push(j);
        }
    }
    match rivals[..] {
        [] => return 1.0,
        // decided rivals contribute factors within Φ(−9) of 1
        [j] => return cdf((means[j] - means[ell]) / (vars[j] + vars[ell]).sqrt()),
        _ => {}
    }
    let integrand = |z: f64| {
        let level = means[ell] + sd_l * z;
        let mut prod = pdf(z);
        for &j in &rivals {
            prod *= cdf((means[j] - level) / vars[j].sqrt());
        }
        prod
    };
    // Below `lo` every rival factor is 1 to machine precision, so that piece is
    // Φ(lo); above `hi` some factor is below Φ(−9) and the rest is negligible.
    let mut lo = f64::INFINITY;
    let mut hi = DECIDED_Z;
    for &j in &rivals {
        let sd_j = vars[j].sqrt();
        lo = lo.min((means[j] - means[ell] - DECIDED_Z * sd_j) / sd_l);
        hi = hi.min((means[j] - means[ell] + DECIDED_Z * sd_j) / sd_l);
    }
    let lo = lo.max(-DECIDED_Z);
    if hi <= lo {
        return cdf(hi.max(-DECIDED_Z));
    }
    // split where each rival's factor changes fastest so narrow steps are not missed
    let mut breaks = vec![lo, hi];
    for &j in &rivals {
        let z = (means[j] - means[ell]) / sd_l;
        if z > lo && z < hi {
            breaks.push(z);
        }
    }
    breaks.sort_by(f64::total_cmp);
    cdf(lo)
        + breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| integrate_adaptive(&integrand, w[0], w[1], 1e-11, 40))
            .sum::<f64>()
}

// 15-point Gauss-Kronrod abscissae and weights with the embedded 7-point Gauss rule.
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GAUSS_WEIGHTS: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut values = [0.0; 15];
    values[7] = f(c);
    for i in 0..7 {
        values[i] = f(c - h * GK_NODES[i]);
        values[14 - i] = f(c + h * GK_NODES[i]);
    }
    let weight = |i: usize| GK_WEIGHTS[i.min(14 - i)];
    let kronrod: f64 = (0..15).map(|i| weight(i) * values[i]).sum();
    let gauss = GAUSS_WEIGHTS[3] * values[7]
        + (0..3).map(|j| GAUSS_WEIGHTS[j] * (values[2 * j + 1] + values[13 - 2 * j])).sum::<f64>();
    // QUADPACK's error scaling: |K − G| overstates the error of smooth integrands
    let mean = 0.5 * kronrod;
    let spread = h * (0..15).map(|i| weight(i) * (values[i] - mean).abs()).sum::<f64>();
    let mut err = ((kronrod - gauss) * h).abs();
    if spread > 0.0 && err > 0.0 {
        err = spread * (200.0 * err / spread).powf(1.5).min(1.0);
    }
    (kronrod * h, err)
}

fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    integrate_adaptive(f, a, mid, tol, depth - 1) + integrate_adaptive(f, mid, b, tol, depth - 1)
}

/// The product-form approximation `p_ℓ ≈ ∏_j Φ(−r_j)` with
/// `r = (AΔAᵀ)^{-1/2} A μ` and `A` the contrast matrix comparing surface ℓ
/// against every other surface.
///
/// Exact for two surfaces. For three or more the whitened contrasts are not
/// the right events to multiply, and the result can be far from the true
/// probabilities (1/4 instead of 1/3 for three identical surfaces), so
/// [`min_prob`] does not use it.
pub fn min_prob_product(post: &PosteriorAtPoint) -> Result<Vec<f64>> {
    let l = post.surfaces();
    let Some(vars) = floored_variances(post) else {
        return Ok(vec![0.5f64.powi(l as i32 - 1); l]);
    };
    let mu = DVector::from_column_slice(&post.means);
    let delta = DMatrix::from_diagonal(&DVector::from_column_slice(&vars));
    (0..l)
        .map(|ell| {
            let mut a = DMatrix::zeros(l - 1, l);
            for i in 0..l - 1 {
                a[(i, ell)] = 1.0;
                let other = if i < ell { i } else { i + 1 };
                a[(i, other)] = -1.0;
            }
            let cov = &a * &delta * a.transpose();
            let eig = SymmetricEigen::new(cov);
            if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
                return Err(Error::Numerical(format!("contrast covariance for surface {ell} is singular")));
            }
            let inv_sqrt = &eig.eigenvectors
                * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e.sqrt()))
                * eig.eigenvectors.transpose();
            let r = inv_sqrt * (&a * &mu);
            Ok(r.iter().map(|rj| cdf(-rj)).product())
        })
        .collect()
}

/// First and second moments of `min(X₁, X₂)` for independent Gaussians.
pub fn min_moments_two(mu1: f64, var1: f64, mu2: f64, var2: f64) -> (f64, f64) {
    let d2 = var1 + var2;
    if d2 <= 0.0 {
        let m = mu1.min(mu2);
        return (m, m * m);
    }
    let d = d2.sqrt();
    let a = (mu1 - mu2) / d;
    let (lo, hi, dens) = (cdf(-a), cdf(a), pdf(a));
    let mean = mu1 * lo + mu2 * hi - d * dens;
    let second = (mu1 * mu1 + var1) * lo + (mu2 * mu2 + var2) * hi - (mu1 + mu2) * d * dens;
    (mean, second)
}

/// Expected minimum `m(x)`; exact for two surfaces, otherwise surfaces are
/// folded in index order with a moment-matched Gaussian at each step.
pub fn min_mean(post: &PosteriorAtPoint) -> f64 {
    let (mut mean, mut var) = (post.means[0], post.variances[0]);
    for ell in 1..post.surfaces() {
        let (m, s) = min_moments_two(mean, var, post.means[ell], post.variances[ell]);
        mean = m;
        var = (s - m * m).max(0.0);
    }
    mean
}

/// M-gap `μ_(1) − m(x)`, the expected loss of announcing the smallest mean.
pub fn m_gap(post: &PosteriorAtPoint) -> f64 {
    m_gap_parts(&post.means, &post.variances)
}

pub(crate) fn m_gap_parts(means: &[f64], variances: &[f64]) -> f64 {
    if means.len() == 2 {
        // μ_(1) − m = d(φ(a) + aΦ(a)) with a = −|μ₁ − μ₂|/d, free of cancellation in μ
        let d2 = variances[0] + variances[1];
        if d2 <= 0.0 {
            return 0.0;
        }
        let d = d2.sqrt();
        let a = -(means[0] - means[1]).abs() / d;
        return (d * (pdf(a) + a * cdf(a))).max(0.0);
    }
    let (mut mean, mut var) = (means[0], variances[0]);
    for ell in 1..means.len() {
        let (m, s) = min_moments_two(mean, var, means[ell], variances[ell]);
        mean = m;
        var = (s - m * m).max(0.0);
    }
    let best = means.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = best - mean;
    if gap < 0.0 {
        NEGATIVE_MGAP_CLAMPS.fetch_add(1, Ordering::Relaxed);
        return 0.0;
    }
    gap
}

fn check_weights(n: usize, weights: &[f64]) -> Result<()> {
    if weights.len() != n {
        return Err(Error::invalid(format!("{n} grid points but {} weights", weights.len())));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::invalid(format!("weights must be a probability vector (sum {total})")));
    }
    Ok(())
}

/// Uniform weights over `n` grid points.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Weighted average of the M-gap over a grid.
pub fn empirical_loss(posteriors: &[PosteriorAtPoint], weights: &[f64]) -> Result<f64> {
    check_weights(posteriors.len(), weights)?;
    Ok(posteriors.iter().zip(weights).map(|(p, w)| w * m_gap(p)).sum())
}

/// Weighted average of `μ_{Ĉ(x)}(x) − min_ℓ μ_ℓ(x)` under the true means.
pub fn true_loss(classifier: &[usize], truths: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    check_weights(classifier.len(), weights)?;
    if truths.len() != classifier.len() {
        return Err(Error::invalid("classifier and truths differ in length"));
    }
    let mut total = 0.0;
    for ((&c, row), w) in classifier.iter().zip(truths).zip(weights) {
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        let chosen = *row.get(c).ok_or_else(|| Error::invalid(format!("classifier index {c} out of range")))?;
        total += w * (chosen - best);
    }
    Ok(total)
}

/// Weighted mean of `1 − p_{Ĉ(x)}(x)`.
pub fn error_probability(posteriors: &[PosteriorAtPoint], weights: &[f64]) -> Result<f64> {
    check_weights(posteriors.len(), weights)?;
    Ok(posteriors.iter().zip(weights).map(|(p, w)| w * (1.0 - min_prob_of(p, classify(p)))).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(means: &[f64], variances: &[f64]) -> PosteriorAtPoint {
        PosteriorAtPoint::new(means.to_vec(), variances.to_vec()).unwrap()
    }

    #[test]
    fn classify_and_gaps() {
        assert_eq!(classify(&post(&[0.5, 0.3, 0.9], &[0.0; 3])), 1);
        assert_eq!(classify(&post(&[0.3, 0.3], &[0.0; 2])), 0);
        let (per, min) = gaps(&post(&[0.0, 1.0, 3.0], &[0.0; 3]));
        assert_eq!(per, vec![1.0, 1.0, 3.0 - 0.0]);
        assert_eq!(min, 1.0);
        let (per, min) = gaps(&post(&[0.2, 0.2, 0.2], &[1.0; 3]));
        assert_eq!(per, vec![0.0; 3]);
        assert_eq!(min, 0.0);
    }

    #[test]
    fn two_surface_probabilities() {
        assert_eq!(min_prob_two(0.4, 0.1, 0.4, 0.3), [0.5, 0.5]);
        let p = min_prob_two(0.0, 0.5, 1.0, 0.5);
        assert!((p[0] - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert_eq!(min_prob_two(0.0, 0.0, 1.0, 0.0), [1.0, 0.0]);
    }

    #[test]
    fn quadrature_matches_closed_form_integrals() {
        let (v, _) = gauss_kronrod(&|x: f64| x.powi(6), -1.0, 1.0);
        assert!((v - 2.0 / 7.0).abs() < 1e-15);
        let total = integrate_adaptive(&pdf, -9.0, 9.0, 1e-14, 40);
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn three_identical_surfaces_are_equally_likely() {
        let p = min_prob(&post(&[0.0; 3], &[0.2; 3])).unwrap();
        for pi in p {
            assert!((pi - 1.0 / 3.0).abs() < 1e-12);
        }
        let product = min_prob_product(&post(&[0.0; 3], &[0.2; 3])).unwrap();
        assert!((product[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn product_form_is_exact_for_two_surfaces() {
        let q = post(&[0.3, -0.1], &[0.04, 0.2]);
        let a = min_prob_product(&q).unwrap();
        let b = min_prob(&q).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn symmetric_min_moments() {
        let (m, s) = min_moments_two(0.0, 1.0, 0.0, 1.0);
        assert!((m + 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!(s >= m * m);
        let (m, s) = min_moments_two(0.3, 0.0, -0.2, 0.0);
        assert!((m + 0.2).abs() < 1e-15 && (s - 0.04).abs() < 1e-15);
    }

    #[test]
    fn m_gap_values() {
        assert_eq!(m_gap(&post(&[0.1, 0.4, 0.2], &[0.0; 3])), 0.0);
        let tie = m_gap(&post(&[0.0, 0.0], &[1.0, 1.0]));
        assert!((tie - 2f64.sqrt() * pdf(0.0)).abs() < 1e-15);
        assert!(m_gap(&post(&[0.0, 10.0], &[0.01, 0.01])) < 1e-10);
        // the stable two-surface form agrees with the moment formula
        let q = post(&[0.2, 0.7], &[0.09, 0.01]);
        let direct = 0.2 - min_mean(&q);
        assert!((m_gap(&q) - direct).abs() < 1e-14);
    }

    #[test]
    fn losses_on_degenerate_grid() {
        let grid = vec![post(&[0.0, 1.0], &[0.0; 2]), post(&[2.0, 1.0], &[0.0; 2])];
        let w = uniform_weights(2);
        assert_eq!(empirical_loss(&grid, &w).unwrap(), 0.0);
        assert_eq!(error_probability(&grid, &w).unwrap(), 0.0);
        let truths = vec![vec![0.0, 1.0], vec![2.0, 1.0]];
        assert_eq!(true_loss(&[0, 1], &truths, &w).unwrap(), 0.0);
        assert_eq!(true_loss(&[1, 1], &truths, &w).unwrap(), 0.5);
        assert!(empirical_loss(&grid, &[1.0]).is_err());
    }
}
