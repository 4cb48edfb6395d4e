use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;

use super::kernel::KernelSpec;
use super::observations::ObservationSet;
use crate::error::{Error, Result};

/// Relative jitter levels (multiples of the kernel scale) tried in order.
pub const JITTER_LEVELS: [f64; 7] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

static NEXT_FACTOR_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_factor_id() -> u64 {
    NEXT_FACTOR_ID.fetch_add(1, Ordering::Relaxed)
}

/// Posterior of one surface at a list of query points.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

/// Kriging model of a single response surface.
///
/// Holds the Cholesky factor `L` of `K + Σ + jitter·I` in packed row-major
/// lower-triangular form together with `α = L⁻¹(y − t)`. Adding an
/// observation appends one row to `L` and one entry to `α`, so the posterior
/// after an update is exactly the posterior of a refit on the augmented data.
#[derive(Debug, Clone)]
pub struct KrigingModel {
    kernel: KernelSpec,
    obs: ObservationSet,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
    factor_id: u64,
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl KrigingModel {
    /// Prior model (no observations).
    pub fn prior(kernel: KernelSpec) -> Result<Self> {
        Self::new(kernel, ObservationSet::new())
    }

    pub fn new(kernel: KernelSpec, obs: ObservationSet) -> Result<Self> {
        kernel.validate()?;
        if let Some(d) = obs.dim() {
            if d != kernel.input_dim() {
                return Err(Error::invalid(format!(
                    "observations have dimension {d}, kernel expects {}",
                    kernel.input_dim()
                )));
            }
        }
        let mut model = KrigingModel { kernel, obs, chol: Vec::new(), alpha: Vec::new(), jitter: 0.0, factor_id: 0 };
        model.factorize(0)?;
        Ok(model)
    }

    /// Same observations under a different kernel.
    pub fn with_kernel(&self, kernel: KernelSpec) -> Result<Self> {
        Self::new(kernel, self.obs.clone())
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    /// Absolute diagonal jitter currently added before factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub(crate) fn factor_id(&self) -> u64 {
        self.factor_id
    }

    pub(crate) fn chol_row(&self, i: usize) -> &[f64] {
        &self.chol[row_start(i)..row_start(i + 1)]
    }

    pub(crate) fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Full factorization, escalating jitter from `JITTER_LEVELS[first_level]`.
    fn factorize(&mut self, first_level: usize) -> Result<()> {
        let mut tried = Vec::new();
        for &rel in &JITTER_LEVELS[first_level.min(JITTER_LEVELS.len())..] {
            let jitter = rel * self.kernel.scale;
            tried.push(jitter);
            if let Some((chol, alpha)) = self.try_factorize(jitter) {
                self.chol = chol;
                self.alpha = alpha;
                self.jitter = jitter;
                self.factor_id = fresh_factor_id();
                return Ok(());
            }
        }
        Err(Error::Factorization {
            context: format!("covariance of {} observations is not positive definite", self.len()),
            jitters: tried,
        })
    }

    fn try_factorize(&self, jitter: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.len();
        let mut chol = Vec::with_capacity(row_start(n));
        let mut alpha = Vec::with_capacity(n);
        let locs = self.obs.locations();
        for i in 0..n {
            let kcol: Vec<f64> = (0..i).map(|j| self.kernel.eval_unchecked(&locs[j], &locs[i])).collect();
            let (row, pivot) = extend_factor(&chol, i, &kcol, self.diag(i, jitter), jitter)?;
            let resid = self.obs.values()[i] - self.kernel.trend - dot(&row, &alpha);
            chol.extend_from_slice(&row);
            chol.push(pivot);
            alpha.push(resid / pivot);
        }
        Some((chol, alpha))
    }

    fn diag(&self, i: usize, jitter: f64) -> f64 {
        self.kernel.scale + self.obs.noise_variances()[i] + jitter
    }

    /// Returns the model with `(x_new, y_new)` assimilated at noise variance `noise_var`.
    pub fn updated(mut self, x_new: Vec<f64>, y_new: f64, noise_var: f64) -> Result<Self> {
        self.kernel.check_point(&x_new)?;
        self.obs.push(x_new, y_new, noise_var)?;
        let n = self.len() - 1;
        let locs = self.obs.locations();
        let kcol: Vec<f64> = (0..n).map(|j| self.kernel.eval_unchecked(&locs[j], &locs[n])).collect();
        match extend_factor(&self.chol, n, &kcol, self.diag(n, self.jitter), self.jitter) {
            Some((row, pivot)) => {
                let resid = y_new - self.kernel.trend - dot(&row, &self.alpha);
                self.chol.extend_from_slice(&row);
                self.chol.push(pivot);
                self.alpha.push(resid / pivot);
            }
            None => {
                let level = JITTER_LEVELS
                    .iter()
                    .position(|&r| r * self.kernel.scale > self.jitter)
                    .unwrap_or(JITTER_LEVELS.len());
                self.factorize(level)?;
            }
        }
        Ok(self)
    }

    /// Non-consuming variant of [`KrigingModel::updated`].
    pub fn update_with_observation(&self, x_new: &[f64], y_new: f64, noise_var: f64) -> Result<Self> {
        self.clone().updated(x_new.to_vec(), y_new, noise_var)
    }

    /// `L⁻¹ k(x)` for a query point.
    pub(crate) fn solve_weights(&self, x: &[f64]) -> Vec<f64> {
        let locs = self.obs.locations();
        let mut w = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let row = self.chol_row(i);
            let k = self.kernel.eval_unchecked(&locs[i], x);
            let v = (k - dot(&row[..i], &w)) / row[i];
            w.push(v);
        }
        w
    }

    /// Posterior mean and (clamped) variance at one point.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.kernel.check_point(x)?;
        let w = self.solve_weights(x);
        Ok(self.predict_from_weights(&w))
    }

    #[inline]
    pub(crate) fn predict_from_weights(&self, w: &[f64]) -> (f64, f64) {
        let mean = self.kernel.trend + dot(w, &self.alpha);
        let var = (self.kernel.scale - dot(w, w)).max(0.0);
        (mean, var)
    }

    /// Posterior means, variances and full covariance at `query`.
    pub fn posterior(&self, query: &[Vec<f64>]) -> Result<Posterior> {
        for x in query {
            self.kernel.check_point(x)?;
        }
        let weights: Vec<Vec<f64>> = query.iter().map(|x| self.solve_weights(x)).collect();
        let m = query.len();
        let mut covariance = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let c = self.kernel.eval_unchecked(&query[i], &query[j]) - dot(&weights[i], &weights[j]);
                covariance[(i, j)] = c;
                covariance[(j, i)] = c;
            }
        }
        let (means, variances) = weights.iter().map(|w| self.predict_from_weights(w)).unzip();
        Ok(Posterior { means, variances, covariance })
    }

    /// Posterior covariance v(x, x2).
    pub fn covariance(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        self.kernel.check_point(x)?;
        self.kernel.check_point(x2)?;
        let w1 = self.solve_weights(x);
        let w2 = self.solve_weights(x2);
        Ok(self.kernel.eval_unchecked(x, x2) - dot(&w1, &w2))
    }

    /// Posterior variance at `query` after a hypothetical observation at
    /// `x_cand` with noise variance `noise_var`. Independent of the observed value.
    pub fn variance_after_hypothetical(&self, x_cand: &[f64], noise_var: f64, query: &[f64]) -> Result<f64> {
        if !(noise_var >= 0.0) {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {noise_var}")));
        }
        self.kernel.check_point(x_cand)?;
        self.kernel.check_point(query)?;
        let wc = self.solve_weights(x_cand);
        let wq = self.solve_weights(query);
        let (_, var_c) = self.predict_from_weights(&wc);
        let (_, var_q) = self.predict_from_weights(&wq);
        let v = self.kernel.eval_unchecked(query, x_cand) - dot(&wq, &wc);
        Ok(hypothetical_variance(var_q, v, var_c, noise_var + self.jitter))
    }
}

/// δ²_new(q) = δ²(q) − v(q,c)² / (σ² + δ²(c)), clamped at zero.
#[inline]
pub(crate) fn hypothetical_variance(var_q: f64, cross: f64, var_c: f64, noise_var: f64) -> f64 {
    let denom = noise_var + var_c;
    if denom <= 0.0 {
        return var_q.max(0.0);
    }
    (var_q - cross * cross / denom).max(0.0)
}

/// Computes the new row `l = L⁻¹k` and pivot of the factor when appending
/// row `n`. Returns `None` when the pivot is not safely positive.
fn extend_factor(chol: &[f64], n: usize, kcol: &[f64], diag: f64, jitter: f64) -> Option<(Vec<f64>, f64)> {
    let mut row = Vec::with_capacity(n);
    for j in 0..n {
        let lrow = &chol[row_start(j)..row_start(j + 1)];
        let v = (kcol[j] - dot(&lrow[..j], &row)) / lrow[j];
        row.push(v);
    }
    let pivot2 = diag - dot(&row, &row);
    // mathematically pivot² >= jitter; losing half of it means the factor is unreliable
    if !(pivot2.is_finite() && pivot2 > 0.5 * jitter && pivot2 > 0.0) {
        return None;
    }
    Some((row, pivot2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kernel() -> KernelSpec {
        KernelSpec::from_lengthscales(1.0, &[0.3], 0.0).unwrap()
    }

    #[test]
    fn empty_model_returns_prior() {
        let m = KrigingModel::prior(KernelSpec::new(2.0, vec![1.0], 0.7).unwrap()).unwrap();
        let (mean, var) = m.predict(&[0.4]).unwrap();
        assert_eq!(mean, 0.7);
        assert_eq!(var, 2.0);
    }

    #[test]
    fn noise_free_interpolation_of_single_point() {
        let obs = ObservationSet::from_parts(vec![vec![0.25]], vec![1.3], vec![0.0]).unwrap();
        let m = KrigingModel::new(kernel(), obs).unwrap();
        let (mean, var) = m.predict(&[0.25]).unwrap();
        assert!((mean - 1.3).abs() < 1e-8);
        assert!(var < 1e-9);
    }

    #[test]
    fn variance_ratio_at_new_site() {
        let obs = ObservationSet::from_parts(vec![vec![0.0], vec![1.0]], vec![0.1, -0.2], vec![0.05, 0.05]).unwrap();
        let m = KrigingModel::new(kernel(), obs).unwrap();
        let x = [0.47];
        let (_, var) = m.predict(&x).unwrap();
        let sigma2 = 0.09;
        let m2 = m.update_with_observation(&x, 0.3, sigma2).unwrap();
        let (_, var2) = m2.predict(&x).unwrap();
        let ratio = (var2 / var).sqrt();
        let expected = sigma2.sqrt() / (sigma2 + var).sqrt();
        assert!((ratio - expected).abs() < 1e-8, "{ratio} vs {expected}");
        let hyp = m.variance_after_hypothetical(&x, sigma2, &x).unwrap();
        assert!((hyp - var * sigma2 / (sigma2 + var)).abs() < 1e-10);
    }

    #[test]
    fn noise_free_update_collapses_variance() {
        let m = KrigingModel::prior(kernel()).unwrap();
        let m = m.updated(vec![0.5], 1.0, 0.0).unwrap();
        let (_, var) = m.predict(&[0.5]).unwrap();
        assert!(var < 1e-9);
        let hyp = m.variance_after_hypothetical(&[0.2], 0.0, &[0.2]).unwrap();
        assert!(hyp < 1e-9);
    }

    #[test]
    fn far_candidate_leaves_variance_unchanged() {
        let m = KrigingModel::prior(kernel()).unwrap();
        let (_, var) = m.predict(&[0.0]).unwrap();
        let hyp = m.variance_after_hypothetical(&[50.0], 0.01, &[0.0]).unwrap();
        assert!((hyp - var).abs() < 1e-10);
    }

    #[test]
    fn duplicate_noise_free_sites_escalate_jitter() {
        let obs = ObservationSet::from_parts(vec![vec![0.5]; 4], vec![1.0, 1.0, 1.0, 1.0], vec![0.0; 4]).unwrap();
        let m = KrigingModel::new(kernel(), obs).unwrap();
        let (mean, _) = m.predict(&[0.5]).unwrap();
        assert!((mean - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let m = KrigingModel::prior(kernel()).unwrap();
        assert!(m.update_with_observation(&[0.1], f64::NAN, 0.0).is_err());
        assert!(m.update_with_observation(&[0.1, 0.2], 1.0, 0.0).is_err());
    }
}
