use super::model::KrigingModel;

/// Posterior means and variances of one model on a fixed set of points,
/// kept current as the model grows.
///
/// Each appended observation `x⁺` is folded in with the rank-one rule
///
/// ```text
/// λ(x) = v(x, x⁺) / (σ²(x⁺) + δ²(x⁺))
/// μ̂(x) += λ(x) · (y⁺ − μ̂(x⁺))
/// δ²(x) −= λ(x) · v(x, x⁺)
/// ```
///
/// where `v(x, x⁺)` comes from the cached solves `L⁻¹k(x)`. A refactorized
/// model (new kernel or escalated jitter) triggers a rebuild.
#[derive(Debug, Clone)]
pub struct TrackedPosterior {
    points: Vec<Vec<f64>>,
    /// Row `i` holds `(L⁻¹ K(X, points))_i`, flattened with stride `points.len()`.
    solves: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
    synced: usize,
    factor_id: u64,
}

impl TrackedPosterior {
    pub fn new(model: &KrigingModel, points: Vec<Vec<f64>>) -> Self {
        let mut tracked = TrackedPosterior {
            points,
            solves: Vec::new(),
            means: Vec::new(),
            variances: Vec::new(),
            synced: 0,
            factor_id: 0,
        };
        tracked.rebuild(model);
        tracked
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Posterior variances, clamped at zero.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Brings the cache up to date with `model`.
    pub fn sync(&mut self, model: &KrigingModel) {
        if model.factor_id() != self.factor_id || model.len() < self.synced {
            self.rebuild(model);
            return;
        }
        for i in self.synced..model.len() {
            self.append_row(model, i);
        }
    }

    fn rebuild(&mut self, model: &KrigingModel) {
        let g = self.points.len();
        let kernel = model.kernel();
        self.solves.clear();
        self.solves.reserve(model.len() * g);
        self.means = vec![kernel.trend; g];
        self.variances = vec![kernel.scale; g];
        self.synced = 0;
        self.factor_id = model.factor_id();
        for i in 0..model.len() {
            self.append_row(model, i);
        }
    }

    fn append_row(&mut self, model: &KrigingModel, i: usize) {
        let g = self.points.len();
        let kernel = model.kernel();
        let row = model.chol_row(i);
        let (l, pivot) = (&row[..i], row[i]);
        let x_new = &model.observations().locations()[i];
        let y_new = model.observations().values()[i];
        // μ̂(x⁺) before assimilation and the innovation y⁺ − μ̂(x⁺)
        let mean_at_new = kernel.trend + l.iter().zip(model.alpha()).map(|(a, b)| a * b).sum::<f64>();
        let innovation = y_new - mean_at_new;
        let denom = pivot * pivot;
        let mut explained = vec![0.0; g];
        for (j, lj) in l.iter().enumerate() {
            let solved = &self.solves[j * g..(j + 1) * g];
            for (e, s) in explained.iter_mut().zip(solved) {
                *e += s * lj;
            }
        }
        let mut new_row = Vec::with_capacity(g);
        for (p, point) in self.points.iter().enumerate() {
            let cross = kernel.eval_unchecked(point, x_new) - explained[p];
            let lambda = cross / denom;
            self.means[p] += lambda * innovation;
            self.variances[p] = (self.variances[p] - lambda * cross).max(0.0);
            new_row.push(cross / pivot);
        }
        self.solves.extend_from_slice(&new_row);
        self.synced = i + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelSpec;

    #[test]
    fn tracks_incremental_updates_and_refits() {
        let kernel = KernelSpec::from_lengthscales(0.5, &[0.2], 0.1).unwrap();
        let grid: Vec<Vec<f64>> = (0..=20).map(|i| vec![i as f64 / 20.0]).collect();
        let mut model = KrigingModel::prior(kernel).unwrap();
        let mut tracked = TrackedPosterior::new(&model, grid.clone());
        let data = [(0.1, 0.3, 0.01), (0.55, -0.2, 0.0), (0.9, 0.05, 0.2), (0.33, 0.4, 0.02)];
        for &(x, y, nv) in &data {
            model = model.updated(vec![x], y, nv).unwrap();
            tracked.sync(&model);
            for (p, pt) in grid.iter().enumerate() {
                let (m, v) = model.predict(pt).unwrap();
                assert!((tracked.means()[p] - m).abs() < 1e-12);
                assert!((tracked.variances()[p] - v).abs() < 1e-12);
            }
        }
        let refit = model.with_kernel(KernelSpec::from_lengthscales(0.3, &[0.1], 0.0).unwrap()).unwrap();
        tracked.sync(&refit);
        let (m, v) = refit.predict(&grid[7]).unwrap();
        assert!((tracked.means()[7] - m).abs() < 1e-12);
        assert!((tracked.variances()[7] - v).abs() < 1e-12);
    }
}
