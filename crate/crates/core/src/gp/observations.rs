use crate::error::{Error, Result};

/// Observed design for one surface: locations, (batch-averaged) values and
/// the per-entry noise variances forming the diagonal noise matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    locations: Vec<Vec<f64>>,
    values: Vec<f64>,
    noise_variances: Vec<f64>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(locations: Vec<Vec<f64>>, values: Vec<f64>, noise_variances: Vec<f64>) -> Result<Self> {
        if locations.len() != values.len() || values.len() != noise_variances.len() {
            return Err(Error::invalid(format!(
                "observation lists differ in length: {} locations, {} values, {} noise variances",
                locations.len(),
                values.len(),
                noise_variances.len()
            )));
        }
        let mut set = ObservationSet::new();
        for ((x, y), nv) in locations.into_iter().zip(values).zip(noise_variances) {
            set.push(x, y, nv)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64, noise_variance: f64) -> Result<()> {
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be finite and >= 0, got {noise_variance}")));
        }
        if !y.is_finite() || x.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("observation contains non-finite values"));
        }
        if let Some(first) = self.locations.first() {
            if first.len() != x.len() {
                return Err(Error::invalid(format!("observation has dimension {}, expected {}", x.len(), first.len())));
            }
        }
        self.locations.push(x);
        self.values.push(y);
        self.noise_variances.push(noise_variance);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Input dimension, if known (i.e. the set is nonempty).
    pub fn dim(&self) -> Option<usize> {
        self.locations.first().map(Vec::len)
    }

    pub fn locations(&self) -> &[Vec<f64>] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    /// Copy with `extra` added to every noise variance (used to fold in a fitted nugget).
    pub fn with_added_noise(&self, extra: f64) -> Self {
        let mut out = self.clone();
        out.noise_variances.iter_mut().for_each(|v| *v += extra);
        out
    }
}
