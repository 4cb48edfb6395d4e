use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Polynomial factor of the Matern-5/2 kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelForm {
    /// `1 + √5 r + 5r²/3`, twice mean-square differentiable.
    #[default]
    Standard,
    /// `1 + (√5 + 5/3) r²`. This variant has a kink at the origin like the
    /// exponential kernel and is not positive definite in every dimension.
    Collapsed,
}

impl KernelForm {
    #[inline]
    fn polynomial(self, r: f64, r2: f64) -> f64 {
        match self {
            KernelForm::Standard => 1.0 + SQRT5 * r + 5.0 / 3.0 * r2,
            KernelForm::Collapsed => 1.0 + (SQRT5 + 5.0 / 3.0) * r2,
        }
    }
}

/// Matern-5/2 hyperparameters for one response surface.
///
/// The weighted distance is `‖d‖_θ = sqrt(Σ θ_i d_i²)`, so `theta` acts
/// multiplicatively on squared coordinate differences. Use
/// [`KernelSpec::from_lengthscales`] when starting from conventional
/// lengthscales `L_i` (mapped to `θ_i = 1/L_i²`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// Response-amplitude variance s².
    pub scale: f64,
    /// Per-dimension weights θ of the squared distance; one per input dimension.
    pub theta: Vec<f64>,
    /// Constant prior mean (trend) t.
    pub trend: f64,
    #[serde(default)]
    pub form: KernelForm,
}

impl KernelSpec {
    pub fn new(scale: f64, theta: Vec<f64>, trend: f64) -> Result<Self> {
        let spec = KernelSpec { scale, theta, trend, form: KernelForm::Standard };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a spec from conventional lengthscales, `θ_i = 1/L_i²`.
    pub fn from_lengthscales(scale: f64, lengthscales: &[f64], trend: f64) -> Result<Self> {
        if lengthscales.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid(format!("lengthscales must be positive, got {lengthscales:?}")));
        }
        Self::new(scale, lengthscales.iter().map(|l| 1.0 / (l * l)).collect(), trend)
    }

    pub fn with_form(mut self, form: KernelForm) -> Self {
        self.form = form;
        self
    }

    /// Conventional lengthscales `L_i = θ_i^{-1/2}`.
    pub fn lengthscales(&self) -> Vec<f64> {
        self.theta.iter().map(|t| 1.0 / t.sqrt()).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(format!("kernel scale must be > 0, got {}", self.scale)));
        }
        if self.theta.is_empty() {
            return Err(Error::invalid("kernel needs at least one input dimension"));
        }
        if self.theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid(format!("kernel theta must be > 0, got {:?}", self.theta)));
        }
        if !self.trend.is_finite() {
            return Err(Error::invalid("kernel trend must be finite"));
        }
        Ok(())
    }

    /// Kernel value as a function of the weighted distance r = ‖x − x′‖_θ.
    #[inline]
    pub fn of_distance(&self, r: f64) -> f64 {
        self.scale * self.form.polynomial(r, r * r) * (-SQRT5 * r).exp()
    }

    /// Kernel value from the weighted squared distance r².
    #[inline]
    pub(crate) fn of_sq_distance(&self, r2: f64) -> f64 {
        let r = r2.sqrt();
        self.scale * self.form.polynomial(r, r2) * (-SQRT5 * r).exp()
    }

    #[inline]
    pub(crate) fn sq_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.theta.iter().zip(x.iter().zip(y)).map(|(t, (a, b))| t * (a - b) * (a - b)).sum()
    }

    /// Unchecked evaluation; callers guarantee matching dimensions.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.of_sq_distance(self.sq_distance(x, y))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, kernel expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// Evaluates `s²·p(r)·exp(−√5 r)` with `r = ‖x−x′‖_θ` and `p` from the spec's form.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    spec.check_point(x2)?;
    Ok(spec.eval_unchecked(x, x2))
}
