//! Two-class kernel SVM shared by the patch and line classifiers.
//!
//! Labels are `+1` for text and `-1` for non-text. The decision function is
//! `f(x) = sum_i coef_i * K(sv_i, x) + bias` with `coef_i = alpha_i * y_i`.

mod io;
mod smo;

pub use io::{load_model, read_model, save_model, write_model};
pub use smo::{train, train_detailed, TrainConfig, Trained};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `(gamma * <x, y> + coef0) ^ degree`
    Polynomial { degree: u32, gamma: f64, coef0: f64 },
    /// `exp(-gamma * |x - y|^2)`
    Rbf { gamma: f64 },
}

impl KernelSpec {
    /// Polynomial kernel with `gamma = 1/dim` and `coef0 = 1`.
    pub fn polynomial(degree: u32, dim: usize) -> Self {
        KernelSpec::Polynomial {
            degree,
            gamma: 1.0 / dim.max(1) as f64,
            coef0: 1.0,
        }
    }

    /// RBF kernel with `gamma = 1/dim`.
    pub fn rbf(dim: usize) -> Self {
        KernelSpec::Rbf {
            gamma: 1.0 / dim.max(1) as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree, gamma, .. } => {
                if degree < 1 {
                    return Err(Error::Argument("polynomial degree must be >= 1".into()));
                }
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::Argument("kernel gamma must be positive".into()));
                }
            }
            KernelSpec::Rbf { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::Argument("kernel gamma must be positive".into()));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            KernelSpec::Polynomial {
                degree,
                gamma,
                coef0,
            } => {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                (gamma * dot + coef0).powi(degree as i32)
            }
            KernelSpec::Rbf { gamma } => {
                let d2: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let d = x - y;
                        d * d
                    })
                    .sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub kernel: KernelSpec,
    pub dim: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    /// Identifies the feature extractor the model was trained on.
    pub features: Option<String>,
}

impl SvmModel {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.support_vectors.is_empty() {
            return Err(Error::Argument("model has no support vectors".into()));
        }
        if self.support_vectors.len() != self.dual_coefs.len() {
            return Err(Error::Argument(format!(
                "{} support vectors but {} coefficients",
                self.support_vectors.len(),
                self.dual_coefs.len()
            )));
        }
        if let Some(bad) = self
            .support_vectors
            .iter()
            .position(|v| v.len() != self.dim)
        {
            return Err(Error::Argument(format!(
                "support vector {bad} has length {}, expected {}",
                self.support_vectors[bad].len(),
                self.dim
            )));
        }
        Ok(())
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.dim
            )));
        }
        let sum: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, &c)| c * self.kernel.eval(sv, x))
            .sum();
        Ok(sum + self.bias)
    }

    /// `+1` when the decision value is strictly positive, otherwise `-1`.
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(if self.decision_value(x)? > 0.0 { 1 } else { -1 })
    }

    /// A model whose decision value is `bias + tiny` everywhere; used for
    /// pass-through and reject-all gates.
    pub fn constant(dim: usize, accept: bool) -> Self {
        SvmModel {
            kernel: KernelSpec::polynomial(1, dim),
            dim,
            support_vectors: vec![vec![0.0; dim]],
            dual_coefs: vec![0.0],
            bias: if accept { 1.0 } else { -1.0 },
            features: None,
        }
    }
}
