//! Diagonal-Gaussian posterior heads.

use ndarray::{Array2, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{AlignError, Result};

pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

/// Posterior statistics, one row per frame or state.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeHead {
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
}

impl VaeHead {
    pub fn new(mu: Array2<f64>, logvar: Array2<f64>) -> Result<Self> {
        if mu.dim() != logvar.dim() {
            return Err(AlignError::dims(format!(
                "mu {:?} vs logvar {:?}",
                mu.dim(),
                logvar.dim()
            )));
        }
        Ok(Self { mu, logvar })
    }

    pub fn rows(&self) -> usize {
        self.mu.nrows()
    }

    pub fn dim(&self) -> usize {
        self.mu.ncols()
    }
}

pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

/// `z = mu + exp(logvar / 2) * noise`.
pub fn reparameterize(head: &VaeHead, noise: &Array2<f64>) -> Result<Array2<f64>> {
    if noise.dim() != head.mu.dim() {
        return Err(AlignError::dims(format!(
            "noise {:?} vs head {:?}",
            noise.dim(),
            head.mu.dim()
        )));
    }
    Ok(Zip::from(&head.mu)
        .and(&head.logvar)
        .and(noise)
        .map_collect(|&m, &lv, &n| m + (0.5 * lv).exp() * n))
}

/// Pulls a gradient on `z` back to `(grad_mu, grad_logvar)`.
pub fn reparameterize_backward(
    head: &VaeHead,
    noise: &Array2<f64>,
    grad_z: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let grad_logvar = Zip::from(&head.logvar)
        .and(noise)
        .and(grad_z)
        .map_collect(|&lv, &n, &g| g * n * 0.5 * (0.5 * lv).exp());
    (grad_z.clone(), grad_logvar)
}

/// KL divergence to the standard normal, summed over dimensions and
/// averaged over rows.
pub fn kl_standard_normal(head: &VaeHead) -> f64 {
    let rows = head.rows().max(1) as f64;
    let total: f64 = Zip::from(&head.mu)
        .and(&head.logvar)
        .fold(0.0, |acc, &m, &lv| acc + 0.5 * (m * m + lv.exp() - 1.0 - lv));
    total / rows
}

/// Gradient of [`kl_standard_normal`] with respect to `(mu, logvar)`.
pub fn kl_standard_normal_grad(head: &VaeHead) -> (Array2<f64>, Array2<f64>) {
    let rows = head.rows().max(1) as f64;
    let grad_mu = head.mu.mapv(|m| m / rows);
    let grad_logvar = head.logvar.mapv(|lv| 0.5 * (lv.exp() - 1.0) / rows);
    (grad_mu, grad_logvar)
}
