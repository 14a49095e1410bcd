//! KL-divergence loss with L2 weight decay.

use crate::augment::SoftLabels;
use crate::error::{invalid_input, Result};
use crate::tensor::Tensor;

/// Lower bound applied to predicted probabilities inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `Σ_n Σ_c y log(y / ŷ)` over row-major `rows × classes` slices, with
/// `0 log 0 = 0`.
pub fn kl_divergence(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter()
        .zip(y_hat)
        .filter(|(t, _)| **t > 0.0)
        .map(|(t, p)| t * (t.ln() - p.max(PROB_FLOOR).ln()))
        .sum()
}

/// `∂/∂ŷ` of [`kl_divergence`].
pub fn kl_gradient(y: &[f64], y_hat: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(y_hat)
        .map(|(t, p)| if *t > 0.0 && *p >= PROB_FLOOR { -t / p } else { 0.0 })
        .collect()
}

fn check(y: &SoftLabels, y_hat: &Tensor) -> Result<()> {
    if y.rows != y_hat.n || y.classes != y_hat.shape.len() {
        return invalid_input(format!(
            "labels are {}x{}, predictions {}x{}",
            y.rows,
            y.classes,
            y_hat.n,
            y_hat.shape.len()
        ));
    }
    Ok(())
}

/// Batch loss `Σ_n KL(y_n ‖ ŷ_n) + (λ/2)‖Θ‖²`, where `theta_sq_norm` is
/// ‖Θ‖².
pub fn kl_loss(y: &SoftLabels, y_hat: &Tensor, theta_sq_norm: f64, lambda: f64) -> Result<f64> {
    check(y, y_hat)?;
    let t: Vec<f64> = y.data.iter().map(|&v| v as f64).collect();
    let p: Vec<f64> = y_hat.data.iter().map(|&v| v as f64).collect();
    Ok(kl_divergence(&t, &p) + 0.5 * lambda * theta_sq_norm)
}

/// Gradient of the data term with respect to the network's probability
/// output, shaped like `y_hat`.
pub fn kl_loss_grad(y: &SoftLabels, y_hat: &Tensor) -> Result<Tensor> {
    check(y, y_hat)?;
    let t: Vec<f64> = y.data.iter().map(|&v| v as f64).collect();
    let p: Vec<f64> = y_hat.data.iter().map(|&v| v as f64).collect();
    let data = kl_gradient(&t, &p).into_iter().map(|v| v as f32).collect();
    Tensor::from_vec(y_hat.n, y_hat.shape, data)
}
