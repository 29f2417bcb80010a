//! Reconstruction losses with their gradients.

use ndarray::{Array2, Zip};

use crate::error::{AlignError, Result};

/// Mean squared error over all elements and its gradient wrt `recon`.
pub fn mse_loss(recon: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if recon.dim() != target.dim() {
        return Err(AlignError::dims(format!(
            "reconstruction {:?} vs target {:?}",
            recon.dim(),
            target.dim()
        )));
    }
    let n = recon.len().max(1) as f64;
    let diff = recon - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.mapv(|d| 2.0 * d / n);
    Ok((loss, grad))
}

/// Mean cross-entropy of row-wise softmax(`logits`) against class `targets`,
/// with its gradient wrt `logits`.
pub fn cross_entropy_loss(logits: &Array2<f64>, targets: &[usize]) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != targets.len() {
        return Err(AlignError::dims(format!(
            "{} logit rows for {} targets",
            logits.nrows(),
            targets.len()
        )));
    }
    let classes = logits.ncols();
    if let Some(&bad) = targets.iter().find(|&&c| c >= classes) {
        return Err(AlignError::PhonemeIdOutOfRange { id: bad, size: classes });
    }
    let n = targets.len().max(1) as f64;
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    for ((row, mut g), &target) in logits.outer_iter().zip(grad.outer_iter_mut()).zip(targets) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[target];
        Zip::from(&mut g).and(&row).for_each(|g, &v| *g = (v - lse).exp() / n);
        g[target] -= 1.0 / n;
    }
    Ok((loss / n, grad))
}
