//! Label-smoothed softmax cross-entropy, mean-reduced over the batch.

use super::NnError;
use crate::{Mat, Real};

/// Returns the batch-mean loss and the gradient with respect to the logits
/// (classes x batch). Targets are `(1 - smoothing) * onehot + smoothing / C`.
pub fn cross_entropy(
    logits: &Mat,
    labels: &[usize],
    smoothing: Real,
) -> Result<(Real, Mat), NnError> {
    let classes = logits.nrows();
    let batch = logits.ncols();
    if labels.len() != batch {
        return Err(NnError::Shape(format!(
            "cross_entropy: {} labels for batch of {batch}",
            labels.len()
        )));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(NnError::InvalidModel(format!(
            "label smoothing {smoothing} outside [0, 1)"
        )));
    }
    let uniform = smoothing / classes as Real;
    let mut grad = Mat::zeros((classes, batch));
    let mut loss = 0.0;
    for j in 0..batch {
        let label = labels[j];
        if label >= classes {
            return Err(NnError::Shape(format!(
                "cross_entropy: label {label} outside {classes} classes"
            )));
        }
        let col = logits.column(j);
        let max = col.iter().copied().fold(Real::NEG_INFINITY, Real::max);
        let lse = max + col.iter().map(|z| (z - max).exp()).sum::<Real>().ln();
        for c in 0..classes {
            let target = uniform + if c == label { 1.0 - smoothing } else { 0.0 };
            let p = (col[c] - lse).exp();
            grad[[c, j]] = (p - target) / batch as Real;
            loss += target * (lse - col[c]);
        }
    }
    Ok((loss / batch as Real, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_log_c() {
        for classes in [2usize, 5, 10] {
            let logits = Mat::zeros((classes, 3));
            let (loss, _) = cross_entropy(&logits, &[0, 1, 0], 0.0).unwrap();
            assert!((loss - (classes as Real).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_logit_drives_loss_to_zero() {
        let mut logits = Mat::zeros((4, 1));
        logits[[2, 0]] = 50.0;
        let (loss, _) = cross_entropy(&logits, &[2], 0.0).unwrap();
        assert!(loss < 1e-12, "loss {loss}");
    }

    #[test]
    fn gradient_columns_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let logits = Array2::from_shape_fn((6, 5), |_| rng.gen_range(-3.0..3.0));
        let labels = [0, 5, 2, 1, 3];
        for smoothing in [0.0, 0.1] {
            let (_, grad) = cross_entropy(&logits, &labels, smoothing).unwrap();
            for j in 0..5 {
                let s: Real = grad.column(j).sum();
                assert!(s.abs() < 1e-12, "column {j} sums to {s}");
            }
        }
    }

    #[test]
    fn matches_direct_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let logits = Array2::from_shape_fn((7, 4), |_| rng.gen_range(-2.0..2.0));
        let labels = [3, 0, 6, 2];
        let smoothing = 0.1;
        let (loss, grad) = cross_entropy(&logits, &labels, smoothing).unwrap();

        // plain formula, no log-sum-exp shift
        let mut want_loss = 0.0f64;
        let mut want_grad = Mat::zeros((7, 4));
        for j in 0..4 {
            let z: Vec<f64> = logits.column(j).iter().map(|&v| v as f64).collect();
            let denom: f64 = z.iter().map(|v| v.exp()).sum();
            for c in 0..7 {
                let target = smoothing as f64 / 7.0
                    + if c == labels[j] { 1.0 - smoothing as f64 } else { 0.0 };
                let p = z[c].exp() / denom;
                want_loss -= target * (z[c] - denom.ln());
                want_grad[[c, j]] = ((p - target) / 4.0) as Real;
            }
        }
        want_loss /= 4.0;
        assert!((loss as f64 - want_loss).abs() < 1e-10);
        for (g, w) in grad.iter().zip(want_grad.iter()) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothed_optimum_has_near_zero_gradient() {
        // logits matching the smoothed target distribution are a fixed point
        let classes = 5usize;
        let smoothing = 0.2;
        let mut logits = Mat::zeros((classes, 1));
        for c in 0..classes {
            let target =
                smoothing / classes as Real + if c == 0 { 1.0 - smoothing } else { 0.0 };
            logits[[c, 0]] = (target as Real).ln();
        }
        let (_, grad) = cross_entropy(&logits, &[0], smoothing).unwrap();
        for g in grad.iter() {
            assert!(g.abs() < 1e-12);
        }
    }
}
