//! Temperature-scaled softmax, cross-entropy, and KL divergence.

use crate::error::{Error, Result};

/// Temperature-scaled softmax: `exp(z_i/T) / sum_j exp(z_j/T)`, computed with
/// max-subtraction so large logits cannot overflow.
pub fn softmax_t(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    if logits.len() < 2 {
        return Err(Error::invalid("softmax needs at least 2 classes"));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive and finite, got {t}")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| ((z - max) / t).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `-log P(label, T)`, evaluated in log space so confident predictions do not
/// round to exactly zero loss prematurely.
pub fn cross_entropy_t(logits: &[f64], label: usize, t: f64) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive and finite, got {t}")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite logit"));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|&z| ((z - max) / t).exp()).sum::<f64>().ln();
    Ok(lse - (logits[label] - max) / t)
}

/// `KL(p || q) = sum_i p_i * ln(p_i / q_i)`.
///
/// Both arguments must be strict probability vectors; callers holding raw
/// model outputs clamp with [`floor_probs`] first.
pub fn kl_loss(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::invalid("KL divergence needs equal-length, non-empty vectors"));
    }
    for v in p.iter().chain(q) {
        if !(*v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!(
                "KL divergence requires strictly positive entries, got {v}"
            )));
        }
    }
    let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
    if (sp - 1.0).abs() > 1e-6 || (sq - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!(
            "KL divergence inputs must sum to 1 (got {sp} and {sq})"
        )));
    }
    Ok(p.iter().zip(q).map(|(&a, &b)| a * (a / b).ln()).sum())
}

/// Clamp probabilities at a small positive floor (1e-12) so they are safe to
/// pass to [`kl_loss`].
pub fn floor_probs(p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| v.max(1e-12)).collect()
}

/// Gradient of [`cross_entropy_t`] with respect to the logits:
/// `(softmax_t(z) - onehot(label)) / T`.
pub(crate) fn ce_logit_grad(logits: &[f64], label: usize, t: f64) -> Result<Vec<f64>> {
    let mut g = softmax_t(logits, t)?;
    if label >= g.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            g.len()
        )));
    }
    g[label] -= 1.0;
    for v in &mut g {
        *v /= t;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn softmax_symmetric() {
        let p = softmax_t(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_direct_values() {
        let p = softmax_t(&[1.0, 2.0], 1.0).unwrap();
        close(p[0], 0.26894, 1e-4);
        close(p[1], 0.73106, 1e-4);
        let p = softmax_t(&[1.0, 2.0], 2.0).unwrap();
        close(p[0], 0.37754, 1e-4);
        close(p[1], 0.62246, 1e-4);
    }

    #[test]
    fn softmax_rejects_bad_args() {
        assert!(softmax_t(&[1.0, f64::NAN], 1.0).is_err());
        assert!(softmax_t(&[1.0, 2.0], 0.0).is_err());
        assert!(softmax_t(&[1.0, 2.0], -1.0).is_err());
        assert!(softmax_t(&[1.0], 1.0).is_err());
    }

    #[test]
    fn softmax_huge_logits_stable() {
        let p = softmax_t(&[1e9, 1e9 + 1.0], 1.0).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        close(p.iter().sum::<f64>(), 1.0, 1e-12);
    }

    #[test]
    fn cross_entropy_values() {
        close(cross_entropy_t(&[0.0, 0.0], 0, 1.0).unwrap(), std::f64::consts::LN_2, 1e-12);
        close(cross_entropy_t(&[1.0, 2.0], 1, 1.0).unwrap(), 0.31326, 1e-4);
        assert!(cross_entropy_t(&[10.0, 0.0], 0, 1.0).unwrap() <= 1e-4);
    }

    #[test]
    fn cross_entropy_label_out_of_range() {
        assert!(cross_entropy_t(&[0.0, 0.0], 2, 1.0).is_err());
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = vec![0.2, 0.3, 0.5];
        close(kl_loss(&p, &p).unwrap(), 0.0, 1e-15);
    }

    #[test]
    fn kl_direct_values() {
        // direct evaluation: 0.5*ln(0.5/0.9) + 0.5*ln(0.5/0.1) = ln(5/3)
        close(kl_loss(&[0.5, 0.5], &[0.9, 0.1]).unwrap(), 0.51083, 1e-4);
        // direct evaluation: 0.9*ln(1.8) + 0.1*ln(0.2) = 0.368064...
        close(kl_loss(&[0.9, 0.1], &[0.5, 0.5]).unwrap(), 0.36806, 1e-4);
    }

    #[test]
    fn kl_rejects_zeros_and_non_distributions() {
        assert!(kl_loss(&[0.0, 1.0], &[0.5, 0.5]).is_err());
        assert!(kl_loss(&[0.5, 0.5], &[1.0, 0.0]).is_err());
        assert!(kl_loss(&[-0.1, 1.1], &[0.5, 0.5]).is_err());
        assert!(kl_loss(&[0.4, 0.4], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn floor_probs_makes_kl_safe() {
        let p = floor_probs(&[1.0, 0.0]);
        assert!(p[1] > 0.0);
    }

    #[test]
    fn logit_grad_matches_definition() {
        let z = [1.0, 2.0, -0.5];
        let t = 3.0;
        let g = ce_logit_grad(&z, 1, t).unwrap();
        let p = softmax_t(&z, t).unwrap();
        close(g[0], p[0] / t, 1e-15);
        close(g[1], (p[1] - 1.0) / t, 1e-15);
        close(g[2], p[2] / t, 1e-15);
    }
}
