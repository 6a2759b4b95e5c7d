//! White-box evasion attacks: one-step FGSM and N-step PGD.
//!
//! Both attacks perturb within an L-infinity budget `epsilon` and clip the
//! result to the valid data domain. Targeted mode descends the loss toward
//! the target label; untargeted mode ascends the loss of the true label.
//!
//! The adversary's gradient seed is computed with probabilities rounded to
//! f32, matching the 32-bit inference stacks the victim models are deployed
//! on. Against a hard-saturated classifier (margins beyond f32 resolution)
//! the rounded softmax is exactly one-hot and the gradient vanishes, which is
//! precisely the masking effect that makes distilled models resist
//! sign-based attacks.

use crate::error::{Error, Result};
use crate::nn::{softmax_t, Model};
use crate::tensor::Tensor;

/// Which way the adversary pushes the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    /// Descend the loss of `target`: make the model predict it.
    Targeted { target: usize },
    /// Ascend the loss of `true_label`: make the model leave it.
    Untargeted { true_label: usize },
}

impl AttackMode {
    pub fn label(&self) -> usize {
        match *self {
            AttackMode::Targeted { target } => target,
            AttackMode::Untargeted { true_label } => true_label,
        }
    }
}

/// One-step or iterated sign attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Fgsm,
    Pgd,
}

/// Attack hyperparameters.
#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// L-infinity budget.
    pub epsilon: f64,
    /// PGD step size (alpha). Ignored by FGSM.
    pub step_size: f64,
    /// PGD iteration count N. Ignored by FGSM.
    pub n_steps: usize,
    pub mode: AttackMode,
    /// Valid data range, applied elementwise at the end.
    pub clip_domain: (f64, f64),
    /// Reproduce the printed one-step formula with `+epsilon*sign(grad)` even
    /// in targeted mode, instead of descending the target loss.
    pub paper_literal_sign: bool,
}

impl AttackConfig {
    /// Targeted attack with the defaults used by the malicious xApp:
    /// 5 PGD steps, alpha = epsilon/4, data domain [0, 1].
    pub fn targeted(target: usize, epsilon: f64) -> Self {
        AttackConfig {
            epsilon,
            step_size: epsilon / 4.0,
            n_steps: 5,
            mode: AttackMode::Targeted { target },
            clip_domain: (0.0, 1.0),
            paper_literal_sign: false,
        }
    }

    /// Untargeted attack on the true label, same defaults.
    pub fn untargeted(true_label: usize, epsilon: f64) -> Self {
        AttackConfig { mode: AttackMode::Untargeted { true_label }, ..Self::targeted(0, epsilon) }
    }

    fn validate(&self, for_pgd: bool) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be finite and >= 0"));
        }
        let (lo, hi) = self.clip_domain;
        if !(lo < hi) {
            return Err(Error::invalid(format!("clip domain [{lo}, {hi}] must have lo < hi")));
        }
        if for_pgd {
            if !(self.step_size > 0.0) {
                return Err(Error::invalid("PGD step size must be > 0"));
            }
            if self.n_steps < 1 {
                return Err(Error::invalid("PGD needs at least one step"));
            }
        }
        Ok(())
    }
}

/// A crafted input together with its origin and the budget actually used.
#[derive(Debug, Clone)]
pub struct AdversarialExample {
    pub x_adv: Tensor,
    pub origin: Tensor,
    pub budget_used: f64,
}

/// One-step fast gradient sign attack.
pub fn fgsm(model: &Model, x: &Tensor, cfg: &AttackConfig) -> Result<AdversarialExample> {
    cfg.validate(false)?;
    check_domain(x, cfg)?;
    let sign_factor = direction(cfg);
    let g = attack_grad(model, x, cfg.mode.label())?;
    let mut adv = x.clone();
    for (v, gi) in adv.data_mut().iter_mut().zip(g.data()) {
        *v += cfg.epsilon * sign_factor * sign(*gi);
    }
    clamp_domain(&mut adv, cfg.clip_domain);
    let budget_used = adv.linf_distance(x);
    Ok(AdversarialExample { x_adv: adv, origin: x.clone(), budget_used })
}

/// N-step projected gradient descent: each step moves by
/// `step_size * sign(grad)` and projects back onto the epsilon-ball around
/// the original input; the final iterate is clipped to the data domain.
pub fn pgd(model: &Model, x: &Tensor, cfg: &AttackConfig) -> Result<AdversarialExample> {
    cfg.validate(true)?;
    check_domain(x, cfg)?;
    let sign_factor = direction(cfg);
    let mut cur = x.clone();
    for _ in 0..cfg.n_steps {
        let g = attack_grad(model, &cur, cfg.mode.label())?;
        let mut moved = false;
        for ((v, gi), &orig) in cur.data_mut().iter_mut().zip(g.data()).zip(x.data()) {
            let step = cfg.step_size * sign_factor * sign(*gi);
            if step != 0.0 {
                let next = (*v + step).clamp(orig - cfg.epsilon, orig + cfg.epsilon);
                if next != *v {
                    moved = true;
                    *v = next;
                }
            }
        }
        // fixed point: every further iterate would be identical
        if !moved {
            break;
        }
    }
    clamp_domain(&mut cur, cfg.clip_domain);
    let budget_used = cur.linf_distance(x);
    Ok(AdversarialExample { x_adv: cur, origin: x.clone(), budget_used })
}

/// Craft with either attack kind.
pub fn craft(model: &Model, x: &Tensor, kind: AttackKind, cfg: &AttackConfig) -> Result<AdversarialExample> {
    match kind {
        AttackKind::Fgsm => fgsm(model, x, cfg),
        AttackKind::Pgd => pgd(model, x, cfg),
    }
}

/// Gradient of the T=1 cross-entropy at `label` w.r.t. the input, with the
/// softmax probabilities rounded to f32 before the backward pass.
fn attack_grad(model: &Model, x: &Tensor, label: usize) -> Result<Tensor> {
    let trace = model.forward_trace(x)?;
    let logits = trace.logits().data();
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "attack label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let p = softmax_t(logits, 1.0)?;
    let mut dlogits: Vec<f64> = p.iter().map(|&v| v as f32 as f64).collect();
    dlogits[label] -= 1.0;
    let (_, dinput) = model.backward(&trace, &dlogits);
    Ok(dinput)
}

fn direction(cfg: &AttackConfig) -> f64 {
    match cfg.mode {
        // descend the target loss, unless reproducing the printed formula
        AttackMode::Targeted { .. } => {
            if cfg.paper_literal_sign {
                1.0
            } else {
                -1.0
            }
        }
        AttackMode::Untargeted { .. } => 1.0,
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn clamp_domain(t: &mut Tensor, (lo, hi): (f64, f64)) {
    for v in t.data_mut() {
        *v = v.clamp(lo, hi);
    }
}

fn check_domain(x: &Tensor, cfg: &AttackConfig) -> Result<()> {
    let (lo, hi) = cfg.clip_domain;
    if x.data().iter().any(|&v| v < lo || v > hi) {
        return Err(Error::invalid(format!("input outside clip domain [{lo}, {hi}]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_kpm_model;
    use crate::nn::{Activation, LayerSpec};
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn scalar_two_logit_model(w0: f64, w1: f64) -> Model {
        let mut m = Model::new(
            vec![1],
            vec![LayerSpec::Dense { size: 2, activation: Activation::Linear }],
            0,
        )
        .unwrap();
        m.params_mut()[0].weights = vec![w0, w1];
        m.params_mut()[0].bias = vec![0.0, 0.0];
        m
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let m = scalar_two_logit_model(1.0, 2.0);
        let x = Tensor::from_vec(vec![0.5]);
        let cfg = AttackConfig::untargeted(0, 0.0);
        let adv = fgsm(&m, &x, &cfg).unwrap();
        assert_eq!(adv.x_adv.data(), x.data());
        assert_eq!(adv.budget_used, 0.0);
        let adv = pgd(&m, &x, &AttackConfig { step_size: 0.05, ..cfg }).unwrap();
        assert_eq!(adv.x_adv.data(), x.data());
    }

    #[test]
    fn scalar_closed_form() {
        // logits = [w0 x, w1 x]; untargeted gradient dL/dx = p1 (w1 - w0) > 0
        // for w1 > w0, so x moves up by epsilon.
        let m = scalar_two_logit_model(1.0, 2.0);
        let x = Tensor::from_vec(vec![0.5]);
        let cfg = AttackConfig::untargeted(0, 0.1);
        let adv = fgsm(&m, &x, &cfg).unwrap();
        assert!((adv.x_adv.data()[0] - 0.6).abs() < 1e-12);
        // targeted toward class 1 descends its loss: same direction here
        let cfg = AttackConfig::targeted(1, 0.1);
        let adv = fgsm(&m, &x, &cfg).unwrap();
        assert!((adv.x_adv.data()[0] - 0.6).abs() < 1e-12);
        // paper-literal sign flips the targeted step
        let cfg = AttackConfig { paper_literal_sign: true, ..AttackConfig::targeted(1, 0.1) };
        let adv = fgsm(&m, &x, &cfg).unwrap();
        assert!((adv.x_adv.data()[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn pgd_one_step_equals_fgsm() {
        let m = build_kpm_model(4, 1, &[8], 3).unwrap();
        let mut rng = rng_from_seed(11);
        for trial in 0..50 {
            let x = Tensor::from_vec((0..4).map(|_| rng.gen_range(0.2..0.8)).collect());
            let eps = rng.gen_range(0.01..0.15);
            let mode = if trial % 2 == 0 {
                AttackMode::Untargeted { true_label: trial % 2 }
            } else {
                AttackMode::Targeted { target: trial % 2 }
            };
            let cfg = AttackConfig {
                epsilon: eps,
                step_size: eps,
                n_steps: 1,
                mode,
                clip_domain: (0.0, 1.0),
                paper_literal_sign: false,
            };
            let a = fgsm(&m, &x, &cfg).unwrap();
            let b = pgd(&m, &x, &cfg).unwrap();
            assert_eq!(a.x_adv.data(), b.x_adv.data());
        }
    }

    #[test]
    fn containment_over_random_trials() {
        let m = build_kpm_model(4, 2, &[10], 5).unwrap();
        let mut rng = rng_from_seed(21);
        for trial in 0..1000u64 {
            let x = Tensor::from_vec((0..8).map(|_| rng.gen_range(0.0..1.0)).collect());
            let eps = rng.gen_range(0.0..0.3);
            let cfg = AttackConfig {
                epsilon: eps,
                step_size: rng.gen_range(0.01..0.2),
                n_steps: 1 + (trial % 7) as usize,
                mode: if trial % 2 == 0 {
                    AttackMode::Untargeted { true_label: 0 }
                } else {
                    AttackMode::Targeted { target: 1 }
                },
                clip_domain: (0.0, 1.0),
                paper_literal_sign: false,
            };
            let adv = if trial % 3 == 0 {
                fgsm(&m, &x, &cfg).unwrap()
            } else {
                pgd(&m, &x, &cfg).unwrap()
            };
            assert!(adv.budget_used <= eps + 1e-9, "budget {} > {eps}", adv.budget_used);
            assert!(adv.x_adv.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn attacks_do_not_touch_parameters() {
        let m = build_kpm_model(4, 1, &[8], 7).unwrap();
        let before = m.param_bytes();
        let x = Tensor::from_vec(vec![0.2, 0.4, 0.6, 0.8]);
        fgsm(&m, &x, &AttackConfig::untargeted(0, 0.1)).unwrap();
        pgd(&m, &x, &AttackConfig::targeted(1, 0.1)).unwrap();
        assert_eq!(m.param_bytes(), before);
    }

    #[test]
    fn invalid_configs_rejected() {
        let m = scalar_two_logit_model(1.0, 2.0);
        let x = Tensor::from_vec(vec![0.5]);
        let bad_eps = AttackConfig { epsilon: -0.1, ..AttackConfig::untargeted(0, 0.1) };
        assert!(fgsm(&m, &x, &bad_eps).is_err());
        let bad_domain =
            AttackConfig { clip_domain: (1.0, 0.0), ..AttackConfig::untargeted(0, 0.1) };
        assert!(fgsm(&m, &x, &bad_domain).is_err());
        let bad_step = AttackConfig { step_size: 0.0, ..AttackConfig::untargeted(0, 0.1) };
        assert!(pgd(&m, &x, &bad_step).is_err());
        let outside = Tensor::from_vec(vec![1.5]);
        assert!(fgsm(&m, &outside, &AttackConfig::untargeted(0, 0.1)).is_err());
        // shape mismatch
        let wide = Tensor::from_vec(vec![0.5, 0.5]);
        assert!(fgsm(&m, &wide, &AttackConfig::untargeted(0, 0.1)).is_err());
    }

    #[test]
    fn saturated_model_masks_gradient() {
        // logit gap far beyond f32 resolution: rounded probs are exactly
        // one-hot, the gradient seed is zero, the attack is a no-op
        let m = scalar_two_logit_model(200.0, -200.0);
        let x = Tensor::from_vec(vec![0.5]);
        let cfg = AttackConfig::untargeted(0, 0.1);
        let adv = fgsm(&m, &x, &cfg).unwrap();
        assert_eq!(adv.x_adv.data(), x.data());
        let adv = pgd(&m, &x, &AttackConfig { n_steps: 5, step_size: 0.025, ..cfg }).unwrap();
        assert_eq!(adv.x_adv.data(), x.data());
    }
}
