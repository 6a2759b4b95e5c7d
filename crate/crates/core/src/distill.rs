//! Defenses: defensive distillation and the adversarial-training baseline.
//!
//! Distillation trains a teacher at a high softmax temperature, then trains
//! a same-architecture student on a blend of the hard-label loss (at T=1)
//! and the KL divergence between teacher and student soft distributions.
//! The student deploys at T=1, where its saturated margins mask sign-based
//! gradients.

use crate::attack::{craft, AttackConfig, AttackKind, AttackMode};
use crate::error::{Error, Result};
use crate::nn::{self, Dataset, Model, TrainConfig, TrainReport};

/// Hyperparameters of the distillation pipeline.
#[derive(Debug, Clone)]
pub struct DistillConfig {
    /// Teacher training temperature (> 1).
    pub teacher_t: f64,
    /// Student hard-label temperature; deployment uses T=1.
    pub student_t: f64,
    /// Temperature of both distributions inside the KL term.
    pub kl_t: f64,
    /// Weight of the hard-label term; (1 - alpha) weighs the KL term.
    pub alpha: f64,
    pub teacher_cfg: TrainConfig,
    pub student_cfg: TrainConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        let teacher_t = 20.0;
        DistillConfig {
            teacher_t,
            student_t: 1.0,
            kl_t: teacher_t,
            alpha: 0.1,
            teacher_cfg: TrainConfig::default(),
            student_cfg: TrainConfig::default(),
        }
    }
}

impl DistillConfig {
    fn validate(&self) -> Result<()> {
        if !(self.teacher_t > 1.0) {
            return Err(Error::invalid("teacher temperature must be > 1"));
        }
        if !(self.student_t > 0.0) || !(self.kl_t > 0.0) {
            return Err(Error::invalid("temperatures must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Adversarial-training baseline configuration.
#[derive(Debug, Clone)]
pub struct AdvTrainConfig {
    /// Budget used when crafting the augmentation examples.
    pub epsilon: f64,
    pub attack: AttackKind,
    /// Fraction of the training set crafted and appended as adversarial
    /// examples, in (0, 1].
    pub augmentation_ratio: f64,
    pub train_cfg: TrainConfig,
    pub clip_domain: (f64, f64),
}

impl Default for AdvTrainConfig {
    fn default() -> Self {
        AdvTrainConfig {
            epsilon: 0.02,
            attack: AttackKind::Fgsm,
            augmentation_ratio: 1.0,
            train_cfg: TrainConfig::default(),
            clip_domain: (0.0, 1.0),
        }
    }
}

/// Combined distillation loss value for one sample:
/// `alpha * CE(logits, label, T=1) + (1 - alpha) * KL(teacher || student)`
/// with both KL distributions taken at `kl_t`.
pub fn distill_loss(
    student_logits: &[f64],
    label: usize,
    teacher_soft: &[f64],
    alpha: f64,
    kl_t: f64,
) -> Result<f64> {
    let ce = nn::cross_entropy_t(student_logits, label, 1.0)?;
    let p_s = nn::floor_probs(&nn::softmax_t(student_logits, kl_t)?);
    let kl = nn::kl_loss(&nn::floor_probs(teacher_soft), &p_s)?;
    Ok(alpha * ce + (1.0 - alpha) * kl)
}

/// Train the teacher with cross-entropy at `teacher_t`.
///
/// `descriptor` carries the architecture and initial parameters; teacher and
/// student use identical architectures.
pub fn train_teacher(
    descriptor: &Model,
    data: &Dataset,
    cfg: &DistillConfig,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    let tc = TrainConfig { temperature: cfg.teacher_t, ..cfg.teacher_cfg.clone() };
    nn::train(descriptor, data, &tc)
}

/// Distill a student from a trained teacher.
///
/// The teacher's soft targets (its probabilities at `kl_t`) are precomputed
/// and detached; no gradient flows into the teacher. The student minimizes
/// `alpha * CE(T=1) + (1 - alpha) * KL(teacher(kl_t) || student(kl_t))` and
/// is deployed and evaluated at T=1.
pub fn distill_student(
    teacher: &Model,
    descriptor: &Model,
    data: &Dataset,
    cfg: &DistillConfig,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if !teacher.same_architecture(descriptor) {
        return Err(Error::invalid("teacher and student architectures must match"));
    }
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let mut soft_targets = Vec::with_capacity(data.len());
    for x in &data.inputs {
        let logits = teacher.forward(x)?;
        soft_targets.push(nn::floor_probs(&nn::softmax_t(logits.data(), cfg.kl_t)?));
    }
    let (alpha, kl_t) = (cfg.alpha, cfg.kl_t);
    let sc = TrainConfig { temperature: 1.0, ..cfg.student_cfg.clone() };
    nn::train_with(descriptor, data, &sc, move |idx, logits, label| {
        let p_t = &soft_targets[idx];
        let loss = distill_loss(logits, label, p_t, alpha, kl_t)?;
        // dL/dz = alpha*(p(1) - onehot) + (1-alpha)*(p(kl_t) - p_t)/kl_t
        let p1 = nn::softmax_t(logits, 1.0)?;
        let pk = nn::softmax_t(logits, kl_t)?;
        let mut g: Vec<f64> = p1
            .iter()
            .zip(&pk)
            .zip(p_t)
            .map(|((&a, &b), &t)| alpha * a + (1.0 - alpha) * (b - t) / kl_t)
            .collect();
        g[label] -= alpha;
        Ok((loss, g))
    })
}

/// Adversarial-training baseline: warm-up on clean data, append untargeted
/// adversarial examples crafted against the warm-up model at
/// `cfg.epsilon` for a seeded `augmentation_ratio` fraction of the training
/// set, then continue training on the augmented set.
pub fn adversarial_train(
    descriptor: &Model,
    data: &Dataset,
    cfg: &AdvTrainConfig,
) -> Result<(Model, TrainReport)> {
    if !(cfg.augmentation_ratio > 0.0 && cfg.augmentation_ratio <= 1.0) {
        return Err(Error::invalid("augmentation ratio must lie in (0, 1]"));
    }
    if !(cfg.epsilon >= 0.0) {
        return Err(Error::invalid("epsilon must be >= 0"));
    }
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let (warm, _) = nn::train(descriptor, data, &cfg.train_cfg)?;

    let n_aug = ((data.len() as f64) * cfg.augmentation_ratio).ceil() as usize;
    let picks = seeded_picks(data.len(), n_aug, cfg.train_cfg.seed);
    let mut augmented = data.clone();
    for &i in &picks {
        let acfg = AttackConfig {
            epsilon: cfg.epsilon,
            step_size: (cfg.epsilon / 4.0).max(f64::MIN_POSITIVE),
            n_steps: 5,
            mode: AttackMode::Untargeted { true_label: data.labels[i] },
            clip_domain: cfg.clip_domain,
            paper_literal_sign: false,
        };
        let adv = craft(&warm, &data.inputs[i], cfg.attack, &acfg)?;
        augmented.inputs.push(adv.x_adv);
        augmented.labels.push(data.labels[i]);
    }
    let cont = TrainConfig {
        seed: crate::rng::derive_seed(cfg.train_cfg.seed, "advtrain-continue", 0),
        ..cfg.train_cfg.clone()
    };
    nn::train(&warm, &augmented, &cont)
}

fn seeded_picks(n: usize, take: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = crate::rng::rng_from_seed(crate::rng::derive_seed(seed, "advtrain-picks", 0));
    idx.shuffle(&mut rng);
    idx.truncate(take.min(n));
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_kpm_model;
    use crate::rng::rng_from_seed;
    use crate::tensor::Tensor;
    use rand::Rng as _;

    fn random_probs(rng: &mut crate::rng::Rng, k: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / s).collect()
    }

    /// Two-cluster toy set: class 0 near 0.25, class 1 near 0.75.
    fn cluster_data(n_per_class: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..2 * n_per_class {
            let label = i % 2;
            let center = if label == 0 { 0.25 } else { 0.75 };
            let x: Vec<f64> =
                (0..4).map(|_| (center + rng.gen_range(-0.08..0.08)) as f64).collect();
            inputs.push(Tensor::from_vec(x));
            labels.push(label);
        }
        Dataset { inputs, labels }
    }

    #[test]
    fn loss_decomposition_matches_parts() {
        let mut rng = rng_from_seed(5);
        for _ in 0..1000 {
            let k = rng.gen_range(2..6);
            let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let teacher = random_probs(&mut rng, k);
            let label = rng.gen_range(0..k);
            let kl_t = rng.gen_range(1.0..30.0);
            for alpha in [0.0, 0.1, 0.5, 1.0] {
                let combined = distill_loss(&logits, label, &teacher, alpha, kl_t).unwrap();
                let ce = nn::cross_entropy_t(&logits, label, 1.0).unwrap();
                let p_s = nn::floor_probs(&nn::softmax_t(&logits, kl_t).unwrap());
                let kl = nn::kl_loss(&nn::floor_probs(&teacher), &p_s).unwrap();
                assert!(
                    (combined - (alpha * ce + (1.0 - alpha) * kl)).abs() <= 1e-12,
                    "decomposition failed at alpha={alpha}"
                );
            }
        }
    }

    #[test]
    fn kl_nonnegative_and_zero_on_identity() {
        let mut rng = rng_from_seed(6);
        for _ in 0..1000 {
            let k = rng.gen_range(2..8);
            let p = random_probs(&mut rng, k);
            let q = random_probs(&mut rng, k);
            assert!(nn::kl_loss(&p, &q).unwrap() >= 0.0);
            assert!(nn::kl_loss(&p, &p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_one_reduces_to_cross_entropy() {
        let mut rng = rng_from_seed(7);
        for _ in 0..200 {
            let logits: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let teacher = random_probs(&mut rng, 3);
            let l = distill_loss(&logits, 1, &teacher, 1.0, 20.0).unwrap();
            let ce = nn::cross_entropy_t(&logits, 1, 1.0).unwrap();
            assert!((l - ce).abs() < 1e-15);
        }
    }

    #[test]
    fn teacher_softens_at_high_temperature() {
        let data = cluster_data(40, 11);
        let descriptor = build_kpm_model(4, 1, &[16], 11).unwrap();
        let cfg = DistillConfig {
            teacher_cfg: TrainConfig { learning_rate: 0.5, epochs: 60, ..Default::default() },
            ..Default::default()
        };
        let (teacher, _) = train_teacher(&descriptor, &data, &cfg).unwrap();
        let mut softened = 0;
        for x in data.inputs.iter().take(20) {
            let logits = teacher.forward(x).unwrap();
            let p_hot = nn::softmax_t(logits.data(), 1.0).unwrap();
            let p_soft = nn::softmax_t(logits.data(), cfg.teacher_t).unwrap();
            let max_hot = p_hot.iter().cloned().fold(0.0, f64::max);
            let max_soft = p_soft.iter().cloned().fold(0.0, f64::max);
            if max_soft < max_hot {
                softened += 1;
            }
        }
        assert_eq!(softened, 20, "high temperature must flatten every non-degenerate output");
    }

    #[test]
    fn teacher_training_is_deterministic() {
        let data = cluster_data(20, 12);
        let descriptor = build_kpm_model(4, 1, &[8], 12).unwrap();
        let cfg = DistillConfig {
            teacher_cfg: TrainConfig { learning_rate: 0.3, epochs: 10, ..Default::default() },
            ..Default::default()
        };
        let (a, _) = train_teacher(&descriptor, &data, &cfg).unwrap();
        let (b, _) = train_teacher(&descriptor, &data, &cfg).unwrap();
        assert_eq!(a.param_bytes(), b.param_bytes());
    }

    #[test]
    fn teacher_temperature_must_exceed_one() {
        let data = cluster_data(5, 1);
        let descriptor = build_kpm_model(4, 1, &[4], 1).unwrap();
        let cfg = DistillConfig { teacher_t: 1.0, ..Default::default() };
        assert!(train_teacher(&descriptor, &data, &cfg).is_err());
    }

    #[test]
    fn student_requires_matching_architecture() {
        let data = cluster_data(5, 2);
        let teacher = build_kpm_model(4, 1, &[8], 2).unwrap();
        let other = build_kpm_model(4, 1, &[9], 2).unwrap();
        let cfg = DistillConfig::default();
        assert!(distill_student(&teacher, &other, &data, &cfg).is_err());
    }

    #[test]
    fn distilled_student_saturates_and_resists_attack() {
        let data = cluster_data(60, 13);
        let descriptor = build_kpm_model(4, 1, &[16], 13).unwrap();
        let cfg = DistillConfig {
            teacher_cfg: TrainConfig {
                learning_rate: 4.0,
                epochs: 150,
                batch_size: 16,
                seed: 13,
                temperature: 1.0,
            },
            student_cfg: TrainConfig {
                learning_rate: 4.0,
                epochs: 150,
                batch_size: 16,
                seed: 14,
                temperature: 1.0,
            },
            ..Default::default()
        };
        let (teacher, _) = train_teacher(&descriptor, &data, &cfg).unwrap();
        let (student, _) = distill_student(&teacher, &descriptor, &data, &cfg).unwrap();
        let mut correct = 0;
        let mut attacked_correct = 0;
        for (x, &y) in data.inputs.iter().zip(&data.labels) {
            let pred = student.forward(x).unwrap().argmax();
            correct += usize::from(pred == y);
            let adv = crate::attack::pgd(
                &student,
                x,
                &AttackConfig::untargeted(y, 0.1),
            )
            .unwrap();
            let pred_adv = student.forward(&adv.x_adv).unwrap().argmax();
            attacked_correct += usize::from(pred_adv == y);
        }
        let n = data.len();
        assert!(correct as f64 / n as f64 >= 0.95, "clean accuracy too low: {correct}/{n}");
        assert!(
            attacked_correct as f64 / n as f64 >= 0.90,
            "attacked accuracy too low: {attacked_correct}/{n}"
        );
    }

    #[test]
    fn advtrain_rejects_zero_ratio() {
        let data = cluster_data(5, 3);
        let descriptor = build_kpm_model(4, 1, &[4], 3).unwrap();
        let cfg = AdvTrainConfig { augmentation_ratio: 0.0, ..Default::default() };
        assert!(adversarial_train(&descriptor, &data, &cfg).is_err());
    }

    #[test]
    fn advtrain_keeps_clean_accuracy() {
        let data = cluster_data(50, 14);
        let descriptor = build_kpm_model(4, 1, &[12], 14).unwrap();
        let base_cfg = TrainConfig { learning_rate: 0.5, epochs: 40, ..Default::default() };
        let (plain, _) = nn::train(&descriptor, &data, &base_cfg).unwrap();
        let cfg = AdvTrainConfig { train_cfg: base_cfg, ..Default::default() };
        let (robust, _) = adversarial_train(&descriptor, &data, &cfg).unwrap();
        let acc = |m: &Model| {
            data.inputs
                .iter()
                .zip(&data.labels)
                .filter(|(x, &y)| m.forward(x).unwrap().argmax() == y)
                .count() as f64
                / data.len() as f64
        };
        let (a_plain, a_robust) = (acc(&plain), acc(&robust));
        assert!(a_plain >= 0.95);
        assert!(a_robust >= a_plain - 0.05, "clean accuracy dropped: {a_plain} -> {a_robust}");
    }

    #[test]
    fn advtrain_is_deterministic() {
        let data = cluster_data(20, 15);
        let descriptor = build_kpm_model(4, 1, &[8], 15).unwrap();
        let cfg = AdvTrainConfig {
            train_cfg: TrainConfig { learning_rate: 0.3, epochs: 10, ..Default::default() },
            ..Default::default()
        };
        let (a, _) = adversarial_train(&descriptor, &data, &cfg).unwrap();
        let (b, _) = adversarial_train(&descriptor, &data, &cfg).unwrap();
        assert_eq!(a.param_bytes(), b.param_bytes());
    }
}
