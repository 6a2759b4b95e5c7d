//! Accuracy-vs-epsilon sweeps.

use crate::attack::{craft, AttackConfig, AttackKind, AttackMode};
use crate::error::{Error, Result};
use crate::models::predict;
use crate::nn::{Dataset, Model};

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub accuracy: f64,
}

/// Fraction of correctly classified samples: (TP + TN) / all.
pub fn accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut correct = 0usize;
    for (x, &y) in data.inputs.iter().zip(&data.labels) {
        let (class, _) = predict(model, x)?;
        correct += usize::from(class == y);
    }
    Ok(correct as f64 / data.len() as f64)
}

/// For each epsilon, evaluate accuracy on the attacked test set. Attacks are
/// untargeted on the true label (the whole-test-set degradation measure);
/// the epsilon = 0 row is exactly the clean accuracy.
pub fn accuracy_sweep(
    model: &Model,
    test: &Dataset,
    kind: AttackKind,
    eps_list: &[f64],
) -> Result<Vec<SweepRow>> {
    if test.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    if eps_list.is_empty() {
        return Err(Error::invalid("empty epsilon list"));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for &epsilon in eps_list {
        let acc = if epsilon == 0.0 {
            accuracy(model, test)?
        } else {
            let mut correct = 0usize;
            for (x, &y) in test.inputs.iter().zip(&test.labels) {
                let cfg = AttackConfig {
                    epsilon,
                    step_size: epsilon / 4.0,
                    n_steps: 5,
                    mode: AttackMode::Untargeted { true_label: y },
                    clip_domain: (0.0, 1.0),
                    paper_literal_sign: false,
                };
                let adv = craft(model, x, kind, &cfg)?;
                let (class, _) = predict(model, &adv.x_adv)?;
                correct += usize::from(class == y);
            }
            correct as f64 / test.len() as f64
        };
        rows.push(SweepRow { epsilon, accuracy: acc });
    }
    Ok(rows)
}

/// Deterministic CSV rendering of sweep rows.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("epsilon,accuracy\n");
    for r in rows {
        out.push_str(&format!("{:.6},{:.6}\n", r.epsilon, r.accuracy));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_kpm_model;
    use crate::rng::rng_from_seed;
    use crate::tensor::Tensor;
    use rand::Rng as _;

    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut rng = rng_from_seed(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let label = i % 2;
            let c = if label == 0 { 0.3 } else { 0.7 };
            inputs.push(Tensor::from_vec(
                (0..4).map(|_| c + rng.gen_range(-0.02..0.02)).collect(),
            ));
            labels.push(label);
        }
        Dataset { inputs, labels }
    }

    fn boundary_model() -> Model {
        let mut m = build_kpm_model(4, 1, &[4], 0).unwrap();
        m.params_mut()[0].weights =
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        m.params_mut()[0].bias = vec![0.0; 4];
        // boundary at mean feature 0.5
        m.params_mut()[1].weights = vec![-3.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        m.params_mut()[1].bias = vec![6.0, -6.0];
        m
    }

    #[test]
    fn zero_epsilon_row_is_clean_accuracy() {
        let data = toy_data(40, 1);
        let model = boundary_model();
        let clean = accuracy(&model, &data).unwrap();
        let rows = accuracy_sweep(&model, &data, AttackKind::Fgsm, &[0.0, 0.05]).unwrap();
        assert_eq!(rows[0].accuracy, clean);
        assert_eq!(clean, 1.0);
    }

    #[test]
    fn attack_degrades_boundary_model() {
        let data = toy_data(40, 2);
        let model = boundary_model();
        // classes sit 0.2 from the boundary; epsilon 0.25 must flip them
        let rows = accuracy_sweep(&model, &data, AttackKind::Pgd, &[0.0, 0.25]).unwrap();
        assert_eq!(rows[0].accuracy, 1.0);
        assert!(rows[1].accuracy <= 0.05, "attacked accuracy {}", rows[1].accuracy);
    }

    #[test]
    fn empty_inputs_rejected() {
        let model = boundary_model();
        assert!(accuracy_sweep(&model, &Dataset::default(), AttackKind::Fgsm, &[0.1]).is_err());
        let data = toy_data(4, 3);
        assert!(accuracy_sweep(&model, &data, AttackKind::Fgsm, &[]).is_err());
    }

    #[test]
    fn csv_rendering_is_stable() {
        let rows = vec![
            SweepRow { epsilon: 0.0, accuracy: 0.975 },
            SweepRow { epsilon: 0.1, accuracy: 0.03125 },
        ];
        assert_eq!(
            sweep_to_csv(&rows),
            "epsilon,accuracy\n0.000000,0.975000\n0.100000,0.031250\n"
        );
    }
}
