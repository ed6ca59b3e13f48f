use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, shuffle, SeededRng};
use crate::validator::{
    EmbeddingInit, NetConfig, Optimizer, TokenPair, ValidatorModel, ValidatorVocab,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy of the training batches (train mode).
    pub train_loss: f64,
    /// Held-out loss and accuracy in infer mode; absent when nothing is
    /// held out.
    pub validation_loss: Option<f64>,
    pub validation_accuracy: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "epoch\ttrain_loss\tvalidation_loss\tvalidation_accuracy\tlearning_rate\n",
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        for e in &self.epochs {
            s.push_str(&format!(
                "{}\t{:.6}\t{}\t{}\t{}\n",
                e.epoch,
                e.train_loss,
                opt(e.validation_loss),
                opt(e.validation_accuracy),
                e.learning_rate
            ));
        }
        s
    }
}

/// Trains a validator on tokenized pairs with class labels in
/// `0..config.classes`.
///
/// The vocabulary is built from `pairs`. A `validation_fraction` share is
/// held out; the learning rate halves whenever its loss fails to improve
/// for `plateau_patience` epochs. Updates follow `config.optimizer` on the
/// batch-mean cross-entropy with global norm clipping.
pub fn train_validator(
    pairs: &[TokenPair],
    labels: &[usize],
    config: &NetConfig,
) -> Result<(ValidatorModel, TrainHistory)> {
    config.validate()?;
    if pairs.len() != labels.len() {
        return Err(Error::input(format!(
            "{} pairs but {} labels",
            pairs.len(),
            labels.len()
        )));
    }
    if pairs.is_empty() {
        return Err(Error::input("no training pairs"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= config.classes) {
        return Err(Error::input(format!(
            "label {bad} outside 0..{}",
            config.classes
        )));
    }
    let vocab = ValidatorVocab::build(
        pairs,
        config.max_vocab,
        config.min_count,
        config.mark_call_log,
    );
    let mut model = ValidatorModel::new(config.clone(), vocab)?;
    if config.embedding_init == EmbeddingInit::Cooccurrence {
        model.init_embeddings_from_cooccurrence(pairs);
    }
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok((model, history));
    }

    let encoded: Vec<Vec<usize>> = pairs.iter().map(|p| model.encode(p)).collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    shuffle(
        &mut seeded(derive_seed(config.seed, "validator-split")),
        &mut order,
    );
    let mut n_val = (pairs.len() as f64 * config.validation_fraction).floor() as usize;
    if n_val >= pairs.len() {
        n_val = 0;
    }
    let (held_out, train_idx) = order.split_at(n_val);
    let held_out = held_out.to_vec();
    let mut train_idx = train_idx.to_vec();

    let mut shuffle_rng = seeded(derive_seed(config.seed, "validator-shuffle"));
    let mut dropout_rng: SeededRng = seeded(derive_seed(config.seed, "validator-dropout"));
    let mut velocity = vec![0.0; model.params.len()];
    let mut second = vec![
        0.0;
        if config.optimizer == Optimizer::Adam {
            model.params.len()
        } else {
            0
        }
    ];
    let mut step = 0i32;
    let mut grad = vec![0.0; model.params.len()];
    let mut lr = config.learning_rate;
    let mut best_val = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..config.epochs {
        shuffle(&mut shuffle_rng, &mut train_idx);
        let mut loss_sum = 0.0;
        for batch in train_idx.chunks(config.batch_size) {
            grad.fill(0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                let trace = model.net.forward(
                    &model.params,
                    &encoded[i],
                    Some((&mut dropout_rng, config.dropout_p)),
                );
                batch_loss += model
                    .net
                    .backward(&model.params, &trace, labels[i], &mut grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "training loss became non-finite in epoch {}; lower learning_rate (currently {lr})",
                    epoch + 1
                )));
            }
            loss_sum += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let mut norm_sq = 0.0;
            for g in grad.iter_mut() {
                *g *= scale;
                norm_sq += *g * *g;
            }
            let norm = norm_sq.sqrt();
            if !norm.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in epoch {}; lower learning_rate",
                    epoch + 1
                )));
            }
            let clip = if config.grad_clip > 0.0 && norm > config.grad_clip {
                config.grad_clip / norm
            } else {
                1.0
            };
            match config.optimizer {
                Optimizer::Momentum => {
                    for ((p, v), g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                        *v = config.momentum * *v - lr * clip * g;
                        *p += *v;
                    }
                }
                Optimizer::Adam => {
                    const B1: f64 = 0.9;
                    const B2: f64 = 0.999;
                    step += 1;
                    let c1 = 1.0 - B1.powi(step);
                    let c2 = 1.0 - B2.powi(step);
                    for (((p, m), v), g) in model
                        .params
                        .iter_mut()
                        .zip(velocity.iter_mut())
                        .zip(second.iter_mut())
                        .zip(&grad)
                    {
                        let g = clip * g;
                        *m = B1 * *m + (1.0 - B1) * g;
                        *v = B2 * *v + (1.0 - B2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + 1e-8);
                    }
                }
            }
        }
        let train_loss = loss_sum / train_idx.len().max(1) as f64;

        let (validation_loss, validation_accuracy) = if held_out.is_empty() {
            (None, None)
        } else {
            let mut loss = 0.0;
            let mut correct = 0;
            for &i in &held_out {
                let probs = model
                    .net
                    .forward::<SeededRng>(&model.params, &encoded[i], None)
                    .probs;
                loss -= probs[labels[i]].max(f64::MIN_POSITIVE).ln();
                if crate::router::argmax(&probs) == labels[i] {
                    correct += 1;
                }
            }
            (
                Some(loss / held_out.len() as f64),
                Some(correct as f64 / held_out.len() as f64),
            )
        };
        history.epochs.push(EpochStats {
            epoch: epoch + 1,
            train_loss,
            validation_loss,
            validation_accuracy,
            learning_rate: lr,
        });

        if let Some(v) = validation_loss {
            if v < best_val {
                best_val = v;
                stale = 0;
            } else {
                stale += 1;
                if config.plateau_patience > 0 && stale >= config.plateau_patience {
                    lr /= 2.0;
                    stale = 0;
                }
            }
        }
    }
    model.validate()?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> NetConfig {
        NetConfig {
            seq_len: 10,
            embed_dim: 6,
            filter_sizes: vec![2, 3],
            filters_per_size: 4,
            lstm_hidden: 4,
            dense_hidden: 8,
            dropout_p: 0.0,
            batch_size: 20,
            epochs: 5,
            learning_rate: 0.05,
            validation_fraction: 0.0,
            seed: 3,
            ..NetConfig::default()
        }
    }

    /// Class 0 pairs mention "alpha", class 1 pairs "beta", class 2 pairs
    /// have an empty call log.
    fn separable(n: usize) -> (Vec<TokenPair>, Vec<usize>) {
        let fillers = ["x", "y", "z", "w"];
        (0..n)
            .map(|i| {
                let label = i % 3;
                let filler = fillers[i % 4].to_string();
                let pair = match label {
                    0 => TokenPair {
                        call_log: vec!["alpha".into()],
                        detail: vec![filler, "alpha".into()],
                    },
                    1 => TokenPair {
                        call_log: vec!["beta".into()],
                        detail: vec!["beta".into(), filler],
                    },
                    _ => TokenPair {
                        call_log: vec![],
                        detail: vec![filler],
                    },
                };
                (pair, label)
            })
            .unzip()
    }

    #[test]
    fn zero_epochs_returns_the_initial_model() {
        let (pairs, labels) = separable(30);
        let cfg = NetConfig {
            epochs: 0,
            ..config()
        };
        let (model, history) = train_validator(&pairs, &labels, &cfg).unwrap();
        assert!(history.epochs.is_empty());
        let fresh = ValidatorModel::new(cfg, model.vocab().clone()).unwrap();
        assert_eq!(model.params(), fresh.params());
    }

    #[test]
    fn training_loss_decreases_on_separable_data() {
        let (pairs, labels) = separable(200);
        let (_, history) = train_validator(&pairs, &labels, &config()).unwrap();
        let losses: Vec<f64> = history.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(losses.len(), 5);
        let mut plateaus = 0;
        for w in losses.windows(2) {
            if w[1] >= w[0] - 1e-6 {
                plateaus += 1;
                assert!(w[1] <= w[0] + 1e-6, "{losses:?}");
            }
        }
        assert!(plateaus <= 1, "{losses:?}");
        assert!(losses[4] < losses[0]);
    }

    #[test]
    fn learns_separable_data() {
        let (pairs, labels) = separable(200);
        let (model, _) = train_validator(
            &pairs,
            &labels,
            &NetConfig {
                epochs: 20,
                ..config()
            },
        )
        .unwrap();
        let correct = pairs
            .iter()
            .zip(&labels)
            .filter(|(p, &l)| crate::router::argmax(&model.predict(p)) == l)
            .count();
        assert!(correct >= 190, "{correct}/200");
    }

    #[test]
    fn adam_learns_separable_data() {
        let (pairs, labels) = separable(200);
        let cfg = NetConfig {
            epochs: 10,
            optimizer: Optimizer::Adam,
            learning_rate: 0.01,
            ..config()
        };
        let (model, history) = train_validator(&pairs, &labels, &cfg).unwrap();
        let correct = pairs
            .iter()
            .zip(&labels)
            .filter(|(p, &l)| crate::router::argmax(&model.predict(p)) == l)
            .count();
        assert!(correct >= 190, "{correct}/200");
        assert!(history.epochs[9].train_loss < history.epochs[0].train_loss);
    }

    #[test]
    fn training_is_deterministic() {
        let (pairs, labels) = separable(60);
        let cfg = NetConfig {
            dropout_p: 0.5,
            validation_fraction: 0.2,
            epochs: 3,
            ..config()
        };
        let (a, ha) = train_validator(&pairs, &labels, &cfg).unwrap();
        let (b, hb) = train_validator(&pairs, &labels, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha, hb);
        assert_eq!(ha.epochs.len(), 3);
        assert!(ha.epochs[0].validation_loss.is_some());
    }

    #[test]
    fn divergence_is_reported() {
        let (pairs, labels) = separable(60);
        let cfg = NetConfig {
            learning_rate: 1e300,
            grad_clip: 0.0,
            momentum: 0.0,
            ..config()
        };
        let err = train_validator(&pairs, &labels, &cfg).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn rejects_bad_labels() {
        let (pairs, _) = separable(3);
        assert!(train_validator(&pairs, &[0, 1, 7], &config()).is_err());
        assert!(train_validator(&pairs, &[0, 1], &config()).is_err());
    }

    #[test]
    fn reversing_the_detail_changes_the_recurrent_state() {
        let (pairs, labels) = separable(60);
        let (model, _) = train_validator(&pairs, &labels, &config()).unwrap();
        let pair = TokenPair {
            call_log: vec!["alpha".into()],
            detail: vec!["x".into(), "y".into(), "alpha".into(), "z".into()],
        };
        let mut reversed = pair.clone();
        reversed.detail.reverse();
        let a = model.merged_state(&model.encode(&pair)).unwrap();
        let b = model.merged_state(&model.encode(&reversed)).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
    }
}
