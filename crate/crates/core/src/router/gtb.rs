use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::router::builder::{descend, grow, Columns, GrowParams, Node, SquaredError};
use crate::router::check_training;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtbParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: u64,
}

impl Default for GtbParams {
    fn default() -> Self {
        GtbParams {
            n_stages: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
        }
    }
}

/// Multiclass gradient boosting on softmax cross-entropy. Only classes seen
/// in training get trees; the others always score 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtbModel {
    pub n_features: usize,
    pub n_classes: usize,
    pub learning_rate: f64,
    /// Classes seen in training, in index order.
    pub classes: Vec<usize>,
    /// Log prior of each seen class.
    pub init: Vec<f64>,
    /// Per stage, one regression tree per seen class. Leaf values already
    /// include the applied step.
    pub stages: Vec<Vec<Vec<Node<f64>>>>,
    /// Step actually applied per stage: the learning rate, halved until the
    /// training loss did not increase.
    pub steps: Vec<f64>,
    /// Mean training cross-entropy before the first stage and after each
    /// stage.
    pub train_loss: Vec<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Mean of `-log softmax(F_i)[y_i]`.
fn cross_entropy(raw: &[f64], k: usize, y: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &label) in y.iter().enumerate() {
        let row = &raw[i * k..(i + 1) * k];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[label];
    }
    total / y.len() as f64
}

fn scale_leaves(tree: &mut [Node<f64>], s: f64) {
    for n in tree {
        if let Node::Leaf(v) = n {
            *v *= s;
        }
    }
}

const MAX_HALVINGS: usize = 40;

impl GtbModel {
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        params: &GtbParams,
    ) -> Result<GtbModel> {
        check_training(x, y, n_classes)?;
        if !(params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
            return Err(Error::config("router.learning_rate must be positive"));
        }
        let mut counts = vec![0usize; n_classes];
        for &c in y {
            counts[c] += 1;
        }
        let classes: Vec<usize> = (0..n_classes).filter(|&c| counts[c] > 0).collect();
        let mut local = vec![usize::MAX; n_classes];
        for (i, &c) in classes.iter().enumerate() {
            local[c] = i;
        }
        let yl: Vec<usize> = y.iter().map(|&c| local[c]).collect();
        let k = classes.len();
        let n = y.len();
        let init: Vec<f64> = classes
            .iter()
            .map(|&c| (counts[c] as f64 / n as f64).ln())
            .collect();

        let mut model = GtbModel {
            n_features: x.n_features(),
            n_classes,
            learning_rate: params.learning_rate,
            classes,
            init: init.clone(),
            stages: Vec::new(),
            steps: Vec::new(),
            train_loss: Vec::new(),
        };
        let mut raw: Vec<f64> = (0..n).flat_map(|_| init.iter().copied()).collect();
        let mut loss = cross_entropy(&raw, k, &yl);
        model.train_loss.push(loss);
        if k < 2 {
            return Ok(model);
        }

        let columns = Columns::new(x);
        let weights = vec![1u32; n];
        let grow_params = GrowParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf.max(1),
            max_features: None,
        };
        let factor = (k as f64 - 1.0) / k as f64;
        let mut prob = vec![0.0; n * k];
        let mut residual = vec![0.0; n];
        let mut hessian = vec![0.0; n];
        let mut output = vec![0.0; n * k];
        let mut trial = vec![0.0; n * k];

        for stage in 0..params.n_stages {
            prob.copy_from_slice(&raw);
            for row in prob.chunks_mut(k) {
                softmax_in_place(row);
            }
            let mut trees = Vec::with_capacity(k);
            for c in 0..k {
                for i in 0..n {
                    let r = f64::from(u8::from(yl[i] == c)) - prob[i * k + c];
                    if !r.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite residual at stage {stage}; lower router.learning_rate"
                        )));
                    }
                    residual[i] = r;
                    hessian[i] = r.abs() * (1.0 - r.abs());
                }
                let crit = SquaredError {
                    residuals: &residual,
                    hessians: &hessian,
                };
                let tree: Vec<Node<f64>> = grow(&crit, x, &columns, &weights, grow_params, None)
                    .into_iter()
                    .map(|node| match node {
                        Node::Leaf(acc) => Node::Leaf(if acc.hess > 1e-150 {
                            factor * acc.sum / acc.hess
                        } else {
                            0.0
                        }),
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        },
                    })
                    .collect();
                for i in 0..n {
                    output[i * k + c] = *descend(&tree, |f| x.get(i, f));
                }
                trees.push(tree);
            }

            // Backtrack the step until the loss does not increase.
            let mut step = params.learning_rate;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                for ((t, r), o) in trial.iter_mut().zip(&raw).zip(&output) {
                    *t = r + step * o;
                }
                let candidate = cross_entropy(&trial, k, &yl);
                if !candidate.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite training loss at stage {stage}"
                    )));
                }
                if candidate <= loss {
                    accepted = Some(candidate);
                    break;
                }
                step /= 2.0;
            }
            let Some(new_loss) = accepted else {
                break;
            };
            for t in &mut trees {
                scale_leaves(t, step);
            }
            std::mem::swap(&mut raw, &mut trial);
            loss = new_loss;
            model.stages.push(trees);
            model.steps.push(step);
            model.train_loss.push(loss);
        }
        Ok(model)
    }

    /// Softmax over the seen classes, scattered into all class slots.
    pub fn predict_scores(&self, value: impl Fn(usize) -> f64) -> (usize, Vec<f64>) {
        let mut z = self.init.clone();
        for stage in &self.stages {
            for (c, tree) in stage.iter().enumerate() {
                z[c] += *descend(tree, &value);
            }
        }
        softmax_in_place(&mut z);
        let mut scores = vec![0.0; self.n_classes];
        for (&c, &p) in self.classes.iter().zip(&z) {
            scores[c] = p;
        }
        (crate::router::argmax(&scores), scores)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let k = self.classes.len();
        if k == 0 || self.init.len() != k || self.classes.iter().any(|&c| c >= self.n_classes) {
            return Err(Error::input("boosting model class list is inconsistent"));
        }
        for stage in &self.stages {
            if stage.len() != k {
                return Err(Error::input("boosting stage has the wrong number of trees"));
            }
            for tree in stage {
                for node in tree {
                    if let Node::Split {
                        feature,
                        left,
                        right,
                        ..
                    } = node
                    {
                        if *feature >= self.n_features
                            || *left >= tree.len()
                            || *right >= tree.len()
                        {
                            return Err(Error::input(
                                "boosting tree references a missing feature or node",
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
