//! Department routers: decision tree, random forest, gradient tree boosting
//! and one-vs-rest linear SVM, behind one prediction surface.

mod builder;
mod forest;
mod gtb;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use builder::Node;
pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use gtb::{GtbModel, GtbParams};
pub use svm::{SvmModel, SvmParams};
pub use tree::{DecisionTree, TreeParams};

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_training(x: &FeatureMatrix, y: &[usize], n_classes: usize) -> Result<()> {
    if y.is_empty() || x.n_rows() != y.len() {
        return Err(Error::Mismatch(format!(
            "{} rows but {} labels (need at least one)",
            x.n_rows(),
            y.len()
        )));
    }
    if let Some(bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::input(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

/// Router kind and hyperparameters, e.g. `kind = "gtb"` plus the fields of
/// the matching parameter struct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RouterParams {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Gtb(GtbParams),
    Svm(SvmParams),
}

impl Default for RouterParams {
    fn default() -> Self {
        RouterParams::Gtb(GtbParams::default())
    }
}

impl RouterParams {
    pub fn kind(&self) -> &'static str {
        match self {
            RouterParams::DecisionTree(_) => "decision_tree",
            RouterParams::RandomForest(_) => "random_forest",
            RouterParams::Gtb(_) => "gtb",
            RouterParams::Svm(_) => "svm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RouterModel {
    DecisionTree(DecisionTree),
    RandomForest(RandomForest),
    Gtb(GtbModel),
    Svm(SvmModel),
}

/// Trains the configured router. `seed` drives bootstrap samples, feature
/// draws and SGD order; trees and boosting are deterministic without it.
pub fn train_router(
    params: &RouterParams,
    x: &FeatureMatrix,
    y: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<RouterModel> {
    Ok(match params {
        RouterParams::DecisionTree(p) => {
            RouterModel::DecisionTree(DecisionTree::fit(x, y, n_classes, p)?)
        }
        RouterParams::RandomForest(p) => {
            RouterModel::RandomForest(RandomForest::fit(x, y, n_classes, p, seed)?)
        }
        RouterParams::Gtb(p) => RouterModel::Gtb(GtbModel::fit(x, y, n_classes, p)?),
        RouterParams::Svm(p) => RouterModel::Svm(SvmModel::fit(x, y, n_classes, p, seed)?),
    })
}

impl RouterModel {
    pub fn n_features(&self) -> usize {
        match self {
            RouterModel::DecisionTree(m) => m.n_features,
            RouterModel::RandomForest(m) => m.n_features,
            RouterModel::Gtb(m) => m.n_features,
            RouterModel::Svm(m) => m.n_features,
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            RouterModel::DecisionTree(m) => m.n_classes,
            RouterModel::RandomForest(m) => m.n_classes,
            RouterModel::Gtb(m) => m.n_classes,
            RouterModel::Svm(m) => m.n_classes,
        }
    }

    fn scores_with(&self, value: impl Fn(usize) -> f64) -> (usize, Vec<f64>) {
        match self {
            RouterModel::DecisionTree(m) => tree::proba_scores(m, value),
            RouterModel::RandomForest(m) => m.predict_scores(value),
            RouterModel::Gtb(m) => m.predict_scores(value),
            RouterModel::Svm(m) => m.predict_scores(value),
        }
    }

    /// Predicted class and a probability vector over all classes.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        if x.len() != self.n_features() {
            return Err(Error::Mismatch(format!(
                "{} features given, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        Ok(self.scores_with(|f| x[f]))
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<(usize, Vec<f64>)>> {
        if x.n_features() != self.n_features() {
            return Err(Error::Mismatch(format!(
                "{} features given, model expects {}",
                x.n_features(),
                self.n_features()
            )));
        }
        Ok((0..x.n_rows())
            .map(|i| self.scores_with(|f| x.get(i, f)))
            .collect())
    }

    /// Structural checks after deserialization.
    pub fn validate(&self) -> Result<()> {
        match self {
            RouterModel::DecisionTree(m) => m.validate(),
            RouterModel::RandomForest(m) => m.validate(),
            RouterModel::Gtb(m) => m.validate(),
            RouterModel::Svm(m) => m.validate(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn params_from_toml() {
        let p: RouterParams = toml::from_str("kind = \"gtb\"\nn_stages = 5\n").unwrap();
        assert_eq!(
            p,
            RouterParams::Gtb(GtbParams {
                n_stages: 5,
                ..Default::default()
            })
        );
        let p: RouterParams =
            toml::from_str("kind = \"random_forest\"\nmax_features = \"all\"\n").unwrap();
        assert!(matches!(
            p,
            RouterParams::RandomForest(ForestParams {
                max_features: MaxFeatures::All,
                ..
            })
        ));
        assert!(toml::from_str::<RouterParams>("kind = \"gtb\"\nstages = 5\n").is_err());
    }

    #[test]
    fn serialized_models_predict_identically() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 4) as f64, ((i * 7) % 5) as f64])
            .collect();
        let y: Vec<usize> = (0..30).map(|i| (i % 4 + i % 3) % 3).collect();
        let x = FeatureMatrix::from_dense(2, &rows).unwrap();
        let kinds = [
            RouterParams::DecisionTree(TreeParams::default()),
            RouterParams::RandomForest(ForestParams {
                n_trees: 5,
                ..Default::default()
            }),
            RouterParams::Gtb(GtbParams {
                n_stages: 10,
                ..Default::default()
            }),
            RouterParams::Svm(SvmParams {
                epochs: 5,
                ..Default::default()
            }),
        ];
        for params in kinds {
            let m = train_router(&params, &x, &y, 3, 1).unwrap();
            let back: RouterModel =
                serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
            back.validate().unwrap();
            assert_eq!(
                m.predict_matrix(&x).unwrap(),
                back.predict_matrix(&x).unwrap(),
                "{}",
                params.kind()
            );
            for (_, s) in m.predict_matrix(&x).unwrap() {
                assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            assert!(m.predict(&[1.0]).is_err());
        }
    }
}
