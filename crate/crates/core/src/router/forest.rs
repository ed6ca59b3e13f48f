use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng;
use crate::router::builder::Columns;
use crate::router::check_training;
use crate::router::tree::{DecisionTree, TreeParams};

/// Features examined per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// Square root of the feature count, rounded down, at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> Option<usize> {
        match self {
            MaxFeatures::All => None,
            MaxFeatures::Sqrt => Some(((n_features as f64).sqrt() as usize).max(1)),
            MaxFeatures::Count(k) if k >= n_features => None,
            MaxFeatures::Count(k) => Some(k.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub max_depth: usize,
    pub min_leaf: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        let tree = TreeParams::default();
        ForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            max_depth: tree.max_depth,
            min_leaf: tree.min_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub n_classes: usize,
    /// Seed each tree's bootstrap sample and feature draws came from.
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        params: &ForestParams,
        seed: u64,
    ) -> Result<Self> {
        check_training(x, y, n_classes)?;
        if params.n_trees == 0 {
            return Err(Error::config("router.n_trees must be at least 1"));
        }
        let columns = Columns::new(x);
        let max_features = params.max_features.resolve(x.n_features());
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
        };
        let n = y.len();
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut tree_seeds = Vec::with_capacity(params.n_trees);
        for t in 0..params.n_trees {
            let tree_seed = rng::derive_seed(seed, &format!("tree-{t}"));
            let mut r = rng::seeded(tree_seed);
            let mut weights = vec![if params.bootstrap { 0u32 } else { 1 }; n];
            if params.bootstrap {
                for _ in 0..n {
                    weights[rng::index(&mut r, n)] += 1;
                }
            }
            trees.push(DecisionTree::fit_weighted(
                x,
                &columns,
                y,
                n_classes,
                &weights,
                &tree_params,
                max_features,
                Some(&mut r),
            ));
            tree_seeds.push(tree_seed);
        }
        Ok(RandomForest {
            n_features: x.n_features(),
            n_classes,
            tree_seeds,
            trees,
        })
    }

    /// Vote proportions; the class is the most voted, ties going to the
    /// larger summed leaf proportion, then the lowest index.
    pub fn predict_scores(&self, value: impl Fn(usize) -> f64) -> (usize, Vec<f64>) {
        let mut votes = vec![0usize; self.n_classes];
        let mut mass = vec![0.0; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_class(&value)] += 1;
            for (m, p) in mass.iter_mut().zip(tree.proba(&value)) {
                *m += p;
            }
        }
        let mut best = 0;
        for c in 1..self.n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best]) {
                best = c;
            }
        }
        let n = self.trees.len() as f64;
        (best, votes.iter().map(|&v| v as f64 / n).collect())
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::input("forest has no trees"));
        }
        for t in &self.trees {
            if t.n_classes != self.n_classes || t.n_features != self.n_features {
                return Err(Error::input("forest trees disagree on shape"));
            }
            t.validate()?;
        }
        Ok(())
    }
}
