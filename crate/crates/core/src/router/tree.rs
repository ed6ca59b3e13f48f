use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::SeededRng;
use crate::router::builder::{self, grow, Columns, Gini, GrowParams, Node};
use crate::router::{argmax, check_training};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum (weighted) number of training rows per leaf.
    pub min_leaf: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 20,
            min_leaf: 2,
        }
    }
}

/// CART classification tree with Gini impurity. Leaves keep the training
/// class counts that reached them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub n_classes: usize,
    pub nodes: Vec<Node<Vec<u64>>>,
}

impl DecisionTree {
    pub fn fit(
        x: &FeatureMatrix,
        y: &[usize],
        n_classes: usize,
        params: &TreeParams,
    ) -> Result<DecisionTree> {
        check_training(x, y, n_classes)?;
        let weights = vec![1u32; y.len()];
        Ok(Self::fit_weighted(
            x,
            &Columns::new(x),
            y,
            n_classes,
            &weights,
            params,
            None,
            None,
        ))
    }

    /// Integer row weights (bootstrap multiplicities) and optional per-node
    /// feature subsampling.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn fit_weighted(
        x: &FeatureMatrix,
        columns: &Columns,
        y: &[usize],
        n_classes: usize,
        weights: &[u32],
        params: &TreeParams,
        max_features: Option<usize>,
        rng: Option<&mut SeededRng>,
    ) -> DecisionTree {
        let crit = Gini {
            labels: y,
            classes: n_classes,
        };
        let grow_params = GrowParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            max_features,
        };
        let nodes = grow(&crit, x, columns, weights, grow_params, rng)
            .into_iter()
            .map(|n| match n {
                Node::Leaf(acc) => Node::Leaf(acc.counts),
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
        DecisionTree {
            n_features: x.n_features(),
            n_classes,
            nodes,
        }
    }

    pub fn leaf_counts(&self, value: impl Fn(usize) -> f64) -> &[u64] {
        builder::descend(&self.nodes, value)
    }

    /// Class proportions of the leaf reached.
    pub fn proba(&self, value: impl Fn(usize) -> f64) -> Vec<f64> {
        let counts = self.leaf_counts(value);
        let total: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    /// Majority class of the leaf reached; ties go to the lowest index.
    pub fn predict_class(&self, value: impl Fn(usize) -> f64) -> usize {
        let counts = self.leaf_counts(value);
        let best = counts.iter().max().copied().unwrap_or(0);
        counts.iter().position(|&c| c == best).unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        builder::depth(&self.nodes)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf(_)))
            .count()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for n in &self.nodes {
            match n {
                Node::Leaf(c) if c.len() != self.n_classes || c.iter().all(|&v| v == 0) => {
                    return Err(Error::input(
                        "tree leaf has an empty or mis-sized count vector",
                    ));
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    threshold,
                } => {
                    if *feature >= self.n_features
                        || *left >= self.nodes.len()
                        || *right >= self.nodes.len()
                        || threshold.is_nan()
                    {
                        return Err(Error::input(
                            "tree split references a missing feature or node",
                        ));
                    }
                }
                _ => {}
            }
        }
        if self.nodes.is_empty() {
            return Err(Error::input("tree has no nodes"));
        }
        Ok(())
    }
}

pub(crate) fn proba_scores(tree: &DecisionTree, value: impl Fn(usize) -> f64) -> (usize, Vec<f64>) {
    let p = tree.proba(value);
    (argmax(&p), p)
}
