//! Bag-of-terms features: a per-category vocabulary of frequent terms, raw
//! count vectors, chi-squared scoring, feature correlation and greedy
//! pruning.

mod matrix;
mod scoring;
mod vocab;

pub use matrix::{vectorize, vectorize_all, write_dense_matrix, FeatureMatrix, FeatureVector};
pub use scoring::{
    chi_squared_scores, chi_squared_sparse, correlation_matrix, missing_value_ratio, pearson,
    select_features, Correlations, DenseCorrelations, SparseCorrelations,
};
pub use vocab::{
    build_vocabulary, document_terms, Category, TermOptions, VocabEntry, Vocabulary,
    WORTHLESS_WORDS,
};
