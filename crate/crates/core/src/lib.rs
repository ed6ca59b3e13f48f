//! Triage pipeline for free-text vehicle service reports.
//!
//! The crate is organized by pipeline stage:
//!
//! * [`corpus`]: the service-record data model, record files, folds and a
//!   seeded synthetic corpus generator.
//! * [`textprep`]: normalization, domain lemmatization, stop rules, vague
//!   phrase stripping, term recognition, multiword tokenization, POS tags.
//! * [`features`]: per-category vocabularies, count vectors, chi-squared
//!   scores, feature correlation and greedy pruning.
//! * [`validator`]: the CNN-BiLSTM network that labels a (call log, detail)
//!   pair as Valid, False or Vague.
//! * [`router`]: decision tree, random forest, gradient tree boosting and
//!   linear SVM department classifiers.
//! * [`metrics`]: weighted accuracy, one-vs-rest rates, ROC/AUC and k-fold
//!   cross-validation.
//! * [`pipeline`]: configuration and the train / eval / route stages used
//!   by the command line tool.

pub mod corpus;
pub mod error;
pub mod features;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod router;
pub mod textprep;
pub mod validator;

pub use error::{Error, Result};
