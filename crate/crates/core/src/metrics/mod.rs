//! Evaluation: confusion matrices, department-weighted accuracy,
//! one-vs-rest rates, ROC/AUC and k-fold cross-validation reports.

mod confusion;
mod cv;
mod roc;

pub use confusion::{
    basic_metrics, weighted_accuracy, weighted_accuracy_raw, BasicMetrics, ClassWeights,
    ConfusionMatrix,
};
pub use cv::{cross_validate, CvReport, FoldMetrics, FoldTrainer, Prediction, REPORT_COLUMNS};
pub use roc::{auc_mann_whitney, roc_auc, trapezoid_area, RocCurve};
