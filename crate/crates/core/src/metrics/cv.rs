use crate::corpus::FoldAssignment;
use crate::error::{Error, Result};
use crate::metrics::confusion::{
    basic_metrics, weighted_accuracy, BasicMetrics, ClassWeights, ConfusionMatrix,
};
use crate::metrics::roc::{roc_auc, RocCurve};

/// Report column names, in order.
pub const REPORT_COLUMNS: [&str; 5] = [
    "Accuracy",
    "Sensitivity",
    "Specificity",
    "Precision",
    "F-score",
];

/// One prediction: the chosen class and a score per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class: usize,
    pub scores: Vec<f64>,
}

/// A training procedure evaluated by [`cross_validate`]. Everything fitted
/// (vocabulary, scaling, model) must come from the `train` positions only.
pub trait FoldTrainer {
    fn fit_predict(
        &mut self,
        fold: usize,
        train: &[usize],
        test: &[usize],
    ) -> Result<Vec<Prediction>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub fold: usize,
    pub confusion: ConfusionMatrix,
    pub weighted_accuracy: f64,
    /// One-vs-rest rates for the positive class, or their weighted mean over
    /// present classes when there is none.
    pub rates: BasicMetrics,
}

impl FoldMetrics {
    fn columns(&self) -> [f64; 5] {
        let r = &self.rates;
        [
            self.weighted_accuracy,
            r.sensitivity,
            r.specificity,
            r.precision,
            r.f_score,
        ]
    }
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub stage: String,
    pub class_names: Vec<String>,
    pub positive: Option<usize>,
    pub folds: Vec<FoldMetrics>,
    /// Sum of the per-fold matrices.
    pub confusion: ConfusionMatrix,
    /// One-vs-rest rates per class over all out-of-fold predictions.
    pub per_class: Vec<BasicMetrics>,
    /// One-vs-rest ROC per class; `None` when a class has no positives.
    pub roc: Vec<Option<RocCurve>>,
    pub warnings: Vec<String>,
    /// Extra `key value` lines for the text report (seed, fingerprint).
    pub notes: Vec<(String, String)>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summary_rates(
    conf: &ConfusionMatrix,
    weights: &ClassWeights,
    positive: Option<usize>,
) -> Result<BasicMetrics> {
    if let Some(p) = positive {
        return basic_metrics(conf, p);
    }
    let w = weights.renormalized(&conf.present())?;
    let mut out = BasicMetrics {
        sensitivity: 0.0,
        specificity: 0.0,
        precision: 0.0,
        f_score: 0.0,
        degenerate: Vec::new(),
    };
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let m = basic_metrics(conf, k)?;
        out.sensitivity += wk * m.sensitivity;
        out.specificity += wk * m.specificity;
        out.precision += wk * m.precision;
        out.f_score += wk * m.f_score;
        for d in m.degenerate {
            if !out.degenerate.contains(&d) {
                out.degenerate.push(d);
            }
        }
    }
    Ok(out)
}

/// Trains on all folds but one and tests on the held-out fold, for every
/// fold. `labels[i]` is the class of the record at position `i` of `folds`.
pub fn cross_validate<T: FoldTrainer + ?Sized>(
    trainer: &mut T,
    labels: &[usize],
    folds: &FoldAssignment,
    weights: &ClassWeights,
    class_names: &[String],
    positive: Option<usize>,
) -> Result<CvReport> {
    let classes = class_names.len();
    if folds.fold_of.len() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} fold entries for {} labels",
            folds.fold_of.len(),
            labels.len()
        )));
    }
    if weights.raw().len() != classes {
        return Err(Error::Mismatch(format!(
            "{} weights for {classes} classes",
            weights.raw().len()
        )));
    }
    let all_present = ConfusionMatrix::from_pairs(classes, labels, labels)?.present();
    let mut report = CvReport {
        stage: String::new(),
        class_names: class_names.to_vec(),
        positive,
        folds: Vec::new(),
        confusion: ConfusionMatrix::new(classes),
        per_class: Vec::new(),
        roc: Vec::new(),
        warnings: Vec::new(),
        notes: Vec::new(),
    };
    let mut pooled_scores: Vec<Vec<f64>> = vec![Vec::new(); classes];
    let mut pooled_truth: Vec<usize> = Vec::new();
    for fold in 0..folds.k {
        let test = folds.members(fold);
        let train: Vec<usize> = (0..labels.len())
            .filter(|&i| folds.fold_of[i] != fold)
            .collect();
        if test.is_empty() {
            report.warnings.push(format!("fold {} is empty", fold + 1));
            continue;
        }
        let predictions = trainer.fit_predict(fold, &train, &test)?;
        if predictions.len() != test.len() {
            return Err(Error::Mismatch(format!(
                "trainer returned {} predictions for {} test records",
                predictions.len(),
                test.len()
            )));
        }
        let mut conf = ConfusionMatrix::new(classes);
        for (&i, p) in test.iter().zip(&predictions) {
            if p.scores.len() != classes {
                return Err(Error::Mismatch(format!(
                    "{} scores for {classes} classes",
                    p.scores.len()
                )));
            }
            conf.add(labels[i], p.class)?;
            for (c, &s) in p.scores.iter().enumerate() {
                pooled_scores[c].push(s);
            }
            pooled_truth.push(labels[i]);
        }
        let present = conf.present();
        for k in 0..classes {
            if all_present[k] && !present[k] {
                report.warnings.push(format!(
                    "fold {}: class {} absent, excluded",
                    fold + 1,
                    class_names[k]
                ));
            }
        }
        report.confusion.merge(&conf)?;
        report.folds.push(FoldMetrics {
            fold,
            weighted_accuracy: weighted_accuracy(&conf, weights)?,
            rates: summary_rates(&conf, weights, positive)?,
            confusion: conf,
        });
    }
    for c in 0..classes {
        report.per_class.push(basic_metrics(&report.confusion, c)?);
        let truth: Vec<bool> = pooled_truth.iter().map(|&t| t == c).collect();
        report.roc.push(roc_auc(&pooled_scores[c], &truth).ok());
    }
    Ok(report)
}

impl CvReport {
    /// Mean and (population) standard deviation of each report column over
    /// folds.
    pub fn summary(&self) -> [(f64, f64); 5] {
        let mut out = [(0.0, 0.0); 5];
        for (j, slot) in out.iter_mut().enumerate() {
            let values: Vec<f64> = self.folds.iter().map(|f| f.columns()[j]).collect();
            *slot = mean_std(&values);
        }
        out
    }

    pub fn weighted_accuracy(&self) -> f64 {
        self.summary()[0].0
    }

    /// Tab-separated key/value report.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("stage\t{}\n", self.stage));
        for (k, v) in &self.notes {
            s.push_str(&format!("{k}\t{v}\n"));
        }
        s.push_str(&format!("records\t{}\n", self.confusion.total()));
        s.push_str(&format!("folds\t{}\n", self.folds.len()));
        if let Some(p) = self.positive {
            s.push_str(&format!("positive_class\t{}\n", self.class_names[p]));
        }
        s.push_str("\nmetric\tmean\tstd\n");
        for (name, (mean, std)) in REPORT_COLUMNS.iter().zip(self.summary()) {
            s.push_str(&format!("{name}\t{mean:.6}\t{std:.6}\n"));
        }
        s.push_str(&format!("\nfold\trecords\t{}\n", REPORT_COLUMNS.join("\t")));
        for f in &self.folds {
            let cols: Vec<String> = f.columns().iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&format!(
                "{}\t{}\t{}\n",
                f.fold + 1,
                f.confusion.total(),
                cols.join("\t")
            ));
        }
        s.push_str("\nclass\tsupport\tSensitivity\tSpecificity\tPrecision\tF-score\tAUC\n");
        for (c, m) in self.per_class.iter().enumerate() {
            let support = self.confusion.row_total(c);
            if support == 0 && self.confusion.column_total(c) == 0 {
                continue;
            }
            let auc = self.roc[c]
                .as_ref()
                .map_or("-".to_string(), |r| format!("{:.6}", r.auc));
            s.push_str(&format!(
                "{}\t{support}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{auc}\n",
                self.class_names[c], m.sensitivity, m.specificity, m.precision, m.f_score
            ));
        }
        s.push_str("\nconfusion (rows true, columns predicted)\n");
        for t in 0..self.confusion.classes() {
            let row: Vec<String> = (0..self.confusion.classes())
                .map(|p| self.confusion.get(t, p).to_string())
                .collect();
            s.push_str(&format!("{}\t{}\n", self.class_names[t], row.join("\t")));
        }
        for w in &self.warnings {
            s.push_str(&format!("warning\t{w}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(usize, usize);

    impl FoldTrainer for Constant {
        fn fit_predict(
            &mut self,
            _: usize,
            _: &[usize],
            test: &[usize],
        ) -> Result<Vec<Prediction>> {
            let mut scores = vec![0.0; self.1];
            scores[self.0] = 1.0;
            Ok(test
                .iter()
                .map(|_| Prediction {
                    class: self.0,
                    scores: scores.clone(),
                })
                .collect())
        }
    }

    /// Always predicts the first training label.
    struct Memorizer<'a>(&'a [usize]);

    impl FoldTrainer for Memorizer<'_> {
        fn fit_predict(
            &mut self,
            _: usize,
            train: &[usize],
            test: &[usize],
        ) -> Result<Vec<Prediction>> {
            let seen: Vec<usize> = train.iter().map(|&i| self.0[i]).collect();
            Ok(test
                .iter()
                .map(|_| {
                    let class = seen[0];
                    let mut scores = vec![0.0; 2];
                    scores[class] = 1.0;
                    Prediction { class, scores }
                })
                .collect())
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i}")).collect()
    }

    fn folds(fold_of: Vec<usize>, k: usize) -> FoldAssignment {
        FoldAssignment {
            k,
            ids: (0..fold_of.len()).map(|i| i.to_string()).collect(),
            fold_of,
        }
    }

    #[test]
    fn leakage_canary() {
        let labels = [0, 0, 0, 1, 1, 1];
        let f = folds(vec![0, 0, 0, 1, 1, 1], 2);
        let r = cross_validate(
            &mut Memorizer(&labels),
            &labels,
            &f,
            &ClassWeights::uniform(2),
            &names(2),
            None,
        )
        .unwrap();
        assert_eq!(r.weighted_accuracy(), 0.0);
        assert_eq!(r.confusion.total(), 6);
    }

    #[test]
    fn constant_predictor_scores_its_weight() {
        let labels = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2];
        let f = folds((0..12).map(|i| i / 3 % 4).collect(), 4);
        let weights = ClassWeights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let r =
            cross_validate(&mut Constant(1, 3), &labels, &f, &weights, &names(3), None).unwrap();
        for fold in &r.folds {
            assert!((fold.weighted_accuracy - 0.5).abs() < 1e-12);
        }
        assert!(r.summary()[0].1 < 1e-12);
        let text = r.to_text();
        assert!(text.contains("Accuracy\t0.500000\t0.000000"), "{text}");
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let f = folds(vec![0, 1], 2);
        assert!(cross_validate(
            &mut Constant(0, 2),
            &[0],
            &f,
            &ClassWeights::uniform(2),
            &names(2),
            None
        )
        .is_err());
        assert!(cross_validate(
            &mut Constant(0, 2),
            &[0, 1],
            &f,
            &ClassWeights::uniform(3),
            &names(2),
            None
        )
        .is_err());
    }
}
