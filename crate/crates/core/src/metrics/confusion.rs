use crate::corpus::Department;
use crate::error::{Error, Result};

const SHIPPED_WEIGHTS: &str = include_str!("../../data/weights.tsv");

/// Square count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_pairs(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Mismatch(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut m = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.add(t, p)?;
        }
        Ok(m)
    }

    pub fn add(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(Error::input(format!(
                "class index out of range for {} classes",
                self.classes
            )));
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Mismatch("confusion matrices differ in size".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        self.counts[truth * self.classes..(truth + 1) * self.classes]
            .iter()
            .sum()
    }

    pub fn column_total(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// Classes with at least one true member.
    pub fn present(&self) -> Vec<bool> {
        (0..self.classes).map(|k| self.row_total(k) > 0).collect()
    }
}

/// Per-class importance weights, indexed by class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    weights: Vec<f64>,
}

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::input(
                "class weights must be finite and non-negative",
            ));
        }
        Ok(ClassWeights { weights })
    }

    pub fn uniform(classes: usize) -> Self {
        ClassWeights {
            weights: vec![1.0; classes],
        }
    }

    /// The department weight table shipped with the crate.
    pub fn shipped() -> Self {
        ClassWeights::parse_departments(SHIPPED_WEIGHTS).expect("shipped weight table is valid")
    }

    pub fn shipped_text() -> &'static str {
        SHIPPED_WEIGHTS
    }

    /// Parses `department<TAB>weight` lines; every department must appear
    /// exactly once. `#` starts a comment.
    pub fn parse_departments(text: &str) -> Result<Self> {
        let mut weights = vec![None; Department::COUNT];
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected `department weight`, got {line:?}")));
            };
            let dept: Department = name.parse().map_err(|e: Error| err(e.to_string()))?;
            let w: f64 = value
                .parse()
                .map_err(|_| err(format!("bad weight {value:?}")))?;
            if !w.is_finite() || w < 0.0 {
                return Err(err(format!("weight must be non-negative, got {w}")));
            }
            if weights[dept.index()].replace(w).is_some() {
                return Err(err(format!("duplicate weight for {dept}")));
            }
        }
        let weights = weights
            .iter()
            .enumerate()
            .map(|(i, w)| {
                w.ok_or_else(|| Error::input(format!("no weight for {}", Department::ALL[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClassWeights { weights })
    }

    pub fn raw(&self) -> &[f64] {
        &self.weights
    }

    /// Keeps only the listed classes, in that order.
    pub fn select(&self, classes: &[usize]) -> ClassWeights {
        ClassWeights {
            weights: classes.iter().map(|&c| self.weights[c]).collect(),
        }
    }

    /// Weights rescaled to sum to 1 over the present classes; absent
    /// classes get 0.
    pub fn renormalized(&self, present: &[bool]) -> Result<Vec<f64>> {
        if present.len() != self.weights.len() {
            return Err(Error::Mismatch(format!(
                "{} weights for {} classes",
                self.weights.len(),
                present.len()
            )));
        }
        let sum: f64 = self
            .weights
            .iter()
            .zip(present)
            .filter(|(_, &p)| p)
            .map(|(w, _)| w)
            .sum();
        if sum <= 0.0 {
            return Err(Error::input("present classes carry no weight"));
        }
        Ok(self
            .weights
            .iter()
            .zip(present)
            .map(|(w, &p)| if p { w / sum } else { 0.0 })
            .collect())
    }
}

/// Weighted mean of per-class recall, with weights renormalized over the
/// classes that occur in the matrix.
pub fn weighted_accuracy(conf: &ConfusionMatrix, weights: &ClassWeights) -> Result<f64> {
    if conf.total() == 0 {
        return Err(Error::input("empty confusion matrix"));
    }
    let w = weights.renormalized(&conf.present())?;
    Ok((0..conf.classes())
        .filter(|&k| conf.row_total(k) > 0)
        .map(|k| w[k] * conf.get(k, k) as f64 / conf.row_total(k) as f64)
        .sum())
}

/// The literal reading of the weighted-accuracy sum: renormalized weight
/// times the unnormalized count of correct predictions per class. Not
/// bounded by 1.
pub fn weighted_accuracy_raw(conf: &ConfusionMatrix, weights: &ClassWeights) -> Result<f64> {
    if conf.total() == 0 {
        return Err(Error::input("empty confusion matrix"));
    }
    let w = weights.renormalized(&conf.present())?;
    Ok((0..conf.classes())
        .map(|k| w[k] * conf.get(k, k) as f64)
        .sum())
}

/// One-vs-rest rates for a positive class. A 0/0 rate is reported as 0 and
/// named in `degenerate`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f_score: f64,
    pub degenerate: Vec<&'static str>,
}

fn ratio(num: u64, den: u64, name: &'static str, flags: &mut Vec<&'static str>) -> f64 {
    if den == 0 {
        flags.push(name);
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn basic_metrics(conf: &ConfusionMatrix, positive: usize) -> Result<BasicMetrics> {
    if positive >= conf.classes() {
        return Err(Error::input(format!(
            "positive class {positive} out of range"
        )));
    }
    let tp = conf.get(positive, positive);
    let fn_ = conf.row_total(positive) - tp;
    let fp = conf.column_total(positive) - tp;
    let tn = conf.total() - tp - fn_ - fp;
    let mut degenerate = Vec::new();
    let sensitivity = ratio(tp, tp + fn_, "sensitivity", &mut degenerate);
    let specificity = ratio(tn, tn + fp, "specificity", &mut degenerate);
    let precision = ratio(tp, tp + fp, "precision", &mut degenerate);
    let f_score = if precision + sensitivity > 0.0 {
        2.0 * precision * sensitivity / (precision + sensitivity)
    } else {
        degenerate.push("f_score");
        0.0
    };
    Ok(BasicMetrics {
        sensitivity,
        specificity,
        precision,
        f_score,
        degenerate,
    })
}
