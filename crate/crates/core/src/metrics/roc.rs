use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// (false-positive rate, true-positive rate), from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    /// Two tab-separated columns under a header line.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("fpr\ttpr\n");
        for (x, y) in &self.points {
            s.push_str(&format!("{x}\t{y}\n"));
        }
        s
    }
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Mismatch(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::input("scores contain NaN"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::input(
            "ROC needs both positive and negative examples",
        ));
    }
    Ok((pos, neg))
}

/// Sweeps the threshold from high to low, one curve point per distinct
/// score. The area is the trapezoidal integral of the curve.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = trapezoid_area(&points);
    Ok(RocCurve { points, auc })
}

pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half, via mid-ranks.
pub fn auc_mann_whitney(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        rank_sum += mid * order[i..j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let curve = roc_auc(&[0.9, 0.4, 0.6, 0.2], &[true, true, false, false]).unwrap();
        assert!((curve.auc - 0.75).abs() < 1e-12);
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.1], &[true, true, false]).unwrap().auc,
            1.0
        );
        assert_eq!(
            roc_auc(&[0.5; 4], &[true, false, true, false]).unwrap().auc,
            0.5
        );
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn mann_whitney_matches_curve() {
        let scores = [0.3, 0.3, 0.1, 0.9, 0.5, 0.5, 0.7];
        let labels = [true, false, false, true, true, false, false];
        let a = roc_auc(&scores, &labels).unwrap().auc;
        let b = auc_mann_whitney(&scores, &labels).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn tsv_header() {
        let curve = roc_auc(&[1.0, 0.0], &[true, false]).unwrap();
        assert_eq!(curve.to_tsv(), "fpr\ttpr\n0\t0\n0\t1\n1\t1\n");
    }
}
