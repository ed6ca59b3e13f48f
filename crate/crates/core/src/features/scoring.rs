use crate::error::{Error, Result};
use crate::features::matrix::{FeatureMatrix, FeatureVector};

fn check_labels(n_rows: usize, labels: &[usize]) -> Result<()> {
    if n_rows == 0 || n_rows != labels.len() {
        return Err(Error::Mismatch(format!(
            "{n_rows} vectors but {} labels (need at least one)",
            labels.len()
        )));
    }
    Ok(())
}

/// Chi-squared statistic of the presence/class contingency table, from
/// per-class document counts and per-class presence counts.
fn chi2_from_counts(class_sizes: &[u64], present: &[u64]) -> f64 {
    let n: u64 = class_sizes.iter().sum();
    let p: u64 = present.iter().sum();
    if p == 0 || p == n {
        return 0.0;
    }
    let (n, p) = (n as f64, p as f64);
    let mut chi2 = 0.0;
    for (&size, &a) in class_sizes.iter().zip(present) {
        if size == 0 {
            continue;
        }
        let size = size as f64;
        let expected_in = p * size / n;
        let expected_out = (n - p) * size / n;
        let a = a as f64;
        chi2 += (a - expected_in).powi(2) / expected_in
            + ((size - a) - expected_out).powi(2) / expected_out;
    }
    chi2
}

fn class_sizes(labels: &[usize]) -> Vec<u64> {
    let g = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0u64; g];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Per-feature chi-squared score of binarized presence against the labels.
/// Features present in every document or in none score 0.
pub fn chi_squared_scores(vectors: &[FeatureVector], labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(vectors.len(), labels)?;
    let f = vectors[0].values.len();
    let mut m = FeatureMatrix::new(f);
    for v in vectors {
        if v.values.len() != f {
            return Err(Error::Mismatch("feature vectors differ in length".into()));
        }
        m.push_dense(&v.values);
    }
    chi_squared_sparse(&m, labels)
}

pub fn chi_squared_sparse(m: &FeatureMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    check_labels(m.n_rows(), labels)?;
    let sizes = class_sizes(labels);
    let mut present = vec![vec![0u64; sizes.len()]; m.n_features()];
    for (r, &label) in labels.iter().enumerate() {
        let (idx, val) = m.row(r);
        for (&c, &v) in idx.iter().zip(val) {
            if v > 0.0 {
                present[c as usize][label] += 1;
            }
        }
    }
    Ok(present
        .iter()
        .map(|p| chi2_from_counts(&sizes, p))
        .collect())
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson needs equal-length columns");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Symmetric feature-by-feature Pearson matrix with unit diagonal.
pub fn correlation_matrix(vectors: &[FeatureVector]) -> Result<Vec<Vec<f64>>> {
    if vectors.len() < 2 {
        return Err(Error::input("correlation needs at least 2 samples"));
    }
    let f = vectors[0].values.len();
    let cols: Vec<Vec<f64>> = (0..f)
        .map(|j| vectors.iter().map(|v| v.values[j]).collect())
        .collect();
    let mut out = vec![vec![0.0; f]; f];
    for i in 0..f {
        out[i][i] = 1.0;
        for j in 0..i {
            let c = pearson(&cols[i], &cols[j]);
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    Ok(out)
}

/// Pairwise feature correlation on demand.
pub trait Correlations {
    fn correlation(&self, i: usize, j: usize) -> f64;
}

/// A precomputed matrix.
pub struct DenseCorrelations(pub Vec<Vec<f64>>);

impl Correlations for DenseCorrelations {
    fn correlation(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }
}

/// Correlations computed lazily from sparse columns, for vocabularies too
/// large for a full matrix.
pub struct SparseCorrelations {
    n: f64,
    columns: Vec<Vec<(u32, f64)>>,
    means: Vec<f64>,
    /// Sum of squared deviations per column.
    ss: Vec<f64>,
}

impl SparseCorrelations {
    pub fn new(m: &FeatureMatrix) -> Result<Self> {
        if m.n_rows() < 2 {
            return Err(Error::input("correlation needs at least 2 samples"));
        }
        let mut columns = vec![Vec::new(); m.n_features()];
        for r in 0..m.n_rows() {
            let (idx, val) = m.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                columns[c as usize].push((r as u32, v));
            }
        }
        let n = m.n_rows() as f64;
        let means: Vec<f64> = columns
            .iter()
            .map(|c| c.iter().map(|e| e.1).sum::<f64>() / n)
            .collect();
        let ss = columns
            .iter()
            .zip(&means)
            .map(|(c, &mu)| {
                let zeros = n - c.len() as f64;
                c.iter().map(|e| (e.1 - mu).powi(2)).sum::<f64>() + zeros * mu * mu
            })
            .collect();
        Ok(SparseCorrelations {
            n,
            columns,
            means,
            ss,
        })
    }
}

impl Correlations for SparseCorrelations {
    fn correlation(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        if self.ss[i] <= 0.0 || self.ss[j] <= 0.0 {
            return 0.0;
        }
        let (a, b) = (&self.columns[i], &self.columns[j]);
        let (mut p, mut q, mut dot) = (0, 0, 0.0);
        while p < a.len() && q < b.len() {
            match a[p].0.cmp(&b[q].0) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    dot += a[p].1 * b[q].1;
                    p += 1;
                    q += 1;
                }
            }
        }
        let cov = dot - self.n * self.means[i] * self.means[j];
        (cov / (self.ss[i].sqrt() * self.ss[j].sqrt())).clamp(-1.0, 1.0)
    }
}

/// Greedy pruning: walk features by descending score (ties by position) and
/// admit each one unless its absolute correlation with an admitted feature
/// exceeds `threshold`. Returns admitted positions in admission order.
pub fn select_features(
    scores: &[f64],
    corr: &dyn Correlations,
    keep: usize,
    threshold: f64,
) -> Result<Vec<usize>> {
    if keep == 0 {
        return Err(Error::config("features.chi2_keep must be at least 1"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::config(format!(
            "features.corr_threshold must be in (0, 1], got {threshold}"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut admitted: Vec<usize> = Vec::new();
    for cand in order {
        if admitted.len() == keep {
            break;
        }
        if admitted
            .iter()
            .all(|&a| corr.correlation(cand, a).abs() <= threshold)
        {
            admitted.push(cand);
        }
    }
    Ok(admitted)
}

/// Fraction of documents in which each feature is zero. Reported only;
/// rare features are often the diagnostic ones.
pub fn missing_value_ratio(m: &FeatureMatrix) -> Vec<f64> {
    let mut nonzero = vec![0usize; m.n_features()];
    for r in 0..m.n_rows() {
        for &c in m.row(r).0 {
            nonzero[c as usize] += 1;
        }
    }
    let n = m.n_rows().max(1) as f64;
    nonzero.iter().map(|&k| 1.0 - k as f64 / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector {
            id: String::new(),
            values: values.to_vec(),
        }
    }

    #[test]
    fn chi2_worked_example() {
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            vectors.push(fv(&[if i < 8 { 1.0 } else { 0.0 }, 1.0]));
            labels.push(0);
        }
        for i in 0..10 {
            vectors.push(fv(&[if i < 2 { 3.0 } else { 0.0 }, 1.0]));
            labels.push(1);
        }
        let s = chi_squared_scores(&vectors, &labels).unwrap();
        assert!((s[0] - 7.2).abs() < 1e-12);
        assert_eq!(s[1], 0.0);
        assert!(chi_squared_scores(&[], &[]).is_err());
    }

    #[test]
    fn chi2_zero_for_equal_rates() {
        let vectors = [fv(&[1.0]), fv(&[0.0]), fv(&[1.0]), fv(&[0.0])];
        assert_eq!(chi_squared_scores(&vectors, &[0, 0, 1, 1]).unwrap(), [0.0]);
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        let x = [0.5, 1.0, 3.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &y) - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn matrix_has_unit_diagonal() {
        let c = correlation_matrix(&[
            fv(&[1.0, 0.0, 5.0]),
            fv(&[2.0, 0.0, 1.0]),
            fv(&[0.0, 0.0, 2.0]),
        ])
        .unwrap();
        for i in 0..3 {
            assert_eq!(c[i][i], 1.0);
        }
        assert_eq!(c[1][0], 0.0);
        assert!(correlation_matrix(&[fv(&[1.0])]).is_err());
    }

    #[test]
    fn sparse_correlations_agree_with_dense() {
        let rows = vec![
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, 2.0],
            vec![3.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let m = FeatureMatrix::from_dense(3, &rows).unwrap();
        let sparse = SparseCorrelations::new(&m).unwrap();
        let dense = correlation_matrix(&rows.iter().map(|r| fv(r)).collect::<Vec<_>>()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((sparse.correlation(i, j) - dense[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn selection_rules() {
        let corr = DenseCorrelations(vec![
            vec![1.0, 1.0, 0.1],
            vec![1.0, 1.0, 0.1],
            vec![0.1, 0.1, 1.0],
        ]);
        assert_eq!(
            select_features(&[2.0, 3.0, 1.0], &corr, 10, 1.0).unwrap(),
            [1, 0, 2]
        );
        assert_eq!(
            select_features(&[2.0, 3.0, 1.0], &corr, 10, 0.9).unwrap(),
            [1, 2]
        );
        assert_eq!(
            select_features(&[2.0, 2.0, 1.0], &corr, 1, 0.9).unwrap(),
            [0]
        );
        assert!(select_features(&[1.0], &corr, 0, 0.5).is_err());
        assert!(select_features(&[1.0], &corr, 1, 0.0).is_err());
    }

    #[test]
    fn mvr() {
        let m = FeatureMatrix::from_dense(2, &[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(missing_value_ratio(&m), [0.5, 1.0]);
    }
}
