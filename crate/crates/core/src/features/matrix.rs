use std::io::Write;

use crate::error::{Error, Result};
use crate::features::vocab::{document_terms, TermOptions, Vocabulary};
use crate::textprep::Document;

/// Dense raw-count vector aligned to a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub id: String,
    pub values: Vec<f64>,
}

/// Occurrence count of every vocabulary entry in the document.
pub fn vectorize(
    id: &str,
    doc: &Document,
    vocab: &Vocabulary,
    options: TermOptions,
) -> FeatureVector {
    let mut values = vec![0.0; vocab.len()];
    for (term, category) in document_terms(doc, options) {
        if let Some(i) = vocab.position(&term, category) {
            values[i] += 1.0;
        }
    }
    FeatureVector {
        id: id.to_string(),
        values,
    }
}

/// Row-compressed count matrix. Rows are documents, columns vocabulary
/// positions; within a row, column indices are strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    n_features: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n_features: usize) -> Self {
        FeatureMatrix {
            n_features,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Appends a row given as (column, value) pairs in any order; zero values
    /// are skipped and repeated columns summed.
    pub fn push_row(&mut self, mut entries: Vec<(usize, f64)>) {
        entries.sort_by_key(|e| e.0);
        let start = self.indices.len();
        for (col, v) in entries {
            assert!(col < self.n_features, "column {col} out of range");
            if v == 0.0 {
                continue;
            }
            if self.indices.len() > start && *self.indices.last().unwrap() as usize == col {
                *self.values.last_mut().unwrap() += v;
            } else {
                self.indices.push(col as u32);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
    }

    pub fn push_dense(&mut self, row: &[f64]) {
        self.push_row(
            row.iter()
                .copied()
                .enumerate()
                .filter(|e| e.1 != 0.0)
                .collect(),
        );
    }

    pub fn from_dense(n_features: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut m = FeatureMatrix::new(n_features);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != n_features {
                return Err(Error::Mismatch(format!(
                    "row {i} has {} features, expected {n_features}",
                    r.len()
                )));
            }
            m.push_dense(r);
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let (idx, val) = self.row(i);
        for (&c, &v) in idx.iter().zip(val) {
            out[c as usize] = v;
        }
        out
    }

    pub fn get(&self, i: usize, col: usize) -> f64 {
        let (idx, val) = self.row(i);
        idx.binary_search(&(col as u32))
            .map(|p| val[p])
            .unwrap_or(0.0)
    }

    /// Rows at the given positions, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut m = FeatureMatrix::new(self.n_features);
        for &r in rows {
            let (idx, val) = self.row(r);
            m.indices.extend_from_slice(idx);
            m.values.extend_from_slice(val);
            m.indptr.push(m.indices.len());
        }
        m
    }

    /// Keeps the given columns, renumbered in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut remap = vec![u32::MAX; self.n_features];
        for (new, &old) in cols.iter().enumerate() {
            remap[old] = new as u32;
        }
        let mut m = FeatureMatrix::new(cols.len());
        for r in 0..self.n_rows() {
            let (idx, val) = self.row(r);
            m.push_row(
                idx.iter()
                    .zip(val)
                    .filter(|(&c, _)| remap[c as usize] != u32::MAX)
                    .map(|(&c, &v)| (remap[c as usize] as usize, v))
                    .collect(),
            );
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Vectorizes a batch of documents straight into sparse form.
pub fn vectorize_all<'a, I>(docs: I, vocab: &Vocabulary, options: TermOptions) -> FeatureMatrix
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut m = FeatureMatrix::new(vocab.len());
    for doc in docs {
        let entries = document_terms(doc, options)
            .into_iter()
            .filter_map(|(term, cat)| vocab.position(&term, cat).map(|i| (i, 1.0)))
            .collect();
        m.push_row(entries);
    }
    m
}

/// Dense text form: a header row of terms, then one row of counts per
/// document, tab separated and prefixed by the record id.
pub fn write_dense_matrix<W: Write>(
    mut w: W,
    vocab: &Vocabulary,
    ids: &[String],
    m: &FeatureMatrix,
) -> Result<()> {
    if ids.len() != m.n_rows() || vocab.len() != m.n_features() {
        return Err(Error::Mismatch(
            "matrix shape does not match ids/vocabulary".into(),
        ));
    }
    let header: Vec<&str> = vocab.entries().iter().map(|e| e.term.as_str()).collect();
    writeln!(w, "id\t{}", header.join("\t"))?;
    for (i, id) in ids.iter().enumerate() {
        let row: Vec<String> = m.dense_row(i).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{id}\t{}", row.join("\t"))?;
    }
    Ok(())
}
