//! Co-occurrence vectors for embedding initialization.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use super::{TokenPair, ValidatorVocab};

const CALL_PREFIX: &str = "call|";

/// One optional row per vocabulary id, `None` for UNK, the separator and
/// words with no positive PMI. Each text side is a context and a word counts
/// as its own neighbour; a word's row is the PPMI-weighted sum of random
/// vectors of its neighbours, rescaled to `norm`.
pub(super) fn embedding_rows<R: Rng>(
    vocab: &ValidatorVocab,
    pairs: &[TokenPair],
    dim: usize,
    norm: f64,
    rng: &mut R,
) -> Vec<Option<Vec<f64>>> {
    // Marked call-log rows share the vector of their plain word.
    let mut base: HashMap<&str, usize> = HashMap::new();
    let row_base: Vec<usize> = vocab
        .words()
        .iter()
        .map(|w| {
            let plain = w.strip_prefix(CALL_PREFIX).unwrap_or(w);
            let n = base.len();
            *base.entry(plain).or_insert(n)
        })
        .collect();
    let n = base.len();

    let mut single = vec![0u32; n];
    let mut joint: Vec<HashMap<usize, u32>> = vec![HashMap::new(); n];
    let mut contexts = 0u64;
    for pair in pairs {
        for side in [&pair.call_log, &pair.detail] {
            let ids: BTreeSet<usize> = side
                .iter()
                .filter_map(|t| base.get(t.as_str()).copied())
                .collect();
            if ids.is_empty() {
                continue;
            }
            contexts += 1;
            for &a in &ids {
                single[a] += 1;
                for &b in &ids {
                    *joint[a].entry(b).or_default() += 1;
                }
            }
        }
    }

    let basis: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let vectors: Vec<Option<Vec<f64>>> = (0..n)
        .map(|a| {
            let mut v = vec![0.0; dim];
            let mut neighbours: Vec<(&usize, &u32)> = joint[a].iter().collect();
            neighbours.sort_unstable();
            for (&b, &c) in neighbours {
                let pmi = (c as f64 * contexts as f64 / (single[a] as f64 * single[b] as f64)).ln();
                if pmi > 0.0 {
                    for (x, r) in v.iter_mut().zip(&basis[b]) {
                        *x += pmi * r;
                    }
                }
            }
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (len > 0.0).then(|| v.into_iter().map(|x| x * norm / len).collect())
        })
        .collect();

    let mut rows = vec![None, None];
    rows.extend(row_base.iter().map(|&b| vectors[b].clone()));
    rows
}
