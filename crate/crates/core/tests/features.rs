mod common;

use common::chi2_oracle;
use proptest::prelude::*;
use triage_core::features::{
    build_vocabulary, chi_squared_sparse, correlation_matrix, select_features, vectorize_all,
    Category, Correlations, DenseCorrelations, FeatureMatrix, FeatureVector, SparseCorrelations,
    TermOptions, Vocabulary,
};
use triage_core::textprep::{Lexicon, TextMode, TextPipeline};

fn rows_strategy() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..25, 1usize..6).prop_flat_map(|(n, f)| {
        (
            prop::collection::vec(prop::collection::vec(0u8..3, f), n),
            prop::collection::vec(0usize..4, n),
        )
            .prop_map(|(rows, labels)| {
                (
                    rows.into_iter()
                        .map(|r| r.into_iter().map(f64::from).collect())
                        .collect(),
                    labels,
                )
            })
    })
}

proptest! {
    #[test]
    fn chi2_matches_oracle_and_ignores_label_names((rows, labels) in rows_strategy(), shift in 1usize..5) {
        let m = FeatureMatrix::from_dense(rows[0].len(), &rows).unwrap();
        let scores = chi_squared_sparse(&m, &labels).unwrap();
        for (f, s) in scores.iter().enumerate() {
            prop_assert!((s - chi2_oracle(&rows, &labels, f)).abs() < 1e-9);
            prop_assert!(*s >= 0.0);
        }
        // Renaming classes by a permutation leaves every score unchanged.
        let renamed: Vec<usize> = labels.iter().map(|&l| (l + shift) % 4 + 2 * shift).collect();
        let again = chi_squared_sparse(&m, &renamed).unwrap();
        for (a, b) in scores.iter().zip(&again) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn correlations_are_symmetric_and_agree((rows, _) in rows_strategy()) {
        let f = rows[0].len();
        let vectors: Vec<FeatureVector> = rows.iter().map(|r| FeatureVector { id: String::new(), values: r.clone() }).collect();
        let dense = DenseCorrelations(correlation_matrix(&vectors).unwrap());
        let sparse = SparseCorrelations::new(&FeatureMatrix::from_dense(f, &rows).unwrap()).unwrap();
        for i in 0..f {
            for j in 0..f {
                let d = dense.correlation(i, j);
                prop_assert!((d - dense.correlation(j, i)).abs() < 1e-12);
                prop_assert!((d - sparse.correlation(i, j)).abs() < 1e-9);
                prop_assert!(d.abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn selection_respects_budget_and_threshold(
        (rows, labels) in rows_strategy(),
        keep in 1usize..6,
        threshold in 0.05f64..1.0,
    ) {
        let m = FeatureMatrix::from_dense(rows[0].len(), &rows).unwrap();
        let scores = chi_squared_sparse(&m, &labels).unwrap();
        let corr = SparseCorrelations::new(&m).unwrap();
        let chosen = select_features(&scores, &corr, keep, threshold).unwrap();
        prop_assert!(chosen.len() <= keep);
        for (a, &i) in chosen.iter().enumerate() {
            for &j in &chosen[..a] {
                prop_assert!(corr.correlation(i, j).abs() <= threshold);
                prop_assert!(scores[j] >= scores[i]);
            }
        }
        // The top-scoring feature (lowest position among ties) is always first.
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        prop_assert_eq!(chosen[0], order[0]);
    }
}

#[test]
fn vocabulary_respects_top_k_and_is_stable() {
    let p = TextPipeline::new(Lexicon::shipped(), TextMode::Domain);
    let docs: Vec<_> = [
        "boom hose leaking--upper valve",
        "winch rope replaced",
        "boom boom winch",
        "unit down",
    ]
    .iter()
    .map(|t| p.analyze(t))
    .collect();
    let v = build_vocabulary(&docs, 3, TermOptions::default());
    for cat in Category::ALL {
        assert!(v.entries().iter().filter(|e| e.category == cat).count() <= 3);
    }
    assert_eq!(v.entries()[0].term, "boom");
    assert_eq!(build_vocabulary(&docs, 3, TermOptions::default()), v);
    let m = vectorize_all(&docs, &v, TermOptions::default());
    assert_eq!(m.n_rows(), 4);
    assert_eq!(m.get(2, 0), 2.0);
    assert_eq!(Vocabulary::from_tsv(&v.to_tsv()).unwrap(), v);
}
