//! Brute-force references and golden cases shared by the integration tests.
#![allow(dead_code)]

use triage_core::features::FeatureMatrix;
use triage_core::metrics::ConfusionMatrix;
use triage_core::rng;
use triage_core::router::{DecisionTree, GtbModel, GtbParams, Node, TreeParams};
use triage_core::textprep::{
    apply_stop_rules, lemmatize, normalize, recognize_terms, strip_vague_phrases, tokenize,
    Lexicon, Tag, TermKind, TextMode, TextPipeline,
};

// ---- decision trees ----

/// Reference tree grown depth-first by trying every feature and every
/// midpoint between consecutive distinct values.
#[derive(Debug, PartialEq)]
pub enum Reference {
    Leaf(Vec<u64>),
    Split(usize, f64, Box<Reference>, Box<Reference>),
}

/// Weighted Gini impurity times the node size, as a fraction.
fn impurity(counts: &[u64]) -> (u128, u128) {
    let n: u64 = counts.iter().sum();
    let num: u128 = counts.iter().map(|&c| c as u128 * (n - c) as u128).sum();
    (num, n as u128)
}

pub fn reference(
    rows: &[Vec<f64>],
    y: &[usize],
    members: &[usize],
    classes: usize,
    depth: usize,
    p: &TreeParams,
) -> Reference {
    let mut counts = vec![0u64; classes];
    for &i in members {
        counts[y[i]] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= p.max_depth || (members.len() as u64) < 2 * p.min_leaf.max(1) || pure {
        return Reference::Leaf(counts);
    }
    let parent = impurity(&counts);
    let mut best: Option<((u128, u128), usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = members.iter().map(|&i| rows[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let thr = (w[0] + w[1]) / 2.0;
            let mut lc = vec![0u64; classes];
            let mut rc = vec![0u64; classes];
            for &i in members {
                if rows[i][f] <= thr {
                    lc[y[i]] += 1;
                } else {
                    rc[y[i]] += 1;
                }
            }
            let (nl, nr): (u64, u64) = (lc.iter().sum(), rc.iter().sum());
            if nl < p.min_leaf || nr < p.min_leaf {
                continue;
            }
            let (a, da) = impurity(&lc);
            let (b, db) = impurity(&rc);
            let child = (a * db + b * da, da * db);
            let less = |x: (u128, u128), y: (u128, u128)| x.0 * y.1 < y.0 * x.1;
            if less(child, parent) && best.is_none_or(|(s, _, _)| less(child, s)) {
                best = Some((child, f, thr));
            }
        }
    }
    match best {
        None => Reference::Leaf(counts),
        Some((_, f, thr)) => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                members.iter().partition(|&&i| rows[i][f] <= thr);
            Reference::Split(
                f,
                thr,
                Box::new(reference(rows, y, &l, classes, depth + 1, p)),
                Box::new(reference(rows, y, &r, classes, depth + 1, p)),
            )
        }
    }
}

pub fn same(tree: &DecisionTree, node: usize, r: &Reference) -> bool {
    match (&tree.nodes[node], r) {
        (Node::Leaf(a), Reference::Leaf(b)) => a == b,
        (
            Node::Split {
                feature,
                threshold,
                left,
                right,
            },
            Reference::Split(f, t, l, rr),
        ) => feature == f && threshold == t && same(tree, *left, l) && same(tree, *right, rr),
        _ => false,
    }
}

/// At most 30 samples and 5 features on a small value grid with many ties.
pub fn random_dataset(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>, usize, TreeParams) {
    let mut r = rng::seeded(seed);
    let n = 2 + rng::index(&mut r, 29);
    let f = 1 + rng::index(&mut r, 5);
    let classes = 2 + rng::index(&mut r, 3);
    let grid = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 0.5, -1.0];
    let rows = (0..n)
        .map(|_| {
            (0..f)
                .map(|_| grid[rng::index(&mut r, grid.len())])
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| rng::index(&mut r, classes)).collect();
    let params = TreeParams {
        max_depth: 1 + rng::index(&mut r, 6),
        min_leaf: 1 + rng::index(&mut r, 3) as u64,
    };
    (rows, y, classes, params)
}

/// Whether the fitted tree for `seed` equals the exhaustive search.
pub fn tree_matches_reference(seed: u64) -> bool {
    let (rows, y, classes, params) = random_dataset(seed);
    let x = FeatureMatrix::from_dense(rows[0].len(), &rows).unwrap();
    let tree = DecisionTree::fit(&x, &y, classes, &params).unwrap();
    let members: Vec<usize> = (0..rows.len()).collect();
    same(
        &tree,
        0,
        &reference(&rows, &y, &members, classes, 0, &params),
    )
}

/// Largest per-stage increase of the GTB training loss on a random dataset.
pub fn gtb_worst_increase(seed: u64) -> f64 {
    let mut r = rng::seeded(seed);
    let n = 20 + rng::index(&mut r, 60);
    let f = 2 + rng::index(&mut r, 6);
    let classes = 2 + rng::index(&mut r, 4);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..f).map(|_| rng::index(&mut r, 4) as f64).collect())
        .collect();
    let y: Vec<usize> = (0..n)
        .map(|i| (rows[i][0] as usize + rng::index(&mut r, 2)) % classes)
        .collect();
    let x = FeatureMatrix::from_dense(f, &rows).unwrap();
    let params = GtbParams {
        n_stages: 40,
        learning_rate: 0.5,
        ..Default::default()
    };
    let m = GtbModel::fit(&x, &y, classes, &params).unwrap();
    m.train_loss
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

// ---- metrics ----

/// Per-class recall weighted by `weights` renormalized over the classes
/// that occur in `truth`, straight from the label lists.
pub fn weighted_accuracy_oracle(truth: &[usize], predicted: &[usize], weights: &[f64]) -> f64 {
    let present: Vec<usize> = (0..weights.len()).filter(|c| truth.contains(c)).collect();
    let total: f64 = present.iter().map(|&c| weights[c]).sum();
    present
        .iter()
        .map(|&c| {
            let rows: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] == c).collect();
            let hits = rows.iter().filter(|&&i| predicted[i] == c).count();
            weights[c] / total * hits as f64 / rows.len() as f64
        })
        .sum()
}

/// (sensitivity, specificity, precision, f-score) by counting pairs, 0 for
/// undefined ratios.
pub fn basic_metrics_oracle(truth: &[usize], predicted: &[usize], positive: usize) -> [f64; 4] {
    let count = |t: bool, p: bool| {
        truth
            .iter()
            .zip(predicted)
            .filter(|(&a, &b)| (a == positive) == t && (b == positive) == p)
            .count() as f64
    };
    let (tp, fn_, fp, tn) = (
        count(true, true),
        count(true, false),
        count(false, true),
        count(false, false),
    );
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let sens = div(tp, tp + fn_);
    let prec = div(tp, tp + fp);
    [
        sens,
        div(tn, tn + fp),
        prec,
        div(2.0 * prec * sens, prec + sens),
    ]
}

/// Pairwise-rank AUC: share of (positive, negative) pairs ordered
/// correctly, ties counting one half.
pub fn auc_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Chi-squared of the presence-by-class table, summing (O-E)^2/E over
/// every cell with E > 0.
pub fn chi2_oracle(rows: &[Vec<f64>], labels: &[usize], feature: usize) -> f64 {
    let classes = labels.iter().max().unwrap() + 1;
    let mut table = vec![[0.0f64; 2]; classes];
    for (r, &l) in rows.iter().zip(labels) {
        table[l][usize::from(r[feature] > 0.0)] += 1.0;
    }
    let n = rows.len() as f64;
    let col = [
        table.iter().map(|t| t[0]).sum::<f64>(),
        table.iter().map(|t| t[1]).sum::<f64>(),
    ];
    let mut chi2 = 0.0;
    for t in &table {
        let row: f64 = t[0] + t[1];
        for k in 0..2 {
            let e = row * col[k] / n;
            if e > 0.0 {
                chi2 += (t[k] - e).powi(2) / e;
            }
        }
    }
    chi2
}

/// Two-pass textbook Pearson correlation, 0 for a constant column.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

pub fn confusion(classes: usize, truth: &[usize], predicted: &[usize]) -> ConfusionMatrix {
    ConfusionMatrix::from_pairs(classes, truth, predicted).unwrap()
}

// ---- text preparation ----

fn expect<T: PartialEq + std::fmt::Debug>(got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("got {got:?}, want {want:?}"))
    }
}

/// Worked examples of the report conventions, each as (name, outcome).
pub fn textprep_goldens() -> Vec<(&'static str, Result<(), String>)> {
    let lex = Lexicon::shipped();
    let texts = |s: &str| {
        tokenize(s, &lex)
            .into_iter()
            .map(|t| (t.text, t.n))
            .collect::<Vec<_>>()
    };
    vec![
        (
            "brk lemmatizes to break",
            expect(lemmatize("brk", &lex), "break".to_string()),
        ),
        (
            "break, broken, breaking share a root",
            expect(
                ["break", "broken", "breaking"].map(|w| lemmatize(w, &lex)),
                ["break"; 3].map(String::from),
            ),
        ),
        (
            "plain an is a stop word",
            expect(
                apply_stop_rules(&["an", "apple"], &lex),
                vec!["apple".to_string()],
            ),
        ),
        (
            "an before a number is kept as a model id",
            expect(
                apply_stop_rules(&["an", "50", "failed"], &lex),
                vec!["an50".to_string(), "failed".to_string()],
            ),
        ),
        (
            "an 50 survives the full pipeline",
            expect(
                TextPipeline::new(lex.clone(), TextMode::Domain)
                    .analyze("an 50 failed")
                    .tokens()
                    .map(|t| (t.text.clone(), t.tag))
                    .next(),
                Some(("an50".to_string(), Tag::ModelId)),
            ),
        ),
        (
            "upper valve merges",
            expect(
                texts("upper valve leaking"),
                vec![("upper valve".into(), 2), ("leaking".into(), 1)],
            ),
        ),
        (
            "unit down merges",
            expect(texts("unit down"), vec![("unit down".to_string(), 2)]),
        ),
        (
            "upper valve is tagged as a noun",
            expect(
                tokenize("upper valve", &lex).first().map(|t| t.tag),
                Some(Tag::Noun),
            ),
        ),
        (
            "service needed is vague",
            expect(
                strip_vague_phrases("service needed", &lex),
                (String::new(), true),
            ),
        ),
        (
            "service needed is removed from a longer segment",
            expect(
                strip_vague_phrases("boom service needed hydraulic leak", &lex),
                ("boom hydraulic leak".into(), false),
            ),
        ),
        (
            "PN9700007824 is a part number",
            expect(
                recognize_terms("replaced gasket pn9700007824")
                    .into_iter()
                    .map(|m| (m.kind, m.raw))
                    .collect::<Vec<_>>(),
                vec![(TermKind::PartNumber, "pn9700007824".to_string())],
            ),
        ),
        (
            "PN9700007824 is one part-number token",
            expect(
                tokenize("replaced gasket pn9700007824", &lex)
                    .last()
                    .map(|t| (t.text.clone(), t.tag)),
                Some(("pn9700007824".to_string(), Tag::PartNumber)),
            ),
        ),
        (
            "unit number before a dash",
            expect(
                recognize_terms("24506-replace winch rope")
                    .into_iter()
                    .map(|m| (m.kind, m.raw))
                    .collect::<Vec<_>>(),
                vec![(TermKind::UnitNumber, "24506".to_string())],
            ),
        ),
        (
            "double dashes split tasks",
            expect(
                normalize("--cut off and replaced damaged area or repair--"),
                vec!["cut off and replaced damaged area or repair".to_string()],
            ),
        ),
        (
            "dash with spaces splits tasks",
            expect(
                normalize("replaced and adjusted transfer pin-- perform test"),
                vec![
                    "replaced and adjusted transfer pin".to_string(),
                    "perform test".to_string(),
                ],
            ),
        ),
        (
            "segments are lowercased",
            expect(
                normalize("Unit DWN--HYD inspected -- replaced related valve"),
                ["unit dwn", "hyd inspected", "replaced related valve"]
                    .map(String::from)
                    .to_vec(),
            ),
        ),
        (
            "abbreviated unit down merges after expansion",
            expect(
                TextPipeline::new(lex.clone(), TextMode::Domain)
                    .analyze("Unit DWN--HYD inspected")
                    .segments
                    .iter()
                    .map(|s| s.iter().map(|t| t.lemma.clone()).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
                vec![
                    vec!["unit down".to_string()],
                    vec!["hydraulic".to_string(), "inspect".to_string()],
                ],
            ),
        ),
    ]
}

/// One randomized small instance checked against every metric oracle;
/// the error names the first disagreement.
pub fn check_metric_oracles(seed: u64) -> Result<(), String> {
    use triage_core::features::{
        chi_squared_scores, pearson, Correlations, FeatureVector, SparseCorrelations,
    };
    use triage_core::metrics::{
        auc_mann_whitney, basic_metrics, roc_auc, weighted_accuracy, ClassWeights,
    };

    let mut r = rng::seeded(seed);
    let close = |what: &str, a: f64, b: f64| {
        if (a - b).abs() <= 1e-9 {
            Ok(())
        } else {
            Err(format!("seed {seed}: {what} {a} vs oracle {b}"))
        }
    };

    let classes = 2 + rng::index(&mut r, 5);
    let n = 1 + rng::index(&mut r, 40);
    let truth: Vec<usize> = (0..n).map(|_| rng::index(&mut r, classes)).collect();
    let predicted: Vec<usize> = (0..n).map(|_| rng::index(&mut r, classes)).collect();
    let weights: Vec<f64> = (0..classes)
        .map(|_| 0.01 + rng::index(&mut r, 100) as f64 / 100.0)
        .collect();
    let conf = confusion(classes, &truth, &predicted);
    let wa = weighted_accuracy(&conf, &ClassWeights::new(weights.clone()).unwrap())
        .map_err(|e| e.to_string())?;
    close(
        "weighted accuracy",
        wa,
        weighted_accuracy_oracle(&truth, &predicted, &weights),
    )?;
    for positive in 0..classes {
        let m = basic_metrics(&conf, positive).map_err(|e| e.to_string())?;
        let want = basic_metrics_oracle(&truth, &predicted, positive);
        for (name, got, want) in [
            ("sensitivity", m.sensitivity, want[0]),
            ("specificity", m.specificity, want[1]),
            ("precision", m.precision, want[2]),
            ("f-score", m.f_score, want[3]),
        ] {
            close(name, got, want)?;
        }
    }

    let m = 2 + rng::index(&mut r, 40);
    let scores: Vec<f64> = (0..m).map(|_| rng::index(&mut r, 8) as f64 / 8.0).collect();
    let mut labels: Vec<bool> = (0..m).map(|_| rng::index(&mut r, 2) == 1).collect();
    labels[0] = true;
    labels[1] = false;
    let oracle = auc_oracle(&scores, &labels);
    close(
        "trapezoid AUC",
        roc_auc(&scores, &labels).map_err(|e| e.to_string())?.auc,
        oracle,
    )?;
    close(
        "rank AUC",
        auc_mann_whitney(&scores, &labels).map_err(|e| e.to_string())?,
        oracle,
    )?;

    let docs = 2 + rng::index(&mut r, 30);
    let features = 1 + rng::index(&mut r, 6);
    let rows: Vec<Vec<f64>> = (0..docs)
        .map(|_| {
            (0..features)
                .map(|_| rng::index(&mut r, 3) as f64)
                .collect()
        })
        .collect();
    let doc_labels: Vec<usize> = (0..docs).map(|_| rng::index(&mut r, classes)).collect();
    let vectors: Vec<FeatureVector> = rows
        .iter()
        .map(|v| FeatureVector {
            id: String::new(),
            values: v.clone(),
        })
        .collect();
    let chi2 = chi_squared_scores(&vectors, &doc_labels).map_err(|e| e.to_string())?;
    let sparse = SparseCorrelations::new(&FeatureMatrix::from_dense(features, &rows).unwrap())
        .map_err(|e| e.to_string())?;
    for f in 0..features {
        close("chi-squared", chi2[f], chi2_oracle(&rows, &doc_labels, f))?;
        let col = |j: usize| rows.iter().map(|row| row[j]).collect::<Vec<f64>>();
        for g in 0..features {
            let want = if f == g {
                1.0
            } else {
                pearson_oracle(&col(f), &col(g))
            };
            if f != g {
                close("pearson", pearson(&col(f), &col(g)), want)?;
            }
            close("sparse correlation", sparse.correlation(f, g), want)?;
        }
    }
    Ok(())
}
