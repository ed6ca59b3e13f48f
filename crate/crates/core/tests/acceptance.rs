//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Numeric arguments select a subset, e.g.
//! `cargo test --release --test acceptance -- 6 7`.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use triage_core::corpus::{generate_corpus, split_folds_by_key, Department};
use triage_core::features::vectorize_all;
use triage_core::metrics::{weighted_accuracy, ClassWeights};
use triage_core::pipeline::{
    analyze_records, check_labels, evaluate, fit_router_vocabulary, sha256_hex, synth, train,
    write_atomic, PipelineConfig, Resources,
};
use triage_core::rng::seeded;
use triage_core::router::{DecisionTree, ForestParams, RandomForest, RouterModel, TreeParams};
use triage_core::validator::{
    grad_check, GradCheckOptions, NetConfig, TokenPair, ValidatorModel, ValidatorVocab,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Validator and router settings for the 10,000-record run.
const END_TO_END: &str = r#"
seed = 7
folds = 10
[synth]
n_records = 10000
noise_rate = 0.05
abbreviation_rate = 0.3
[validator]
seq_len = 28
embed_dim = 32
filter_sizes = [1]
filters_per_size = 64
lstm_hidden = 16
dense_hidden = 32
dropout_p = 0.0
optimizer = "adam"
learning_rate = 0.003
batch_size = 32
epochs = 8
plateau_patience = 4
embedding_init = "cooccurrence"
[router]
kind = "gtb"
"#;

/// Routing-only comparison on an abbreviation-heavy corpus; only
/// `domain_nlp` differs between the two runs.
const ABLATION: &str = r#"
seed = 3
folds = 10
validation = false
[synth]
n_records = 2000
noise_rate = 0.05
abbreviation_rate = 0.9
[synth.relation_mix]
Valid = 1.0
[router]
kind = "gtb"
n_stages = 50
"#;

fn c1_gradient_check() -> Outcome {
    let words = [
        "boom",
        "hose",
        "leak",
        "replace",
        "upper valve",
        "gasket",
        "hydraulic",
        "pump",
        "check",
        "down",
    ];
    let vocab = ValidatorVocab::from_words(words.map(String::from).to_vec()).unwrap();
    let mut model = ValidatorModel::new(
        NetConfig {
            seed: 4,
            ..NetConfig::default()
        },
        vocab,
    )
    .unwrap();
    let names: Vec<String> = model.tensor_shapes().into_iter().map(|(n, _)| n).collect();
    let mut rng = seeded(17);
    for name in names {
        for v in model.tensor_mut(&name).unwrap() {
            *v += rng.gen_range(-0.05..0.05);
        }
    }
    let pair = TokenPair {
        call_log: vec!["boom".into(), "hose".into(), "leak".into()],
        detail: [
            "replace",
            "upper valve",
            "gasket",
            "winch",
            "hydraulic",
            "pump",
        ]
        .map(String::from)
        .to_vec(),
    };
    let ids = model.encode(&pair);
    let start = Instant::now();
    let (mut worst, mut checked, mut tensors) = (0.0f64, 0, 0);
    for label in 0..3 {
        let opts = GradCheckOptions {
            epsilon: 1e-5,
            seed: label as u64,
            ..Default::default()
        };
        let report = grad_check(&model, &ids, label, &opts).unwrap();
        worst = worst.max(report.max_relative_error);
        checked += report.checked;
        tensors = report.per_tensor.iter().filter(|t| t.checked > 0).count();
    }
    let secs = start.elapsed().as_secs_f64();
    let all_groups = tensors == model.tensor_shapes().len();
    outcome(
        worst <= 1e-4 && secs < 60.0 && all_groups,
        format!("max relative error {worst:.2e} over {checked} entries in {tensors} tensors, {secs:.1}s"),
    )
}

fn c2_metric_oracles() -> Outcome {
    let failures: Vec<String> = (0..200)
        .filter_map(|s| common::check_metric_oracles(s).err())
        .collect();
    match failures.first() {
        None => outcome(true, "200 random instances agree with the oracles"),
        Some(first) => outcome(
            false,
            format!(
                "{} of 200 instances disagree, first: {first}",
                failures.len()
            ),
        ),
    }
}

fn c3_worked_example() -> Outcome {
    let text =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/weights.tsv"))
            .unwrap();
    let weights = ClassWeights::parse_departments(&text).unwrap();
    let (boom, controls) = (Department::Boom.index(), Department::Controls.index());
    let truth = [boom, boom, boom, boom, controls, controls];
    let pred = [boom, boom, boom, controls, controls, boom];
    let acc = weighted_accuracy(
        &common::confusion(Department::COUNT, &truth, &pred),
        &weights,
    )
    .unwrap();
    outcome(
        (acc - 0.6602).abs() <= 1e-4,
        format!("weighted accuracy {acc:.6}"),
    )
}

fn c4_tree_oracle() -> Outcome {
    let bad: Vec<u64> = (0..200)
        .filter(|&s| !common::tree_matches_reference(s))
        .collect();
    let detail = if bad.is_empty() {
        String::new()
    } else {
        format!(", mismatching seeds {bad:?}")
    };
    outcome(
        bad.is_empty(),
        format!("200 datasets (<=30 samples, <=5 features){detail}"),
    )
}

fn c5_gtb_monotone() -> Outcome {
    let worst = (0..20)
        .map(common::gtb_worst_increase)
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= 1e-12,
        format!("20 datasets, largest per-stage loss change {worst:.3e}"),
    )
}

fn c6_end_to_end() -> Outcome {
    let start = Instant::now();
    let config = PipelineConfig::from_toml(END_TO_END).unwrap();
    let (records, _) = generate_corpus(&config.synth_config()).unwrap();
    let report = evaluate(&config, &Resources::shipped(), &records).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let v = report.validation.as_ref().unwrap().weighted_accuracy();
    let r = report.routing.weighted_accuracy();
    outcome(
        v >= 0.90 && r >= 0.85 && secs <= 900.0,
        format!("validator {v:.4} (>=0.90), GTB routing {r:.4} (>=0.85), {secs:.0}s (<=900)"),
    )
}

fn c7_ablation() -> Outcome {
    let config = PipelineConfig::from_toml(ABLATION).unwrap();
    let (records, _) = generate_corpus(&config.synth_config()).unwrap();
    let r = Resources::shipped();
    let domain = evaluate(&config, &r, &records)
        .unwrap()
        .routing
        .weighted_accuracy();
    let plain_config = PipelineConfig {
        domain_nlp: false,
        ..config
    };
    let plain = evaluate(&plain_config, &r, &records)
        .unwrap()
        .routing
        .weighted_accuracy();
    let gap = 100.0 * (domain - plain);
    outcome(
        gap >= 10.0,
        format!("domain {domain:.4}, plain {plain:.4}, gap {gap:.2} points (>=10)"),
    )
}

fn c8_forest_variance() -> Outcome {
    let (mut dt, mut rf) = (Vec::new(), Vec::new());
    for seed in 0..10u64 {
        let mut config = PipelineConfig {
            seed,
            ..Default::default()
        };
        config.synth.n_records = 900;
        config.synth.noise_rate = 0.3;
        let (records, _) = generate_corpus(&config.synth_config()).unwrap();
        let (_, routing) = check_labels(&records, &config).unwrap();
        let analyzed = analyze_records(&Resources::shipped().text_pipeline(&config), &records);
        let docs: Vec<_> = routing
            .positions
            .iter()
            .map(|&i| &analyzed[i].document)
            .collect();
        let keys: Vec<Option<usize>> = routing.labels.iter().map(|&l| Some(l)).collect();
        let ids = routing
            .positions
            .iter()
            .map(|&i| records[i].id.clone())
            .collect();
        let folds = split_folds_by_key(ids, &keys, 3, seed).unwrap();
        let (test, fit): (Vec<usize>, Vec<usize>) =
            (0..docs.len()).partition(|&i| folds.fold_of[i] == 0);
        let fit_docs: Vec<_> = fit.iter().map(|&i| docs[i]).collect();
        let fit_labels: Vec<usize> = fit.iter().map(|&i| routing.labels[i]).collect();
        let vocab = fit_router_vocabulary(&fit_docs, &fit_labels, &config).unwrap();
        let x = vectorize_all(fit_docs.iter().copied(), &vocab, config.term_options());
        let xt = vectorize_all(test.iter().map(|&i| docs[i]), &vocab, config.term_options());
        let truth: Vec<usize> = test.iter().map(|&i| routing.labels[i]).collect();
        let accuracy = |model: RouterModel| {
            let pred = model.predict_matrix(&xt).unwrap();
            pred.iter()
                .zip(&truth)
                .filter(|((p, _), t)| p == *t)
                .count() as f64
                / truth.len() as f64
        };
        dt.push(accuracy(RouterModel::DecisionTree(
            DecisionTree::fit(&x, &fit_labels, Department::COUNT, &TreeParams::default()).unwrap(),
        )));
        rf.push(accuracy(RouterModel::RandomForest(
            RandomForest::fit(
                &x,
                &fit_labels,
                Department::COUNT,
                &ForestParams::default(),
                seed,
            )
            .unwrap(),
        )));
    }
    let std = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (sd, sr) = (std(&dt), std(&rf));
    outcome(
        sr < sd,
        format!(
            "10 seeds: DT accuracy {:.4} sd {sd:.4}, RF accuracy {:.4} sd {sr:.4}",
            mean(&dt),
            mean(&rf)
        ),
    )
}

/// sha256 of every file under `dir`, keyed by relative path.
fn tree_hashes(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, sha256_hex(&std::fs::read(&path).unwrap()));
            }
        }
    }
    out
}

/// synth, train, eval and route into `dir`; returns the models fingerprint.
fn full_run(dir: &Path) -> String {
    let mut config = PipelineConfig::from_toml(END_TO_END).unwrap();
    config.synth.n_records = 600;
    config.folds = 3;
    config.validator.epochs = 2;
    config.router = toml::from_str("kind = \"gtb\"\nn_stages = 20\n").unwrap();
    let r = Resources::shipped();
    let (records_text, truth_text, _) = synth(&config).unwrap();
    write_atomic(&dir.join("records.jsonl"), records_text.as_bytes()).unwrap();
    write_atomic(&dir.join("truth.tsv"), truth_text.as_bytes()).unwrap();
    let records = triage_core::pipeline::records_from_text(&records_text).unwrap();
    let models = train(&config, &r, &records).unwrap();
    let manifest = models.save(&dir.join("models")).unwrap();
    evaluate(&config, &r, &records)
        .unwrap()
        .write(&dir.join("eval"))
        .unwrap();
    let routed: String = models
        .route_lines(&records_text)
        .iter()
        .map(|d| d.to_json() + "\n")
        .collect();
    write_atomic(&dir.join("routed.jsonl"), routed.as_bytes()).unwrap();
    manifest.models_fingerprint
}

fn c9_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (full_run(a.path()), full_run(b.path()));
    let (ha, hb) = (tree_hashes(a.path()), tree_hashes(b.path()));
    let differing: Vec<&String> = ha.keys().filter(|k| ha.get(*k) != hb.get(*k)).collect();
    let detail = if differing.is_empty() {
        String::new()
    } else {
        format!(", differing {differing:?}")
    };
    outcome(
        fa == fb && ha == hb,
        format!(
            "two runs, models fingerprint {}, {} files compared{detail}",
            &fa[..16],
            ha.len()
        ),
    )
}

fn c10_goldens() -> Outcome {
    let goldens = common::textprep_goldens();
    let failed: Vec<String> = goldens
        .iter()
        .filter_map(|(n, r)| r.as_ref().err().map(|e| format!("{n}: {e}")))
        .collect();
    let detail = if failed.is_empty() {
        String::new()
    } else {
        format!(", failures {failed:?}")
    };
    outcome(
        failed.is_empty(),
        format!("{} goldens{detail}", goldens.len()),
    )
}

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "gradient check", c1_gradient_check),
        (2, "metric oracles", c2_metric_oracles),
        (3, "weighted-accuracy worked example", c3_worked_example),
        (4, "decision-tree oracle", c4_tree_oracle),
        (5, "GTB monotonicity", c5_gtb_monotone),
        (6, "end-to-end synthetic performance", c6_end_to_end),
        (7, "domain preprocessing ablation", c7_ablation),
        (8, "forest variance below tree variance", c8_forest_variance),
        (9, "determinism", c9_determinism),
        (10, "text preparation goldens", c10_goldens),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        println!(
            "criterion {n:>2} {} {name}: {} [{:.1}s]",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
