use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{
    generate_corpus, serialize_records, split_folds_by_key, write_truth, Department, GroundTruth,
    RelationLabel, ServiceRecord,
};
use crate::error::{Error, Result};
use crate::features::vectorize_all;
use crate::metrics::{cross_validate, weighted_accuracy, ClassWeights, ConfusionMatrix, CvReport};
use crate::pipeline::config::{config_fingerprint, sha256_hex, PipelineConfig, Resources};
use crate::pipeline::data::{
    analyze_records, check_labels, fit_router_vocabulary, RouterFolds, ValidatorFolds,
};
use crate::pipeline::io::{stamp_header, write_atomic};
use crate::pipeline::models::{Manifest, TrainedModels};
use crate::router::{argmax, train_router};
use crate::textprep::Document;
use crate::validator::{train_validator, ValidatorVocab};

fn relation_names() -> Vec<String> {
    RelationLabel::ALL.iter().map(|r| r.to_string()).collect()
}

fn department_names() -> Vec<String> {
    Department::ALL.iter().map(|d| d.to_string()).collect()
}

pub fn corpus_sha256(records: &[ServiceRecord]) -> String {
    sha256_hex(serialize_records(records).as_bytes())
}

fn vague_note(config: &PipelineConfig) -> (String, String) {
    let v = if config.include_vague_department {
        "included"
    } else {
        "excluded"
    };
    ("vague_department".into(), v.into())
}

fn training_lines(name: &str, conf: &ConfusionMatrix, weights: &ClassWeights) -> Result<String> {
    Ok(format!(
        "{name}_records\t{}\n{name}_accuracy\t{:.6}\n{name}_weighted_accuracy\t{:.6}\n",
        conf.total(),
        conf.correct() as f64 / conf.total() as f64,
        weighted_accuracy(conf, weights)?
    ))
}

/// Fits the validator (when enabled) and the router on the whole corpus.
pub fn train(
    config: &PipelineConfig,
    resources: &Resources,
    records: &[ServiceRecord],
) -> Result<TrainedModels> {
    config.validate()?;
    let (relations, routing) = check_labels(records, config)?;
    let text = resources.text_pipeline(config);
    let analyzed = analyze_records(&text, records);
    let mut report =
        String::from("# training-set metrics: measured on the data the models were fitted to\n");
    report.push_str("# these are optimistic; use eval for cross-validated estimates\n");

    let (validator, history) = if config.validation {
        let pairs: Vec<_> = analyzed.iter().map(|a| a.pair.clone()).collect();
        let (model, history) = train_validator(&pairs, &relations, &config.net_config())?;
        let mut conf = ConfusionMatrix::new(RelationLabel::ALL.len());
        for (p, &y) in pairs.iter().zip(&relations) {
            conf.add(y, argmax(&model.predict(p)))?;
        }
        report.push_str(&training_lines(
            "validator",
            &conf,
            &ClassWeights::uniform(RelationLabel::ALL.len()),
        )?);
        (Some(model), Some(history))
    } else {
        (None, None)
    };

    let docs: Vec<&Document> = routing
        .positions
        .iter()
        .map(|&i| &analyzed[i].document)
        .collect();
    let vocab = fit_router_vocabulary(&docs, &routing.labels, config)?;
    let x = vectorize_all(docs.iter().copied(), &vocab, config.term_options());
    let router = train_router(
        &config.router,
        &x,
        &routing.labels,
        Department::COUNT,
        config.router_seed(),
    )?;
    let mut conf = ConfusionMatrix::new(Department::COUNT);
    for ((class, _), &y) in router.predict_matrix(&x)?.iter().zip(&routing.labels) {
        conf.add(y, *class)?;
    }
    report.push_str(&training_lines("router", &conf, &resources.weights)?);
    report.push_str(&format!(
        "router_kind\t{}\nrouter_features\t{}\n",
        config.router.kind(),
        vocab.len()
    ));
    let (k, v) = vague_note(config);
    report.push_str(&format!("{k}\t{v}\n"));

    Ok(TrainedModels {
        config: config.clone(),
        resources: resources.clone(),
        config_fingerprint: config_fingerprint(config, resources),
        corpus_sha256: corpus_sha256(records),
        records: records.len(),
        routing_records: routing.positions.len(),
        router_vocab: vocab,
        router,
        validator,
        history,
        train_report: report,
    })
}

/// Cross-validated reports for both stages.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub validation: Option<CvReport>,
    pub routing: CvReport,
}

impl EvalReport {
    /// Report text and ROC files by name.
    pub fn files(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let stamp = |r: &CvReport| {
            let get = |k: &str| {
                r.notes
                    .iter()
                    .find(|(n, _)| n == k)
                    .map(|(_, v)| v.clone())
                    .unwrap_or_default()
            };
            stamp_header(&get("fingerprint"), get("seed").parse().unwrap_or(0))
        };
        let reports = self.validation.iter().chain(std::iter::once(&self.routing));
        for r in reports {
            out.insert(format!("{}_report.txt", r.stage), r.to_text());
            for (c, roc) in r.roc.iter().enumerate() {
                if let Some(roc) = roc {
                    out.insert(
                        format!("roc/{}_{}.tsv", r.stage, r.class_names[c]),
                        format!("{}{}", stamp(r), roc.to_tsv()),
                    );
                }
            }
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, text) in self.files() {
            write_atomic(&dir.join(name), text.as_bytes())?;
        }
        Ok(())
    }
}

/// Refuses to evaluate a corpus whose featurization differs from the one
/// the models were trained on.
pub fn check_compatible(
    manifest: &Manifest,
    config: &PipelineConfig,
    resources: &Resources,
    records: &[ServiceRecord],
) -> Result<()> {
    let (_, routing) = check_labels(records, config)?;
    let text = resources.text_pipeline(config);
    let analyzed = analyze_records(&text, records);
    let docs: Vec<&Document> = routing
        .positions
        .iter()
        .map(|&i| &analyzed[i].document)
        .collect();
    let vocab = fit_router_vocabulary(&docs, &routing.labels, config)?;
    if vocab.hash() != manifest.router_vocab_hash {
        return Err(Error::Mismatch(format!(
            "router vocabulary hash {} of this corpus and config differs from the models' {}; retrain first",
            vocab.hash(),
            manifest.router_vocab_hash
        )));
    }
    if config.validation {
        let net = config.net_config();
        let vocab = ValidatorVocab::build(
            analyzed.iter().map(|a| &a.pair),
            net.max_vocab,
            net.min_count,
            net.mark_call_log,
        );
        if Some(vocab.hash()) != manifest.validator_vocab_hash {
            return Err(Error::Mismatch("validator vocabulary of this corpus and config differs from the models'; retrain first".into()));
        }
    }
    Ok(())
}

/// k-fold cross-validation of the validator (three relation labels,
/// balanced weights, Valid as the positive class) and of the router
/// (department weights) on the routing set.
pub fn evaluate(
    config: &PipelineConfig,
    resources: &Resources,
    records: &[ServiceRecord],
) -> Result<EvalReport> {
    config.validate()?;
    let (relations, routing) = check_labels(records, config)?;
    let text = resources.text_pipeline(config);
    let analyzed = analyze_records(&text, records);
    let fingerprint = config_fingerprint(config, resources);
    let notes = |extra: Vec<(String, String)>| {
        let mut n = vec![
            ("fingerprint".to_string(), fingerprint.clone()),
            ("seed".to_string(), config.seed.to_string()),
        ];
        n.extend(extra);
        n
    };
    let ids = |positions: &[usize]| {
        positions
            .iter()
            .map(|&i| records[i].id.clone())
            .collect::<Vec<_>>()
    };

    let validation = if config.validation {
        let keys: Vec<Option<usize>> = relations.iter().map(|&r| Some(r)).collect();
        let all: Vec<usize> = (0..records.len()).collect();
        let folds = split_folds_by_key(ids(&all), &keys, config.folds, config.fold_seed())?;
        let mut trainer = ValidatorFolds {
            pairs: analyzed.iter().map(|a| &a.pair).collect(),
            labels: &relations,
            config: config.net_config(),
        };
        let weights = ClassWeights::uniform(RelationLabel::ALL.len());
        let mut r = cross_validate(
            &mut trainer,
            &relations,
            &folds,
            &weights,
            &relation_names(),
            Some(RelationLabel::Valid.index()),
        )?;
        r.stage = "validation".into();
        r.notes = notes(vec![("weights".into(), "uniform".into())]);
        Some(r)
    } else {
        None
    };

    let keys: Vec<Option<usize>> = routing.labels.iter().map(|&d| Some(d)).collect();
    let folds = split_folds_by_key(
        ids(&routing.positions),
        &keys,
        config.folds,
        config.fold_seed(),
    )?;
    let mut trainer = RouterFolds {
        docs: routing
            .positions
            .iter()
            .map(|&i| &analyzed[i].document)
            .collect(),
        labels: &routing.labels,
        config,
    };
    let mut r = cross_validate(
        &mut trainer,
        &routing.labels,
        &folds,
        &resources.weights,
        &department_names(),
        None,
    )?;
    r.stage = "routing".into();
    let subset = if config.validation {
        "ground-truth Valid records"
    } else {
        "all records"
    };
    r.notes = notes(vec![
        ("router_kind".into(), config.router.kind().into()),
        ("domain_nlp".into(), config.domain_nlp.to_string()),
        ("routing_set".into(), subset.into()),
        vague_note(config),
    ]);
    Ok(EvalReport {
        validation,
        routing: r,
    })
}

/// Generated corpus and ground truth as file contents.
pub fn synth(config: &PipelineConfig) -> Result<(String, String, GroundTruth)> {
    let synth = config.synth_config();
    synth.validate()?;
    let (records, truth) = generate_corpus(&synth)?;
    Ok((
        serialize_records(&records),
        write_truth(&truth.entries),
        truth,
    ))
}
