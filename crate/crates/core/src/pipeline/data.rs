use crate::corpus::{Department, RelationLabel, ServiceRecord};
use crate::error::{Error, Result};
use crate::features::{
    build_vocabulary, chi_squared_sparse, select_features, vectorize_all, SparseCorrelations,
    Vocabulary,
};
use crate::metrics::{FoldTrainer, Prediction};
use crate::pipeline::config::PipelineConfig;
use crate::rng::derive_seed;
use crate::router::{argmax, train_router};
use crate::textprep::{Document, TextPipeline};
use crate::validator::{train_validator, NetConfig, TokenPair};

/// A record after text preprocessing.
#[derive(Debug, Clone)]
pub struct AnalyzedRecord {
    /// Call log segments followed by detail segments; the router's input.
    pub document: Document,
    /// Lemma sequences; the validator's input.
    pub pair: TokenPair,
}

fn lemmas(doc: &Document) -> Vec<String> {
    doc.tokens().map(|t| t.lemma.clone()).collect()
}

pub fn analyze_record(text: &TextPipeline, record: &ServiceRecord) -> AnalyzedRecord {
    let call = text.analyze(&record.call_log);
    let detail = text.analyze(&record.detail);
    let pair = TokenPair {
        call_log: lemmas(&call),
        detail: lemmas(&detail),
    };
    let mut segments = call.segments;
    segments.extend(detail.segments);
    AnalyzedRecord {
        document: Document {
            segments,
            vague: call.vague || detail.vague,
        },
        pair,
    }
}

pub fn analyze_records(text: &TextPipeline, records: &[ServiceRecord]) -> Vec<AnalyzedRecord> {
    records.iter().map(|r| analyze_record(text, r)).collect()
}

/// Positions of the records the router trains and is evaluated on, with
/// their department labels.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSet {
    pub positions: Vec<usize>,
    pub labels: Vec<usize>,
}

/// Checks that every record the configured stages need is labeled, and
/// selects the routing set: ground-truth Valid records when validation is
/// on, all records otherwise, minus the Vague department unless included.
pub fn check_labels(
    records: &[ServiceRecord],
    config: &PipelineConfig,
) -> Result<(Vec<usize>, RoutingSet)> {
    if records.is_empty() {
        return Err(Error::input("the corpus has no records"));
    }
    let no_relation = records.iter().filter(|r| r.relation.is_none()).count();
    let relation_needed = config.validation;
    let routable =
        |r: &ServiceRecord| !config.validation || r.relation == Some(RelationLabel::Valid);
    let no_department = records
        .iter()
        .filter(|r| routable(r) && r.department.is_none())
        .count();
    if (relation_needed && no_relation > 0) || no_department > 0 {
        let mut parts = Vec::new();
        if relation_needed && no_relation > 0 {
            parts.push(format!("{no_relation} lack a relation label"));
        }
        if no_department > 0 {
            parts.push(format!(
                "{no_department} routable records lack a department"
            ));
        }
        return Err(Error::input(format!(
            "label gaps in {} records: {}",
            records.len(),
            parts.join(", ")
        )));
    }
    let relations = if relation_needed {
        records
            .iter()
            .map(|r| r.relation.expect("checked").index())
            .collect()
    } else {
        Vec::new()
    };
    let mut set = RoutingSet {
        positions: Vec::new(),
        labels: Vec::new(),
    };
    for (i, r) in records.iter().enumerate() {
        if !routable(r) {
            continue;
        }
        let d = r.department.expect("checked");
        if d == Department::Vague && !config.include_vague_department {
            continue;
        }
        set.positions.push(i);
        set.labels.push(d.index());
    }
    if set.positions.is_empty() {
        return Err(Error::input("no records are eligible for routing"));
    }
    Ok((relations, set))
}

/// Router vocabulary fitted on the given documents: per-category top-k
/// terms, then (domain mode only) chi-squared ranking with correlation
/// pruning.
pub fn fit_router_vocabulary(
    docs: &[&Document],
    labels: &[usize],
    config: &PipelineConfig,
) -> Result<Vocabulary> {
    let options = config.term_options();
    let vocab = build_vocabulary(docs.iter().copied(), config.features.top_k, options);
    if !config.domain_nlp || vocab.is_empty() || docs.len() < 2 {
        return Ok(vocab);
    }
    let m = vectorize_all(docs.iter().copied(), &vocab, options);
    let scores = chi_squared_sparse(&m, labels)?;
    let corr = SparseCorrelations::new(&m)?;
    let keep = select_features(
        &scores,
        &corr,
        config.features.chi2_keep,
        config.features.corr_threshold,
    )?;
    Ok(vocab.subset(&keep))
}

/// Cross-validation of the validator: each fold trains a fresh network on
/// its training positions.
pub struct ValidatorFolds<'a> {
    pub pairs: Vec<&'a TokenPair>,
    pub labels: &'a [usize],
    pub config: NetConfig,
}

impl FoldTrainer for ValidatorFolds<'_> {
    fn fit_predict(
        &mut self,
        fold: usize,
        train: &[usize],
        test: &[usize],
    ) -> Result<Vec<Prediction>> {
        let pairs: Vec<TokenPair> = train.iter().map(|&i| self.pairs[i].clone()).collect();
        let labels: Vec<usize> = train.iter().map(|&i| self.labels[i]).collect();
        let config = NetConfig {
            seed: derive_seed(self.config.seed, &format!("fold-{fold}")),
            ..self.config.clone()
        };
        let (model, _) = train_validator(&pairs, &labels, &config)?;
        Ok(test
            .iter()
            .map(|&i| {
                let scores = model.predict(self.pairs[i]);
                Prediction {
                    class: argmax(&scores),
                    scores,
                }
            })
            .collect())
    }
}

/// Cross-validation of the router. Vocabulary, feature selection and the
/// model are all fitted on the training positions of each fold.
pub struct RouterFolds<'a> {
    pub docs: Vec<&'a Document>,
    pub labels: &'a [usize],
    pub config: &'a PipelineConfig,
}

impl FoldTrainer for RouterFolds<'_> {
    fn fit_predict(
        &mut self,
        fold: usize,
        train: &[usize],
        test: &[usize],
    ) -> Result<Vec<Prediction>> {
        let docs: Vec<&Document> = train.iter().map(|&i| self.docs[i]).collect();
        let labels: Vec<usize> = train.iter().map(|&i| self.labels[i]).collect();
        let vocab = fit_router_vocabulary(&docs, &labels, self.config)?;
        let options = self.config.term_options();
        let x = vectorize_all(docs.iter().copied(), &vocab, options);
        let seed = derive_seed(self.config.router_seed(), &format!("fold-{fold}"));
        let model = train_router(&self.config.router, &x, &labels, Department::COUNT, seed)?;
        let xt = vectorize_all(test.iter().map(|&i| self.docs[i]), &vocab, options);
        Ok(model
            .predict_matrix(&xt)?
            .into_iter()
            .map(|(class, scores)| Prediction { class, scores })
            .collect())
    }
}
