use serde_json::{json, Value};
use triage_core::corpus::{generate_corpus, split_folds_by_key, Department, RelationLabel};
use triage_core::features::{vectorize_all, Vocabulary};
use triage_core::metrics::{roc_auc, weighted_accuracy, ClassWeights, ConfusionMatrix};
use triage_core::pipeline::{analyze_record, fit_router_vocabulary, PipelineConfig, Resources};
use triage_core::router::{train_router, GtbParams, RouterModel, RouterParams};
use triage_core::textprep::{Lexicon, TextMode, TextPipeline};
use triage_core::Result;

/// Token analysis of `text` as JSON: segments of {text, lemma, tag}.
pub fn analyze_json(text: &str, domain: bool) -> String {
    let mode = if domain {
        TextMode::Domain
    } else {
        TextMode::Plain
    };
    let doc = TextPipeline::new(Lexicon::shipped(), mode).analyze(text);
    let segments: Vec<Vec<Value>> = doc
        .segments
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| json!({"text": t.text, "lemma": t.lemma, "tag": t.tag.code()}))
                .collect()
        })
        .collect();
    json!({"segments": segments, "vague": doc.vague}).to_string()
}

/// A GTB router trained on four fifths of a generated corpus, with the
/// other fifth kept for scoring.
pub struct Engine {
    config: PipelineConfig,
    text: TextPipeline,
    vocab: Vocabulary,
    model: RouterModel,
    /// Held-out (true department, score vector) pairs.
    held_out: Vec<(usize, Vec<f64>)>,
    train_size: usize,
}

impl Engine {
    pub fn new(
        records: usize,
        seed: u64,
        abbreviation_rate: f64,
        domain: bool,
        stages: usize,
    ) -> Result<Engine> {
        let mut config = PipelineConfig {
            seed,
            domain_nlp: domain,
            ..Default::default()
        };
        config.synth.n_records = records;
        config.synth.abbreviation_rate = abbreviation_rate;
        config.router = RouterParams::Gtb(GtbParams {
            n_stages: stages,
            ..Default::default()
        });
        let (corpus, _) = generate_corpus(&config.synth_config())?;
        let valid: Vec<_> = corpus
            .into_iter()
            .filter(|r| r.relation == Some(RelationLabel::Valid))
            .collect();
        let text = Resources::shipped().text_pipeline(&config);
        let docs: Vec<_> = valid
            .iter()
            .map(|r| analyze_record(&text, r).document)
            .collect();
        let labels: Vec<usize> = valid
            .iter()
            .map(|r| r.department.expect("valid records are routed").index())
            .collect();
        let keys: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
        let folds = split_folds_by_key(
            valid.iter().map(|r| r.id.clone()).collect(),
            &keys,
            5,
            config.fold_seed(),
        )?;
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..valid.len()).partition(|&i| folds.fold_of[i] == 0);

        let train_docs: Vec<_> = train.iter().map(|&i| &docs[i]).collect();
        let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let vocab = fit_router_vocabulary(&train_docs, &train_labels, &config)?;
        let x = vectorize_all(train_docs.iter().copied(), &vocab, config.term_options());
        let model = train_router(
            &config.router,
            &x,
            &train_labels,
            Department::COUNT,
            config.router_seed(),
        )?;
        let xt = vectorize_all(
            test.iter().map(|&i| &docs[i]),
            &vocab,
            config.term_options(),
        );
        let held_out = model
            .predict_matrix(&xt)?
            .into_iter()
            .zip(&test)
            .map(|((_, scores), &i)| (labels[i], scores))
            .collect();
        Ok(Engine {
            config,
            text,
            vocab,
            model,
            held_out,
            train_size: train.len(),
        })
    }

    pub fn summary_json(&self) -> String {
        let mut conf = ConfusionMatrix::new(Department::COUNT);
        for (truth, scores) in &self.held_out {
            conf.add(*truth, triage_core::router::argmax(scores))
                .expect("classes in range");
        }
        let wa = weighted_accuracy(&conf, &ClassWeights::shipped()).unwrap_or(f64::NAN);
        json!({
            "train": self.train_size,
            "test": self.held_out.len(),
            "features": self.vocab.len(),
            "accuracy": conf.correct() as f64 / conf.total().max(1) as f64,
            "weighted_accuracy": wa,
        })
        .to_string()
    }

    /// The three best departments for a free-text detail.
    pub fn route_json(&self, detail: &str) -> String {
        let doc = self.text.analyze(detail);
        let x = vectorize_all([&doc], &self.vocab, self.config.term_options());
        let (_, scores) = self
            .model
            .predict(&x.dense_row(0))
            .expect("width matches vocabulary");
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let top: Vec<Value> = ranked
            .iter()
            .take(3)
            .map(|&(d, s)| json!({"department": Department::ALL[d].name(), "score": s}))
            .collect();
        Value::Array(top).to_string()
    }

    /// Held-out one-vs-rest ROC for a department, or an error message when
    /// the held-out set lacks positives or negatives.
    pub fn roc_json(&self, department: &str) -> std::result::Result<String, String> {
        let d: Department = department
            .parse()
            .map_err(|e: triage_core::Error| e.to_string())?;
        let scores: Vec<f64> = self.held_out.iter().map(|(_, s)| s[d.index()]).collect();
        let truth: Vec<bool> = self.held_out.iter().map(|(t, _)| *t == d.index()).collect();
        let roc = roc_auc(&scores, &truth).map_err(|e| e.to_string())?;
        Ok(json!({"auc": roc.auc, "points": roc.points}).to_string())
    }
}
