use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Department, RelationLabel, ServiceRecord};
use crate::error::{Error, Result};
use crate::features::{vectorize_all, Vocabulary};
use crate::pipeline::config::{sha256_hex, PipelineConfig, Resources};
use crate::pipeline::data::analyze_record;
use crate::pipeline::io::{read_text, stamp_header, strip_stamp, write_atomic};
use crate::router::{argmax, RouterModel};
use crate::textprep::TextPipeline;
use crate::validator::{TrainHistory, ValidatorModel};

pub const MANIFEST: &str = "manifest.json";
pub const VOCABULARY: &str = "vocab.tsv";
pub const ROUTER: &str = "router.json";
pub const VALIDATOR: &str = "validator.json";
pub const LEXICON: &str = "lexicon.txt";
pub const WEIGHTS: &str = "weights.tsv";
pub const HISTORY: &str = "validator_history.tsv";
pub const TRAIN_REPORT: &str = "train_report.txt";

const MANIFEST_FORMAT: &str = "triage-models";

/// Index of a model directory. Written last, so its presence means the
/// directory is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config_fingerprint: String,
    /// SHA-256 over the artifact table; equal for byte-identical models.
    pub models_fingerprint: String,
    pub seed: u64,
    pub corpus_sha256: String,
    pub records: usize,
    pub routing_records: usize,
    pub router_vocab_hash: String,
    pub validator_vocab_hash: Option<String>,
    pub config: PipelineConfig,
    /// File name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let text = read_text(&dir.join(MANIFEST), "model manifest")?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT || m.version != 1 {
            return Err(Error::input(format!(
                "{} is not a model manifest",
                dir.join(MANIFEST).display()
            )));
        }
        Ok(m)
    }
}

fn models_fingerprint(artifacts: &BTreeMap<String, String>) -> String {
    let table: String = artifacts
        .iter()
        .map(|(k, v)| format!("{k}\t{v}\n"))
        .collect();
    sha256_hex(table.as_bytes())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RouterFile {
    format: String,
    config_fingerprint: String,
    seed: u64,
    vocab_hash: String,
    model: RouterModel,
}

/// Everything `train` produces.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub config: PipelineConfig,
    pub resources: Resources,
    pub config_fingerprint: String,
    pub corpus_sha256: String,
    pub records: usize,
    pub routing_records: usize,
    pub router_vocab: Vocabulary,
    pub router: RouterModel,
    pub validator: Option<ValidatorModel>,
    pub history: Option<TrainHistory>,
    /// Metrics on the training data itself.
    pub train_report: String,
}

/// One routing outcome. `department` is set only for a Valid verdict, or
/// for every record when the pipeline runs without validation (then
/// `verdict` is absent).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingDecision {
    pub id: Option<String>,
    pub verdict: Option<RelationLabel>,
    pub relation_probabilities: Option<BTreeMap<RelationLabel, f64>>,
    pub department: Option<Department>,
    pub department_scores: BTreeMap<Department, f64>,
    pub fingerprint: String,
    pub seed: u64,
    pub error: Option<String>,
}

impl RoutingDecision {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("decisions serialize")
    }

    /// `id verdict department confidence`, tab separated, `-` for absent
    /// values.
    pub fn to_text(&self) -> String {
        if let Some(e) = &self.error {
            return format!(
                "{}\terror\t{}",
                self.id.as_deref().unwrap_or("-"),
                e.replace(['\t', '\n'], " ")
            );
        }
        let dash = || "-".to_string();
        let verdict = self.verdict.map_or_else(dash, |v| v.to_string());
        let (dept, conf) = match self.department {
            Some(d) => (d.to_string(), format!("{:.4}", self.department_scores[&d])),
            None => (dash(), dash()),
        };
        format!(
            "{}\t{verdict}\t{dept}\t{conf}",
            self.id.as_deref().unwrap_or("-")
        )
    }
}

impl TrainedModels {
    fn text_pipeline(&self) -> TextPipeline {
        self.resources.text_pipeline(&self.config)
    }

    fn meta(&self) -> BTreeMap<String, String> {
        [
            (
                "config_fingerprint".to_string(),
                self.config_fingerprint.clone(),
            ),
            ("seed".to_string(), self.config.seed.to_string()),
        ]
        .into_iter()
        .collect()
    }

    /// Serialized artifacts by file name.
    pub fn artifacts(&self) -> BTreeMap<String, Vec<u8>> {
        let stamp = stamp_header(&self.config_fingerprint, self.config.seed);
        let mut out = BTreeMap::new();
        out.insert(
            VOCABULARY.to_string(),
            format!("{stamp}{}", self.router_vocab.to_tsv()).into_bytes(),
        );
        let router = RouterFile {
            format: "triage-router".into(),
            config_fingerprint: self.config_fingerprint.clone(),
            seed: self.config.seed,
            vocab_hash: self.router_vocab.hash(),
            model: self.router.clone(),
        };
        out.insert(
            ROUTER.to_string(),
            serde_json::to_vec(&router).expect("router serializes"),
        );
        if let Some(v) = &self.validator {
            out.insert(
                VALIDATOR.to_string(),
                v.to_json_with_meta(&self.meta()).into_bytes(),
            );
        }
        if let Some(h) = &self.history {
            out.insert(
                HISTORY.to_string(),
                format!("{stamp}{}", h.to_tsv()).into_bytes(),
            );
        }
        out.insert(
            LEXICON.to_string(),
            self.resources.lexicon_text().as_bytes().to_vec(),
        );
        out.insert(
            WEIGHTS.to_string(),
            self.resources.weights_text().as_bytes().to_vec(),
        );
        out.insert(
            TRAIN_REPORT.to_string(),
            format!("{stamp}{}", self.train_report).into_bytes(),
        );
        out
    }

    pub fn manifest(&self) -> Manifest {
        let artifacts: BTreeMap<String, String> = self
            .artifacts()
            .iter()
            .map(|(k, v)| (k.clone(), sha256_hex(v)))
            .collect();
        Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            config_fingerprint: self.config_fingerprint.clone(),
            models_fingerprint: models_fingerprint(&artifacts),
            seed: self.config.seed,
            corpus_sha256: self.corpus_sha256.clone(),
            records: self.records,
            routing_records: self.routing_records,
            router_vocab_hash: self.router_vocab.hash(),
            validator_vocab_hash: self.validator.as_ref().map(|v| v.vocab().hash()),
            config: self.config.clone(),
            artifacts,
        }
    }

    /// Writes every artifact, then the manifest.
    pub fn save(&self, dir: &Path) -> Result<Manifest> {
        for (name, bytes) in self.artifacts() {
            write_atomic(&dir.join(name), &bytes)?;
        }
        let manifest = self.manifest();
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
        Ok(manifest)
    }

    /// Loads a model directory, checking every artifact against the
    /// manifest hashes.
    pub fn load(dir: &Path) -> Result<TrainedModels> {
        let manifest = Manifest::load(dir)?;
        let mut files = BTreeMap::new();
        for (name, hash) in &manifest.artifacts {
            let bytes = std::fs::read(dir.join(name)).map_err(|e| {
                Error::input(format!(
                    "cannot read model file {}: {e}",
                    dir.join(name).display()
                ))
            })?;
            if &sha256_hex(&bytes) != hash {
                return Err(Error::Mismatch(format!(
                    "{name} does not match its manifest hash; retrain"
                )));
            }
            let text = String::from_utf8(bytes)
                .map_err(|_| Error::input(format!("{name} is not UTF-8")))?;
            files.insert(name.clone(), text);
        }
        let file = |name: &str| {
            files
                .get(name)
                .ok_or_else(|| Error::input(format!("model directory lacks {name}")))
        };
        let resources = Resources::from_texts(file(LEXICON)?.clone(), file(WEIGHTS)?.clone())?;
        let router_vocab = Vocabulary::from_tsv(strip_stamp(file(VOCABULARY)?))?;
        if router_vocab.hash() != manifest.router_vocab_hash {
            return Err(Error::Mismatch(
                "router vocabulary hash differs from the manifest".into(),
            ));
        }
        let router: RouterFile = serde_json::from_str(file(ROUTER)?)?;
        if router.vocab_hash != manifest.router_vocab_hash {
            return Err(Error::Mismatch(
                "router was trained on a different vocabulary".into(),
            ));
        }
        router.model.validate()?;
        if router.model.n_features() != router_vocab.len() {
            return Err(Error::Mismatch(format!(
                "router expects {} features, vocabulary has {}",
                router.model.n_features(),
                router_vocab.len()
            )));
        }
        let validator = match &manifest.validator_vocab_hash {
            Some(h) => Some(ValidatorModel::from_json_expecting(file(VALIDATOR)?, h)?),
            None => None,
        };
        let train_report = files
            .get(TRAIN_REPORT)
            .map(|t| strip_stamp(t).to_string())
            .unwrap_or_default();
        Ok(TrainedModels {
            config: manifest.config,
            resources,
            config_fingerprint: manifest.config_fingerprint,
            corpus_sha256: manifest.corpus_sha256,
            records: manifest.records,
            routing_records: manifest.routing_records,
            router_vocab,
            router: router.model,
            validator,
            history: None,
            train_report,
        })
    }

    fn decision(&self, id: Option<String>) -> RoutingDecision {
        RoutingDecision {
            id,
            verdict: None,
            relation_probabilities: None,
            department: None,
            department_scores: BTreeMap::new(),
            fingerprint: self.config_fingerprint.clone(),
            seed: self.config.seed,
            error: None,
        }
    }

    pub fn route(&self, record: &ServiceRecord) -> Result<RoutingDecision> {
        self.route_with(&self.text_pipeline(), record)
    }

    fn route_with(&self, text: &TextPipeline, record: &ServiceRecord) -> Result<RoutingDecision> {
        let analyzed = analyze_record(text, record);
        let mut out = self.decision(Some(record.id.clone()));
        if let Some(v) = &self.validator {
            let probs = v.predict(&analyzed.pair);
            let verdict = RelationLabel::ALL[argmax(&probs)];
            out.relation_probabilities =
                Some(RelationLabel::ALL.iter().copied().zip(probs).collect());
            out.verdict = Some(verdict);
            if verdict != RelationLabel::Valid {
                return Ok(out);
            }
        }
        let x = vectorize_all(
            [&analyzed.document],
            &self.router_vocab,
            self.config.term_options(),
        );
        let (class, scores) = self.router.predict(&x.dense_row(0))?;
        out.department = Department::from_index(class);
        out.department_scores = Department::ALL.iter().copied().zip(scores).collect();
        Ok(out)
    }

    /// Routes every line of a record stream. Blank lines are skipped; a
    /// line that does not parse yields a decision carrying the error.
    pub fn route_lines(&self, input: &str) -> Vec<RoutingDecision> {
        let text = self.text_pipeline();
        let mut out = Vec::new();
        for (i, line) in input.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            out.push(self.route_line(&text, i + 1, line));
        }
        out
    }

    fn route_line(&self, text: &TextPipeline, line_no: usize, line: &str) -> RoutingDecision {
        let parsed = crate::corpus::parse_records(line);
        let result = match (
            parsed.records.into_iter().next(),
            parsed.errors.into_iter().next(),
        ) {
            (Some(record), _) => self.route_with(text, &record),
            (None, Some(e)) => Err(Error::Parse {
                line: line_no,
                message: e.message,
            }),
            (None, None) => Err(Error::Parse {
                line: line_no,
                message: "empty line".into(),
            }),
        };
        result.unwrap_or_else(|e| {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string));
            RoutingDecision {
                error: Some(e.to_string()),
                ..self.decision(id)
            }
        })
    }
}
