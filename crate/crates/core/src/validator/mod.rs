//! CNN-BiLSTM request validator.
//!
//! A (call log, detail) token pair is embedded as `call_log, SEP, detail`,
//! zero padded to `seq_len` rows, convolved with full-width filters of
//! several window sizes, and max pooled. The pooled vector goes through
//! dropout and a dense ReLU layer; the per-position convolution outputs
//! feed a bidirectional LSTM. The dense output and the two final LSTM
//! states are concatenated, dropped out again and mapped to class
//! probabilities by a softmax head.

mod cooc;
mod gradcheck;
mod net;
mod train;

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded, SeededRng};

pub use gradcheck::{
    grad_check, loss_difference, relative_error, GradCheckOptions, GradCheckReport, TensorCheck,
};
pub use net::softmax;
pub use train::{train_validator, EpochStats, TrainHistory};

use net::Net;

/// What the recurrent layer reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LstmInput {
    /// Per-position concatenation of all filter outputs.
    #[default]
    PooledSequence,
    /// The dense layer output as a one-step sequence.
    DenseOutput,
}

/// Parameter update rule. `learning_rate` is the step size of either.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Gradient descent with heavy-ball `momentum`.
    #[default]
    Momentum,
    /// Adam with beta1 0.9, beta2 0.999, epsilon 1e-8; `momentum` is unused.
    Adam,
}

/// Starting point of the embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingInit {
    /// Uniform in [-0.05, 0.05].
    #[default]
    Uniform,
    /// Random projections of each word's positive PMI row, counted over the
    /// training texts (call log and detail separately, labels unused), scaled
    /// to unit length. The rows are much longer than uniform ones so the
    /// early updates do not wash the structure out.
    Cooccurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub seq_len: usize,
    pub embed_dim: usize,
    pub filter_sizes: Vec<usize>,
    pub filters_per_size: usize,
    pub lstm_hidden: usize,
    pub dense_hidden: usize,
    pub dropout_p: f64,
    pub classes: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub optimizer: Optimizer,
    /// Global gradient norm cap; 0 disables clipping.
    pub grad_clip: f64,
    /// Share of the training records held out to drive learning-rate decay.
    pub validation_fraction: f64,
    /// Epochs without validation-loss improvement before halving the rate.
    pub plateau_patience: usize,
    pub lstm_input: LstmInput,
    /// Largest vocabulary kept (most frequent tokens first).
    pub max_vocab: usize,
    /// Tokens seen fewer times map to UNK.
    pub min_count: usize,
    /// Give call-log tokens their own vocabulary entries, so a word has one
    /// embedding row per side of the separator.
    pub mark_call_log: bool,
    pub embedding_init: EmbeddingInit,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            seq_len: 500,
            embed_dim: 100,
            filter_sizes: vec![2, 3, 4],
            filters_per_size: 200,
            lstm_hidden: 64,
            dense_hidden: 100,
            dropout_p: 0.5,
            classes: 3,
            batch_size: 200,
            epochs: 15,
            learning_rate: 0.01,
            momentum: 0.9,
            optimizer: Optimizer::Momentum,
            grad_clip: 5.0,
            validation_fraction: 0.1,
            plateau_patience: 2,
            lstm_input: LstmInput::PooledSequence,
            max_vocab: 20_000,
            min_count: 2,
            mark_call_log: false,
            embedding_init: EmbeddingInit::Uniform,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let max_h = self.filter_sizes.iter().copied().max().unwrap_or(0);
        if self.filter_sizes.is_empty() || self.filter_sizes.contains(&0) {
            return Err(Error::config(
                "filter_sizes must be a non-empty list of positive window lengths",
            ));
        }
        if self.seq_len < max_h {
            return Err(Error::config(format!(
                "seq_len {} is shorter than the largest filter ({max_h})",
                self.seq_len
            )));
        }
        for (name, v) in [
            ("embed_dim", self.embed_dim),
            ("filters_per_size", self.filters_per_size),
            ("lstm_hidden", self.lstm_hidden),
            ("dense_hidden", self.dense_hidden),
            ("batch_size", self.batch_size),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be positive")));
            }
        }
        if self.classes < 2 {
            return Err(Error::config("classes must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::config(format!(
                "dropout_p {} must lie in [0, 1)",
                self.dropout_p
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum must lie in [0, 1)"));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip >= 0.0) {
            return Err(Error::config("grad_clip must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config("validation_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// A call log and a detail, already tokenized.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenPair {
    pub call_log: Vec<String>,
    pub detail: Vec<String>,
}

pub const UNK: usize = 0;
pub const SEP: usize = 1;

/// Token vocabulary of the validator. Id 0 is UNK, id 1 the separator,
/// words start at 2.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidatorVocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl ValidatorVocab {
    pub fn from_words(words: Vec<String>) -> Result<ValidatorVocab> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i + 2).is_some() {
                return Err(Error::input(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(ValidatorVocab { words, index })
    }

    /// Most frequent tokens first, ties by token; at most `max_size`
    /// words seen at least `min_count` times. With `mark_call_log`,
    /// call-log tokens are counted under [`call_log_key`].
    pub fn build<'a, I>(
        pairs: I,
        max_size: usize,
        min_count: usize,
        mark_call_log: bool,
    ) -> ValidatorVocab
    where
        I: IntoIterator<Item = &'a TokenPair>,
    {
        let mut counts: HashMap<Cow<'a, str>, usize> = HashMap::new();
        for pair in pairs {
            for t in &pair.call_log {
                *counts.entry(call_log_key(t, mark_call_log)).or_default() += 1;
            }
            for t in &pair.detail {
                *counts.entry(Cow::Borrowed(t.as_str())).or_default() += 1;
            }
        }
        let mut ranked: Vec<(Cow<str>, usize)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count.max(1))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(max_size);
        Self::from_words(ranked.into_iter().map(|(w, _)| w.into_owned()).collect())
            .expect("counted words are distinct")
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Number of embedding rows, including UNK and the separator.
    pub fn rows(&self) -> usize {
        self.words.len() + 2
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Vocabulary key of a call-log token: the token itself, or prefixed with
/// `call|` when call-log tokens are marked. Normalized text never contains
/// `|`, so marked keys cannot collide with detail tokens.
pub fn call_log_key(token: &str, marked: bool) -> Cow<'_, str> {
    if marked {
        Cow::Owned(format!("call|{token}"))
    } else {
        Cow::Borrowed(token)
    }
}

/// Inference or training behaviour of [`ValidatorModel::forward`].
pub enum Mode<'a> {
    Infer,
    /// Draws dropout masks from the given generator.
    Train(&'a mut SeededRng),
}

#[derive(Debug, Clone)]
pub struct ValidatorModel {
    config: NetConfig,
    vocab: ValidatorVocab,
    net: Net,
    params: Vec<f64>,
}

/// Borrowed weights of one LSTM direction; gates are stacked in the order
/// input, forget, candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights<'a> {
    pub hidden: usize,
    /// `[4·hidden, input]`, row-major.
    pub w_input: &'a [f64],
    /// `[4·hidden, hidden]`, row-major.
    pub w_hidden: &'a [f64],
    pub bias: &'a [f64],
}

impl ValidatorModel {
    /// A freshly initialized model; initialization is seeded from
    /// `config.seed`.
    pub fn new(config: NetConfig, vocab: ValidatorVocab) -> Result<ValidatorModel> {
        config.validate()?;
        let net = Net::new(&config, vocab.rows());
        let params = net.init(&mut seeded(derive_seed(config.seed, "validator-init")));
        Ok(ValidatorModel {
            config,
            vocab,
            net,
            params,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn vocab(&self) -> &ValidatorVocab {
        &self.vocab
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Names and shapes of the parameter tensors, in storage order.
    pub fn tensor_shapes(&self) -> Vec<(String, Vec<usize>)> {
        self.net
            .tensors
            .iter()
            .map(|t| (t.name.clone(), t.shape.clone()))
            .collect()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        let t = self.net.tensors.iter().find(|t| t.name == name)?;
        Some(&self.params[t.offset..t.offset + t.len()])
    }

    /// Overwrites embedding rows with co-occurrence vectors built from
    /// `pairs`; see [`EmbeddingInit::Cooccurrence`].
    pub fn init_embeddings_from_cooccurrence(&mut self, pairs: &[TokenPair]) {
        let dim = self.config.embed_dim;
        let mut rng = seeded(derive_seed(self.config.seed, "validator-embedding"));
        let rows = cooc::embedding_rows(&self.vocab, pairs, dim, 1.0, &mut rng);
        let table = self.tensor_mut("embedding").expect("embedding tensor");
        for (id, row) in rows.into_iter().enumerate() {
            if let Some(row) = row {
                table[id * dim..(id + 1) * dim].copy_from_slice(&row);
            }
        }
    }

    pub fn tensor_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let t = self.net.tensors.iter().find(|t| t.name == name)?;
        Some(&mut self.params[t.offset..t.offset + t.len()])
    }

    /// Token ids: call log, separator, detail. When the pair is longer than
    /// `seq_len` the detail is truncated first.
    pub fn encode(&self, pair: &TokenPair) -> Vec<usize> {
        let d = self.config.seq_len;
        let call: Vec<usize> = pair
            .call_log
            .iter()
            .take(d.saturating_sub(1))
            .map(|t| self.vocab.id(&call_log_key(t, self.config.mark_call_log)))
            .collect();
        let room = d.saturating_sub(call.len() + 1);
        let mut ids = call;
        ids.push(SEP);
        ids.extend(pair.detail.iter().take(room).map(|t| self.vocab.id(t)));
        ids.truncate(d);
        ids
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.vocab.rows()) {
            Some(id) => Err(Error::Mismatch(format!(
                "token id {id} outside the model vocabulary ({} rows)",
                self.vocab.rows()
            ))),
            None => Ok(()),
        }
    }

    /// Class probabilities for encoded token ids.
    pub fn forward(&self, ids: &[usize], mode: Mode<'_>) -> Result<Vec<f64>> {
        self.check_ids(ids)?;
        let trace = match mode {
            Mode::Infer => self.net.forward::<SeededRng>(&self.params, ids, None),
            Mode::Train(rng) => {
                self.net
                    .forward(&self.params, ids, Some((rng, self.config.dropout_p)))
            }
        };
        Ok(trace.probs)
    }

    pub fn predict(&self, pair: &TokenPair) -> Vec<f64> {
        let ids = self.encode(pair);
        self.net
            .forward::<SeededRng>(&self.params, &ids, None)
            .probs
    }

    /// The merged BiLSTM state (forward last, backward first) in infer mode.
    pub fn merged_state(&self, ids: &[usize]) -> Result<Vec<f64>> {
        self.check_ids(ids)?;
        let trace = self.net.forward::<SeededRng>(&self.params, ids, None);
        Ok(trace.merged_state(&self.net))
    }

    /// The `seq_len × embed_dim` input matrix.
    pub fn embed(&self, ids: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.check_ids(ids)?;
        let s = self.config.embed_dim;
        let emb = self.tensor("embedding").expect("embedding tensor");
        Ok((0..self.config.seq_len)
            .map(|t| match ids.get(t) {
                Some(&id) => emb[id * s..(id + 1) * s].to_vec(),
                None => vec![0.0; s],
            })
            .collect())
    }

    /// Per filter size, per filter, the activation sequence of length
    /// `seq_len - h + 1`.
    pub fn conv_forward(&self, matrix: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
        self.config
            .filter_sizes
            .iter()
            .map(|&h| {
                let w = self
                    .tensor(&format!("conv{h}.weight"))
                    .expect("conv weight");
                let b = self.tensor(&format!("conv{h}.bias")).expect("conv bias");
                conv1d(matrix, w, b, h)
            })
            .collect()
    }

    pub fn lstm_weights(&self, direction: &str) -> LstmWeights<'_> {
        LstmWeights {
            hidden: self.config.lstm_hidden,
            w_input: self
                .tensor(&format!("lstm_{direction}.w_input"))
                .expect("lstm weights"),
            w_hidden: self
                .tensor(&format!("lstm_{direction}.w_hidden"))
                .expect("lstm weights"),
            bias: self
                .tensor(&format!("lstm_{direction}.bias"))
                .expect("lstm weights"),
        }
    }

    pub fn bilstm_forward(&self, sequence: &[Vec<f64>]) -> Vec<f64> {
        bilstm_forward(
            sequence,
            &self.lstm_weights("fwd"),
            &self.lstm_weights("bwd"),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.params.len() != self.net.n_params {
            return Err(Error::Mismatch(format!(
                "{} parameters, layout needs {}",
                self.params.len(),
                self.net.n_params
            )));
        }
        if let Some(i) = self.params.iter().position(|v| !v.is_finite()) {
            let t = self
                .net
                .tensors
                .iter()
                .find(|t| i >= t.offset && i < t.offset + t.len())
                .expect("layout covers params");
            return Err(Error::Numeric(format!(
                "non-finite value in tensor {}",
                t.name
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        self.to_json_with_meta(&BTreeMap::new())
    }

    /// Like [`to_json`](Self::to_json) with extra string fields (run
    /// fingerprint, seed) stored under `meta`.
    pub fn to_json_with_meta(&self, meta: &BTreeMap<String, String>) -> String {
        let file = ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            meta: meta.clone(),
            config: self.config.clone(),
            vocab_hash: self.vocab.hash(),
            vocab: self.vocab.words.clone(),
            tensors: self
                .net
                .tensors
                .iter()
                .map(|t| TensorFile {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    values: self.params[t.offset..t.offset + t.len()].to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<ValidatorModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::input(format!(
                "not a validator model (format {:?} version {})",
                file.format, file.version
            )));
        }
        let vocab = ValidatorVocab::from_words(file.vocab)?;
        if vocab.hash() != file.vocab_hash {
            return Err(Error::Mismatch(format!(
                "validator vocabulary hash {} does not match the recorded {}",
                vocab.hash(),
                file.vocab_hash
            )));
        }
        file.config.validate()?;
        let net = Net::new(&file.config, vocab.rows());
        if file.tensors.len() != net.tensors.len() {
            return Err(Error::Mismatch(format!(
                "{} tensors, config needs {}",
                file.tensors.len(),
                net.tensors.len()
            )));
        }
        let mut params = Vec::with_capacity(net.n_params);
        for (got, want) in file.tensors.into_iter().zip(&net.tensors) {
            if got.name != want.name || got.shape != want.shape || got.values.len() != want.len() {
                return Err(Error::Mismatch(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    got.name, got.shape, want.name, want.shape
                )));
            }
            params.extend(got.values);
        }
        let model = ValidatorModel {
            config: file.config,
            vocab,
            net,
            params,
        };
        model.validate()?;
        Ok(model)
    }

    /// Loads a model and checks it was built on the expected vocabulary.
    pub fn from_json_expecting(text: &str, vocab_hash: &str) -> Result<ValidatorModel> {
        let model = Self::from_json(text)?;
        if model.vocab.hash() != vocab_hash {
            return Err(Error::Mismatch(format!(
                "validator vocabulary hash {} differs from the expected {vocab_hash}",
                model.vocab.hash()
            )));
        }
        Ok(model)
    }
}

const FORMAT: &str = "triage-validator";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorFile {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, String>,
    config: NetConfig,
    vocab_hash: String,
    vocab: Vec<String>,
    tensors: Vec<TensorFile>,
}

/// Full-width 1-D convolution along the row axis followed by ReLU.
/// `weights` is `[filters, h, cols]`; returns `[filters][rows - h + 1]`.
pub fn conv1d(matrix: &[Vec<f64>], weights: &[f64], bias: &[f64], h: usize) -> Vec<Vec<f64>> {
    let cols = matrix.first().map_or(0, |r| r.len());
    let n_out = matrix.len() + 1 - h;
    bias.iter()
        .enumerate()
        .map(|(j, &b)| {
            (0..n_out)
                .map(|t| {
                    let mut z = b;
                    for u in 0..h {
                        for k in 0..cols {
                            z += weights[(j * h + u) * cols + k] * matrix[t + u][k];
                        }
                    }
                    z.max(0.0)
                })
                .collect()
        })
        .collect()
}

/// Per-filter maxima over all sizes, and the per-position concatenation of
/// every filter output truncated to the shortest map.
pub fn max_pool(maps: &[Vec<Vec<f64>>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let pooled = maps
        .iter()
        .flatten()
        .map(|seq| seq.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let len = maps.iter().flatten().map(|s| s.len()).min().unwrap_or(0);
    let sequence = (0..len)
        .map(|t| maps.iter().flatten().map(|s| s[t]).collect())
        .collect();
    (pooled, sequence)
}

fn lstm_final(sequence: &[Vec<f64>], w: &LstmWeights<'_>, reverse: bool) -> Vec<f64> {
    let n = w.hidden;
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
    let order: Vec<usize> = if reverse {
        (0..sequence.len()).rev().collect()
    } else {
        (0..sequence.len()).collect()
    };
    for t in order {
        let x = &sequence[t];
        let z: Vec<f64> = (0..4 * n)
            .map(|r| {
                w.bias[r]
                    + x.iter()
                        .enumerate()
                        .map(|(k, v)| w.w_input[r * x.len() + k] * v)
                        .sum::<f64>()
                    + h.iter()
                        .enumerate()
                        .map(|(k, v)| w.w_hidden[r * n + k] * v)
                        .sum::<f64>()
            })
            .collect();
        for k in 0..n {
            c[k] = sig(z[n + k]) * c[k] + sig(z[k]) * z[2 * n + k].tanh();
            h[k] = sig(z[3 * n + k]) * c[k].tanh();
        }
    }
    h
}

/// Final hidden state of the forward pass followed by that of the backward
/// pass (which ends at position 0).
pub fn bilstm_forward(
    sequence: &[Vec<f64>],
    fwd: &LstmWeights<'_>,
    bwd: &LstmWeights<'_>,
) -> Vec<f64> {
    let mut merged = lstm_final(sequence, fwd, false);
    merged.extend(lstm_final(sequence, bwd, true));
    merged
}
