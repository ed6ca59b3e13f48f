use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::SynthConfig;
use crate::error::{Error, Result};
use crate::features::TermOptions;
use crate::metrics::ClassWeights;
use crate::rng::derive_seed;
use crate::router::RouterParams;
use crate::textprep::{Lexicon, TextMode, TextPipeline};
use crate::validator::NetConfig;

/// Router feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureParams {
    /// Most frequent terms kept per category.
    pub top_k: usize,
    /// Features kept after chi-squared ranking.
    pub chi2_keep: usize,
    /// A candidate is dropped when its |correlation| with an admitted
    /// feature exceeds this.
    pub corr_threshold: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            top_k: 200,
            chi2_keep: 300,
            corr_threshold: 0.9,
        }
    }
}

/// Everything a run depends on. Loaded from TOML; every field is optional.
///
/// `seed` is the only seed that matters: the corpus, fold, validator and
/// router seeds are derived from it by name, and the `seed` fields inside
/// `[validator]` and `[synth]` are overwritten with the derived values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub folds: usize,
    /// Domain text processing; `false` is the plain-text baseline.
    pub domain_nlp: bool,
    /// Run the claim validator before routing.
    pub validation: bool,
    /// Train and evaluate the router on the Vague department too.
    pub include_vague_department: bool,
    /// Lexicon file; the shipped lexicon when absent.
    pub lexicon: Option<PathBuf>,
    /// Department weights file; the shipped weights when absent.
    pub weights: Option<PathBuf>,
    pub features: FeatureParams,
    pub validator: NetConfig,
    pub router: RouterParams,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            folds: 10,
            domain_nlp: true,
            validation: true,
            include_vague_department: false,
            lexicon: None,
            weights: None,
            features: FeatureParams::default(),
            validator: NetConfig::default(),
            router: RouterParams::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a TOML file. Relative `lexicon` and `weights` paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.lexicon, &mut config.weights]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::config(format!(
                "folds must be at least 2, got {}",
                self.folds
            )));
        }
        if self.features.chi2_keep == 0 {
            return Err(Error::config("features.chi2_keep must be at least 1"));
        }
        let t = self.features.corr_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::config(format!(
                "features.corr_threshold must be in (0, 1], got {t}"
            )));
        }
        self.validator.validate()?;
        if self.validator.classes != 3 {
            return Err(Error::config(
                "validator.classes must be 3 (Valid, False, Vague)",
            ));
        }
        Ok(())
    }

    pub fn text_mode(&self) -> TextMode {
        if self.domain_nlp {
            TextMode::Domain
        } else {
            TextMode::Plain
        }
    }

    /// The worthless-word filter is domain knowledge and goes with it.
    pub fn term_options(&self) -> TermOptions {
        TermOptions {
            drop_worthless: self.domain_nlp,
        }
    }

    pub fn fold_seed(&self) -> u64 {
        derive_seed(self.seed, "folds")
    }

    pub fn router_seed(&self) -> u64 {
        derive_seed(self.seed, "router")
    }

    pub fn net_config(&self) -> NetConfig {
        NetConfig {
            seed: derive_seed(self.seed, "validator"),
            ..self.validator.clone()
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            seed: derive_seed(self.seed, "corpus"),
            ..self.synth.clone()
        }
    }

    /// The config with derived seeds filled in.
    pub fn effective(&self) -> PipelineConfig {
        PipelineConfig {
            validator: self.net_config(),
            synth: self.synth_config(),
            ..self.clone()
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lexicon and department weights, with the text they were parsed from.
#[derive(Debug, Clone)]
pub struct Resources {
    pub lexicon: Lexicon,
    pub weights: ClassWeights,
    lexicon_text: String,
    weights_text: String,
}

impl Resources {
    pub fn shipped() -> Resources {
        Self::from_texts(
            Lexicon::shipped_text().to_string(),
            ClassWeights::shipped_text().to_string(),
        )
        .expect("shipped resources parse")
    }

    pub fn from_texts(lexicon_text: String, weights_text: String) -> Result<Resources> {
        let lexicon = Lexicon::parse(&lexicon_text)?;
        let weights = ClassWeights::parse_departments(&weights_text)?;
        Ok(Resources {
            lexicon,
            weights,
            lexicon_text,
            weights_text,
        })
    }

    /// The files named by the config, or the shipped ones.
    pub fn load(config: &PipelineConfig) -> Result<Resources> {
        let read = |path: &Option<PathBuf>, what: &str, shipped: &str| -> Result<String> {
            match path {
                None => Ok(shipped.to_string()),
                Some(p) => std::fs::read_to_string(p).map_err(|e| {
                    Error::config(format!("cannot read {what} file {}: {e}", p.display()))
                }),
            }
        };
        let lexicon_text = read(&config.lexicon, "lexicon", Lexicon::shipped_text())?;
        let weights_text = read(&config.weights, "weights", ClassWeights::shipped_text())?;
        let lexicon =
            Lexicon::parse(&lexicon_text).map_err(|e| Error::config(format!("lexicon: {e}")))?;
        let weights = ClassWeights::parse_departments(&weights_text)
            .map_err(|e| Error::config(format!("weights: {e}")))?;
        Ok(Resources {
            lexicon,
            weights,
            lexicon_text,
            weights_text,
        })
    }

    pub fn lexicon_text(&self) -> &str {
        &self.lexicon_text
    }

    pub fn weights_text(&self) -> &str {
        &self.weights_text
    }

    pub fn text_pipeline(&self, config: &PipelineConfig) -> TextPipeline {
        TextPipeline::new(self.lexicon.clone(), config.text_mode())
    }
}

/// Hex SHA-256 over the canonical JSON of the effective config, with the
/// lexicon and weights paths replaced by the hashes of their contents. Two
/// configs that would train the same models share a fingerprint.
pub fn config_fingerprint(config: &PipelineConfig, resources: &Resources) -> String {
    let mut value = serde_json::to_value(config.effective()).expect("config serializes");
    let obj = value.as_object_mut().expect("config is an object");
    obj.insert(
        "lexicon".into(),
        sha256_hex(resources.lexicon_text.as_bytes()).into(),
    );
    obj.insert(
        "weights".into(),
        sha256_hex(resources.weights_text.as_bytes()).into(),
    );
    sha256_hex(value.to_string().as_bytes())
}
