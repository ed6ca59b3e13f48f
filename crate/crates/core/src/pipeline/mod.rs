//! Configuration, model directories and the synth / train / eval / route
//! stages behind the command line tool.
//!
//! A run is fully determined by its [`PipelineConfig`], the lexicon and
//! weights files and the corpus. The config fingerprint hashes the first
//! two; every artifact carries it together with the seed.

mod config;
mod data;
mod io;
mod models;
mod stages;

pub use config::{config_fingerprint, sha256_hex, FeatureParams, PipelineConfig, Resources};
pub use data::{
    analyze_record, analyze_records, check_labels, fit_router_vocabulary, AnalyzedRecord,
    RoutingSet,
};
pub use io::{read_records, records_from_text, strip_stamp, write_atomic};
pub use models::{Manifest, RoutingDecision, TrainedModels, MANIFEST};
pub use stages::{check_compatible, corpus_sha256, evaluate, synth, train, EvalReport};
