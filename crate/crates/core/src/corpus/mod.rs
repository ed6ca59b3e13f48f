//! Service records, record files, cross-validation folds and the synthetic
//! corpus generator.

mod banks;
mod folds;
mod record;
mod synth;

pub use banks::{department_bank, DepartmentBank, ABBREVIATIONS, VAGUE_CALL_LOGS};
pub use folds::{split_folds, split_folds_by_key, FoldAssignment};
pub use record::{
    parse_records, parse_truth, serialize_record, serialize_records, write_truth, Department,
    LineError, Ownership, ParsedRecords, RelationLabel, ServiceRecord, TruthEntry,
};
pub use synth::{generate_corpus, keyword_oracle, GroundTruth, SynthConfig};
