use std::collections::BTreeSet;

use proptest::prelude::*;
use triage_core::corpus::{
    generate_corpus, keyword_oracle, parse_records, serialize_records, split_folds, Department,
    RelationLabel, SynthConfig,
};
use triage_core::textprep::Lexicon;

#[test]
fn noiseless_valid_records_are_recovered_by_keyword_lookup() {
    let config = SynthConfig {
        n_records: 2000,
        seed: 11,
        noise_rate: 0.0,
        abbreviation_rate: 0.0,
        ..Default::default()
    };
    let (records, _) = generate_corpus(&config).unwrap();
    let lex = Lexicon::shipped();
    let mut checked = 0;
    for r in records
        .iter()
        .filter(|r| r.relation == Some(RelationLabel::Valid))
    {
        assert_eq!(
            keyword_oracle(&r.detail, &lex),
            r.department,
            "{}: {}",
            r.id,
            r.detail
        );
        checked += 1;
    }
    assert!(checked > 1000);
}

#[test]
fn abbreviations_are_undone_by_the_lexicon() {
    let config = SynthConfig {
        n_records: 1000,
        seed: 5,
        noise_rate: 0.0,
        abbreviation_rate: 1.0,
        ..Default::default()
    };
    let (records, _) = generate_corpus(&config).unwrap();
    let lex = Lexicon::shipped();
    let hits = records
        .iter()
        .filter(|r| r.relation == Some(RelationLabel::Valid))
        .filter(|r| keyword_oracle(&r.detail, &lex) == r.department)
        .count();
    let valid = records
        .iter()
        .filter(|r| r.relation == Some(RelationLabel::Valid))
        .count();
    assert_eq!(hits, valid);
}

#[test]
fn generation_is_byte_identical_and_round_trips() {
    let config = SynthConfig {
        n_records: 500,
        seed: 21,
        ..Default::default()
    };
    let a = serialize_records(&generate_corpus(&config).unwrap().0);
    let b = serialize_records(&generate_corpus(&config).unwrap().0);
    assert_eq!(a, b);
    let parsed = parse_records(&a);
    assert!(parsed.errors.is_empty());
    assert_eq!(serialize_records(&parsed.records), a);
    let other = serialize_records(
        &generate_corpus(&SynthConfig { seed: 22, ..config })
            .unwrap()
            .0,
    );
    assert_ne!(a, other);
}

#[test]
fn class_mix_zero_excludes_a_department() {
    let mut config = SynthConfig {
        n_records: 800,
        seed: 2,
        ..Default::default()
    };
    let boom = config.class_mix.remove(&Department::Boom).unwrap();
    *config.class_mix.get_mut(&Department::Auger).unwrap() += boom;
    let (records, _) = generate_corpus(&config).unwrap();
    assert!(records
        .iter()
        .all(|r| r.department != Some(Department::Boom)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn folds_partition_the_records(n in 10usize..200, k in 2usize..10, seed in any::<u64>()) {
        let (records, _) = generate_corpus(&SynthConfig { n_records: n, seed, ..Default::default() }).unwrap();
        let folds = split_folds(&records, k, seed).unwrap();
        let mut seen = BTreeSet::new();
        for f in 0..k {
            for i in folds.members(f) {
                prop_assert!(seen.insert(i), "record {} in two folds", i);
            }
        }
        prop_assert_eq!(seen.len(), n);
        let sizes = folds.fold_sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }
}
