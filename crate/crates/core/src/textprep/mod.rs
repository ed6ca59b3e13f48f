//! Preprocessing and the lexical front-end.
//!
//! The domain path runs: [`normalize`] → [`strip_vague_phrases`] →
//! [`tokenize`] (term recognition + multiword merging) → stop rules →
//! [`tag_pos`]. The plain path used for ablation runs normalize →
//! whitespace split → generic stop words → generic tagging.

mod analyze;
mod lemma;
mod lexicon;
mod pos;
mod terms;
mod tokenize;

pub use analyze::{Document, TextMode, TextPipeline};
pub use lemma::{lemmatize, lemmatize_generic};
pub use lexicon::{Lexicon, MwePattern, NextClass, StopAction, StopException};
pub use pos::{tag_pos, Tag};
pub use terms::{recognize_terms, TermKind, TermMatch};
pub use tokenize::{
    apply_stop_rules, apply_stop_rules_tokens, tokenize, tokenize_plain, words, TaggedToken,
};

/// Lowercases, splits into service-task segments on `--` and newlines,
/// collapses inner whitespace and drops empty segments.
pub fn normalize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    lowered
        .split('\n')
        .flat_map(|line| line.split("--"))
        .map(|s| s.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|s| !s.is_empty())
        .collect()
}

/// Removes every listed vague phrase (whole-word match). The flag is true
/// iff something was removed and nothing is left.
pub fn strip_vague_phrases(segment: &str, lexicon: &Lexicon) -> (String, bool) {
    let mut words: Vec<&str> = segment.split_whitespace().collect();
    let mut removed = false;
    for phrase in lexicon.vague_phrases() {
        let target: Vec<&str> = phrase.split(' ').collect();
        let mut i = 0;
        while i + target.len() <= words.len() {
            if words[i..i + target.len()] == target[..] {
                words.drain(i..i + target.len());
                removed = true;
            } else {
                i += 1;
            }
        }
    }
    let out = words.join(" ");
    let flag = removed && out.is_empty();
    (out, flag)
}

/// All contiguous `n`-token sequences of one segment, joined by a space.
pub fn extract_ngrams(tokens: &[TaggedToken], n: usize) -> Vec<String> {
    assert!(n >= 1, "n-gram order must be at least 1");
    tokens
        .windows(n)
        .map(|w| {
            w.iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
