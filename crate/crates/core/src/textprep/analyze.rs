use serde::{Deserialize, Serialize};

use crate::textprep::pos::tag_generic;
use crate::textprep::{
    apply_stop_rules_tokens, normalize, strip_vague_phrases, tag_pos, tokenize, tokenize_plain,
    Lexicon, TaggedToken,
};

/// Which front-end to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    /// Lexicon-driven: abbreviations, terms, multiword expressions, overrides.
    #[default]
    Domain,
    /// Generic baseline: whitespace split, plain stop list, suffix tagging.
    Plain,
}

/// A preprocessed text: one token list per service-task segment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    pub segments: Vec<Vec<TaggedToken>>,
    /// Some vague phrase was removed and nothing else was left.
    pub vague: bool,
}

impl Document {
    pub fn tokens(&self) -> impl Iterator<Item = &TaggedToken> {
        self.segments.iter().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.iter().all(|s| s.is_empty())
    }
}

/// Full preprocessing chain for one mode.
#[derive(Debug, Clone)]
pub struct TextPipeline {
    pub lexicon: Lexicon,
    pub mode: TextMode,
}

impl TextPipeline {
    pub fn new(lexicon: Lexicon, mode: TextMode) -> Self {
        TextPipeline { lexicon, mode }
    }

    pub fn analyze(&self, text: &str) -> Document {
        let mut doc = Document::default();
        let mut any_vague = false;
        for segment in normalize(text) {
            let tokens = match self.mode {
                TextMode::Domain => {
                    let (kept, flag) = strip_vague_phrases(&segment, &self.lexicon);
                    any_vague |= flag || kept.len() < segment.len();
                    let tokens = tokenize(&kept, &self.lexicon);
                    tag_pos(
                        apply_stop_rules_tokens(tokens, &self.lexicon, true),
                        &self.lexicon,
                    )
                }
                TextMode::Plain => tag_generic(apply_stop_rules_tokens(
                    tokenize_plain(&segment),
                    &self.lexicon,
                    false,
                )),
            };
            if !tokens.is_empty() {
                doc.segments.push(tokens);
            }
        }
        doc.vague = any_vague && doc.segments.is_empty();
        doc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::Tag;

    fn texts(doc: &Document) -> Vec<Vec<&str>> {
        doc.segments
            .iter()
            .map(|s| s.iter().map(|t| t.text.as_str()).collect())
            .collect()
    }

    #[test]
    fn domain_pipeline() {
        let p = TextPipeline::new(Lexicon::shipped(), TextMode::Domain);
        let doc = p.analyze("Unit DWN--HYD leaks at upr vlv--replaced gasket PN9700007824");
        assert_eq!(
            texts(&doc),
            [
                vec!["unit down"],
                vec!["hydraulic leak", "upper valve"],
                vec!["replaced", "gasket", "pn9700007824"]
            ]
        );
        assert_eq!(doc.segments[2][2].tag, Tag::PartNumber);
        assert!(!doc.vague);
    }

    #[test]
    fn vague_documents() {
        let p = TextPipeline::new(Lexicon::shipped(), TextMode::Domain);
        assert!(p.analyze("Service needed").vague);
        assert!(p.analyze("service needed -- see notes").vague);
        assert!(!p.analyze("").vague);
        assert!(!p.analyze("service needed -- boom hose").vague);
    }

    #[test]
    fn plain_pipeline() {
        let p = TextPipeline::new(Lexicon::shipped(), TextMode::Plain);
        let doc = p.analyze("replaced upr vlv, an 50 hose");
        assert_eq!(texts(&doc), [vec!["replaced", "upr", "vlv,", "50", "hose"]]);
    }
}
