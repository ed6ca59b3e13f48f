use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::textprep::lemma::is_inflected_verb;
use crate::textprep::{Lexicon, TaggedToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Number,
    ModelId,
    PartNumber,
    Other,
}

impl Tag {
    pub fn code(self) -> &'static str {
        match self {
            Tag::Noun => "NOUN",
            Tag::Verb => "VERB",
            Tag::Adjective => "ADJ",
            Tag::Adverb => "ADV",
            Tag::Number => "NUM",
            Tag::ModelId => "MODEL",
            Tag::PartNumber => "PART",
            Tag::Other => "OTHER",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "NOUN" => Tag::Noun,
            "VERB" => Tag::Verb,
            "ADJ" | "ADJECTIVE" => Tag::Adjective,
            "ADV" | "ADVERB" => Tag::Adverb,
            "NUM" | "NUMBER" => Tag::Number,
            "MODEL" => Tag::ModelId,
            "PART" => Tag::PartNumber,
            "OTHER" => Tag::Other,
            other => return Err(Error::input(format!("unknown POS tag {other:?}"))),
        })
    }
}

/// Generic adjective list for the fallback tagger.
const ADJECTIVES: &[&str] = &[
    "bad",
    "good",
    "new",
    "old",
    "loose",
    "low",
    "high",
    "upper",
    "lower",
    "left",
    "right",
    "front",
    "rear",
    "hot",
    "cold",
    "faulty",
    "weak",
    "dead",
    "main",
    "small",
    "large",
    "minor",
    "major",
    "rough",
    "noisy",
    "dirty",
    "slow",
    "fast",
    "intermittent",
    "inoperable",
    "annual",
    "general",
    "down",
    "stuck",
];

pub(crate) fn fallback_tag(token: &TaggedToken) -> Tag {
    let text = token.text.as_str();
    if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) {
        return Tag::Number;
    }
    if text.len() > 4 && text.ends_with("ly") {
        return Tag::Adverb;
    }
    if is_inflected_verb(text, &token.lemma) {
        return Tag::Verb;
    }
    if ADJECTIVES.contains(&text) {
        return Tag::Adjective;
    }
    Tag::Noun
}

/// Assigns POS tags. Lexicon overrides are authoritative; multiword tokens
/// are nouns; recognized terms keep their tag; everything else falls back
/// to suffix heuristics and a small adjective list.
pub fn tag_pos(tokens: Vec<TaggedToken>, lexicon: &Lexicon) -> Vec<TaggedToken> {
    tokens
        .into_iter()
        .map(|mut t| {
            t.tag = if let Some(tag) = lexicon
                .pos_override(&t.text)
                .or_else(|| lexicon.pos_override(&t.lemma))
            {
                tag
            } else if matches!(t.tag, Tag::PartNumber | Tag::ModelId | Tag::Number) {
                t.tag
            } else if t.n >= 2 {
                Tag::Noun
            } else {
                fallback_tag(&t)
            };
            t
        })
        .collect()
}

/// Tagging without a lexicon, used by the ablation path.
pub(crate) fn tag_generic(tokens: Vec<TaggedToken>) -> Vec<TaggedToken> {
    tokens
        .into_iter()
        .map(|mut t| {
            t.tag = fallback_tag(&t);
            t
        })
        .collect()
}
