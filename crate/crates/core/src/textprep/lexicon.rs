use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::textprep::lemma::{lemmatize, lemmatize_generic};
use crate::textprep::Tag;

const SHIPPED: &str = include_str!("../../data/lexicon.txt");

/// A multiword expression. `key` holds the lemmatized words used for
/// matching; `text` is the canonical surface form emitted as the token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MwePattern {
    pub text: String,
    pub key: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextClass {
    /// The following token is all digits.
    Number,
    /// The following token is anything.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopAction {
    /// Glue the stop word to the next token (`an` + `50` → `an50`).
    Merge,
    /// Keep the stop word as its own token.
    Keep,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopException {
    pub word: String,
    pub next: NextClass,
    pub action: StopAction,
}

/// Domain word lists: abbreviations, multiword expressions, POS overrides,
/// stop words and their exceptions, and vague phrases.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    abbreviations: BTreeMap<String, String>,
    mwe: Vec<MwePattern>,
    mwe_by_head: HashMap<String, Vec<usize>>,
    pos: BTreeMap<String, Tag>,
    stop: BTreeSet<String>,
    stop_exceptions: Vec<StopException>,
    vague: Vec<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Abbreviations,
    Mwe,
    Pos,
    Stop,
    StopExceptions,
    Vague,
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn shipped() -> Lexicon {
        Lexicon::parse(SHIPPED).expect("shipped lexicon is valid")
    }

    pub fn shipped_text() -> &'static str {
        SHIPPED
    }

    /// Parses the sectioned lexicon format:
    ///
    /// ```text
    /// [abbreviations]
    /// brk -> break
    /// [mwe]
    /// upper valve
    /// [pos]
    /// can : NOUN
    /// [stop]
    /// an
    /// [stop_exceptions]
    /// an <number> merge
    /// [vague]
    /// service needed
    /// ```
    pub fn parse(text: &str) -> Result<Lexicon> {
        let mut section = Section::None;
        let mut abbreviations = Vec::new();
        let mut mwe_lines = Vec::new();
        let mut lex = Lexicon::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match &line[1..line.len() - 1] {
                    "abbreviations" => Section::Abbreviations,
                    "mwe" => Section::Mwe,
                    "pos" => Section::Pos,
                    "stop" => Section::Stop,
                    "stop_exceptions" => Section::StopExceptions,
                    "vague" => Section::Vague,
                    other => return Err(err(format!("unknown section [{other}]"))),
                };
                continue;
            }
            let line = line.to_lowercase();
            match section {
                Section::None => return Err(err("entry before any section header".into())),
                Section::Abbreviations => {
                    let (surface, canonical) = line.split_once("->").ok_or_else(|| {
                        err(format!("expected `surface -> canonical`, got {line:?}"))
                    })?;
                    let (surface, canonical) = (surface.trim(), canonical.trim());
                    if surface.is_empty() || canonical.is_empty() || surface.contains(' ') {
                        return Err(err(format!("bad abbreviation entry {line:?}")));
                    }
                    abbreviations.push((line_no, surface.to_string(), canonical.to_string()));
                }
                Section::Mwe => {
                    mwe_lines.push(line.split_whitespace().collect::<Vec<_>>().join(" "))
                }
                Section::Pos => {
                    let (token, tag) = line
                        .split_once(':')
                        .ok_or_else(|| err(format!("expected `token : TAG`, got {line:?}")))?;
                    let tag: Tag = tag.trim().parse().map_err(|e: Error| err(e.to_string()))?;
                    lex.pos.insert(token.trim().to_string(), tag);
                }
                Section::Stop => {
                    lex.stop.insert(line.to_string());
                }
                Section::StopExceptions => {
                    let parts: Vec<&str> = line.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(err(format!(
                            "expected `word <number|any> merge|keep`, got {line:?}"
                        )));
                    }
                    let next = match parts[1] {
                        "<number>" => NextClass::Number,
                        "<any>" => NextClass::Any,
                        other => return Err(err(format!("unknown token class {other}"))),
                    };
                    let action = match parts[2] {
                        "merge" => StopAction::Merge,
                        "keep" => StopAction::Keep,
                        other => return Err(err(format!("unknown action {other}"))),
                    };
                    lex.stop_exceptions.push(StopException {
                        word: parts[0].to_string(),
                        next,
                        action,
                    });
                }
                Section::Vague => lex
                    .vague
                    .push(line.split_whitespace().collect::<Vec<_>>().join(" ")),
            }
        }

        // Canonical roots are stored in lemmatized form so they are fixed
        // points of the lemmatizer.
        // Self-mapped entries protect a word from suffix stripping
        // ("bearing -> bearing").
        let protected: BTreeSet<&str> = abbreviations
            .iter()
            .filter(|(_, s, c)| s == c)
            .map(|(_, s, _)| s.as_str())
            .collect();
        for (line, surface, canonical) in &abbreviations {
            let canonical = if protected.contains(canonical.as_str()) {
                canonical.clone()
            } else {
                lemmatize_generic(canonical)
            };
            if let Some(prev) = lex.abbreviations.insert(surface.clone(), canonical) {
                return Err(Error::Parse {
                    line: *line,
                    message: format!("duplicate abbreviation {surface:?} (was {prev:?})"),
                });
            }
        }
        for (surface, canonical) in &lex.abbreviations {
            if canonical != surface {
                if let Some(target) = lex.abbreviations.get(canonical) {
                    if target != canonical {
                        return Err(Error::config(format!(
                            "abbreviation chain {surface} -> {canonical} -> {target}; canonical roots must be fixed points"
                        )));
                    }
                }
            }
        }
        if let Some(word) = lex.stop.iter().find(|w| lex.pos.contains_key(*w)) {
            return Err(Error::config(format!(
                "{word:?} is both a stop word and a POS override"
            )));
        }

        lex.vague.sort_by(|a, b| {
            b.split(' ')
                .count()
                .cmp(&a.split(' ').count())
                .then(a.cmp(b))
        });
        lex.vague.dedup();
        for text in mwe_lines {
            if lex.mwe.iter().any(|p| p.text == text) {
                continue;
            }
            let key: Vec<String> = text.split(' ').map(|w| lemmatize(w, &lex)).collect();
            lex.mwe.push(MwePattern { text, key });
        }
        // Longest patterns first; ties keep file order.
        lex.mwe.sort_by(|a, b| b.key.len().cmp(&a.key.len()));
        for (i, p) in lex.mwe.iter().enumerate() {
            lex.mwe_by_head.entry(p.key[0].clone()).or_default().push(i);
        }
        Ok(lex)
    }

    pub fn abbreviation(&self, surface: &str) -> Option<&str> {
        self.abbreviations.get(surface).map(|s| s.as_str())
    }

    pub fn abbreviations(&self) -> &BTreeMap<String, String> {
        &self.abbreviations
    }

    pub fn mwe_patterns(&self) -> &[MwePattern] {
        &self.mwe
    }

    /// Indices into [`Self::mwe_patterns`] of patterns whose first key word
    /// is `head`, longest first.
    pub fn mwe_starting_with(&self, head: &str) -> &[usize] {
        self.mwe_by_head
            .get(head)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn pos_override(&self, token: &str) -> Option<Tag> {
        self.pos.get(token).copied()
    }

    pub fn pos_overrides(&self) -> &BTreeMap<String, Tag> {
        &self.pos
    }

    pub fn is_stop_word(&self, token: &str) -> bool {
        self.stop.contains(token)
    }

    pub fn stop_words(&self) -> &BTreeSet<String> {
        &self.stop
    }

    pub fn stop_exceptions(&self) -> &[StopException] {
        &self.stop_exceptions
    }

    /// Vague phrases, longest first.
    pub fn vague_phrases(&self) -> &[String] {
        &self.vague
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_lexicon_loads() {
        let lex = Lexicon::shipped();
        assert_eq!(lex.abbreviation("brk"), Some("break"));
        assert_eq!(lex.abbreviation("hyd"), Some("hydraulic"));
        assert_eq!(lex.abbreviation("dwn"), Some("down"));
        assert!(lex
            .mwe_patterns()
            .iter()
            .any(|p| p.text == "below rotation valve"));
        assert_eq!(lex.pos_override("can"), Some(Tag::Noun));
        assert!(lex.is_stop_word("an"));
        assert!(!lex.is_stop_word("can"));
    }

    #[test]
    fn canonical_roots_are_fixed_points() {
        let lex = Lexicon::shipped();
        for canonical in lex.abbreviations().values() {
            assert_eq!(&lemmatize(canonical, &lex), canonical);
        }
    }

    #[test]
    fn rejects_chained_abbreviations() {
        let err = Lexicon::parse("[abbreviations]\na -> bb\nbb -> ccc\n").unwrap_err();
        assert!(err.to_string().contains("fixed points"), "{err}");
    }

    #[test]
    fn rejects_stop_word_with_pos_override() {
        let err = Lexicon::parse("[stop]\ncan\n[pos]\ncan : NOUN\n").unwrap_err();
        assert!(err.to_string().contains("both"));
    }

    #[test]
    fn reports_line_numbers() {
        let err = Lexicon::parse("[pos]\n\nupper : SHAPE\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert!(Lexicon::parse("[colors]\n").is_err());
        assert!(Lexicon::parse("orphan\n").is_err());
    }

    #[test]
    fn mwe_patterns_are_longest_first() {
        let lex = Lexicon::parse("[mwe]\nupper valve\nbelow rotation valve\n").unwrap();
        assert_eq!(lex.mwe_patterns()[0].text, "below rotation valve");
    }
}
