use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::textprep::lemma::{lemmatize, lemmatize_generic};
use crate::textprep::terms::{recognize_terms, TermKind};
use crate::textprep::{Lexicon, NextClass, StopAction, Tag};

/// A token of one segment. Multiword expressions are single tokens with
/// `n > 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    /// Normalized surface text; the canonical expression for multiword
    /// tokens.
    pub text: String,
    /// Lemmatized form used for features.
    pub lemma: String,
    pub tag: Tag,
    /// Byte range within the segment.
    pub span: Range<usize>,
    /// Number of source words covered.
    pub n: usize,
}

/// Maximal alphanumeric runs of a segment with their byte ranges.
pub fn words(segment: &str) -> Vec<(&str, Range<usize>)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in segment.char_indices() {
        if c.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            out.push((&segment[s..i], s..i));
        }
    }
    if let Some(s) = start {
        out.push((&segment[s..], s..segment.len()));
    }
    out
}

enum Item<'a> {
    Term(TermKind, &'a str, Range<usize>),
    Word(&'a str, Range<usize>),
}

/// Domain tokenizer: recognized terms become single tokens, multiword
/// expressions are merged longest-first (ties by earlier start) on their
/// lemmatized keys, and the remaining alphanumeric runs are words.
pub fn tokenize(segment: &str, lexicon: &Lexicon) -> Vec<TaggedToken> {
    let terms = recognize_terms(segment);
    let mut items = Vec::new();
    let mut cursor = 0;
    for term in &terms {
        for (w, r) in words(&segment[cursor..term.span.start]) {
            items.push(Item::Word(w, r.start + cursor..r.end + cursor));
        }
        items.push(Item::Term(
            term.kind,
            &segment[term.span.clone()],
            term.span.clone(),
        ));
        cursor = term.span.end;
    }
    for (w, r) in words(&segment[cursor..]) {
        items.push(Item::Word(w, r.start + cursor..r.end + cursor));
    }

    let keys: Vec<Option<String>> = items
        .iter()
        .map(|it| match it {
            Item::Word(w, _) => Some(lemmatize(w, lexicon)),
            Item::Term(..) => None,
        })
        .collect();

    // Candidate expression matches: (start item, length, pattern index).
    let patterns = lexicon.mwe_patterns();
    let mut candidates: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..items.len() {
        let Some(head) = &keys[i] else { continue };
        for &p in lexicon.mwe_starting_with(head) {
            let key = &patterns[p].key;
            let fits = i + key.len() <= items.len()
                && key
                    .iter()
                    .enumerate()
                    .all(|(j, k)| keys[i + j].as_deref() == Some(k.as_str()));
            if fits {
                candidates.push((i, key.len(), p));
            }
        }
    }
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut claimed: Vec<Option<(usize, usize)>> = vec![None; items.len()];
    for (start, len, p) in candidates {
        if (start..start + len).all(|j| claimed[j].is_none()) {
            claimed[start] = Some((len, p));
            for j in start + 1..start + len {
                claimed[j] = Some((0, p));
            }
        }
    }

    let mut out = Vec::new();
    let mut i = 0;
    while i < items.len() {
        if let Some((len, p)) = claimed[i] {
            debug_assert!(len > 0);
            let start = match &items[i] {
                Item::Word(_, r) | Item::Term(_, _, r) => r.start,
            };
            let end = match &items[i + len - 1] {
                Item::Word(_, r) | Item::Term(_, _, r) => r.end,
            };
            let text = patterns[p].text.clone();
            out.push(TaggedToken {
                lemma: text.clone(),
                text,
                tag: Tag::Noun,
                span: start..end,
                n: len,
            });
            i += len;
            continue;
        }
        out.push(match &items[i] {
            Item::Word(w, r) => TaggedToken {
                text: w.to_string(),
                lemma: keys[i].clone().unwrap_or_default(),
                tag: Tag::Other,
                span: r.clone(),
                n: 1,
            },
            Item::Term(kind, raw, r) => TaggedToken {
                text: raw.to_string(),
                lemma: raw.to_string(),
                tag: match kind {
                    TermKind::PartNumber => Tag::PartNumber,
                    TermKind::UnitNumber => Tag::Number,
                    TermKind::ServiceDate => Tag::Other,
                },
                span: r.clone(),
                n: 1,
            },
        });
        i += 1;
    }
    out
}

/// Whitespace tokenizer for the ablation path: no term recognition, no
/// multiword merging, punctuation stays attached.
pub fn tokenize_plain(segment: &str) -> Vec<TaggedToken> {
    let mut out = Vec::new();
    let mut offset = 0;
    for piece in segment.split(' ') {
        if !piece.is_empty() {
            out.push(TaggedToken {
                text: piece.to_string(),
                lemma: lemmatize_generic(piece),
                tag: Tag::Other,
                span: offset..offset + piece.len(),
                n: 1,
            });
        }
        offset += piece.len() + 1;
    }
    out
}

fn is_number(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn matches_class(class: NextClass, next: Option<&str>) -> bool {
    match (class, next) {
        (NextClass::Number, Some(n)) => is_number(n),
        (NextClass::Any, Some(_)) => true,
        (_, None) => false,
    }
}

/// Removes stop words from a token list unless an exception fires. With the
/// shipped lexicon, `an` followed by a number becomes the model id
/// `an<number>`.
pub fn apply_stop_rules(tokens: &[&str], lexicon: &Lexicon) -> Vec<String> {
    let tagged: Vec<TaggedToken> = tokens
        .iter()
        .map(|t| TaggedToken {
            text: t.to_string(),
            lemma: t.to_string(),
            tag: Tag::Other,
            span: 0..0,
            n: 1,
        })
        .collect();
    apply_stop_rules_tokens(tagged, lexicon, true)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Token-level stop filtering. Multiword tokens and recognized terms are
/// never removed. `with_exceptions = false` applies the plain stop list.
pub fn apply_stop_rules_tokens(
    tokens: Vec<TaggedToken>,
    lexicon: &Lexicon,
    with_exceptions: bool,
) -> Vec<TaggedToken> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut iter = tokens.into_iter().peekable();
    while let Some(t) = iter.next() {
        let removable =
            t.n == 1 && !matches!(t.tag, Tag::PartNumber) && lexicon.is_stop_word(&t.text);
        if !removable {
            out.push(t);
            continue;
        }
        if !with_exceptions {
            continue;
        }
        let next_text = iter.peek().map(|n| n.text.as_str());
        let rule = lexicon
            .stop_exceptions()
            .iter()
            .find(|e| e.word == t.text && matches_class(e.next, next_text));
        match rule.map(|r| r.action) {
            Some(StopAction::Merge) => {
                let next = iter.next().expect("class matched a next token");
                let text = format!("{}{}", t.text, next.text);
                out.push(TaggedToken {
                    lemma: text.clone(),
                    text,
                    tag: Tag::ModelId,
                    span: t.span.start..next.span.end,
                    n: t.n + next.n,
                });
            }
            Some(StopAction::Keep) => out.push(t),
            None => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[TaggedToken]) -> Vec<(&str, usize)> {
        tokens.iter().map(|t| (t.text.as_str(), t.n)).collect()
    }

    #[test]
    fn merges_multiword_expressions() {
        let lex = Lexicon::shipped();
        assert_eq!(
            texts(&tokenize("upper valve leaking", &lex)),
            [("upper valve", 2), ("leaking", 1)]
        );
        assert_eq!(texts(&tokenize("unit down", &lex)), [("unit down", 2)]);
        assert_eq!(texts(&tokenize("hose", &lex)), [("hose", 1)]);
        assert_eq!(
            texts(&tokenize("leak below rotation valve", &lex)),
            [("leak", 1), ("below rotation valve", 3)]
        );
    }

    #[test]
    fn abbreviations_match_expressions() {
        let lex = Lexicon::shipped();
        assert_eq!(
            texts(&tokenize("upr vlv leaking", &lex)),
            [("upper valve", 2), ("leaking", 1)]
        );
        assert_eq!(texts(&tokenize("hyd leaks", &lex)), [("hydraulic leak", 2)]);
    }

    #[test]
    fn longer_overlapping_expression_wins() {
        let lex = Lexicon::parse("[mwe]\na b\nb c d\n").unwrap();
        assert_eq!(texts(&tokenize("a b c d", &lex)), [("a", 1), ("b c d", 3)]);
        let lex = Lexicon::parse("[mwe]\na b\nb c\n").unwrap();
        assert_eq!(texts(&tokenize("a b c", &lex)), [("a b", 2), ("c", 1)]);
    }

    #[test]
    fn terms_become_tokens() {
        let lex = Lexicon::shipped();
        let toks = tokenize("24506-replace winch rope", &lex);
        assert_eq!(toks[0].text, "24506");
        assert_eq!(toks[0].tag, Tag::Number);
        assert_eq!(toks[1].text, "replace");
        let toks = tokenize("replaced gasket pn9700007824", &lex);
        assert_eq!(toks.last().unwrap().tag, Tag::PartNumber);
    }

    #[test]
    fn spans_point_into_the_segment() {
        let lex = Lexicon::shipped();
        let seg = "replaced, upper valve (leaking)";
        for t in tokenize(seg, &lex) {
            assert!(seg[t.span.clone()].starts_with(t.text.split(' ').next().unwrap()) || t.n > 1);
        }
    }

    #[test]
    fn plain_tokenizer_keeps_punctuation() {
        assert_eq!(
            texts(&tokenize_plain("replaced, hose")),
            [("replaced,", 1), ("hose", 1)]
        );
    }

    #[test]
    fn stop_rules() {
        let lex = Lexicon::shipped();
        assert_eq!(apply_stop_rules(&["an", "apple"], &lex), ["apple"]);
        assert_eq!(
            apply_stop_rules(&["an", "50", "failed"], &lex),
            ["an50", "failed"]
        );
        assert!(apply_stop_rules(&[], &lex).is_empty());
        assert_eq!(apply_stop_rules(&["the", "an"], &lex), Vec::<String>::new());
    }

    #[test]
    fn model_id_token() {
        let lex = Lexicon::shipped();
        let toks = apply_stop_rules_tokens(tokenize("an 50 failed", &lex), &lex, true);
        assert_eq!(toks[0].text, "an50");
        assert_eq!(toks[0].tag, Tag::ModelId);
        assert_eq!(toks[0].span, 0..5);
        let plain = apply_stop_rules_tokens(tokenize("an 50 failed", &lex), &lex, false);
        assert_eq!(plain[0].text, "50");
    }
}
