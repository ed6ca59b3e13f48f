use std::ops::Range;
use std::sync::OnceLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TermKind {
    PartNumber,
    UnitNumber,
    ServiceDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatch {
    pub kind: TermKind,
    pub raw: String,
    /// Byte range within the segment.
    pub span: Range<usize>,
}

fn patterns() -> &'static [(TermKind, Regex)] {
    static PATTERNS: OnceLock<Vec<(TermKind, Regex)>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        vec![
            (
                TermKind::ServiceDate,
                Regex::new(r"\b(?:\d{1,2}/\d{1,2}/(?:\d{4}|\d{2})|\d{4}-\d{2}-\d{2})\b").unwrap(),
            ),
            (
                TermKind::PartNumber,
                Regex::new(r"\b(?:pn)?\d{6,12}\b").unwrap(),
            ),
            (TermKind::UnitNumber, Regex::new(r"\b\d{4,5}\b").unwrap()),
        ]
    })
}

/// Finds part numbers, unit numbers and service dates in a normalized
/// segment. Overlaps are resolved leftmost-longest.
pub fn recognize_terms(segment: &str) -> Vec<TermMatch> {
    let mut candidates: Vec<TermMatch> = Vec::new();
    for (kind, re) in patterns() {
        for m in re.find_iter(segment) {
            candidates.push(TermMatch {
                kind: *kind,
                raw: m.as_str().to_string(),
                span: m.range(),
            });
        }
    }
    candidates.sort_by(|a, b| {
        a.span
            .start
            .cmp(&b.span.start)
            .then((b.span.end - b.span.start).cmp(&(a.span.end - a.span.start)))
    });
    let mut out: Vec<TermMatch> = Vec::new();
    for c in candidates {
        if out.last().is_some_and(|prev| c.span.start < prev.span.end) {
            continue;
        }
        out.push(c);
    }
    out
}
