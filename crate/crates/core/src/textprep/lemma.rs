//! Rule-based lemmatizer: abbreviation map, a small irregular-form table and
//! suffix stripping, iterated to a fixed point.

use crate::textprep::Lexicon;

const IRREGULAR: &[(&str, &str)] = &[
    ("broken", "break"),
    ("broke", "break"),
    ("bent", "bend"),
    ("worn", "wear"),
    ("torn", "tear"),
    ("blown", "blow"),
    ("blew", "blow"),
    ("frozen", "freeze"),
    ("froze", "freeze"),
    ("ran", "run"),
    ("found", "find"),
    ("made", "make"),
];

fn irregular(word: &str) -> Option<&'static str> {
    IRREGULAR
        .iter()
        .find(|(w, _)| *w == word)
        .map(|(_, base)| *base)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn vowel_groups(s: &[u8]) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for &c in s {
        let v = is_vowel(c) || (c == b'y' && groups > 0);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Repairs a stem left after removing `-ed` / `-ing`.
fn restore(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    let last = b[n - 1];
    if n >= 2 && last == b[n - 2] && !is_vowel(last) && !matches!(last, b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    let ends = |suffix: &str| stem.ends_with(suffix);
    if matches!(last, b'c' | b'v' | b'z') || ends("at") || ends("bl") || ends("iz") || ends("rg") {
        return format!("{stem}e");
    }
    // Short consonant-vowel-consonant stems take an `e` back (wir-ed → wire).
    if n >= 3
        && vowel_groups(b) == 1
        && !is_vowel(b[n - 3])
        && is_vowel(b[n - 2])
        && !is_vowel(last)
        && !matches!(last, b'w' | b'x' | b'y')
    {
        return format!("{stem}e");
    }
    stem.to_string()
}

/// One suffix-stripping step. Every rule shortens the word, so iterating
/// terminates.
fn strip_once(word: &str) -> Option<String> {
    if !word.bytes().all(|c| c.is_ascii_lowercase()) {
        return None;
    }
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        return Some(format!("{}y", &word[..n - 3]));
    }
    if word.ends_with("sses") {
        return Some(word[..n - 2].to_string());
    }
    if n > 4
        && ["ches", "shes", "xes", "zes"]
            .iter()
            .any(|s| word.ends_with(s))
    {
        return Some(word[..n - 2].to_string());
    }
    if n > 3 && word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return Some(word[..n - 1].to_string());
    }
    for suffix in ["ing", "ed"] {
        if word.ends_with(suffix) && !word.ends_with("eed") {
            let stem = &word[..n - suffix.len()];
            if stem.len() >= 3 && vowel_groups(stem.as_bytes()) > 0 {
                return Some(restore(stem));
            }
        }
    }
    None
}

fn lemma_with(token: &str, lexicon: Option<&Lexicon>) -> String {
    let mut w = token.to_string();
    // Each step either maps to a fixed point or shortens the word; the cap
    // only guards against malformed lexicons.
    for _ in 0..16 {
        if let Some(canonical) = lexicon.and_then(|l| l.abbreviation(&w)) {
            if canonical == w {
                break;
            }
            w = canonical.to_string();
            continue;
        }
        if let Some(base) = irregular(&w) {
            w = base.to_string();
            continue;
        }
        match strip_once(&w) {
            Some(s) => w = s,
            None => break,
        }
    }
    w
}

/// Reduces a single normalized word to its root: abbreviation map first,
/// then irregular forms, then suffix stripping.
pub fn lemmatize(token: &str, lexicon: &Lexicon) -> String {
    lemma_with(token, Some(lexicon))
}

/// Lemmatizer without any domain abbreviation map.
pub fn lemmatize_generic(token: &str) -> String {
    lemma_with(token, None)
}

/// True when lemmatization removed an `-ed` / `-ing` ending (regular or
/// irregular verb form).
pub(crate) fn is_inflected_verb(token: &str, lemma: &str) -> bool {
    token != lemma
        && (token.ends_with("ed") || token.ends_with("ing") || irregular(token).is_some())
}
