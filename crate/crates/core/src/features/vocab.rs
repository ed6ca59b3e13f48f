use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textprep::{Document, Tag};

/// Words that occur in nearly every report and carry no signal.
pub const WORTHLESS_WORDS: &[&str] = &["unit", "vehicle"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Bigram,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Noun,
        Category::Verb,
        Category::Adjective,
        Category::Adverb,
        Category::Bigram,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Noun => "noun",
            Category::Verb => "verb",
            Category::Adjective => "adjective",
            Category::Adverb => "adverb",
            Category::Bigram => "bigram",
        }
    }

    fn of_tag(tag: Tag) -> Option<Category> {
        match tag {
            Tag::Noun | Tag::ModelId => Some(Category::Noun),
            Tag::Verb => Some(Category::Verb),
            Tag::Adjective => Some(Category::Adjective),
            Tag::Adverb => Some(Category::Adverb),
            Tag::Number | Tag::PartNumber | Tag::Other => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::input(format!("unknown feature category {s:?}")))
    }
}

/// Which terms a document contributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermOptions {
    /// Drop [`WORTHLESS_WORDS`] from the unigram categories.
    pub drop_worthless: bool,
}

impl Default for TermOptions {
    fn default() -> Self {
        TermOptions {
            drop_worthless: true,
        }
    }
}

/// Every term occurrence of a document: lemmatized unigrams by POS category
/// and lemma bigrams within each segment.
pub fn document_terms(doc: &Document, options: TermOptions) -> Vec<(String, Category)> {
    let mut out = Vec::new();
    for segment in &doc.segments {
        for t in segment {
            if options.drop_worthless && WORTHLESS_WORDS.contains(&t.lemma.as_str()) {
                continue;
            }
            if let Some(c) = Category::of_tag(t.tag) {
                out.push((t.lemma.clone(), c));
            }
        }
        for pair in segment.windows(2) {
            out.push((
                format!("{} {}", pair[0].lemma, pair[1].lemma),
                Category::Bigram,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub term: String,
    pub category: Category,
    pub frequency: u64,
}

/// Ordered feature vocabulary; position = feature column.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<(String, Category), usize>,
}

impl Vocabulary {
    /// Keeps the given order. Duplicate (term, category) pairs are an error.
    pub fn from_entries(entries: Vec<VocabEntry>) -> Result<Vocabulary> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            if index.insert((e.term.clone(), e.category), i).is_some() {
                return Err(Error::input(format!(
                    "duplicate vocabulary entry {:?} ({})",
                    e.term, e.category
                )));
            }
        }
        Ok(Vocabulary { entries, index })
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, term: &str, category: Category) -> Option<usize> {
        self.index.get(&(term.to_string(), category)).copied()
    }

    /// Keeps the entries at `positions`, in that order.
    pub fn subset(&self, positions: &[usize]) -> Vocabulary {
        Vocabulary::from_entries(positions.iter().map(|&p| self.entries[p].clone()).collect())
            .expect("subset of a valid vocabulary")
    }

    /// `term<TAB>category<TAB>frequency` lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!("{}\t{}\t{}\n", e.term, e.category, e.frequency));
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Vocabulary> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 3 {
                return Err(err(format!(
                    "expected 3 tab-separated fields, got {}",
                    parts.len()
                )));
            }
            let category = parts[1].parse().map_err(|e: Error| err(e.to_string()))?;
            let frequency = parts[2]
                .parse()
                .map_err(|_| err(format!("bad frequency {:?}", parts[2])))?;
            entries.push(VocabEntry {
                term: parts[0].to_string(),
                category,
                frequency,
            });
        }
        Vocabulary::from_entries(entries)
    }

    /// Hex SHA-256 of the TSV form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_tsv().as_bytes()))
    }
}

/// The `top_k` most frequent terms of each category, ordered by frequency
/// (descending), then term, then category.
pub fn build_vocabulary<'a, I>(docs: I, top_k: usize, options: TermOptions) -> Vocabulary
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut counts: HashMap<(String, Category), u64> = HashMap::new();
    for doc in docs {
        for key in document_terms(doc, options) {
            *counts.entry(key).or_default() += 1;
        }
    }
    let mut by_cat: Vec<Vec<VocabEntry>> = vec![Vec::new(); Category::ALL.len()];
    for ((term, category), frequency) in counts {
        by_cat[category as usize].push(VocabEntry {
            term,
            category,
            frequency,
        });
    }
    let order = |a: &VocabEntry, b: &VocabEntry| {
        b.frequency
            .cmp(&a.frequency)
            .then_with(|| a.term.cmp(&b.term))
            .then(a.category.cmp(&b.category))
    };
    let mut entries = Vec::new();
    for mut list in by_cat {
        list.sort_by(order);
        list.truncate(top_k);
        entries.extend(list);
    }
    entries.sort_by(order);
    Vocabulary::from_entries(entries).expect("counts are keyed uniquely")
}
