use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::banks::{
    abbreviations_of, department_bank, ACTIONS, COMPANIES, CONDITIONS, FILLER_TASKS, GASKET_TASKS,
    INCIDENTAL_ACTIONS, INCIDENTAL_WORDS, SYMPTOMS, VAGUE_CALL_LOGS,
};
use crate::corpus::{Department, Ownership, RelationLabel, ServiceRecord, TruthEntry};
use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};
use crate::textprep::{self, Lexicon};

/// Parameters of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_records: usize,
    pub seed: u64,
    /// Department proportions. Missing departments get weight 0.
    pub class_mix: BTreeMap<Department, f64>,
    pub relation_mix: BTreeMap<RelationLabel, f64>,
    /// Fraction of words that receive a single-character misspelling.
    pub noise_rate: f64,
    /// Fraction of abbreviable words rendered as an abbreviation.
    pub abbreviation_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let routable: Vec<Department> = Department::ALL
            .iter()
            .copied()
            .filter(|d| *d != Department::Vague)
            .collect();
        let share = 1.0 / routable.len() as f64;
        SynthConfig {
            n_records: 1000,
            seed: 0,
            class_mix: routable.into_iter().map(|d| (d, share)).collect(),
            relation_mix: [
                (RelationLabel::Valid, 0.6),
                (RelationLabel::False, 0.2),
                (RelationLabel::Vague, 0.2),
            ]
            .into_iter()
            .collect(),
            noise_rate: 0.05,
            abbreviation_rate: 0.3,
        }
    }
}

fn check_mix<K: std::fmt::Debug>(field: &str, mix: &BTreeMap<K, f64>) -> Result<()> {
    if let Some((k, v)) = mix.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::config(format!(
            "{field}: proportion for {k:?} is {v}, must be non-negative"
        )));
    }
    let total: f64 = mix.values().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "{field}: proportions sum to {total}, expected 1"
        )));
    }
    Ok(())
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        check_mix("class_mix", &self.class_mix)?;
        check_mix("relation_mix", &self.relation_mix)?;
        for (name, rate) in [
            ("noise_rate", self.noise_rate),
            ("abbreviation_rate", self.abbreviation_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::config(format!(
                    "{name} must lie in [0, 1], got {rate}"
                )));
            }
        }
        let wants_false = self
            .relation_mix
            .get(&RelationLabel::False)
            .copied()
            .unwrap_or(0.0)
            > 0.0;
        let departments = self.class_mix.values().filter(|v| **v > 0.0).count();
        if wants_false && departments == 0 {
            return Err(Error::config(
                "class_mix: False claims need at least one department",
            ));
        }
        Ok(())
    }
}

/// Generator ground truth, in record order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruth {
    pub entries: Vec<TruthEntry>,
}

impl GroundTruth {
    pub fn get(&self, id: &str) -> Option<(RelationLabel, Department)> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .map(|e| (e.relation, e.department))
    }

    pub fn as_map(&self) -> BTreeMap<&str, (RelationLabel, Department)> {
        self.entries
            .iter()
            .map(|e| (e.id.as_str(), (e.relation, e.department)))
            .collect()
    }
}

struct Renderer<'a> {
    rng: &'a mut SeededRng,
    noise_rate: f64,
    abbreviation_rate: f64,
}

impl Renderer<'_> {
    /// Renders canonical text word by word: abbreviation first, then
    /// misspelling, then occasional capitalization.
    fn render(&mut self, text: &str) -> String {
        text.split(' ')
            .map(|w| self.word(w))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn word(&mut self, word: &str) -> String {
        if !word.chars().all(|c| c.is_ascii_alphabetic()) {
            return word.to_string();
        }
        let mut w = word.to_string();
        let variants = abbreviations_of(word);
        if !variants.is_empty() && rng::bernoulli(self.rng, self.abbreviation_rate) {
            w = variants[rng::index(self.rng, variants.len())].to_string();
        }
        if w.len() >= 4 && rng::bernoulli(self.rng, self.noise_rate) {
            w = misspell(self.rng, &w);
        }
        if rng::bernoulli(self.rng, 0.05) {
            w = w.to_uppercase();
        }
        w
    }
}

/// Single-character deletion or adjacent transposition.
fn misspell(rng: &mut SeededRng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    if rng::bernoulli(rng, 0.5) {
        let i = rng::index(rng, chars.len());
        chars.remove(i);
    } else {
        let i = rng::index(rng, chars.len() - 1);
        chars.swap(i, i + 1);
    }
    chars.into_iter().collect()
}

fn pick<'a>(rng: &mut SeededRng, items: &[&'a str]) -> &'a str {
    items[rng::index(rng, items.len())]
}

fn unit_number(rng: &mut SeededRng) -> String {
    format!("{}", rng.gen_range(1000u32..100_000))
}

fn part_number(rng: &mut SeededRng) -> String {
    format!("97000{:05}", rng.gen_range(0u32..100_000))
}

fn signature_task(rng: &mut SeededRng, signature: &str) -> String {
    let action = pick(rng, ACTIONS);
    if rng::bernoulli(rng, 0.2) {
        return format!("{signature} {action}");
    }
    if rng::bernoulli(rng, 0.3) {
        let condition = pick(rng, CONDITIONS);
        return format!("{action} {condition} {signature}");
    }
    format!("{action} {signature}")
}

fn detail_text(r: &mut Renderer<'_>, department: Department) -> String {
    let signatures = department_bank(department).signatures;
    let n_signature = 2 + rng::index(r.rng, 3);
    let mut order: Vec<usize> = (0..signatures.len()).collect();
    rng::shuffle(r.rng, &mut order);

    let mut tasks = Vec::new();
    for k in 0..n_signature {
        let canonical = signature_task(r.rng, signatures[order[k % order.len()]]);
        let mut task = r.render(&canonical);
        if rng::bernoulli(r.rng, 0.15) {
            task.push(',');
        }
        tasks.push(task);
    }
    for _ in 0..1 + rng::index(r.rng, 2) {
        let roll = rng::index(r.rng, 10);
        let task = if roll < 2 {
            let gasket = pick(r.rng, GASKET_TASKS);
            format!("{} pn{}", r.render(gasket), part_number(r.rng))
        } else if roll < 3 {
            format!("{} {}", part_number(r.rng), r.render("replaced"))
        } else {
            let filler = pick(r.rng, FILLER_TASKS);
            r.render(filler)
        };
        tasks.push(task);
    }
    for _ in 0..rng::index(r.rng, 3) {
        let action = pick(r.rng, INCIDENTAL_ACTIONS);
        let word = pick(r.rng, INCIDENTAL_WORDS);
        tasks.push(r.render(&format!("{action} {word}")));
    }
    rng::shuffle(r.rng, &mut tasks);

    if rng::bernoulli(r.rng, 0.3) {
        let unit = unit_number(r.rng);
        tasks[0] = format!("{unit}-{}", tasks[0]);
    }
    let mut text = String::new();
    if rng::bernoulli(r.rng, 0.2) {
        text.push_str("--");
    }
    for (i, task) in tasks.iter().enumerate() {
        if i > 0 {
            let sep = match rng::index(r.rng, 10) {
                0 => "\n",
                1 => " -- ",
                2 => "-- ",
                _ => "--",
            };
            text.push_str(sep);
        }
        text.push_str(task);
    }
    if rng::bernoulli(r.rng, 0.1) {
        text.push_str("--");
    }
    text
}

fn call_log_text(r: &mut Renderer<'_>, department: Department) -> String {
    let signature = pick(r.rng, department_bank(department).signatures);
    let symptom = pick(r.rng, SYMPTOMS);
    let roll = rng::index(r.rng, 10);
    if roll < 3 {
        let unit = unit_number(r.rng);
        format!("{unit}-{}", r.render(&format!("{signature} {symptom}")))
    } else if roll < 7 || symptom.contains(' ') {
        r.render(&format!("{signature} {symptom}"))
    } else {
        r.render(&format!("{symptom} {signature}"))
    }
}

fn vague_call_log(r: &mut Renderer<'_>) -> String {
    if rng::bernoulli(r.rng, 0.5) {
        String::new()
    } else {
        let phrase = pick(r.rng, VAGUE_CALL_LOGS);
        r.render(phrase)
    }
}

/// Generates a labeled synthetic corpus and its ground truth.
///
/// Valid records pair a detail of department D with a call log naming one
/// of D's signature expressions; False records use the call log of another
/// department; Vague records have an empty call log or a vague phrase.
pub fn generate_corpus(config: &SynthConfig) -> Result<(Vec<ServiceRecord>, GroundTruth)> {
    config.validate()?;
    let mut rng = rng::seeded(config.seed);
    let departments: Vec<Department> = Department::ALL.to_vec();
    let class_weights: Vec<f64> = departments
        .iter()
        .map(|d| config.class_mix.get(d).copied().unwrap_or(0.0))
        .collect();
    let relation_weights: Vec<f64> = RelationLabel::ALL
        .iter()
        .map(|r| config.relation_mix.get(r).copied().unwrap_or(0.0))
        .collect();

    let epoch = NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date");
    let mut records = Vec::with_capacity(config.n_records);
    let mut truth = GroundTruth::default();
    for n in 0..config.n_records {
        let department = departments[rng::weighted_index(&mut rng, &class_weights)];
        let relation = RelationLabel::ALL[rng::weighted_index(&mut rng, &relation_weights)];
        let mut r = Renderer {
            rng: &mut rng,
            noise_rate: config.noise_rate,
            abbreviation_rate: config.abbreviation_rate,
        };
        let detail = detail_text(&mut r, department);
        let call_log = match relation {
            RelationLabel::Valid => call_log_text(&mut r, department),
            RelationLabel::False => {
                let others: Vec<f64> = class_weights
                    .iter()
                    .enumerate()
                    .map(|(i, &w)| if i == department.index() { 0.0 } else { w })
                    .collect();
                let other = if others.iter().any(|&w| w > 0.0) {
                    departments[rng::weighted_index(r.rng, &others)]
                } else {
                    let pool: Vec<Department> = departments
                        .iter()
                        .copied()
                        .filter(|d| *d != department && *d != Department::Vague)
                        .collect();
                    pool[rng::index(r.rng, pool.len())]
                };
                call_log_text(&mut r, other)
            }
            RelationLabel::Vague => vague_call_log(&mut r),
        };

        let id = format!("SR{:06}", n + 1);
        let ownership =
            [Ownership::Rented, Ownership::Leased, Ownership::Purchased][rng::index(&mut rng, 3)];
        let record = ServiceRecord {
            id: id.clone(),
            call_log,
            detail,
            relation: Some(relation),
            department: Some(department),
            age_months: rng.gen_range(0u32..240),
            zip: format!("{:05}", rng.gen_range(90_000u32..96_200)),
            company: pick(&mut rng, COMPANIES).to_string(),
            failure_date: epoch + Duration::days(rng.gen_range(0i64..3650)),
            runtime_hours: f64::from(rng.gen_range(0u32..200_000)) / 10.0,
            ownership,
            months_since_service: f64::from(rng.gen_range(0u32..73)) / 2.0,
            operator_id: format!("op{:02}", rng.gen_range(0u32..40)),
        };
        truth.entries.push(TruthEntry {
            id,
            relation,
            department,
        });
        records.push(record);
    }
    Ok((records, truth))
}

/// Keyword lookup baseline: counts whole signature expressions (after
/// abbreviation expansion and lemmatization) per department and returns
/// the department with the most hits, lowest index on ties.
pub fn keyword_oracle(detail: &str, lexicon: &Lexicon) -> Option<Department> {
    let mut counts = [0usize; Department::COUNT];
    let patterns: Vec<(Department, Vec<String>)> = Department::ALL
        .iter()
        .flat_map(|&d| {
            department_bank(d).signatures.iter().map(move |s| {
                (
                    d,
                    s.split(' ')
                        .map(|w| textprep::lemmatize(w, lexicon))
                        .collect::<Vec<_>>(),
                )
            })
        })
        .collect();
    for segment in textprep::normalize(detail) {
        let lemmas: Vec<String> = textprep::words(&segment)
            .into_iter()
            .map(|(w, _)| textprep::lemmatize(w, lexicon))
            .collect();
        for (department, pattern) in &patterns {
            counts[department.index()] += lemmas
                .windows(pattern.len())
                .filter(|w| w == &pattern.as_slice())
                .count();
        }
    }
    let best = counts.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return None;
    }
    Department::from_index(counts.iter().position(|&c| c == best).expect("max exists"))
}
