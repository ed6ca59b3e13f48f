use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The sixteen service departments, in the order they are numbered in the
/// department table. Index order is the tie-break order everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Department {
    Controls,
    Vague,
    Harness,
    Hydraulics,
    #[serde(rename = "PTO")]
    Pto,
    Boom,
    Maintenance,
    Test,
    Rotation,
    Auger,
    Outrigger,
    Digger,
    Body,
    Chassis,
    Electronics,
    Resale,
}

impl Department {
    pub const COUNT: usize = 16;

    pub const ALL: [Department; 16] = [
        Department::Controls,
        Department::Vague,
        Department::Harness,
        Department::Hydraulics,
        Department::Pto,
        Department::Boom,
        Department::Maintenance,
        Department::Test,
        Department::Rotation,
        Department::Auger,
        Department::Outrigger,
        Department::Digger,
        Department::Body,
        Department::Chassis,
        Department::Electronics,
        Department::Resale,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Department> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Department::Controls => "Controls",
            Department::Vague => "Vague",
            Department::Harness => "Harness",
            Department::Hydraulics => "Hydraulics",
            Department::Pto => "PTO",
            Department::Boom => "Boom",
            Department::Maintenance => "Maintenance",
            Department::Test => "Test",
            Department::Rotation => "Rotation",
            Department::Auger => "Auger",
            Department::Outrigger => "Outrigger",
            Department::Digger => "Digger",
            Department::Body => "Body",
            Department::Chassis => "Chassis",
            Department::Electronics => "Electronics",
            Department::Resale => "Resale",
        }
    }
}

impl fmt::Display for Department {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Department {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Department::ALL
            .iter()
            .copied()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown department {s:?}; expected one of the 16 service departments ({})",
                    Department::ALL.map(|d| d.name()).join(", ")
                ))
            })
    }
}

/// Manual annotation of whether the call log matches the service detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationLabel {
    Valid,
    False,
    Vague,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 3] = [
        RelationLabel::Valid,
        RelationLabel::False,
        RelationLabel::Vague,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<RelationLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationLabel::Valid => "Valid",
            RelationLabel::False => "False",
            RelationLabel::Vague => "Vague",
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationLabel {
    type Err = Error;

    /// Accepts the short names as well as the annotation phrases
    /// ("Valid claim", "False claim", "Vague claim").
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let short = s
            .strip_suffix(" claim")
            .or_else(|| s.strip_suffix(" Claim"))
            .unwrap_or(s);
        RelationLabel::ALL
            .iter()
            .copied()
            .find(|r| r.name().eq_ignore_ascii_case(short))
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown relation {s:?}; expected Valid, False or Vague"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ownership {
    Rented,
    Leased,
    Purchased,
}

/// One customer service call.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceRecord {
    pub id: String,
    pub call_log: String,
    pub detail: String,
    pub relation: Option<RelationLabel>,
    pub department: Option<Department>,
    pub age_months: u32,
    pub zip: String,
    pub company: String,
    pub failure_date: NaiveDate,
    pub runtime_hours: f64,
    pub ownership: Ownership,
    pub months_since_service: f64,
    pub operator_id: String,
}

impl ServiceRecord {
    pub fn is_labeled(&self) -> bool {
        self.relation.is_some()
    }

    /// Checks the record-level invariants.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::input("empty id"));
        }
        if self.zip.len() != 5 || !self.zip.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::input(format!("zip {:?} is not 5 digits", self.zip)));
        }
        if !(self.runtime_hours.is_finite() && self.runtime_hours >= 0.0) {
            return Err(Error::input("runtime_hours must be a non-negative number"));
        }
        if !(self.months_since_service.is_finite() && self.months_since_service >= 0.0) {
            return Err(Error::input(
                "months_since_service must be a non-negative number",
            ));
        }
        if let Some(relation) = self.relation {
            if self.detail.trim().is_empty() {
                return Err(Error::input("labeled record has an empty detail"));
            }
            if self.call_log.trim().is_empty() && relation != RelationLabel::Vague {
                return Err(Error::input(format!(
                    "empty call_log is only allowed for Vague records, got {relation}"
                )));
            }
            if relation == RelationLabel::Valid && self.department.is_none() {
                return Err(Error::input("Valid record without a department"));
            }
        }
        Ok(())
    }
}

/// On-disk shape of a record line. Field order is the serialization order.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    call_log: String,
    detail: String,
    relation: Option<String>,
    department: Option<String>,
    age_months: u32,
    zip: String,
    company: String,
    failure_date: NaiveDate,
    runtime_hours: f64,
    ownership: Ownership,
    months_since_service: f64,
    operator_id: String,
}

fn optional_label(s: Option<String>) -> Option<String> {
    s.filter(|s| !s.trim().is_empty())
}

impl TryFrom<RecordLine> for ServiceRecord {
    type Error = Error;

    fn try_from(line: RecordLine) -> Result<Self> {
        let relation = optional_label(line.relation)
            .map(|s| s.parse())
            .transpose()?;
        let department = optional_label(line.department)
            .map(|s| s.parse())
            .transpose()?;
        let record = ServiceRecord {
            id: line.id,
            call_log: line.call_log,
            detail: line.detail,
            relation,
            department,
            age_months: line.age_months,
            zip: line.zip,
            company: line.company,
            failure_date: line.failure_date,
            runtime_hours: line.runtime_hours,
            ownership: line.ownership,
            months_since_service: line.months_since_service,
            operator_id: line.operator_id,
        };
        record.validate()?;
        Ok(record)
    }
}

impl From<&ServiceRecord> for RecordLine {
    fn from(r: &ServiceRecord) -> Self {
        RecordLine {
            id: r.id.clone(),
            call_log: r.call_log.clone(),
            detail: r.detail.clone(),
            relation: r.relation.map(|x| x.name().to_string()),
            department: r.department.map(|x| x.name().to_string()),
            age_months: r.age_months,
            zip: r.zip.clone(),
            company: r.company.clone(),
            failure_date: r.failure_date,
            runtime_hours: r.runtime_hours,
            ownership: r.ownership,
            months_since_service: r.months_since_service,
            operator_id: r.operator_id.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Default)]
pub struct ParsedRecords {
    pub records: Vec<ServiceRecord>,
    pub errors: Vec<LineError>,
}

/// Parses a line-delimited record stream. Blank lines are skipped; every
/// other line either yields a record or a [`LineError`].
pub fn parse_records(input: &str) -> ParsedRecords {
    let mut out = ParsedRecords::default();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(line) {
            Ok(r) => out.records.push(r),
            Err(e) => out.errors.push(LineError {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    out
}

fn parse_line(line: &str) -> Result<ServiceRecord> {
    let raw: RecordLine = serde_json::from_str(line)?;
    raw.try_into()
}

pub fn serialize_record(record: &ServiceRecord) -> String {
    serde_json::to_string(&RecordLine::from(record)).expect("record lines always serialize")
}

pub fn serialize_records(records: &[ServiceRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serialize_record(r));
        out.push('\n');
    }
    out
}

/// One line of the ground-truth sidecar file.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthEntry {
    pub id: String,
    pub relation: RelationLabel,
    pub department: Department,
}

/// Ground-truth sidecar: `id<TAB>relation<TAB>department` per line.
pub fn write_truth(entries: &[TruthEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!("{}\t{}\t{}\n", e.id, e.relation, e.department));
    }
    out
}

pub fn parse_truth(input: &str) -> Result<Vec<TruthEntry>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        if fields.len() != 3 {
            return Err(err(format!(
                "expected 3 tab-separated fields, found {}",
                fields.len()
            )));
        }
        out.push(TruthEntry {
            id: fields[0].to_string(),
            relation: fields[1].parse().map_err(|e: Error| err(e.to_string()))?,
            department: fields[2].parse().map_err(|e: Error| err(e.to_string()))?,
        });
    }
    Ok(out)
}
