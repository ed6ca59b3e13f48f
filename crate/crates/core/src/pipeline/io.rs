use std::fs;
use std::io::Write;
use std::path::Path;

use crate::corpus::{parse_records, ServiceRecord};
use crate::error::{Error, Result};

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::input(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| Error::input(format!("cannot write {}: {e}", path.display())))
}

pub fn read_text(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {what} {}: {e}", path.display())))
}

/// Parses a whole record file; any malformed line fails the load with a
/// count and the first few messages.
pub fn records_from_text(text: &str) -> Result<Vec<ServiceRecord>> {
    let parsed = parse_records(text);
    if !parsed.errors.is_empty() {
        let first: Vec<String> = parsed
            .errors
            .iter()
            .take(3)
            .map(|e| e.to_string())
            .collect();
        return Err(Error::input(format!(
            "{} malformed of {} record lines ({})",
            parsed.errors.len(),
            parsed.errors.len() + parsed.records.len(),
            first.join("; ")
        )));
    }
    Ok(parsed.records)
}

pub fn read_records(path: &Path) -> Result<Vec<ServiceRecord>> {
    records_from_text(&read_text(path, "corpus")?)
}

/// Leading `# key value` lines, as written above TSV bodies.
pub fn stamp_header(fingerprint: &str, seed: u64) -> String {
    format!("# fingerprint {fingerprint}\n# seed {seed}\n")
}

/// Drops leading `#` lines that contain no tab. Body lines always have
/// tabs, so a term that starts with `#` is never mistaken for a header.
pub fn strip_stamp(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        let end = rest.find('\n').map_or(rest.len(), |i| i + 1);
        if rest[..end].contains('\t') {
            break;
        }
        rest = &rest[end..];
    }
    rest
}
