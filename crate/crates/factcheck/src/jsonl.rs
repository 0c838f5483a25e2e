//! JSON-lines files whose first non-blank line is a header object.

use std::io::BufRead;

use serde::de::DeserializeOwned;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("file has no header line")]
    NoHeader,
}

pub fn read_with_header<H, T, R>(reader: R) -> Result<(H, Vec<T>), JsonlError>
where
    H: DeserializeOwned,
    T: DeserializeOwned,
    R: BufRead,
{
    let mut header = None;
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim_start_matches('\u{feff}');
        if text.trim().is_empty() {
            continue;
        }
        let bad = |e: serde_json::Error| JsonlError::Line {
            line: i + 1,
            message: e.to_string(),
        };
        if header.is_none() {
            header = Some(serde_json::from_str(text).map_err(bad)?);
        } else {
            records.push(serde_json::from_str(text).map_err(bad)?);
        }
    }
    Ok((header.ok_or(JsonlError::NoHeader)?, records))
}

/// Renders a header and records back into the same format.
pub fn write_with_header<H: serde::Serialize, T: serde::Serialize>(header: &H, records: &[T]) -> String {
    let mut out = serde_json::to_string(header).expect("serializable header");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("serializable record"));
        out.push('\n');
    }
    out
}
