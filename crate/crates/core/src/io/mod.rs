//! Benchmark map/scenario ingestion, grid graphs, and the instance and
//! solution text formats.

pub mod grid;
pub mod movingai;
pub mod text;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            message: message.into(),
        }
    }
}

/// Non-empty lines with their 1-based numbers; trailing `\r` stripped.
pub(crate) fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    line: usize,
    what: &str,
    s: &str,
) -> Result<T, ParseError> {
    s.parse()
        .map_err(|_| ParseError::new(line, format!("invalid {what} '{s}'")))
}
