//! Parsers for the estimator input files.
//!
//! All parse failures carry the file, 1-based line and 1-based column of the
//! offending field. Rows that parse but violate a model invariant (e.g. a
//! Mendelian-incompatible sib pair) are reported separately with the line
//! that produced them.

use std::fmt;
use std::fs;
use std::path::Path;

use crate::abo::BloodTypeCounts;
use crate::error::EmError;
use crate::ibd::{Genotype, SibPairObservation};

/// A malformed input file: where and what.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.path, self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// Input ingestion outcome: either the file text is malformed, or a row
/// parses but fails model validation.
#[derive(Debug, Clone, PartialEq)]
pub enum InputError {
    Parse(ParseError),
    Invalid { line: usize, source: EmError },
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Parse(e) => e.fmt(f),
            InputError::Invalid { line, source } => write!(f, "row at line {line}: {source}"),
        }
    }
}

impl std::error::Error for InputError {}

impl From<ParseError> for InputError {
    fn from(e: ParseError) -> Self {
        InputError::Parse(e)
    }
}

fn parse_error(path: &Path, line: usize, column: usize, message: String) -> ParseError {
    ParseError {
        path: path.display().to_string(),
        line,
        column,
        message,
    }
}

fn read_file(path: &Path) -> Result<String, ParseError> {
    fs::read_to_string(path)
        .map_err(|e| parse_error(path, 0, 0, format!("cannot read file: {e}")))
}

/// Splits a line on commas, keeping the 1-based column where each trimmed
/// field begins.
fn split_fields(line: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut col = 1usize;
    for field in line.split(',') {
        let width = field.chars().count();
        let leading = field.chars().take_while(|c| c.is_whitespace()).count();
        out.push((col + leading, field.trim().to_string()));
        col += width + 1;
    }
    out
}

fn parse_u64(path: &Path, line: usize, col: usize, field: &str) -> Result<u64, ParseError> {
    field.parse::<u64>().map_err(|_| {
        parse_error(
            path,
            line,
            col,
            format!("expected a non-negative integer, got {field:?}"),
        )
    })
}

fn parse_f64(path: &Path, line: usize, col: usize, field: &str) -> Result<f64, ParseError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(
            path,
            line,
            col,
            format!("expected a finite number, got {field:?}"),
        )),
    }
}

fn check_header(
    path: &Path,
    line_no: usize,
    line: &str,
    expected: &[&str],
) -> Result<(), ParseError> {
    let fields = split_fields(line);
    if fields.len() != expected.len() {
        return Err(parse_error(
            path,
            line_no,
            1,
            format!(
                "expected header {:?} with {} fields, found {}",
                expected.join(","),
                expected.len(),
                fields.len()
            ),
        ));
    }
    for ((col, got), want) in fields.iter().zip(expected) {
        if got != want {
            return Err(parse_error(
                path,
                line_no,
                *col,
                format!("expected header field {want:?}, got {got:?}"),
            ));
        }
    }
    Ok(())
}

/// Lines with content, skipping blank lines but keeping 1-based numbering.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses a blood-type count file: header `t_A,t_B,t_AB,t_O` and exactly one
/// data row of non-negative integers.
pub fn parse_blood_counts(path: &Path) -> Result<BloodTypeCounts, InputError> {
    let text = read_file(path)?;
    let mut lines = content_lines(&text);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, 1, "empty file".into()))?;
    check_header(path, line_no, header, &["t_A", "t_B", "t_AB", "t_O"])?;

    let (line_no, row) = lines
        .next()
        .ok_or_else(|| parse_error(path, line_no + 1, 1, "missing data row".into()))?;
    if let Some((extra_line, _)) = lines.next() {
        return Err(parse_error(
            path,
            extra_line,
            1,
            "expected exactly one data row".into(),
        )
        .into());
    }
    let fields = split_fields(row);
    if fields.len() != 4 {
        return Err(parse_error(
            path,
            line_no,
            1,
            format!("expected 4 count fields, found {}", fields.len()),
        )
        .into());
    }
    let mut values = [0u64; 4];
    for (slot, (col, field)) in values.iter_mut().zip(&fields) {
        *slot = parse_u64(path, line_no, *col, field)?;
    }
    BloodTypeCounts::new(values[0], values[1], values[2], values[3])
        .map_err(|source| InputError::Invalid { line: line_no, source })
}

const SIB_PAIR_HEADER: [&str; 8] = [
    "father_a1",
    "father_a2",
    "mother_a1",
    "mother_a2",
    "sib1_a1",
    "sib1_a2",
    "sib2_a1",
    "sib2_a2",
];

/// Parses a sib-pair file: the eight-column header and one row per pair with
/// positive integer allele labels. Mendelian-incompatible rows are rejected
/// with their line number.
pub fn parse_sib_pairs(path: &Path) -> Result<Vec<SibPairObservation>, InputError> {
    let text = read_file(path)?;
    let mut lines = content_lines(&text);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, 1, "empty file".into()))?;
    check_header(path, line_no, header, &SIB_PAIR_HEADER)?;

    let mut observations = Vec::new();
    for (line_no, row) in lines {
        let fields = split_fields(row);
        if fields.len() != 8 {
            return Err(parse_error(
                path,
                line_no,
                1,
                format!("expected 8 allele fields, found {}", fields.len()),
            )
            .into());
        }
        let mut alleles = [0u32; 8];
        for (slot, (col, field)) in alleles.iter_mut().zip(&fields) {
            let value = parse_u64(path, line_no, *col, field)?;
            if value == 0 || value > u64::from(u32::MAX) {
                return Err(parse_error(
                    path,
                    line_no,
                    *col,
                    format!("allele labels must be positive integers, got {field:?}"),
                )
                .into());
            }
            *slot = value as u32;
        }
        let obs = SibPairObservation::new(
            Genotype::new(alleles[0], alleles[1]),
            Genotype::new(alleles[2], alleles[3]),
            Genotype::new(alleles[4], alleles[5]),
            Genotype::new(alleles[6], alleles[7]),
        )
        .map_err(|source| InputError::Invalid { line: line_no, source })?;
        observations.push(obs);
    }
    Ok(observations)
}

/// Parses a sequence file: one sequence per line over {A,C,G,T}; FASTA header
/// lines beginning with `>` are ignored.
pub fn parse_sequences(path: &Path) -> Result<Vec<String>, InputError> {
    let text = read_file(path)?;
    let mut sequences = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let trimmed = line.trim();
        if trimmed.starts_with('>') {
            continue;
        }
        for (offset, c) in trimmed.chars().enumerate() {
            if crate::motif::base_index(c).is_none() {
                let col = line.chars().take_while(|c| c.is_whitespace()).count() + offset + 1;
                return Err(parse_error(
                    path,
                    line_no,
                    col,
                    format!("sequences may only contain A, C, G, T; got {c:?}"),
                )
                .into());
            }
        }
        sequences.push(trimmed.to_string());
    }
    Ok(sequences)
}

/// Parses a kernel file: CSV rows of numbers in [0,1], one row per port, one
/// column per size class. A first line with no numeric field is treated as a
/// header and skipped.
pub fn parse_kernel(path: &Path) -> Result<Vec<Vec<f64>>, InputError> {
    let text = read_file(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut first_content = true;
    for (line_no, line) in content_lines(&text) {
        let fields = split_fields(line);
        if first_content {
            first_content = false;
            let any_numeric = fields.iter().any(|(_, f)| f.parse::<f64>().is_ok());
            if !any_numeric {
                continue;
            }
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, field) in &fields {
            row.push(parse_f64(path, line_no, *col, field)?);
        }
        if let Some(prev) = rows.first() {
            if row.len() != prev.len() {
                return Err(parse_error(
                    path,
                    line_no,
                    1,
                    format!(
                        "kernel row has {} columns, expected {}",
                        row.len(),
                        prev.len()
                    ),
                )
                .into());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, 1, "kernel file has no numeric rows".into()).into());
    }
    Ok(rows)
}

/// Parses a port-count file: `P_0` followed by `P_1..P_m`, separated by
/// commas, whitespace or newlines. Lines starting with `#` are comments.
pub fn parse_port_counts(path: &Path) -> Result<(u64, Vec<u64>), InputError> {
    let text = read_file(path)?;
    let mut numbers = Vec::new();
    for (line_no, line) in content_lines(&text) {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() || chars[i] == ',' {
                i += 1;
                continue;
            }
            let start = i;
            let mut token = String::new();
            while i < chars.len() && !chars[i].is_whitespace() && chars[i] != ',' {
                token.push(chars[i]);
                i += 1;
            }
            numbers.push((line_no, start + 1, token));
        }
    }
    let mut parsed = Vec::with_capacity(numbers.len());
    for (line_no, col, token) in &numbers {
        parsed.push(parse_u64(path, *line_no, *col, token)?);
    }
    if parsed.len() < 2 {
        return Err(parse_error(
            path,
            1,
            1,
            "expected the zero-port count followed by at least one port count".into(),
        )
        .into());
    }
    let ports = parsed.split_off(1);
    Ok((parsed[0], ports))
}
