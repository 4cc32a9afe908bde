//! Text encodings for bit arrays.
//!
//! * plain: `0`/`1` characters, whitespace ignored (point sets on `F_q^2`,
//!   written one row of `q` bits per line);
//! * run-length: alternating run lengths starting with a run of zeros
//!   (grid sets).

use fixedbitset::FixedBitSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitsError {
    #[error("unexpected character {0:?} in bit text")]
    BadChar(char),
    #[error("expected {expected} bits, found {got}")]
    Length { expected: usize, got: usize },
    #[error("malformed run-length data: {0}")]
    BadRuns(String),
}

pub fn parse_plain(text: &str, len: usize) -> Result<FixedBitSet, BitsError> {
    let mut bits = FixedBitSet::with_capacity(len);
    let mut i = 0usize;
    for c in text.chars() {
        match c {
            '0' | '1' => {
                if i < len && c == '1' {
                    bits.insert(i);
                }
                i += 1;
            }
            c if c.is_whitespace() => {}
            c => return Err(BitsError::BadChar(c)),
        }
    }
    if i != len {
        return Err(BitsError::Length { expected: len, got: i });
    }
    Ok(bits)
}

pub fn write_plain(bits: &FixedBitSet, row: usize) -> String {
    let mut out = String::with_capacity(bits.len() + bits.len() / row.max(1) + 1);
    for i in 0..bits.len() {
        out.push(if bits.contains(i) { '1' } else { '0' });
        if row > 0 && (i + 1) % row == 0 {
            out.push('\n');
        }
    }
    if !out.ends_with('\n') {
        out.push('\n');
    }
    out
}

pub fn rle_encode(bits: &FixedBitSet) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut run = 0usize;
    for i in 0..bits.len() {
        let b = bits.contains(i);
        if b != current {
            runs.push(run);
            run = 0;
            current = b;
        }
        run += 1;
    }
    runs.push(run);
    runs
}

pub fn rle_decode(runs: &[usize], len: usize) -> Result<FixedBitSet, BitsError> {
    let total: usize = runs.iter().sum();
    if total != len {
        return Err(BitsError::Length { expected: len, got: total });
    }
    let mut bits = FixedBitSet::with_capacity(len);
    let mut pos = 0;
    for (k, &r) in runs.iter().enumerate() {
        if k % 2 == 1 {
            bits.insert_range(pos..pos + r);
        }
        pos += r;
    }
    Ok(bits)
}

pub fn parse_runs(text: &str) -> Result<Vec<usize>, BitsError> {
    text.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| BitsError::BadRuns(t.to_string()))).collect()
}
