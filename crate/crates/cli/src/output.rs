//! Error classification, JSON rendering and file output.

use std::fmt;
use std::fs;
use std::io::{self, IsTerminal, Write};
use std::path::Path;

use parabola_core::avoiders::AvoiderError;
use parabola_core::bits::BitsError;
use parabola_core::gapfinder::GapError;
use parabola_core::pgeom::GeomError;
use parabola_core::progressions::ProgressionError;
use parabola_core::spectral::{fmt12, SpectralError};
use parabola_core::FieldError;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or a violated precondition. Exit code 2.
    Precondition(String),
    /// A library invariant failed, which indicates a bug. Exit code 1.
    Invariant(String),
    /// The acceptance battery ran and at least one criterion failed.
    SuiteFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Precondition(_) => 2,
            CliError::Invariant(_) | CliError::SuiteFailed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Precondition(m) => write!(f, "precondition violated: {m}"),
            CliError::Invariant(m) => write!(f, "internal invariant violated: {m}"),
            CliError::SuiteFailed(n) => write!(f, "{n} acceptance criteria failed"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn bad(msg: impl Into<String>) -> CliError {
    CliError::Precondition(msg.into())
}

macro_rules! precondition_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Precondition(e.to_string())
            }
        }
    )*};
}

precondition_from!(FieldError, SpectralError, BitsError);

impl From<ProgressionError> for CliError {
    fn from(e: ProgressionError) -> Self {
        match e {
            ProgressionError::InvariantViolation(m) => CliError::Invariant(m),
            e => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<AvoiderError> for CliError {
    fn from(e: AvoiderError) -> Self {
        match e {
            AvoiderError::InvariantViolation(m) => CliError::Invariant(m),
            e => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<GeomError> for CliError {
    fn from(e: GeomError) -> Self {
        match e {
            GeomError::InvariantViolation(m) => CliError::Invariant(m),
            e => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<GapError> for CliError {
    fn from(e: GapError) -> Self {
        match e {
            GapError::InvariantViolation(m) | GapError::Geom(GeomError::InvariantViolation(m)) => {
                CliError::Invariant(m)
            }
            GapError::ChildDensityFailure(children) => {
                let list: Vec<String> = children
                    .iter()
                    .map(|c| format!("{} has content {:.6e} < {:.6e}", c.rect, c.content, c.required))
                    .collect();
                CliError::Precondition(format!("children below half density: {}", list.join("; ")))
            }
            e => CliError::Precondition(e.to_string()),
        }
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| bad(format!("cannot write {}: {e}", path.display())))
}

/// Rounds every non-integer number to 12 significant digits so reruns give
/// byte-identical output.
fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let r: f64 = fmt12(x).parse().unwrap_or(x);
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

pub fn to_value<T: Serialize>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Invariant(format!("serialisation failed: {e}")))
}

pub fn render(mut v: Value) -> String {
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("a JSON value always serialises");
    s.push('\n');
    s
}

/// Writes to `out`, or to stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| bad(format!("stdout: {e}")))
        }
    }
}

pub fn emit_json(v: Value, out: Option<&Path>) -> CliResult<()> {
    emit(&render(v), out)
}

/// ANSI colouring for terminals, suppressed by `NO_COLOR` or a pipe.
pub fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && io::stdout().is_terminal()
}

pub fn paint(text: &str, ok: bool, color: bool) -> String {
    if color {
        format!("\x1b[{}m{text}\x1b[0m", if ok { 32 } else { 31 })
    } else {
        text.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounding_keeps_integers_and_trims_floats() {
        let v = json!({"n": 125, "x": 0.1 + 0.2, "y": [1.0 / 3.0, -0.0], "z": null});
        let out = render(v);
        assert!(out.contains("\"n\": 125"));
        assert!(out.contains("0.3,") || out.contains("0.3\n"));
        assert!(out.contains("0.333333333333"));
        assert!(!out.contains("0.30000000000000004"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(bad("x").exit_code(), 2);
        assert_eq!(CliError::Invariant("x".into()).exit_code(), 1);
        assert_eq!(CliError::from(GeomError::EmptyContent).exit_code(), 2);
        assert_eq!(CliError::from(GapError::InvariantViolation("x".into())).exit_code(), 1);
    }
}
