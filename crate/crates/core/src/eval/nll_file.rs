use std::io::Write;
use std::path::Path;

use super::{EvalError, NllStream};

// NLL file layout: a `#dataset=<label> variant=<label>` header line, then one
// decimal NLL (nats) per line.

fn parse_header(line: &str) -> Result<(String, String), EvalError> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| EvalError::MalformedFile("first line must start with '#'".into()))?;
    let mut dataset = None;
    let mut variant = None;
    for token in body.split_whitespace() {
        if let Some(v) = token.strip_prefix("dataset=") {
            dataset = Some(v.to_string());
        } else if let Some(v) = token.strip_prefix("variant=") {
            variant = Some(v.to_string());
        } else {
            return Err(EvalError::MalformedFile(format!(
                "unexpected header token {token:?}"
            )));
        }
    }
    match (dataset, variant) {
        (Some(d), Some(v)) => Ok((d, v)),
        _ => Err(EvalError::MalformedFile(
            "header needs dataset=<label> and variant=<label>".into(),
        )),
    }
}

pub fn load_nll_file(path: impl AsRef<Path>) -> Result<NllStream, EvalError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| EvalError::MalformedFile("empty file".into()))?;
    let (dataset, variant) = parse_header(header)?;

    let mut values = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| {
            EvalError::MalformedFile(format!("line {}: {line:?} is not a number", i + 1))
        })?;
        if !value.is_finite() {
            return Err(EvalError::NonFiniteValue(values.len()));
        }
        if value < 0.0 {
            return Err(EvalError::NegativeValue { line: i + 1, value });
        }
        values.push(value);
    }
    Ok(NllStream {
        dataset,
        variant,
        values,
    })
}

/// Write a stream in the NLL file format. Values print with enough digits to
/// parse back to the same f64.
pub fn write_nll_file(path: impl AsRef<Path>, stream: &NllStream) -> Result<(), EvalError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(out, "#dataset={} variant={}", stream.dataset, stream.variant)?;
    for v in &stream.values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}
