//! Plain-text serialization: one `site value` pair per line, sorted by site.
//! Blank lines and lines starting with `#` are ignored on input.

use std::io::{BufRead, Write};

use super::LatticeFunction;
use crate::error::{Error, Result};

pub fn write_function<W: Write>(mut out: W, f: &LatticeFunction) -> Result<()> {
    for (x, v) in f.iter() {
        writeln!(out, "{x} {v}")?;
    }
    Ok(())
}

pub fn to_text(f: &LatticeFunction) -> String {
    let mut buf = Vec::new();
    write_function(&mut buf, f).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_function<R: BufRead>(input: R) -> Result<LatticeFunction> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        pairs.push(parse_line(line, i + 1)?);
    }
    Ok(LatticeFunction::from_pairs(pairs))
}

pub fn from_text(text: &str) -> Result<LatticeFunction> {
    read_function(text.as_bytes())
}

fn parse_line(line: &str, lineno: usize) -> Result<(i64, f64)> {
    let err = |reason: String| Error::Parse {
        line: lineno,
        reason,
    };
    let mut fields = line.split_whitespace();
    let (Some(site), Some(value), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(err(format!("expected `site value`, got `{line}`")));
    };
    let site = site
        .parse::<i64>()
        .map_err(|e| err(format!("bad site `{site}`: {e}")))?;
    let value = value
        .parse::<f64>()
        .map_err(|e| err(format!("bad value `{value}`: {e}")))?;
    if !value.is_finite() {
        return Err(err(format!("non-finite value `{value}`")));
    }
    Ok((site, value))
}
