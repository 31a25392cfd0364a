//! Text formats for vectors, density operators and implicit vector specs.
//!
//! Dense vectors: one component per line as `<re> <im>`; blank lines and
//! lines starting with `#` are skipped.
//!
//! Density operators: a header line `dim <d>` followed by `d*d` row-major
//! `<re> <im>` pairs (whitespace separated, any line breaks).
//!
//! Implicit vectors: a single line
//! `implicit <kind> n=<n> scale=<scale> [index=<j>] [mask=<m>]` where kind is
//! `all-plus`, `minus-at-index` or `sign-pattern`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::oracle::{ImplicitKind, ImplicitVector};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("not a number: {tok:?}") })?;
    if !v.is_finite() {
        return Err(Error::Parse { line, msg: format!("non-finite value {tok:?}") });
    }
    Ok(v)
}

pub fn parse_dense_vector(text: &str) -> Result<Vec<Complex64>> {
    content_lines(text)
        .map(|(line, l)| {
            let toks: Vec<&str> = l.split_whitespace().collect();
            match toks.as_slice() {
                [re, im] => Ok(Complex64::new(parse_f64(re, line)?, parse_f64(im, line)?)),
                _ => Err(Error::Parse { line, msg: format!("expected `<re> <im>`, got {l:?}") }),
            }
        })
        .collect()
}

/// Formats with round-trip precision.
pub fn format_dense_vector(values: &[Complex64]) -> String {
    let mut out = String::with_capacity(values.len() * 48);
    for z in values {
        let _ = writeln!(out, "{:e} {:e}", z.re, z.im);
    }
    out
}

pub fn read_dense_vector(path: &Path) -> Result<Vec<Complex64>> {
    parse_dense_vector(&std::fs::read_to_string(path)?)
}

pub fn parse_density_matrix(text: &str) -> Result<DMatrix<Complex64>> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing `dim` header".into() })?;
    let dim: usize = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["dim", d] => d
            .parse()
            .map_err(|_| Error::Parse { line: hline, msg: format!("bad dimension {d:?}") })?,
        _ => return Err(Error::Parse { line: hline, msg: format!("expected `dim <d>`, got {header:?}") }),
    };
    if dim == 0 {
        return Err(Error::Parse { line: hline, msg: "dimension must be positive".into() });
    }
    let mut values = Vec::with_capacity(2 * dim * dim);
    let mut last_line = hline;
    for (line, l) in lines {
        last_line = line;
        for tok in l.split_whitespace() {
            values.push(parse_f64(tok, line)?);
        }
    }
    if values.len() != 2 * dim * dim {
        return Err(Error::Parse {
            line: last_line,
            msg: format!("expected {} real numbers, found {}", 2 * dim * dim, values.len()),
        });
    }
    Ok(DMatrix::from_row_iterator(
        dim,
        dim,
        values.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])),
    ))
}

pub fn format_density_matrix(m: &DMatrix<Complex64>) -> String {
    let mut out = format!("dim {}\n", m.nrows());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e} {:e}", m[(r, c)].re, m[(r, c)].im)).collect();
        out.push_str(&row.join("  "));
        out.push('\n');
    }
    out
}

pub fn format_implicit(v: &ImplicitVector) -> String {
    match v.kind {
        ImplicitKind::AllPlus => format!("implicit all-plus n={} scale={:e}\n", v.n, v.scale),
        ImplicitKind::MinusAt(j) => format!("implicit minus-at-index n={} scale={:e} index={j}\n", v.n, v.scale),
        ImplicitKind::SignPattern(m) => format!("implicit sign-pattern n={} scale={:e} mask={m}\n", v.n, v.scale),
    }
}

pub fn parse_implicit(text: &str) -> Result<ImplicitVector> {
    let (line, l) = content_lines(text)
        .next()
        .ok_or(Error::Parse { line: 1, msg: "empty implicit vector file".into() })?;
    let mut toks = l.split_whitespace();
    if toks.next() != Some("implicit") {
        return Err(Error::Parse { line, msg: "expected `implicit` keyword".into() });
    }
    let kind = toks.next().ok_or(Error::Parse { line, msg: "missing kind".into() })?;
    let (mut n, mut scale, mut index, mut mask) = (None, None, None, None);
    for tok in toks {
        let (key, value) = tok
            .split_once('=')
            .ok_or(Error::Parse { line, msg: format!("expected key=value, got {tok:?}") })?;
        let bad = || Error::Parse { line, msg: format!("bad value for {key}: {value:?}") };
        match key {
            "n" => n = Some(value.parse::<u32>().map_err(|_| bad())?),
            "scale" => scale = Some(parse_f64(value, line)?),
            "index" => index = Some(value.parse::<u64>().map_err(|_| bad())?),
            "mask" => mask = Some(value.parse::<u64>().map_err(|_| bad())?),
            _ => return Err(Error::Parse { line, msg: format!("unknown key {key:?}") }),
        }
    }
    let n = n.ok_or(Error::Parse { line, msg: "missing n=".into() })?;
    let scale = scale.ok_or(Error::Parse { line, msg: "missing scale=".into() })?;
    let kind = match kind {
        "all-plus" => ImplicitKind::AllPlus,
        "minus-at-index" => ImplicitKind::MinusAt(index.ok_or(Error::Parse { line, msg: "missing index=".into() })?),
        "sign-pattern" => ImplicitKind::SignPattern(mask.ok_or(Error::Parse { line, msg: "missing mask=".into() })?),
        other => return Err(Error::Parse { line, msg: format!("unsupported implicit kind {other:?}") }),
    };
    ImplicitVector::new(kind, n, scale)
}
