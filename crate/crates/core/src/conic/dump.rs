//! Plain-text `conicprogram v1` format.
//!
//! ```text
//! conicprogram v1
//! dims <nvars> <nrows>
//! cones <count>
//! <kind> <size>            (kind: zero | free | nonneg | soc | psd)
//! vars <count>
//! <name> <offset> <shape>  (shape: scalar | vector n | skew n | sym n | dense r c)
//! objective <nnz>
//! <col> <value>
//! matrix <nnz>
//! <row> <col> <value>
//! rhs <nnz>
//! <row> <value>
//! end
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Values are written in
//! shortest round-trip form, so write/parse is lossless.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Cone, ConeKind, ConicProgram, SparseMatrix, VarEntry, VarMap, VarShape};

pub const DUMP_HEADER: &str = "conicprogram v1";

/// Upper bound on any declared dimension or count.
pub const MAX_DUMP_DIM: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DumpError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unexpected end of input, expected {0}")]
    Eof(&'static str),
    #[error("invalid program: {0}")]
    Invalid(String),
}

pub fn write_dump(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DUMP_HEADER}");
    let _ = writeln!(out, "dims {} {}", prog.a.ncols, prog.a.nrows);
    let _ = writeln!(out, "cones {}", prog.cones.len());
    for c in &prog.cones {
        let _ = writeln!(out, "{} {}", c.kind.name(), c.size);
    }
    let _ = writeln!(out, "vars {}", prog.vars.entries.len());
    for v in &prog.vars.entries {
        let _ = writeln!(out, "{} {} {}", v.name, v.offset, v.shape.tag());
    }
    let obj: Vec<_> = prog.c.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
    let _ = writeln!(out, "objective {}", obj.len());
    for (j, v) in obj {
        let _ = writeln!(out, "{j} {v:?}");
    }
    let _ = writeln!(out, "matrix {}", prog.a.entries.len());
    for (i, j, v) in &prog.a.entries {
        let _ = writeln!(out, "{i} {j} {v:?}");
    }
    let rhs: Vec<_> = prog.b.iter().enumerate().filter(|(_, v)| **v != 0.0).collect();
    let _ = writeln!(out, "rhs {}", rhs.len());
    for (i, v) in rhs {
        let _ = writeln!(out, "{i} {v:?}");
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &'static str) -> Result<(usize, Vec<&'a str>), DumpError> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok((i + 1, t.split_whitespace().collect()));
        }
        Err(DumpError::Eof(what))
    }

    fn rest_is_empty(&mut self) -> Option<usize> {
        for (i, line) in self.inner.by_ref() {
            let t = line.trim();
            if !(t.is_empty() || t.starts_with('#')) {
                return Some(i + 1);
            }
        }
        None
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> DumpError {
    DumpError::Syntax { line, msg: msg.into() }
}

fn count(line: usize, tok: &str, what: &str) -> Result<usize, DumpError> {
    let v: usize = tok.parse().map_err(|_| syntax(line, format!("invalid {what} `{tok}`")))?;
    if v > MAX_DUMP_DIM {
        return Err(syntax(line, format!("{what} {v} exceeds limit {MAX_DUMP_DIM}")));
    }
    Ok(v)
}

fn value(line: usize, tok: &str) -> Result<f64, DumpError> {
    let v: f64 = tok.parse().map_err(|_| syntax(line, format!("invalid number `{tok}`")))?;
    if !v.is_finite() {
        return Err(syntax(line, format!("non-finite number `{tok}`")));
    }
    Ok(v)
}

/// Duplicate entries are summed; the sum must stay finite.
fn finite_sum(line: usize, acc: f64, v: f64) -> Result<f64, DumpError> {
    let sum = acc + v;
    if !sum.is_finite() {
        return Err(syntax(line, "repeated entries overflow"));
    }
    Ok(sum)
}

fn expect_section<'a>(
    lines: &mut Lines<'a>,
    tag: &'static str,
    arity: usize,
) -> Result<(usize, Vec<&'a str>), DumpError> {
    let (ln, toks) = lines.next(tag)?;
    if toks[0] != tag {
        return Err(syntax(ln, format!("expected `{tag}`, found `{}`", toks[0])));
    }
    if toks.len() != arity + 1 {
        return Err(syntax(ln, format!("`{tag}` takes {arity} field(s)")));
    }
    Ok((ln, toks))
}

fn expect_fields<'a>(lines: &mut Lines<'a>, what: &'static str, n: usize) -> Result<(usize, Vec<&'a str>), DumpError> {
    let (ln, toks) = lines.next(what)?;
    if toks.len() != n {
        return Err(syntax(ln, format!("{what} line needs {n} fields, found {}", toks.len())));
    }
    Ok((ln, toks))
}

fn parse_shape(line: usize, toks: &[&str]) -> Result<VarShape, DumpError> {
    let dim = |i: usize| -> Result<usize, DumpError> {
        let t = toks.get(i).ok_or_else(|| syntax(line, "missing shape dimension"))?;
        count(line, t, "dimension")
    };
    let (shape, used) = match toks.first().copied() {
        Some("scalar") => (VarShape::Scalar, 1),
        Some("vector") => (VarShape::Vector(dim(1)?), 2),
        Some("skew") => (VarShape::Skew(dim(1)?), 2),
        Some("sym") => (VarShape::Sym(dim(1)?), 2),
        Some("dense") => (VarShape::Dense(dim(1)?, dim(2)?), 3),
        Some(other) => return Err(syntax(line, format!("unknown shape `{other}`"))),
        None => return Err(syntax(line, "missing shape")),
    };
    if toks.len() != used {
        return Err(syntax(line, "trailing fields after shape"));
    }
    Ok(shape)
}

pub fn parse_dump(text: &str) -> Result<ConicProgram, DumpError> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (ln, toks) = lines.next("header")?;
    if toks.join(" ") != DUMP_HEADER {
        return Err(syntax(ln, format!("expected header `{DUMP_HEADER}`")));
    }

    let (ln, toks) = expect_section(&mut lines, "dims", 2)?;
    let nvars = count(ln, toks[1], "variable count")?;
    let nrows = count(ln, toks[2], "row count")?;

    let (ln, toks) = expect_section(&mut lines, "cones", 1)?;
    let ncones = count(ln, toks[1], "cone count")?;
    let mut cones = Vec::new();
    let mut rows = 0usize;
    for _ in 0..ncones {
        let (ln, toks) = expect_fields(&mut lines, "cone", 2)?;
        let kind = ConeKind::from_name(toks[0]).ok_or_else(|| syntax(ln, format!("unknown cone `{}`", toks[0])))?;
        let size = count(ln, toks[1], "cone size")?;
        let cone = Cone::new(kind, size);
        rows = rows
            .checked_add(cone.rows())
            .filter(|r| *r <= nrows)
            .ok_or_else(|| syntax(ln, "cones exceed the declared row count"))?;
        cones.push(cone);
    }

    let (ln, toks) = expect_section(&mut lines, "vars", 1)?;
    let nv = count(ln, toks[1], "variable count")?;
    let mut vars = VarMap::default();
    let mut names = std::collections::HashSet::new();
    for _ in 0..nv {
        let (ln, toks) = lines.next("variable")?;
        if toks.len() < 3 {
            return Err(syntax(ln, "variable line needs name, offset and shape"));
        }
        let offset = count(ln, toks[1], "offset")?;
        let shape = parse_shape(ln, &toks[2..])?;
        if !names.insert(toks[0]) {
            return Err(syntax(ln, format!("duplicate variable `{}`", toks[0])));
        }
        vars.entries.push(VarEntry { name: toks[0].to_string(), shape, offset });
    }

    let (ln, toks) = expect_section(&mut lines, "objective", 1)?;
    let nnz = count(ln, toks[1], "entry count")?;
    let mut c = vec![0.0; nvars];
    for _ in 0..nnz {
        let (ln, toks) = expect_fields(&mut lines, "objective", 2)?;
        let j = count(ln, toks[0], "column")?;
        if j >= nvars {
            return Err(syntax(ln, format!("column {j} out of range")));
        }
        c[j] = finite_sum(ln, c[j], value(ln, toks[1])?)?;
    }

    let (ln, toks) = expect_section(&mut lines, "matrix", 1)?;
    let nnz = count(ln, toks[1], "entry count")?;
    let mut a = SparseMatrix::new(nrows, nvars);
    for _ in 0..nnz {
        let (ln, toks) = expect_fields(&mut lines, "matrix", 3)?;
        let i = count(ln, toks[0], "row")?;
        let j = count(ln, toks[1], "column")?;
        if i >= nrows || j >= nvars {
            return Err(syntax(ln, format!("entry ({i}, {j}) out of range")));
        }
        a.entries.push((i, j, value(ln, toks[2])?));
    }

    let (ln, toks) = expect_section(&mut lines, "rhs", 1)?;
    let nnz = count(ln, toks[1], "entry count")?;
    let mut b = vec![0.0; nrows];
    for _ in 0..nnz {
        let (ln, toks) = expect_fields(&mut lines, "rhs", 2)?;
        let i = count(ln, toks[0], "row")?;
        if i >= nrows {
            return Err(syntax(ln, format!("row {i} out of range")));
        }
        b[i] = finite_sum(ln, b[i], value(ln, toks[1])?)?;
    }

    let (ln, toks) = lines.next("end")?;
    if toks != ["end"] {
        return Err(syntax(ln, "expected `end`"));
    }
    if let Some(ln) = lines.rest_is_empty() {
        return Err(syntax(ln, "content after `end`"));
    }

    let prog = ConicProgram { c, a, b, cones, vars };
    prog.validate().map_err(|e| DumpError::Invalid(e.to_string()))?;
    Ok(prog)
}
