//! Problem files, gain files and the batch harness.
//!
//! Problem format:
//!
//! ```text
//! <name> <n> <m> <p>
//! <n rows of n numbers>    A
//! <n rows of m numbers>    B
//! <p rows of n numbers>    C (absent when p = 0, a state-feedback problem)
//! ```
//!
//! Gain format:
//!
//! ```text
//! <rows> <cols>
//! <rows rows of cols numbers>
//! ```
//!
//! Numbers are decimal and whitespace-separated. Blank lines and lines
//! starting with `#` are ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::dhcore::{SystemPair, SystemTriplet};
use crate::fixtures::{self, Plant};
use crate::matcore::{Matrix, NormKind};
use crate::stab::{
    sof_solve, sof_solve_best, ssf_bcd_solve, ssf_solve, verify_feedback, FeedbackResult, FeedbackStatus, StabOptions,
};

/// Environment variable naming the default problem directory.
pub const DATA_DIR_ENV: &str = "DHSTAB_DATA";

/// Extension of problem files picked up by [`load_problems`].
pub const PROBLEM_EXT: &str = "prob";

/// Upper bound on any declared dimension.
pub const MAX_DIM: usize = 4096;

pub const CSV_HEADER: [&str; 9] =
    ["problem", "algorithm", "init", "norm_kind", "norm_value", "abscissa", "status", "iterations", "wall_time_s"];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: dimension mismatch: {msg}")]
    DimensionMismatch { line: usize, msg: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

fn parse_err(line: usize, msg: impl Into<String>) -> BenchError {
    BenchError::Parse { line, msg: msg.into() }
}

// ── Text matrices ───────────────────────────────────────────────────

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self { lines: text.lines().enumerate(), last: 0 }
    }

    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.lines.by_ref() {
            self.last = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Some((i + 1, t.split_whitespace().collect()));
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), BenchError> {
        self.next().ok_or_else(|| parse_err(self.last + 1, format!("unexpected end of input, expected {what}")))
    }

    fn finish(mut self) -> Result<(), BenchError> {
        match self.next() {
            Some((ln, _)) => Err(parse_err(ln, "trailing data")),
            None => Ok(()),
        }
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Matrix, BenchError> {
        let mut data = Vec::new();
        for i in 0..rows {
            let (ln, toks) = self.expect(&format!("row {} of {name}", i + 1))?;
            if toks.len() != cols {
                return Err(BenchError::DimensionMismatch {
                    line: ln,
                    msg: format!("row {} of {name} has {} entries, expected {cols}", i + 1, toks.len()),
                });
            }
            for (j, t) in toks.iter().enumerate() {
                data.push(number(ln, t, &format!("{name}[{},{}]", i + 1, j + 1))?);
            }
        }
        Ok(Matrix::from_row_slice(rows, cols, &data))
    }
}

fn number(line: usize, tok: &str, field: &str) -> Result<f64, BenchError> {
    let v: f64 = tok.parse().map_err(|_| parse_err(line, format!("{field}: invalid number `{tok}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{field}: non-finite value `{tok}`")));
    }
    Ok(v)
}

fn dim(line: usize, tok: &str, field: &str) -> Result<usize, BenchError> {
    let v: usize = tok.parse().map_err(|_| parse_err(line, format!("{field}: invalid count `{tok}`")))?;
    if v > MAX_DIM {
        return Err(parse_err(line, format!("{field}: {v} exceeds the limit {MAX_DIM}")));
    }
    Ok(v)
}

fn write_rows(out: &mut String, m: &Matrix) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

pub fn parse_matrix(text: &str) -> Result<Matrix, BenchError> {
    let mut r = Reader::new(text);
    let (ln, toks) = r.expect("header `<rows> <cols>`")?;
    if toks.len() != 2 {
        return Err(parse_err(ln, "header must be `<rows> <cols>`"));
    }
    let rows = dim(ln, toks[0], "rows")?;
    let cols = dim(ln, toks[1], "cols")?;
    let m = r.matrix("K", rows, cols)?;
    r.finish()?;
    Ok(m)
}

pub fn emit_matrix(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    write_rows(&mut out, m);
    out
}

pub fn read_matrix(path: &Path) -> Result<Matrix, BenchError> {
    parse_matrix(&read(path)?)
}

fn read(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
}

// ── Problem files ───────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub name: String,
    pub a: Matrix,
    pub b: Matrix,
    /// `None` for a state-feedback problem.
    pub c: Option<Matrix>,
}

impl ProblemFile {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Number of outputs; zero for state-feedback problems.
    pub fn p(&self) -> usize {
        self.c.as_ref().map_or(0, |c| c.nrows())
    }

    pub fn is_ssf(&self) -> bool {
        self.c.is_none()
    }

    pub fn pair(&self) -> SystemPair {
        SystemPair { a: self.a.clone(), b: self.b.clone() }
    }

    /// The output-feedback triplet, with `C = I` for state-feedback problems.
    pub fn triplet(&self) -> SystemTriplet {
        let n = self.n();
        SystemTriplet { a: self.a.clone(), b: self.b.clone(), c: self.c.clone().unwrap_or_else(|| Matrix::identity(n, n)) }
    }
}

impl From<Plant> for ProblemFile {
    fn from(p: Plant) -> Self {
        Self { name: p.name, a: p.a, b: p.b, c: p.c }
    }
}

pub fn parse_problem_str(text: &str) -> Result<ProblemFile, BenchError> {
    let mut r = Reader::new(text);
    let (ln, toks) = r.expect("header `<name> <n> <m> <p>`")?;
    if toks.len() != 4 {
        return Err(parse_err(ln, "header must be `<name> <n> <m> <p>`"));
    }
    let name = toks[0].to_string();
    let n = dim(ln, toks[1], "n")?;
    let m = dim(ln, toks[2], "m")?;
    let p = dim(ln, toks[3], "p")?;
    if n == 0 || m == 0 {
        return Err(BenchError::DimensionMismatch { line: ln, msg: "n and m must be positive".into() });
    }
    let a = r.matrix("A", n, n)?;
    let b = r.matrix("B", n, m)?;
    let c = if p == 0 { None } else { Some(r.matrix("C", p, n)?) };
    r.finish()?;
    Ok(ProblemFile { name, a, b, c })
}

pub fn parse_problem(path: &Path) -> Result<ProblemFile, BenchError> {
    parse_problem_str(&read(path)?)
}

/// Lossless text form; values use shortest round-trip decimals.
pub fn emit_problem(pf: &ProblemFile) -> String {
    let mut out = format!("{} {} {} {}\n", pf.name, pf.n(), pf.m(), pf.p());
    write_rows(&mut out, &pf.a);
    write_rows(&mut out, &pf.b);
    if let Some(c) = &pf.c {
        write_rows(&mut out, c);
    }
    out
}

/// Problem files in `dir`, ordered by file name. Unparsable files are kept
/// as errors under their file stem.
pub fn load_problems(dir: &Path) -> Result<Vec<(String, Result<ProblemFile, BenchError>)>, BenchError> {
    let io = |source| BenchError::Io { path: dir.to_path_buf(), source };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == PROBLEM_EXT) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| {
            let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            (stem, parse_problem(&path))
        })
        .collect())
}

/// File name of the shipped stabilizing gain for the counterexample plant.
pub const KSTAR_FILE: &str = "kstar.mat";

/// Writes every shipped fixture as `<name>.prob` plus the counterexample gain.
pub fn write_fixtures(dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| BenchError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for plant in fixtures::all() {
        let path = dir.join(format!("{}.{PROBLEM_EXT}", plant.name));
        fs::write(&path, emit_problem(&plant.into())).map_err(io(&path))?;
        written.push(path);
    }
    let path = dir.join(KSTAR_FILE);
    fs::write(&path, emit_matrix(&fixtures::counterexample_k())).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}

// ── Batch runs ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BenchMode {
    /// One row per problem: SSDP for state feedback, the output-feedback
    /// algorithm otherwise.
    #[default]
    Solve,
    /// Three state-feedback rows per problem: the Phase-1 gain, BCD and SSDP
    /// from the same start. Output-feedback problems are skipped.
    CompareSsf,
}

impl BenchMode {
    pub fn configurations(self) -> usize {
        match self {
            Self::Solve => 1,
            Self::CompareSsf => COMPARE_ALGORITHMS.len(),
        }
    }
}

pub const COMPARE_ALGORITHMS: [&str; 3] = ["init", "bcd", "ssdp"];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BenchOptions {
    pub mode: BenchMode,
    pub stab: StabOptions,
    /// Output feedback: keep the best of the four initialization strategies.
    pub best_init: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowStatus {
    Feedback(FeedbackStatus),
    ParseError,
    Skipped,
}

impl RowStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Feedback(s) => s.name(),
            Self::ParseError => "parse_error",
            Self::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub problem: String,
    pub algorithm: String,
    pub init: String,
    pub norm_kind: NormKind,
    pub norm_value: f64,
    pub abscissa: f64,
    pub status: RowStatus,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub k: Option<Matrix>,
}

impl BenchRow {
    fn blank(problem: &str, algorithm: &str, norm_kind: NormKind, status: RowStatus) -> Self {
        Self {
            problem: problem.to_string(),
            algorithm: algorithm.to_string(),
            init: "-".into(),
            norm_kind,
            norm_value: f64::NAN,
            abscissa: f64::NAN,
            status,
            iterations: 0,
            wall_time_s: 0.0,
            k: None,
        }
    }

    pub fn is_stabilized(&self) -> bool {
        self.status == RowStatus::Feedback(FeedbackStatus::Stabilized)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Row for gain `k`, re-verified on the original plant. A gain claimed
/// stabilizing that fails the eigenvalue check is reported as a numerical
/// failure.
fn verified_row(
    problem: &str,
    system: &SystemTriplet,
    algorithm: &str,
    k: &Matrix,
    status: FeedbackStatus,
    opts: &StabOptions,
) -> BenchRow {
    let mut row = BenchRow::blank(problem, algorithm, opts.norm, RowStatus::Feedback(status));
    row.norm_value = opts.norm.eval(k);
    match verify_feedback(system, k, opts.stability_threshold()) {
        Ok((abscissa, stable)) => {
            row.abscissa = abscissa;
            if status == FeedbackStatus::Stabilized && !stable {
                row.status = RowStatus::Feedback(FeedbackStatus::FailedNumerics);
            }
        }
        Err(_) => row.status = RowStatus::Feedback(FeedbackStatus::FailedNumerics),
    }
    row.k = Some(k.clone());
    row
}

fn result_row(problem: &str, system: &SystemTriplet, algorithm: &str, r: &FeedbackResult, opts: &StabOptions) -> BenchRow {
    let mut row = verified_row(problem, system, algorithm, &r.k, r.status, opts);
    row.init = r.init.map_or_else(|| "-".into(), |i| i.name().into());
    row.iterations = r.iterations;
    row.wall_time_s = r.timings.total().as_secs_f64();
    row
}

fn solve_rows(pf: &ProblemFile, opts: &BenchOptions) -> Vec<BenchRow> {
    let system = pf.triplet();
    let start = Instant::now();
    let (algorithm, r) = if pf.is_ssf() {
        ("ssf", ssf_solve(&pf.pair(), &opts.stab))
    } else if opts.best_init {
        ("sof", sof_solve_best(&system, &opts.stab))
    } else {
        ("sof", sof_solve(&system, &opts.stab))
    };
    let mut row = result_row(&pf.name, &system, algorithm, &r, &opts.stab);
    row.wall_time_s = start.elapsed().as_secs_f64();
    vec![row]
}

fn compare_rows(pf: &ProblemFile, opts: &BenchOptions) -> Vec<BenchRow> {
    let norm = opts.stab.norm;
    if !pf.is_ssf() {
        return COMPARE_ALGORITHMS.iter().map(|a| BenchRow::blank(&pf.name, a, norm, RowStatus::Skipped)).collect();
    }
    let system = pf.triplet();
    let pair = pf.pair();
    let t0 = Instant::now();
    let ssdp = ssf_solve(&pair, &opts.stab);
    let ssdp_time = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let bcd = ssf_bcd_solve(&pair, &opts.stab);
    let bcd_time = t1.elapsed().as_secs_f64();

    let mut init = if ssdp.status == FeedbackStatus::FailedFeasibility {
        BenchRow::blank(&pf.name, "init", norm, RowStatus::Feedback(FeedbackStatus::FailedFeasibility))
    } else {
        verified_row(&pf.name, &system, "init", &ssdp.initial_k, FeedbackStatus::Stabilized, &opts.stab)
    };
    init.wall_time_s = ssdp.timings.feasibility.as_secs_f64();
    let mut bcd_row = result_row(&pf.name, &system, "bcd", &bcd, &opts.stab);
    bcd_row.wall_time_s = bcd_time;
    let mut ssdp_row = result_row(&pf.name, &system, "ssdp", &ssdp, &opts.stab);
    ssdp_row.wall_time_s = ssdp_time;
    vec![init, bcd_row, ssdp_row]
}

/// Runs the configured algorithms over problems in order. Failures become
/// rows; the batch never aborts.
pub fn run_problems(problems: &[(String, Result<ProblemFile, BenchError>)], opts: &BenchOptions) -> BenchReport {
    let mut report = BenchReport::default();
    for (stem, parsed) in problems {
        match parsed {
            Ok(pf) => match opts.mode {
                BenchMode::Solve => report.rows.extend(solve_rows(pf, opts)),
                BenchMode::CompareSsf => report.rows.extend(compare_rows(pf, opts)),
            },
            Err(_) => {
                let algorithms: Vec<&str> = match opts.mode {
                    BenchMode::Solve => vec!["-"],
                    BenchMode::CompareSsf => COMPARE_ALGORITHMS.to_vec(),
                };
                for a in algorithms {
                    report.rows.push(BenchRow::blank(stem, a, opts.stab.norm, RowStatus::ParseError));
                }
            }
        }
    }
    report
}

pub fn run_bench(dir: &Path, opts: &BenchOptions) -> Result<BenchReport, BenchError> {
    Ok(run_problems(&load_problems(dir)?, opts))
}

fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6e}")
    }
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(CSV_HEADER);
        for r in &self.rows {
            let _ = w.write_record([
                r.problem.clone(),
                r.algorithm.clone(),
                r.init.clone(),
                r.norm_kind.short_name().to_string(),
                fmt_value(r.norm_value),
                fmt_value(r.abscissa),
                r.status.name().to_string(),
                r.iterations.to_string(),
                format!("{:.3}", r.wall_time_s),
            ]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    /// Aligned plain-text table with the CSV columns.
    pub fn to_table(&self) -> String {
        let rows: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.problem.clone(),
                    r.algorithm.clone(),
                    r.init.clone(),
                    r.norm_kind.short_name().to_string(),
                    fmt_short(r.norm_value),
                    fmt_short(r.abscissa),
                    r.status.name().to_string(),
                    r.iterations.to_string(),
                    format!("{:.2}", r.wall_time_s),
                ]
            })
            .collect();
        align(&CSV_HEADER.map(String::from), &rows)
    }

    /// One line per problem with the Init, BCD and SSDP norms side by side.
    pub fn comparison_table(&self) -> String {
        let header = ["problem", "Init", "BCD", "SSDP"].map(String::from);
        let mut rows = Vec::new();
        let mut problems: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !problems.contains(&r.problem.as_str()) {
                problems.push(&r.problem);
            }
        }
        for p in problems {
            let cell = |alg: &str| {
                self.rows.iter().find(|r| r.problem == p && r.algorithm == alg).map_or_else(String::new, |r| {
                    if r.is_stabilized() {
                        fmt_short(r.norm_value)
                    } else {
                        r.status.name().to_string()
                    }
                })
            };
            rows.push([p.to_string(), cell("init"), cell("bcd"), cell("ssdp")]);
        }
        align(&header, &rows)
    }
}

fn fmt_short(v: f64) -> String {
    if v.is_nan() {
        "-".into()
    } else {
        format!("{v:.4e}")
    }
}

fn align<const N: usize>(header: &[String; N], rows: &[[String; N]]) -> String {
    let mut width: [usize; N] = std::array::from_fn(|i| header[i].chars().count());
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String; N]| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(header) + "\n";
    out += &(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n");
    for r in rows {
        out += &(line(r) + "\n");
    }
    out
}

#[cfg(test)]
mod tests;
