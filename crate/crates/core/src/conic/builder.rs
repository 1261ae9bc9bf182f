//! Affine matrix expressions over a flat variable vector and a builder that
//! turns cone memberships of such expressions into a [`ConicProgram`].

use nalgebra::DMatrix;

use super::cones::SQRT2;
use super::{Cone, ConeKind, ConicProgram, SparseMatrix, VarEntry, VarMap, VarShape};
use crate::matcore::Matrix;

/// `constant + Σₖ xₖ Mₖ`, stored as a constant matrix and a coefficient matrix
/// whose column `k` is `vec(Mₖ)` (column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    pub constant: Matrix,
    pub coef: DMatrix<f64>,
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        Self {
            constant: Matrix::zeros(rows, cols),
            coef: DMatrix::zeros(rows * cols, nvars),
        }
    }

    pub fn constant(m: &Matrix, nvars: usize) -> Self {
        Self {
            constant: m.clone(),
            coef: DMatrix::zeros(m.len(), nvars),
        }
    }

    /// The matrix decoded from a named variable.
    pub fn var(entry: &VarEntry, nvars: usize) -> Self {
        let (r, c) = entry.shape.dims();
        let mut out = Self::zeros(r, c, nvars);
        for j in 0..c {
            for i in 0..r {
                if let Some((k, sign)) = entry.shape.coord(i, j) {
                    out.coef[(j * r + i, entry.offset + k)] = sign;
                }
            }
        }
        out
    }

    /// A single scalar variable as a `1 × 1` expression.
    pub fn scalar_var(index: usize, nvars: usize) -> Self {
        let mut out = Self::zeros(1, 1, nvars);
        out.coef[(0, index)] = 1.0;
        out
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn nvars(&self) -> usize {
        self.coef.ncols()
    }

    pub fn is_constant(&self) -> bool {
        self.coef.iter().all(|v| *v == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        let v = &self.coef * nalgebra::DVector::from_column_slice(x);
        &self.constant + Matrix::from_column_slice(self.nrows(), self.ncols(), v.as_slice())
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(
            (self.nrows(), self.ncols(), self.nvars()),
            (other.nrows(), other.ncols(), other.nvars()),
            "expression shape mismatch"
        );
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same(other);
        Self {
            constant: &self.constant + &other.constant,
            coef: &self.coef + &other.coef,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_same(other);
        Self {
            constant: &self.constant - &other.constant,
            coef: &self.coef - &other.coef,
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            constant: &self.constant * a,
            coef: &self.coef * a,
        }
    }

    pub fn add_constant(&self, m: &Matrix) -> Self {
        Self {
            constant: &self.constant + m,
            coef: self.coef.clone(),
        }
    }

    /// `L · self`.
    pub fn left_mul(&self, l: &Matrix) -> Self {
        let (r, c) = (self.nrows(), self.ncols());
        assert_eq!(l.ncols(), r, "left factor shape mismatch");
        let lr = l.nrows();
        let mut coef = DMatrix::zeros(lr * c, self.nvars());
        for j in 0..c {
            let block = self.coef.rows(j * r, r);
            coef.rows_mut(j * lr, lr).copy_from(&(l * block));
        }
        Self { constant: l * &self.constant, coef }
    }

    /// `self · R`.
    pub fn right_mul(&self, rm: &Matrix) -> Self {
        let (r, c) = (self.nrows(), self.ncols());
        assert_eq!(rm.nrows(), c, "right factor shape mismatch");
        let rc = rm.ncols();
        let mut coef = DMatrix::zeros(r * rc, self.nvars());
        for jn in 0..rc {
            for j in 0..c {
                let w = rm[(j, jn)];
                if w != 0.0 {
                    let src = self.coef.rows(j * r, r) * w;
                    let mut dst = coef.rows_mut(jn * r, r);
                    dst += src;
                }
            }
        }
        Self { constant: &self.constant * rm, coef }
    }

    pub fn transpose(&self) -> Self {
        let (r, c) = (self.nrows(), self.ncols());
        let mut coef = DMatrix::zeros(r * c, self.nvars());
        for j in 0..c {
            for i in 0..r {
                coef.row_mut(i * c + j).copy_from(&self.coef.row(j * r + i));
            }
        }
        Self { constant: self.constant.transpose(), coef }
    }

    /// Block matrix `[[a, b], [c, d]]`.
    pub fn block2(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        assert_eq!(a.nrows(), b.nrows());
        assert_eq!(c.nrows(), d.nrows());
        assert_eq!(a.ncols(), c.ncols());
        assert_eq!(b.ncols(), d.ncols());
        let (r1, r2, c1, c2) = (a.nrows(), c.nrows(), a.ncols(), b.ncols());
        let rows = r1 + r2;
        let cols = c1 + c2;
        let mut out = Self::zeros(rows, cols, a.nvars());
        for (blk, r0, c0) in [(a, 0, 0), (b, 0, c1), (c, r1, 0), (d, r1, c1)] {
            out.constant.view_mut((r0, c0), (blk.nrows(), blk.ncols())).copy_from(&blk.constant);
            for j in 0..blk.ncols() {
                for i in 0..blk.nrows() {
                    out.coef
                        .row_mut((c0 + j) * rows + r0 + i)
                        .copy_from(&blk.coef.row(j * blk.nrows() + i));
                }
            }
        }
        out
    }

    /// `t · I` for a scalar variable `t`.
    pub fn scalar_identity(index: usize, n: usize, nvars: usize) -> Self {
        let mut out = Self::zeros(n, n, nvars);
        for i in 0..n {
            out.coef[(i * n + i, index)] = 1.0;
        }
        out
    }

    /// Entry `(i, j)` as `(constant, coefficient row)`.
    pub fn entry(&self, i: usize, j: usize) -> (f64, Vec<f64>) {
        let k = j * self.nrows() + i;
        (self.constant[(i, j)], self.coef.row(k).iter().copied().collect())
    }
}

#[derive(Debug, Clone)]
struct Block {
    cone: Cone,
    rhs: Vec<f64>,
    /// `(local row, column, value)` of the constraint matrix.
    entries: Vec<(usize, usize, f64)>,
}

/// Incrementally assembles a [`ConicProgram`]. Each cone constraint states
/// that an affine expression lies in the cone; the builder stores it as
/// `s = b − Ax` with `b` the constant part and `A` the negated coefficients.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    vars: VarMap,
    nvars: usize,
    objective: Vec<f64>,
    blocks: Vec<Block>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_variable(&mut self, name: &str, shape: VarShape) -> VarEntry {
        let entry = VarEntry { name: name.to_string(), shape, offset: self.nvars };
        self.nvars += shape.len();
        self.objective.resize(self.nvars, 0.0);
        self.vars.entries.push(entry.clone());
        entry
    }

    pub fn add_scalar(&mut self, name: &str) -> usize {
        self.add_variable(name, VarShape::Scalar).offset
    }

    pub fn vars(&self) -> &VarMap {
        &self.vars
    }

    /// Adds `coef · x[index]` to the objective.
    pub fn minimize(&mut self, index: usize, coef: f64) {
        self.objective[index] += coef;
    }

    fn push_rows(&mut self, kind: ConeKind, size: usize, rows: Vec<(f64, Vec<f64>)>) {
        let mut rhs = Vec::with_capacity(rows.len());
        let mut entries = Vec::new();
        for (r, (constant, coef)) in rows.into_iter().enumerate() {
            rhs.push(constant);
            for (j, v) in coef.into_iter().enumerate() {
                if v != 0.0 {
                    entries.push((r, j, -v));
                }
            }
        }
        self.blocks.push(Block { cone: Cone::new(kind, size), rhs, entries });
    }

    fn entries_colmajor(e: &MatExpr) -> Vec<(f64, Vec<f64>)> {
        let mut rows = Vec::with_capacity(e.constant.len());
        for j in 0..e.ncols() {
            for i in 0..e.nrows() {
                rows.push(e.entry(i, j));
            }
        }
        rows
    }

    fn check_width(&self, e: &MatExpr) {
        assert_eq!(e.nvars(), self.nvars, "expression built for a different variable count");
    }

    /// Every entry of `e` equals zero. Rows are scaled to unit coefficient
    /// norm; rows without coefficients are kept as stated.
    pub fn add_zero(&mut self, e: &MatExpr) {
        self.check_width(e);
        let rows = Self::entries_colmajor(e)
            .into_iter()
            .map(|(c, coef)| {
                let norm = coef.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 0.0 {
                    (c / norm, coef.into_iter().map(|v| v / norm).collect())
                } else {
                    (c, coef)
                }
            })
            .collect::<Vec<_>>();
        let n = rows.len();
        if n > 0 {
            self.push_rows(ConeKind::Zero, n, rows);
        }
    }

    /// Every entry of `e` is nonnegative.
    pub fn add_nonneg(&mut self, e: &MatExpr) {
        self.check_width(e);
        let rows = Self::entries_colmajor(e);
        let n = rows.len();
        if n > 0 {
            self.push_rows(ConeKind::Nonneg, n, rows);
        }
    }

    /// `‖vec(tail)‖₂ ≤ head` for a `1 × 1` expression `head`.
    pub fn add_soc(&mut self, head: &MatExpr, tail: &MatExpr) {
        self.check_width(head);
        self.check_width(tail);
        assert_eq!((head.nrows(), head.ncols()), (1, 1), "cone head must be scalar");
        let mut rows = vec![head.entry(0, 0)];
        rows.extend(Self::entries_colmajor(tail));
        let n = rows.len();
        self.push_rows(ConeKind::SecondOrder, n, rows);
    }

    /// The symmetric part of the square expression `e` is PSD.
    pub fn add_psd(&mut self, e: &MatExpr) {
        self.check_width(e);
        let k = e.nrows();
        assert_eq!(k, e.ncols(), "PSD expression must be square");
        if k == 0 {
            return;
        }
        let mut rows = Vec::with_capacity(k * (k + 1) / 2);
        for j in 0..k {
            for i in j..k {
                if i == j {
                    rows.push(e.entry(i, i));
                } else {
                    let (c1, r1) = e.entry(i, j);
                    let (c2, r2) = e.entry(j, i);
                    let s = 0.5 * SQRT2;
                    rows.push(((c1 + c2) * s, r1.iter().zip(&r2).map(|(a, b)| (a + b) * s).collect()));
                }
            }
        }
        self.push_rows(ConeKind::Psd, k, rows);
    }

    pub fn finish(self) -> ConicProgram {
        let nrows: usize = self.blocks.iter().map(|b| b.cone.rows()).sum();
        let mut a = SparseMatrix::new(nrows, self.nvars);
        let mut b = Vec::with_capacity(nrows);
        let mut cones = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for blk in self.blocks {
            for (i, j, v) in blk.entries {
                a.entries.push((off + i, j, v));
            }
            off += blk.rhs.len();
            b.extend(blk.rhs);
            cones.push(blk.cone);
        }
        ConicProgram { c: self.objective, a, b, cones, vars: self.vars }
    }
}
