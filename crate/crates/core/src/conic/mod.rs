//! Small dense conic solver.
//!
//! Programs have the form
//!
//! ```text
//! minimize cᵀx  subject to  Ax + s = b,  s ∈ K
//! ```
//!
//! where `K` is a product of zero, free, nonnegative, second-order and PSD
//! cones partitioning the rows of `A` in order. The dual is
//! `maximize −bᵀy  subject to  Aᵀy + c = 0,  y ∈ K*`.

pub mod builder;
mod cones;
pub mod conformance;
mod dump;
mod ipm;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use cones::{Cone, ConeKind};
pub use dump::{parse_dump, write_dump, DumpError};

use crate::matcore::{orthogonal_complement, svd, Matrix};
use cones::ConeSet;

// ── Program data ────────────────────────────────────────────────────

/// Sparse matrix in triplet form. Duplicate entries are summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        if val != 0.0 {
            self.entries.push((row, col, val));
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut out = Self::new(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                out.push(i, j, m[(i, j)]);
            }
        }
        out
    }
}

/// Shape of a named slice of the variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarShape {
    Scalar,
    Vector(usize),
    /// Skew-symmetric `n × n`, stored as the strict lower triangle in
    /// column-major order.
    Skew(usize),
    /// Symmetric `n × n`, stored as the lower triangle in column-major order.
    Sym(usize),
    /// Dense `r × c`, column-major.
    Dense(usize, usize),
}

impl VarShape {
    pub fn len(&self) -> usize {
        match *self {
            VarShape::Scalar => 1,
            VarShape::Vector(n) => n,
            VarShape::Skew(n) => n * n.saturating_sub(1) / 2,
            VarShape::Sym(n) => n * (n + 1) / 2,
            VarShape::Dense(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dimensions of the decoded matrix.
    pub fn dims(&self) -> (usize, usize) {
        match *self {
            VarShape::Scalar => (1, 1),
            VarShape::Vector(n) => (n, 1),
            VarShape::Skew(n) | VarShape::Sym(n) => (n, n),
            VarShape::Dense(r, c) => (r, c),
        }
    }

    /// Coordinate positions of matrix entry `(i, j)` with their signs.
    /// Returns `None` for structurally zero entries (skew diagonal).
    pub fn coord(&self, i: usize, j: usize) -> Option<(usize, f64)> {
        match *self {
            VarShape::Scalar => Some((0, 1.0)),
            VarShape::Vector(_) => Some((i, 1.0)),
            VarShape::Dense(r, _) => Some((j * r + i, 1.0)),
            VarShape::Sym(n) => {
                let (i, j) = if i >= j { (i, j) } else { (j, i) };
                Some((j * n - j * (j + 1) / 2 + i, 1.0))
            }
            VarShape::Skew(n) => {
                if i == j {
                    return None;
                }
                let (lo, hi, sign) = if i > j { (i, j, 1.0) } else { (j, i, -1.0) };
                Some((hi * n - hi * (hi + 1) / 2 + (lo - hi - 1), sign))
            }
        }
    }

    pub fn decode(&self, x: &[f64]) -> Matrix {
        let (r, c) = self.dims();
        let mut m = Matrix::zeros(r, c);
        for j in 0..c {
            for i in 0..r {
                if let Some((k, sign)) = self.coord(i, j) {
                    m[(i, j)] = sign * x[k];
                }
            }
        }
        m
    }

    /// Inverse of [`decode`](Self::decode) for matrices of the right class.
    pub fn encode(&self, m: &Matrix) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let (r, c) = self.dims();
        for j in 0..c {
            for i in 0..r {
                let keep = match self {
                    VarShape::Sym(_) => i >= j,
                    VarShape::Skew(_) => i > j,
                    _ => true,
                };
                if keep {
                    if let Some((k, _)) = self.coord(i, j) {
                        out[k] = m[(i, j)];
                    }
                }
            }
        }
        out
    }

    pub fn tag(&self) -> String {
        match *self {
            VarShape::Scalar => "scalar".into(),
            VarShape::Vector(n) => format!("vector {n}"),
            VarShape::Skew(n) => format!("skew {n}"),
            VarShape::Sym(n) => format!("sym {n}"),
            VarShape::Dense(r, c) => format!("dense {r} {c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarEntry {
    pub name: String,
    pub shape: VarShape,
    pub offset: usize,
}

/// Named slices of the variable vector.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VarMap {
    pub entries: Vec<VarEntry>,
}

impl VarMap {
    pub fn get(&self, name: &str) -> Option<&VarEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Decodes a named variable from a primal vector.
    pub fn decode(&self, name: &str, x: &[f64]) -> Option<Matrix> {
        let e = self.get(name)?;
        Some(e.shape.decode(&x[e.offset..e.offset + e.shape.len()]))
    }

    pub fn total_len(&self) -> usize {
        self.entries.iter().map(|e| e.offset + e.shape.len()).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    pub c: Vec<f64>,
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    pub vars: VarMap,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error("objective has {got} entries, expected {expected}")]
    ObjectiveLength { got: usize, expected: usize },
    #[error("right-hand side has {got} entries, expected {expected}")]
    RhsLength { got: usize, expected: usize },
    #[error("cones cover {got} rows, constraint matrix has {expected}")]
    ConeRows { got: usize, expected: usize },
    #[error("entry ({row}, {col}) outside {nrows}×{ncols}")]
    EntryOutOfRange { row: usize, col: usize, nrows: usize, ncols: usize },
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("variable `{0}` extends past the variable vector")]
    VariableOutOfRange(String),
    #[error("second-order cone of size 0")]
    EmptySoc,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.a.ncols
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.a.ncols;
        let m = self.a.nrows;
        if self.c.len() != n {
            return Err(ProgramError::ObjectiveLength { got: self.c.len(), expected: n });
        }
        if self.b.len() != m {
            return Err(ProgramError::RhsLength { got: self.b.len(), expected: m });
        }
        let rows: usize = self.cones.iter().map(Cone::rows).sum();
        if rows != m {
            return Err(ProgramError::ConeRows { got: rows, expected: m });
        }
        if self.cones.iter().any(|c| c.kind == ConeKind::SecondOrder && c.size == 0) {
            return Err(ProgramError::EmptySoc);
        }
        for &(i, j, v) in &self.a.entries {
            if i >= m || j >= n {
                return Err(ProgramError::EntryOutOfRange { row: i, col: j, nrows: m, ncols: n });
            }
            if !v.is_finite() {
                return Err(ProgramError::NonFinite("constraint matrix"));
            }
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(ProgramError::NonFinite("objective"));
        }
        if self.b.iter().any(|v| !v.is_finite()) {
            return Err(ProgramError::NonFinite("right-hand side"));
        }
        for e in &self.vars.entries {
            if e.offset + e.shape.len() > n {
                return Err(ProgramError::VariableOutOfRange(e.name.clone()));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

// ── Solution types ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    InfeasibleCertificate,
    UnboundedCertificate,
    IterationLimit,
    NumericalFailure,
}

impl SolveStatus {
    pub fn name(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::InfeasibleCertificate => "infeasible_certificate",
            SolveStatus::UnboundedCertificate => "unbounded_certificate",
            SolveStatus::IterationLimit => "iteration_limit",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    /// `‖Ax + s − b‖ / (1 + ‖b‖)`.
    pub primal_feas: f64,
    /// `‖Aᵀy + c‖ / (1 + ‖c‖)`.
    pub dual_feas: f64,
    /// `|cᵀx + bᵀy| / (1 + |cᵀx| + |bᵀy|)`.
    pub duality_gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_feas.max(self.dual_feas).max(self.duality_gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterLog {
    pub iter: usize,
    pub pcost: f64,
    pub dcost: f64,
    pub primal_feas: f64,
    pub dual_feas: f64,
    pub duality_gap: f64,
    pub mu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iters: 200, verbose: false }
    }
}

/// Solver output.
///
/// For `Optimal` and limit/failure statuses `primal`, `slack` and `dual` hold
/// the last iterate. For `InfeasibleCertificate`, `dual` is a ray `y ∈ K*`
/// with `Aᵀy ≈ 0` and `bᵀy = −1`. For `UnboundedCertificate`, `primal` is a
/// ray `d` with `−Ad ∈ K` approximately and `cᵀd = −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub primal: Vec<f64>,
    pub slack: Vec<f64>,
    pub dual: Vec<f64>,
    pub status: SolveStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub log: Vec<IterLog>,
    pub diagnostics: Option<String>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    fn bare(prog: &ConicProgram, status: SolveStatus, diagnostics: Option<String>) -> Self {
        Self {
            primal: vec![0.0; prog.num_vars()],
            slack: vec![0.0; prog.num_rows()],
            dual: vec![0.0; prog.num_rows()],
            status,
            residuals: Residuals { primal_feas: f64::INFINITY, dual_feas: f64::INFINITY, duality_gap: f64::INFINITY },
            iterations: 0,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            log: Vec::new(),
            diagnostics,
        }
    }
}

/// Anything that can solve a [`ConicProgram`] with the post-conditions of
/// [`solve`]. See [`conformance::check_backend`].
pub trait ConicBackend {
    fn name(&self) -> &str;
    fn solve(&self, prog: &ConicProgram, opts: &SolverOptions) -> ConicSolution;
}

/// The built-in interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn name(&self) -> &str {
        "interior-point"
    }

    fn solve(&self, prog: &ConicProgram, opts: &SolverOptions) -> ConicSolution {
        solve(prog, opts)
    }
}

/// Solves with the default backend.
pub fn backend_contract(prog: &ConicProgram) -> ConicSolution {
    InteriorPoint.solve(prog, &SolverOptions::default())
}

// ── Preprocessing and recovery ──────────────────────────────────────

struct Layout {
    eq_rows: Vec<usize>,
    cone_rows: Vec<usize>,
    free_rows: Vec<usize>,
    cones: Vec<Cone>,
}

fn layout(prog: &ConicProgram) -> Layout {
    let mut eq_rows = Vec::new();
    let mut cone_rows = Vec::new();
    let mut free_rows = Vec::new();
    let mut cones = Vec::new();
    let mut off = 0;
    for c in &prog.cones {
        let rows = off..off + c.rows();
        match c.kind {
            ConeKind::Zero => eq_rows.extend(rows),
            ConeKind::Free => free_rows.extend(rows),
            _ => {
                if c.rows() > 0 {
                    cone_rows.extend(rows);
                    cones.push(*c);
                }
            }
        }
        off += c.rows();
    }
    Layout { eq_rows, cone_rows, free_rows, cones }
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

fn rank_of(s: &[f64], tol_rel: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().take_while(|v| **v > tol_rel * smax && **v > 0.0).count()
}

const RANK_TOL: f64 = 1e-12;

/// Maps reduced iterates back to the original space and measures residuals.
struct Recovery<'a> {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    lay: &'a Layout,
    x0: DVector<f64>,
    basis: DMatrix<f64>,
    /// Pseudoinverse of the transposed equality block.
    eq_t_pinv: DMatrix<f64>,
}

impl Recovery<'_> {
    fn full(&self, w: &DVector<f64>, s: &DVector<f64>, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let x = &self.x0 + &self.basis * w;
        let m = self.a.nrows();
        let mut slack = DVector::zeros(m);
        let mut dual = DVector::zeros(m);
        for (k, &row) in self.lay.cone_rows.iter().enumerate() {
            slack[row] = s[k];
            dual[row] = z[k];
        }
        let ax = &self.a * &x;
        for &row in &self.lay.free_rows {
            slack[row] = self.b[row] - ax[row];
        }
        if !self.lay.eq_rows.is_empty() {
            // Aᵢᵀy = −(c + A_Kᵀ z) in the least-squares sense.
            let rhs = -(&self.c + self.a.tr_mul(&dual));
            let y = &self.eq_t_pinv * rhs;
            for (k, &row) in self.lay.eq_rows.iter().enumerate() {
                dual[row] = y[k];
            }
        }
        (x, slack, dual)
    }

    fn residuals(&self, x: &DVector<f64>, s: &DVector<f64>, y: &DVector<f64>) -> (Residuals, f64, f64) {
        let pres = (&self.a * x + s - &self.b).norm() / (1.0 + self.b.norm());
        let dres = (self.a.tr_mul(y) + &self.c).norm() / (1.0 + self.c.norm());
        let pcost = self.c.dot(x);
        let dcost = -self.b.dot(y);
        let gap = (pcost - dcost).abs() / (1.0 + pcost.abs() + dcost.abs());
        (Residuals { primal_feas: pres, dual_feas: dres, duality_gap: gap }, pcost, dcost)
    }
}

impl ipm::Measure for Recovery<'_> {
    fn measure(&self, w: &DVector<f64>, s: &DVector<f64>, z: &DVector<f64>) -> (Residuals, f64, f64) {
        let (x, slack, dual) = self.full(w, s, z);
        self.residuals(&x, &slack, &dual)
    }
}

/// Solves `prog`. Never panics on well-formed input; malformed programs yield
/// `NumericalFailure` with a diagnostic.
pub fn solve(prog: &ConicProgram, opts: &SolverOptions) -> ConicSolution {
    if let Err(e) = prog.validate() {
        return ConicSolution::bare(prog, SolveStatus::NumericalFailure, Some(format!("malformed program: {e}")));
    }
    if !(opts.tol > 0.0) {
        return ConicSolution::bare(prog, SolveStatus::NumericalFailure, Some("tolerance must be positive".into()));
    }
    let n = prog.num_vars();
    let a = prog.a.to_dense();
    let b = DVector::from_column_slice(&prog.b);
    let c = DVector::from_column_slice(&prog.c);
    let lay = layout(prog);

    // Equality rows: x = x0 + N w.
    let a_eq = select_rows(&a, &lay.eq_rows);
    let b_eq = DVector::from_fn(lay.eq_rows.len(), |i, _| b[lay.eq_rows[i]]);
    let (x0, null_basis, eq_t_pinv) = if lay.eq_rows.is_empty() {
        (DVector::zeros(n), DMatrix::identity(n, n), DMatrix::zeros(n, 0))
    } else {
        // A_eqᵀ = U S Vᵀ: U spans the row space of A_eq, V its range.
        let dec = match svd(&a_eq.transpose()) {
            Ok(d) => d,
            Err(e) => return ConicSolution::bare(prog, SolveStatus::NumericalFailure, Some(e.to_string())),
        };
        let r = rank_of(dec.s.as_slice(), RANK_TOL * (a_eq.nrows().max(n) as f64));
        let ur = dec.v.columns(0, r).into_owned();
        let vr = dec.u.columns(0, r).into_owned();
        let coeff = ur.tr_mul(&b_eq);
        let b_perp = &b_eq - &ur * &coeff;
        if b_perp.norm() > opts.tol * (1.0 + b_eq.norm()) {
            // Farkas ray on the equality rows alone.
            let scale = b_perp.norm_squared();
            let mut sol = ConicSolution::bare(prog, SolveStatus::InfeasibleCertificate, None);
            for (k, &row) in lay.eq_rows.iter().enumerate() {
                sol.dual[row] = -b_perp[k] / scale;
            }
            sol.residuals = Residuals::default();
            return sol;
        }
        let mut x0 = DVector::zeros(n);
        for k in 0..r {
            x0 += vr.column(k) * (coeff[k] / dec.s[k]);
        }
        let null = orthogonal_complement(&vr);
        // (A_eqᵀ)† = U_r Σ_r⁻¹ V_rᵀ.
        let mut pinv_t = DMatrix::zeros(a_eq.nrows(), n);
        for k in 0..r {
            pinv_t += ur.column(k) * vr.column(k).transpose() / dec.s[k];
        }
        (x0, null, pinv_t)
    };

    // Cone rows restricted to the affine subspace.
    let g_full = select_rows(&a, &lay.cone_rows);
    let h_full = DVector::from_fn(lay.cone_rows.len(), |i, _| b[lay.cone_rows[i]]);
    let g_n = &g_full * &null_basis;
    let h_red = &h_full - &g_full * &x0;
    let c_n = null_basis.tr_mul(&c);

    // Directions invisible to the cone rows must not change the objective.
    let (basis_w, q) = if g_n.nrows() == 0 || g_n.ncols() == 0 {
        (DMatrix::zeros(g_n.ncols(), 0), 0)
    } else {
        let dec = match svd(&g_n) {
            Ok(d) => d,
            Err(e) => return ConicSolution::bare(prog, SolveStatus::NumericalFailure, Some(e.to_string())),
        };
        let q = rank_of(dec.s.as_slice(), RANK_TOL * (g_n.nrows().max(g_n.ncols()) as f64));
        (dec.v.columns(0, q).into_owned(), q)
    };
    let c_w = basis_w.tr_mul(&c_n);
    let c_perp = &c_n - &basis_w * &c_w;
    if c_perp.norm() > opts.tol * (1.0 + c.norm()) {
        let d = -(&null_basis * &c_perp);
        let scale = -c.dot(&d);
        let mut sol = ConicSolution::bare(prog, SolveStatus::UnboundedCertificate, None);
        for (k, v) in d.iter().enumerate() {
            sol.primal[k] = v / scale;
        }
        sol.residuals = Residuals::default();
        return sol;
    }
    let basis = &null_basis * &basis_w;
    let g_red = &g_n * &basis_w;

    let recovery = Recovery {
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
        lay: &lay,
        x0,
        basis,
        eq_t_pinv,
    };

    let reduced = ipm::Reduced {
        g: g_red,
        h: h_red,
        c: c_w,
        cones: ConeSet::new(&lay.cones),
    };
    debug_assert_eq!(reduced.g.ncols(), q);

    if reduced.cones.dim == 0 {
        let w = DVector::zeros(q);
        let (x, s, y) = recovery.full(&w, &DVector::zeros(0), &DVector::zeros(0));
        let (res, pcost, dcost) = recovery.residuals(&x, &s, &y);
        return ConicSolution {
            primal: x.as_slice().to_vec(),
            slack: s.as_slice().to_vec(),
            dual: y.as_slice().to_vec(),
            status: if res.max() <= opts.tol { SolveStatus::Optimal } else { SolveStatus::NumericalFailure },
            residuals: res,
            iterations: 0,
            primal_objective: pcost,
            dual_objective: dcost,
            log: Vec::new(),
            diagnostics: None,
        };
    }

    let result = ipm::run(&reduced, opts, &recovery);
    let status = result.outcome.status();
    let it = &result.iterate;
    let mut sol = match status {
        SolveStatus::InfeasibleCertificate => {
            let scale = -reduced.h.dot(&it.z);
            let z = &it.z / scale;
            let zero_w = DVector::zeros(q);
            let (_, _, mut y) = recovery.full(&zero_w, &DVector::zeros(z.len()), &z);
            // The equality multipliers must cancel Aᵀz without the objective.
            if !lay.eq_rows.is_empty() {
                let mut yk = DVector::zeros(prog.num_rows());
                for (k, &row) in lay.cone_rows.iter().enumerate() {
                    yk[row] = z[k];
                }
                let ye = &recovery.eq_t_pinv * (-a.tr_mul(&yk));
                for (k, &row) in lay.eq_rows.iter().enumerate() {
                    y[row] = ye[k];
                }
            }
            let norm_b = -b.dot(&y);
            let y = if norm_b > 0.0 { y / norm_b } else { y };
            let mut sol = ConicSolution::bare(prog, status, None);
            sol.dual = y.as_slice().to_vec();
            sol
        }
        SolveStatus::UnboundedCertificate => {
            let d = &recovery.basis * &it.x;
            let scale = -c.dot(&d);
            let mut sol = ConicSolution::bare(prog, status, None);
            sol.primal = (d / scale).as_slice().to_vec();
            let sd = -(&a * DVector::from_column_slice(&sol.primal));
            sol.slack = sd.as_slice().to_vec();
            sol
        }
        _ => {
            let (x, s, y) = recovery.full(&(&it.x / it.tau), &(&it.s / it.tau), &(&it.z / it.tau));
            let (res, pcost, dcost) = recovery.residuals(&x, &s, &y);
            ConicSolution {
                primal: x.as_slice().to_vec(),
                slack: s.as_slice().to_vec(),
                dual: y.as_slice().to_vec(),
                status,
                residuals: res,
                iterations: 0,
                primal_objective: pcost,
                dual_objective: dcost,
                log: Vec::new(),
                diagnostics: None,
            }
        }
    };
    if let ipm::Outcome::Failure(msg) = &result.outcome {
        sol.diagnostics = Some(msg.clone());
    }
    if let Some(last) = result.log.last() {
        if sol.status != SolveStatus::Optimal && sol.status != SolveStatus::IterationLimit && sol.status != SolveStatus::NumericalFailure {
            sol.residuals = Residuals::default();
        } else if sol.status != SolveStatus::Optimal {
            sol.residuals = Residuals {
                primal_feas: last.primal_feas,
                dual_feas: last.dual_feas,
                duality_gap: last.duality_gap,
            };
        }
    }
    sol.iterations = result.iterations;
    sol.log = result.log;
    if opts.verbose {
        for l in &sol.log {
            eprintln!(
                "{:3} pcost {:+.8e} dcost {:+.8e} pres {:.2e} dres {:.2e} gap {:.2e} mu {:.2e} step {:.3}",
                l.iter, l.pcost, l.dcost, l.primal_feas, l.dual_feas, l.duality_gap, l.mu, l.step
            );
        }
        eprintln!("status {}", sol.status);
    }
    sol
}

/// Checks the Farkas conditions of a certificate, returning the violation.
pub fn certificate_violation(prog: &ConicProgram, sol: &ConicSolution) -> Option<f64> {
    let a = prog.a.to_dense();
    match sol.status {
        SolveStatus::InfeasibleCertificate => {
            let y = DVector::from_column_slice(&sol.dual);
            let aty = a.tr_mul(&y).norm();
            let by = DVector::from_column_slice(&prog.b).dot(&y);
            let cone = dual_cone_violation(prog, &sol.dual);
            Some(aty.max((by + 1.0).abs()).max(cone))
        }
        SolveStatus::UnboundedCertificate => {
            let d = DVector::from_column_slice(&sol.primal);
            let s = -(&a * &d);
            let cd = DVector::from_column_slice(&prog.c).dot(&d);
            let cone = primal_cone_violation(prog, s.as_slice());
            Some(cone.max((cd + 1.0).abs()))
        }
        _ => None,
    }
}

/// Largest violation of `s ∈ K` (zero rows must vanish, free rows ignored).
pub fn primal_cone_violation(prog: &ConicProgram, s: &[f64]) -> f64 {
    cone_violation(prog, s, true)
}

/// Largest violation of `y ∈ K*` (zero-cone duals are free).
pub fn dual_cone_violation(prog: &ConicProgram, y: &[f64]) -> f64 {
    cone_violation(prog, y, false)
}

fn cone_violation(prog: &ConicProgram, v: &[f64], primal: bool) -> f64 {
    let mut worst = 0.0f64;
    let mut off = 0;
    for c in &prog.cones {
        let n = c.rows();
        let part = &v[off..off + n];
        off += n;
        let viol = match c.kind {
            ConeKind::Zero => {
                if primal {
                    part.iter().fold(0.0f64, |m, x| m.max(x.abs()))
                } else {
                    0.0
                }
            }
            ConeKind::Free => {
                if primal {
                    0.0
                } else {
                    part.iter().fold(0.0f64, |m, x| m.max(x.abs()))
                }
            }
            ConeKind::Nonneg => part.iter().fold(0.0f64, |m, x| m.max(-x)),
            ConeKind::SecondOrder => {
                let tail: f64 = part[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                (tail - part[0]).max(0.0)
            }
            ConeKind::Psd => {
                if c.size == 0 {
                    0.0
                } else {
                    (-crate::matcore::sym_min_eig(&cones::smat(part, c.size))).max(0.0)
                }
            }
        };
        worst = worst.max(viol);
    }
    worst
}

/// Builds the `svec` of a symmetric matrix as used in PSD cone rows.
pub fn svec(m: &Matrix) -> Vec<f64> {
    cones::svec(m)
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], k: usize) -> Matrix {
    cones::smat(v, k)
}

#[cfg(test)]
mod tests;
