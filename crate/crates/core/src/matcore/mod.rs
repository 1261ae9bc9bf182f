//! Dense real linear-algebra kernel.
//!
//! Matrices are `nalgebra::DMatrix<f64>` values. Factorizations that are
//! standard (SVD, symmetric eigendecomposition, Cholesky, LU) come from
//! nalgebra; the nonsymmetric eigenvalue routine lives in [`eig`] and is
//! implemented here (balancing, Hessenberg reduction, Francis double-shift QR).

mod eig;

pub use eig::{eig, Spectrum};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Dense real matrix used throughout the crate.
pub type Matrix = DMatrix<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{routine} did not converge after {iterations} iterations")]
    NoConvergence { routine: &'static str, iterations: usize },
    #[error("matrix is singular to working precision")]
    Singular,
}

pub type MatResult<T> = Result<T, MatError>;

/// Norm used for residuals and feedback sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum NormKind {
    #[default]
    Frobenius,
    /// Largest singular value.
    Spectral,
}

impl NormKind {
    pub fn eval(self, m: &Matrix) -> f64 {
        match self {
            NormKind::Frobenius => m.norm(),
            NormKind::Spectral => spectral_norm(m),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            NormKind::Frobenius => "fro",
            NormKind::Spectral => "spec",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fro" | "frobenius" => Ok(NormKind::Frobenius),
            "spec" | "spectral" | "2" | "l2" => Ok(NormKind::Spectral),
            other => Err(format!("unknown norm '{other}' (expected fro or spec)")),
        }
    }
}

pub fn ensure_finite(m: &Matrix) -> MatResult<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(MatError::NonFinite)
    }
}

pub fn ensure_square(m: &Matrix) -> MatResult<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(MatError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

// ── SVD and pseudoinverse ───────────────────────────────────────────

/// Thin singular value decomposition `M = U diag(S) Vᵀ` with `S` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    /// Number of singular values above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.s.iter().filter(|&&s| s > tol).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.s.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

const SVD_MAX_SWEEPS: usize = 80;

/// One-sided Jacobi SVD. Columns of `U` belonging to zero singular values are
/// completed to an orthonormal set.
pub fn svd(m: &Matrix) -> MatResult<Svd> {
    ensure_finite(m)?;
    let (r, c) = m.shape();
    if r < c {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    if c == 0 {
        return Ok(Svd {
            u: Matrix::zeros(r, 0),
            s: Vec::new(),
            v: Matrix::zeros(c, 0),
        });
    }
    let mut work = m.clone();
    let mut v = Matrix::identity(c, c);
    let tol = f64::EPSILON * (c as f64).max(4.0);
    let negligible = (f64::EPSILON * f64::EPSILON * m.norm()).powi(2);
    let mut converged = false;
    for _ in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..c - 1 {
            for q in p + 1..c {
                let alpha = work.column(p).norm_squared();
                let beta = work.column(q).norm_squared();
                let gamma = work.column(p).dot(&work.column(q));
                if gamma == 0.0 || alpha.min(beta) <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                rotate_columns(&mut work, p, q, cs, sn);
                rotate_columns(&mut v, p, q, cs, sn);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MatError::NoConvergence {
            routine: "svd",
            iterations: SVD_MAX_SWEEPS,
        });
    }
    let norms: Vec<f64> = (0..c).map(|j| work.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let sigma_max = norms[order[0]];
    let zero_tol = f64::EPSILON * f64::EPSILON * sigma_max;
    let mut u = Matrix::zeros(r, c);
    let mut vv = Matrix::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        vv.set_column(dst, &v.column(src));
        if sigma > zero_tol {
            u.set_column(dst, &(work.column(src) / sigma));
            s.push(sigma);
        } else {
            s.push(0.0);
            missing.push(dst);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok(Svd { u, s, v: vv })
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let a = m[(i, p)];
        let b = m[(i, q)];
        m[(i, p)] = cs * a - sn * b;
        m[(i, q)] = sn * a + cs * b;
    }
}

/// Fill the listed columns with unit vectors orthogonal to all other columns.
fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let filled: Vec<usize> = (0..u.ncols()).filter(|j| !missing.contains(j)).collect();
    let basis = Matrix::from_fn(u.nrows(), filled.len(), |i, j| u[(i, filled[j])]);
    let comp = orthogonal_complement(&basis);
    for (k, &slot) in missing.iter().enumerate() {
        u.set_column(slot, &comp.column(k));
    }
}

/// Orthonormal basis of the orthogonal complement of `range(U)` for `U` with
/// orthonormal columns.
pub fn orthogonal_complement(u: &Matrix) -> Matrix {
    let (n, r) = u.shape();
    if r == 0 {
        return Matrix::identity(n, n);
    }
    let qr = u.clone().qr();
    let mut qt = Matrix::identity(n, n);
    qr.q_tr_mul(&mut qt);
    qt.transpose().columns(r, n - r).into_owned()
}

/// `max(rows, cols) · eps · σ₁`.
pub fn default_rank_tol(shape: (usize, usize), sigma_max: f64) -> f64 {
    shape.0.max(shape.1) as f64 * f64::EPSILON * sigma_max
}

/// Moore–Penrose pseudoinverse. `rank_tol = None` uses [`default_rank_tol`].
pub fn pinv(m: &Matrix, rank_tol: Option<f64>) -> MatResult<Matrix> {
    let dec = svd(m)?;
    let sigma_max = dec.s.first().copied().unwrap_or(0.0);
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(m.shape(), sigma_max));
    let mut out = Matrix::zeros(m.ncols(), m.nrows());
    for (j, &s) in dec.s.iter().enumerate() {
        if s > tol {
            out += (dec.v.column(j) / s) * dec.u.column(j).transpose();
        }
    }
    Ok(out)
}

pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match svd(m) {
        Ok(d) => d.s[0],
        Err(_) => f64::NAN,
    }
}

/// Orthogonal `U` whose first `k = rank(B)` columns span `range(B)`, so that
/// `Uᵀ (B B†) U = diag(I_k, 0)`.
pub fn range_splitter(b: &Matrix, rank_tol: Option<f64>) -> MatResult<(Matrix, usize)> {
    let n = b.nrows();
    if b.ncols() == 0 || b.iter().all(|v| *v == 0.0) {
        return Ok((Matrix::identity(n, n), 0));
    }
    let dec = svd(b)?;
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(b.shape(), dec.s[0]));
    let k = dec.rank(tol);
    let range = dec.u.columns(0, k).into_owned();
    let mut u = Matrix::zeros(n, n);
    u.columns_mut(0, k).copy_from(&range);
    u.columns_mut(k, n - k).copy_from(&orthogonal_complement(&range));
    Ok((u, k))
}

/// Orthonormal basis of `null(M)` (columns), using the default rank tolerance
/// unless `rank_tol` is given.
pub fn null_space(m: &Matrix, rank_tol: Option<f64>) -> MatResult<Matrix> {
    let c = m.ncols();
    if m.nrows() == 0 || m.iter().all(|v| *v == 0.0) {
        return Ok(Matrix::identity(c, c));
    }
    let dec = svd(&m.transpose())?;
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(m.shape(), dec.s.first().copied().unwrap_or(0.0)));
    let k = dec.rank(tol);
    Ok(orthogonal_complement(&dec.u.columns(0, k).into_owned()))
}

// ── Eigenvalue helpers ──────────────────────────────────────────────

/// Maximum real part of the eigenvalues of `m`.
pub fn spectral_abscissa(m: &Matrix) -> MatResult<f64> {
    Ok(eig(m)?.abscissa())
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

pub fn skew_part(m: &Matrix) -> Matrix {
    (m - m.transpose()) * 0.5
}

/// Eigenvalues (ascending) and eigenvectors of the symmetric part of `m`.
pub fn sym_eigen(m: &Matrix) -> (DVector<f64>, Matrix) {
    let dec = SymmetricEigen::new(symmetrize(m));
    let n = dec.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dec.eigenvalues[a].total_cmp(&dec.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| dec.eigenvalues[i]));
    let mut vecs = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &dec.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn sym_min_eig(m: &Matrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

/// PSD membership with the relative tolerance `−tol·(1+‖M‖_F)`.
pub fn is_psd(m: &Matrix, tol: f64) -> bool {
    sym_min_eig(m) >= -tol * (1.0 + m.norm())
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).norm() <= tol * (1.0 + m.norm())
}

pub fn is_orthogonal(u: &Matrix, tol: f64) -> bool {
    u.is_square() && (u.transpose() * u - Matrix::identity(u.nrows(), u.ncols())).norm() <= tol
}

/// Apply `f` to the eigenvalues of the symmetric matrix `m`.
pub fn sym_fn(m: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let (vals, vecs) = sym_eigen(m);
    let mut scaled = vecs.clone();
    for (j, v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(f(*v));
    }
    scaled * vecs.transpose()
}

pub fn sqrtm_psd(m: &Matrix) -> Matrix {
    sym_fn(m, |v| v.max(0.0).sqrt())
}

/// Inverse of a symmetric positive definite matrix. Falls back to an
/// eigenvalue floor at `floor` when Cholesky fails.
pub fn spd_inverse(p: &Matrix, floor: f64) -> Matrix {
    let sym = symmetrize(p);
    if let Some(ch) = sym.clone().cholesky() {
        return symmetrize(&ch.inverse());
    }
    sym_fn(&sym, |v| 1.0 / v.max(floor))
}

/// Solve `A X + X Aᵀ = −W` by vectorization. Requires `A` with no pair of
/// eigenvalues summing to zero.
pub fn lyapunov(a: &Matrix, w: &Matrix) -> MatResult<Matrix> {
    ensure_square(a)?;
    ensure_finite(a)?;
    let n = a.nrows();
    if w.shape() != (n, n) {
        return Err(MatError::DimensionMismatch(format!(
            "lyapunov rhs is {:?}, expected {n}x{n}",
            w.shape()
        )));
    }
    let eye = Matrix::identity(n, n);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_column_slice((-w).as_slice());
    let lu = op.lu();
    let x = lu.solve(&rhs).ok_or(MatError::Singular)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MatError::Singular);
    }
    Ok(symmetrize(&Matrix::from_column_slice(n, n, x.as_slice())))
}
