//! Cone algebra for the nonnegative orthant, second-order cones and PSD cones
//! in scaled-vectorized form, plus Nesterov–Todd scaling.
//!
//! PSD blocks of order `k` occupy `k(k+1)/2` slots: the lower triangle in
//! column-major order with off-diagonal entries multiplied by `√2`, so the
//! Euclidean inner product of two blocks equals `trace(XY)`.

use nalgebra::{DMatrix, DVector};

use crate::matcore::sym_eigen;

pub(crate) const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Cone kinds. Zero-cone rows are equalities and free rows are unconstrained;
/// both are removed before the interior-point phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConeKind {
    Zero,
    Free,
    Nonneg,
    SecondOrder,
    /// Order of the matrix, not the number of rows.
    Psd,
}

impl ConeKind {
    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::Free => "free",
            ConeKind::Nonneg => "nonneg",
            ConeKind::SecondOrder => "soc",
            ConeKind::Psd => "psd",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "zero" => ConeKind::Zero,
            "free" => ConeKind::Free,
            "nonneg" => ConeKind::Nonneg,
            "soc" => ConeKind::SecondOrder,
            "psd" => ConeKind::Psd,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cone {
    pub kind: ConeKind,
    pub size: usize,
}

impl Cone {
    pub fn new(kind: ConeKind, size: usize) -> Self {
        Self { kind, size }
    }

    /// Number of constraint rows.
    pub fn rows(&self) -> usize {
        match self.kind {
            ConeKind::Psd => self.size * (self.size + 1) / 2,
            _ => self.size,
        }
    }

    /// Barrier degree.
    pub fn degree(&self) -> usize {
        match self.kind {
            ConeKind::Zero | ConeKind::Free => 0,
            ConeKind::Nonneg | ConeKind::Psd => self.size,
            ConeKind::SecondOrder => usize::from(self.size > 0),
        }
    }
}

pub(crate) fn svec_len(k: usize) -> usize {
    k * (k + 1) / 2
}

pub(crate) fn smat(v: &[f64], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, k);
    let mut idx = 0;
    for j in 0..k {
        for i in j..k {
            if i == j {
                m[(i, j)] = v[idx];
            } else {
                let x = v[idx] / SQRT2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            idx += 1;
        }
    }
    m
}

pub(crate) fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let k = m.nrows();
    let mut idx = 0;
    for j in 0..k {
        for i in j..k {
            out[idx] = if i == j {
                m[(i, i)]
            } else {
                (m[(i, j)] + m[(j, i)]) * 0.5 * SQRT2
            };
            idx += 1;
        }
    }
}

pub(crate) fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = vec![0.0; svec_len(m.nrows())];
    svec_into(m, &mut out);
    out
}

/// Product cone of non-zero blocks with precomputed row offsets.
#[derive(Debug, Clone)]
pub(crate) struct ConeSet {
    pub blocks: Vec<(Cone, usize)>,
    pub dim: usize,
    pub degree: usize,
}

impl ConeSet {
    pub fn new(cones: &[Cone]) -> Self {
        let mut blocks = Vec::new();
        let mut off = 0;
        let mut degree = 0;
        for c in cones {
            debug_assert!(!matches!(c.kind, ConeKind::Zero | ConeKind::Free));
            blocks.push((*c, off));
            off += c.rows();
            degree += c.degree();
        }
        Self { blocks, dim: off, degree }
    }

    pub fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.dim);
        for (c, off) in &self.blocks {
            match c.kind {
                ConeKind::Nonneg => e.rows_mut(*off, c.size).fill(1.0),
                ConeKind::SecondOrder => {
                    if c.size > 0 {
                        e[*off] = 1.0;
                    }
                }
                ConeKind::Psd => {
                    let mut idx = *off;
                    for j in 0..c.size {
                        e[idx] = 1.0;
                        idx += c.size - j;
                    }
                }
                ConeKind::Zero | ConeKind::Free => {}
            }
        }
        e
    }

    /// Smallest `t` with `x + (−t)e` on the boundary, i.e. the minimum
    /// "eigenvalue" of `x` over all blocks.
    #[cfg(test)]
    pub fn min_eigenvalue(&self, x: &DVector<f64>) -> f64 {
        let mut out = f64::INFINITY;
        for (c, off) in &self.blocks {
            let v = x.rows(*off, c.rows());
            let m = match c.kind {
                ConeKind::Nonneg => v.min(),
                ConeKind::SecondOrder => {
                    if c.size == 0 {
                        continue;
                    }
                    v[0] - v.rows(1, c.size - 1).norm()
                }
                ConeKind::Psd => {
                    if c.size == 0 {
                        continue;
                    }
                    sym_eigen(&smat(v.as_slice(), c.size)).0[0]
                }
                ConeKind::Zero | ConeKind::Free => continue,
            };
            out = out.min(m);
        }
        out
    }

    /// Jordan product `x ∘ y`.
    pub fn jordan(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (c, off) in &self.blocks {
            let n = c.rows();
            let xv = x.rows(*off, n);
            let yv = y.rows(*off, n);
            match c.kind {
                ConeKind::Nonneg => {
                    for i in 0..n {
                        out[off + i] = xv[i] * yv[i];
                    }
                }
                ConeKind::SecondOrder => {
                    if n == 0 {
                        continue;
                    }
                    out[*off] = xv.dot(&yv);
                    for i in 1..n {
                        out[off + i] = xv[0] * yv[i] + yv[0] * xv[i];
                    }
                }
                ConeKind::Psd => {
                    let xm = smat(xv.as_slice(), c.size);
                    let ym = smat(yv.as_slice(), c.size);
                    let prod = &xm * &ym;
                    let sym = (&prod + prod.transpose()) * 0.5;
                    svec_into(&sym, &mut out.as_mut_slice()[*off..off + n]);
                }
                ConeKind::Zero | ConeKind::Free => {}
            }
        }
        out
    }

    /// Solve `λ ∘ u = b` for `u` where `λ` is a scaling point (diagonal for
    /// PSD blocks, as produced by [`NtScaling`]).
    pub fn jordan_div(&self, lambda: &Lambda, b: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (bi, (c, off)) in self.blocks.iter().enumerate() {
            let n = c.rows();
            let bv = b.rows(*off, n);
            match (&lambda.blocks[bi], c.kind) {
                (LambdaBlock::Vector(l), ConeKind::Nonneg) => {
                    for i in 0..n {
                        out[off + i] = bv[i] / l[i];
                    }
                }
                (LambdaBlock::Vector(l), ConeKind::SecondOrder) => {
                    if n == 0 {
                        continue;
                    }
                    let l0 = l[0];
                    let l1 = l.rows(1, n - 1);
                    let b1 = bv.rows(1, n - 1);
                    let det = l0 * l0 - l1.norm_squared();
                    let u0 = (l0 * bv[0] - l1.dot(&b1)) / det;
                    out[*off] = u0;
                    for i in 1..n {
                        out[off + i] = (bv[i] - l[i] * u0) / l0;
                    }
                }
                (LambdaBlock::Diag(d), ConeKind::Psd) => {
                    let mut idx = *off;
                    for j in 0..c.size {
                        for i in j..c.size {
                            out[idx] = 2.0 * b[idx] / (d[i] + d[j]);
                            idx += 1;
                        }
                    }
                }
                _ => unreachable!("scaling block mismatched with cone"),
            }
        }
        out
    }

    /// Largest `α ≤ α_cap` with `λ + α d` in the cone, where `λ` is the
    /// scaling point and `d` a direction in scaled coordinates.
    pub fn max_step(&self, lambda: &Lambda, d: &DVector<f64>) -> f64 {
        let mut alpha = f64::INFINITY;
        for (bi, (c, off)) in self.blocks.iter().enumerate() {
            let n = c.rows();
            let dv = d.rows(*off, n);
            let a = match (&lambda.blocks[bi], c.kind) {
                (LambdaBlock::Vector(l), ConeKind::Nonneg) => {
                    let mut a = f64::INFINITY;
                    for i in 0..n {
                        if dv[i] < 0.0 {
                            a = a.min(-l[i] / dv[i]);
                        }
                    }
                    a
                }
                (LambdaBlock::Vector(l), ConeKind::SecondOrder) => soc_max_step(l.as_slice(), dv.as_slice()),
                (LambdaBlock::Diag(lam), ConeKind::Psd) => {
                    let k = c.size;
                    if k == 0 {
                        continue;
                    }
                    let dm = smat(dv.as_slice(), k);
                    let mut scaled = dm;
                    for i in 0..k {
                        for j in 0..k {
                            scaled[(i, j)] /= (lam[i] * lam[j]).sqrt();
                        }
                    }
                    let min = sym_eigen(&scaled).0[0];
                    if min < 0.0 {
                        -1.0 / min
                    } else {
                        f64::INFINITY
                    }
                }
                _ => unreachable!("scaling block mismatched with cone"),
            };
            alpha = alpha.min(a);
        }
        alpha
    }
}

fn soc_max_step(l: &[f64], d: &[f64]) -> f64 {
    if l.is_empty() {
        return f64::INFINITY;
    }
    let dot1: f64 = l[1..].iter().zip(&d[1..]).map(|(a, b)| a * b).sum();
    let dd1: f64 = d[1..].iter().map(|v| v * v).sum();
    let ll1: f64 = l[1..].iter().map(|v| v * v).sum();
    let a = d[0] * d[0] - dd1;
    let b = l[0] * d[0] - dot1;
    let c = (l[0] * l[0] - ll1).max(0.0);
    // Smallest positive root of a α² + 2 b α + c.
    let mut best = f64::INFINITY;
    let scale = (d[0] * d[0] + dd1).max(f64::MIN_POSITIVE);
    if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            best = -c / (2.0 * b);
        }
    } else {
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(b + b.signum() * sq);
            for root in [q / a, if q != 0.0 { c / q } else { f64::INFINITY }] {
                if root > 0.0 {
                    best = best.min(root);
                }
            }
        }
    }
    // The first coordinate must stay nonnegative as well.
    if d[0] < 0.0 {
        best = best.min(-l[0] / d[0]);
    }
    best
}

// ── Nesterov–Todd scaling ───────────────────────────────────────────

#[derive(Debug, Clone)]
pub(crate) enum LambdaBlock {
    Vector(DVector<f64>),
    /// Eigenvalues of the diagonal PSD scaling point.
    Diag(Vec<f64>),
}

#[derive(Debug, Clone)]
pub(crate) struct Lambda {
    pub blocks: Vec<LambdaBlock>,
}

impl Lambda {
    pub fn to_vector(&self, cones: &ConeSet) -> DVector<f64> {
        let mut out = DVector::zeros(cones.dim);
        for (bi, (c, off)) in cones.blocks.iter().enumerate() {
            match &self.blocks[bi] {
                LambdaBlock::Vector(v) => out.rows_mut(*off, c.rows()).copy_from(v),
                LambdaBlock::Diag(d) => {
                    let mut idx = *off;
                    for j in 0..c.size {
                        out[idx] = d[j];
                        idx += c.size - j;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
enum ScaleBlock {
    /// `W = diag(d)`.
    Diag(DVector<f64>),
    /// Symmetric `W` and its inverse.
    Dense { w: DMatrix<f64>, w_inv: DMatrix<f64> },
    /// `W(Z) = Rᵀ Z R`.
    Psd { r: DMatrix<f64>, r_inv: DMatrix<f64> },
}

/// NT scaling `W` with `W z = W⁻ᵀ s = λ`.
#[derive(Debug, Clone)]
pub(crate) struct NtScaling {
    blocks: Vec<ScaleBlock>,
    pub lambda: Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NotInterior;

impl NtScaling {
    pub fn new(cones: &ConeSet, s: &DVector<f64>, z: &DVector<f64>) -> Result<Self, NotInterior> {
        let mut blocks = Vec::with_capacity(cones.blocks.len());
        let mut lambdas = Vec::with_capacity(cones.blocks.len());
        for (c, off) in &cones.blocks {
            let n = c.rows();
            let sv = s.rows(*off, n);
            let zv = z.rows(*off, n);
            match c.kind {
                ConeKind::Nonneg => {
                    if sv.iter().chain(zv.iter()).any(|v| !(*v > 0.0)) {
                        return Err(NotInterior);
                    }
                    let d = DVector::from_fn(n, |i, _| (sv[i] / zv[i]).sqrt());
                    let l = DVector::from_fn(n, |i, _| (sv[i] * zv[i]).sqrt());
                    blocks.push(ScaleBlock::Diag(d));
                    lambdas.push(LambdaBlock::Vector(l));
                }
                ConeKind::SecondOrder => {
                    if n == 0 {
                        blocks.push(ScaleBlock::Diag(DVector::zeros(0)));
                        lambdas.push(LambdaBlock::Vector(DVector::zeros(0)));
                        continue;
                    }
                    let sj = sv[0] * sv[0] - sv.rows(1, n - 1).norm_squared();
                    let zj = zv[0] * zv[0] - zv.rows(1, n - 1).norm_squared();
                    if !(sj > 0.0 && zj > 0.0 && sv[0] > 0.0 && zv[0] > 0.0) {
                        return Err(NotInterior);
                    }
                    let sn = sv.into_owned() / sj.sqrt();
                    let zn = zv.into_owned() / zj.sqrt();
                    let gamma = ((1.0 + sn.dot(&zn)) / 2.0).sqrt();
                    let mut wbar = sn.clone();
                    wbar[0] += zn[0];
                    for i in 1..n {
                        wbar[i] -= zn[i];
                    }
                    wbar /= 2.0 * gamma;
                    // W = β(2vvᵀ − J) with v = (w̄ + e)/√(2(w̄₀ + 1)).
                    let mut v = wbar.clone();
                    v[0] += 1.0;
                    v /= (2.0 * (wbar[0] + 1.0)).sqrt();
                    let beta = (sj / zj).powf(0.25);
                    let mut jmat = DMatrix::identity(n, n);
                    for i in 1..n {
                        jmat[(i, i)] = -1.0;
                    }
                    let w = (&v * v.transpose() * 2.0 - &jmat) * beta;
                    let jw = &jmat * &v;
                    let w_inv = (&jw * jw.transpose() * 2.0 - &jmat) / beta;
                    let l = &w * zv;
                    blocks.push(ScaleBlock::Dense { w, w_inv });
                    lambdas.push(LambdaBlock::Vector(l));
                }
                ConeKind::Psd => {
                    let k = c.size;
                    let sm = smat(sv.as_slice(), k);
                    let zm = smat(zv.as_slice(), k);
                    let l1 = sm.cholesky().ok_or(NotInterior)?.l();
                    let l2 = zm.cholesky().ok_or(NotInterior)?.l();
                    let prod = l2.transpose() * &l1;
                    let dec = crate::matcore::svd(&prod).map_err(|_| NotInterior)?;
                    if dec.s.iter().any(|v| !(*v > 0.0)) {
                        return Err(NotInterior);
                    }
                    // L₂ᵀL₁ = U Λ Vᵀ, R = L₁ V Λ^{-1/2}.
                    let mut r = &l1 * &dec.v;
                    for (j, sig) in dec.s.iter().enumerate() {
                        r.column_mut(j).scale_mut(1.0 / sig.sqrt());
                    }
                    let r_inv = r.clone().try_inverse().ok_or(NotInterior)?;
                    blocks.push(ScaleBlock::Psd { r, r_inv });
                    lambdas.push(LambdaBlock::Diag(dec.s.clone()));
                }
                ConeKind::Zero | ConeKind::Free => unreachable!("zero and free rows are eliminated before scaling"),
            }
        }
        Ok(Self {
            blocks,
            lambda: Lambda { blocks: lambdas },
        })
    }

    fn apply(&self, cones: &ConeSet, x: &DVector<f64>, mode: Mode) -> DVector<f64> {
        let mut out = DVector::zeros(cones.dim);
        for (bi, (c, off)) in cones.blocks.iter().enumerate() {
            let n = c.rows();
            let xv = x.rows(*off, n);
            match &self.blocks[bi] {
                ScaleBlock::Diag(d) => {
                    for i in 0..n {
                        out[off + i] = match mode {
                            Mode::W | Mode::Wt => d[i] * xv[i],
                            Mode::WinvT | Mode::Winv => xv[i] / d[i],
                        };
                    }
                }
                ScaleBlock::Dense { w, w_inv } => {
                    let m = match mode {
                        Mode::W | Mode::Wt => w,
                        Mode::WinvT | Mode::Winv => w_inv,
                    };
                    out.rows_mut(*off, n).copy_from(&(m * xv));
                }
                ScaleBlock::Psd { r, r_inv } => {
                    let xm = smat(xv.as_slice(), c.size);
                    let ym = match mode {
                        Mode::W => r.transpose() * xm * r,
                        Mode::Wt => r * xm * r.transpose(),
                        Mode::WinvT => r_inv * xm * r_inv.transpose(),
                        Mode::Winv => r_inv.transpose() * xm * r_inv,
                    };
                    svec_into(&ym, &mut out.as_mut_slice()[*off..off + n]);
                }
            }
        }
        out
    }

    #[cfg(test)]
    pub fn w(&self, cones: &ConeSet, x: &DVector<f64>) -> DVector<f64> {
        self.apply(cones, x, Mode::W)
    }

    pub fn wt(&self, cones: &ConeSet, x: &DVector<f64>) -> DVector<f64> {
        self.apply(cones, x, Mode::Wt)
    }

    pub fn w_inv_t(&self, cones: &ConeSet, x: &DVector<f64>) -> DVector<f64> {
        self.apply(cones, x, Mode::WinvT)
    }

    pub fn w_inv(&self, cones: &ConeSet, x: &DVector<f64>) -> DVector<f64> {
        self.apply(cones, x, Mode::Winv)
    }

    /// `W⁻ᵀ M` applied column by column.
    pub fn w_inv_t_mat(&self, cones: &ConeSet, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for j in 0..m.ncols() {
            let col = m.column(j).into_owned();
            out.set_column(j, &self.w_inv_t(cones, &col));
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    #[cfg_attr(not(test), allow(dead_code))]
    W,
    Wt,
    WinvT,
    Winv,
}
