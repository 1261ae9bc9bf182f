//! Dissipative-Hamiltonian matrices and the feedback characterizations built
//! on them.
//!
//! A DH matrix is `(J − R) Q` with `J` skew-symmetric, `R ⪰ 0` and `Q ≻ 0`;
//! these are exactly the stable matrices. A pair `(A, B)` admits a stabilizing
//! state feedback iff some DH triple satisfies `(I − BB†)(A − (J − R)Q) = 0`,
//! and then `K = B†(A − (J − R)Q)` is one such feedback of minimal norm for
//! that triple. The output-feedback analogue adds the right factor
//! `(C†C − I)`.

use thiserror::Error;

use crate::matcore::{
    self, is_orthogonal, is_symmetric, lyapunov, null_space, pinv, skew_part, spectral_abscissa, sym_min_eig, symmetrize,
    MatError, Matrix, NormKind,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DhError {
    #[error("matrix is not stable (spectral abscissa {abscissa:e})")]
    NotStable { abscissa: f64 },
    #[error("Lyapunov solution is not positive definite (min eigenvalue {min_eig:e})")]
    LyapunovFailure { min_eig: f64 },
    #[error("transformation is not orthogonal")]
    NotOrthogonal,
    #[error("A E B = C has no solution")]
    NotSolvable,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("invalid DH triple: {0}")]
    InvalidTriple(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Mat(#[from] MatError),
}

pub type DhResult<T> = Result<T, DhError>;

/// Default lower bound on the eigenvalues of `Q`.
pub const DEFAULT_TOL_PD: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;
const SKEW_TOL: f64 = 1e-12;

fn check_square(name: &str, m: &Matrix, n: usize) -> DhResult<()> {
    if m.shape() != (n, n) {
        return Err(DhError::DimensionMismatch(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    matcore::ensure_finite(m)?;
    Ok(())
}

fn skew_checked(j: Matrix) -> DhResult<Matrix> {
    let sym = symmetrize(&j);
    if sym.norm() > SKEW_TOL * (1.0 + j.norm()) {
        return Err(DhError::InvalidTriple("J is not skew-symmetric".into()));
    }
    Ok(skew_part(&j))
}

fn psd_checked(name: &str, m: Matrix) -> DhResult<Matrix> {
    if !is_symmetric(&m, SKEW_TOL) {
        return Err(DhError::InvalidTriple(format!("{name} is not symmetric")));
    }
    let m = symmetrize(&m);
    let min = sym_min_eig(&m);
    if min < -PSD_TOL * (1.0 + m.norm()) {
        return Err(DhError::InvalidTriple(format!("{name} is not PSD (min eigenvalue {min:e})")));
    }
    Ok(m)
}

// ── DH triples ──────────────────────────────────────────────────────

/// `(J, R, Q)` with `Jᵀ = −J`, `R ⪰ 0`, `Q ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DhTriple {
    j: Matrix,
    r: Matrix,
    q: Matrix,
}

impl DhTriple {
    pub fn new(j: Matrix, r: Matrix, q: Matrix) -> DhResult<Self> {
        Self::with_tol_pd(j, r, q, DEFAULT_TOL_PD)
    }

    /// Validates and requires `λ_min(Q) ≥ tol_pd`.
    pub fn with_tol_pd(j: Matrix, r: Matrix, q: Matrix, tol_pd: f64) -> DhResult<Self> {
        let n = j.nrows();
        check_square("J", &j, n)?;
        check_square("R", &r, n)?;
        check_square("Q", &q, n)?;
        let j = skew_checked(j)?;
        let r = psd_checked("R", r)?;
        if !is_symmetric(&q, SKEW_TOL) {
            return Err(DhError::InvalidTriple("Q is not symmetric".into()));
        }
        let q = symmetrize(&q);
        let min = sym_min_eig(&q);
        if n > 0 && min < tol_pd {
            return Err(DhError::InvalidTriple(format!("Q is not positive definite (min eigenvalue {min:e})")));
        }
        Ok(Self { j, r, q })
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn into_parts(self) -> (Matrix, Matrix, Matrix) {
        (self.j, self.r, self.q)
    }

    /// `(J − R) Q`.
    pub fn compose(&self) -> Matrix {
        (&self.j - &self.r) * &self.q
    }

    /// `(αJ, αR, Q/α)`, which composes to the same matrix.
    pub fn rescale(&self, alpha: f64) -> DhResult<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DhError::InvalidTriple(format!("scale {alpha} must be positive")));
        }
        Ok(Self {
            j: &self.j * alpha,
            r: &self.r * alpha,
            q: &self.q / alpha,
        })
    }

    pub fn to_inv(&self) -> DhTripleInv {
        DhTripleInv {
            j: self.j.clone(),
            r: self.r.clone(),
            p: matcore::spd_inverse(&self.q, DEFAULT_TOL_PD),
        }
    }
}

/// `(J, R, P)` with `P` standing in for `Q⁻¹`. The triple composes to
/// `(J − R) P⁻¹`, which is invariant under `(J, R, P) → (αJ, αR, αP)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DhTripleInv {
    j: Matrix,
    r: Matrix,
    p: Matrix,
}

impl DhTripleInv {
    /// Requires `P ≻ 0` with `λ_min(P) ≥ tol_pd`.
    pub fn new(j: Matrix, r: Matrix, p: Matrix, tol_pd: f64) -> DhResult<Self> {
        let n = j.nrows();
        check_square("J", &j, n)?;
        check_square("R", &r, n)?;
        check_square("P", &p, n)?;
        let j = skew_checked(j)?;
        let r = psd_checked("R", r)?;
        if !is_symmetric(&p, SKEW_TOL) {
            return Err(DhError::InvalidTriple("P is not symmetric".into()));
        }
        let p = symmetrize(&p);
        let min = sym_min_eig(&p);
        if n > 0 && min < tol_pd {
            return Err(DhError::InvalidTriple(format!("P is not positive definite (min eigenvalue {min:e})")));
        }
        Ok(Self { j, r, p })
    }

    /// Builds from raw parts, symmetrizing and projecting `R` onto the PSD
    /// cone. Used to absorb solver round-off on decoded iterates.
    pub fn from_solver(j: &Matrix, r: &Matrix, p: &Matrix) -> Self {
        let r = matcore::sym_fn(r, |v| v.max(0.0));
        Self {
            j: skew_part(j),
            r,
            p: symmetrize(p),
        }
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn j(&self) -> &Matrix {
        &self.j
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn min_p_eig(&self) -> f64 {
        sym_min_eig(&self.p)
    }

    /// True when the gauge `P ⪰ I` holds (to 1e-8).
    pub fn is_normalized(&self) -> bool {
        self.dim() == 0 || self.min_p_eig() >= 1.0 - 1e-8
    }

    /// Rescales by `1/λ_min(P)` so that `P ⪰ I`; the composed matrix is unchanged.
    pub fn normalized(&self) -> Self {
        let min = self.min_p_eig();
        if self.dim() == 0 || !(min > 0.0) {
            return self.clone();
        }
        let alpha = 1.0 / min;
        Self {
            j: &self.j * alpha,
            r: &self.r * alpha,
            p: &self.p * alpha,
        }
    }

    /// `P⁻¹` via Cholesky, falling back to an eigenvalue floor at `floor`.
    pub fn q(&self, floor: f64) -> Matrix {
        matcore::spd_inverse(&self.p, floor)
    }

    /// `(J − R) P⁻¹`.
    pub fn compose(&self, floor: f64) -> Matrix {
        (&self.j - &self.r) * self.q(floor)
    }

    pub fn to_triple(&self, floor: f64) -> DhTriple {
        DhTriple {
            j: self.j.clone(),
            r: self.r.clone(),
            q: self.q(floor),
        }
    }

    pub fn into_parts(self) -> (Matrix, Matrix, Matrix) {
        (self.j, self.r, self.p)
    }
}

// ── Plants ──────────────────────────────────────────────────────────

/// `(A, B)` with `A` n×n and `B` n×m.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemPair {
    pub a: Matrix,
    pub b: Matrix,
}

impl SystemPair {
    pub fn new(a: Matrix, b: Matrix) -> DhResult<Self> {
        let n = a.nrows();
        check_square("A", &a, n)?;
        if b.nrows() != n {
            return Err(DhError::DimensionMismatch(format!("B has {} rows, A is {n}x{n}", b.nrows())));
        }
        matcore::ensure_finite(&b)?;
        Ok(Self { a, b })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// The triplet `(A, B, I)`.
    pub fn to_triplet(&self) -> SystemTriplet {
        SystemTriplet {
            a: self.a.clone(),
            b: self.b.clone(),
            c: Matrix::identity(self.n(), self.n()),
        }
    }
}

/// `(A, B, C)` with `A` n×n, `B` n×m, `C` p×n.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTriplet {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
}

impl SystemTriplet {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> DhResult<Self> {
        let pair = SystemPair::new(a, b)?;
        if c.ncols() != pair.n() {
            return Err(DhError::DimensionMismatch(format!(
                "C has {} columns, A is {n}x{n}",
                c.ncols(),
                n = pair.n()
            )));
        }
        matcore::ensure_finite(&c)?;
        Ok(Self { a: pair.a, b: pair.b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn pair(&self) -> SystemPair {
        SystemPair {
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }
}

/// Projections shared by every feedback formula of a plant.
#[derive(Debug, Clone)]
pub struct Projectors {
    pub b_pinv: Matrix,
    pub c_pinv: Matrix,
    /// `I − B B†`.
    pub left: Matrix,
    /// `C† C − I`.
    pub right: Matrix,
}

impl Projectors {
    pub fn of_pair(p: &SystemPair) -> DhResult<Self> {
        let n = p.n();
        let b_pinv = pinv(&p.b, None)?;
        Ok(Self {
            left: Matrix::identity(n, n) - &p.b * &b_pinv,
            b_pinv,
            c_pinv: Matrix::identity(n, n),
            right: Matrix::zeros(n, n),
        })
    }

    pub fn of_triplet(s: &SystemTriplet) -> DhResult<Self> {
        let n = s.n();
        let b_pinv = pinv(&s.b, None)?;
        let c_pinv = pinv(&s.c, None)?;
        Ok(Self {
            left: Matrix::identity(n, n) - &s.b * &b_pinv,
            right: &c_pinv * &s.c - Matrix::identity(n, n),
            b_pinv,
            c_pinv,
        })
    }
}

// ── Stable matrices as DH matrices ──────────────────────────────────

/// `(J − R) Q`.
pub fn compose(t: &DhTriple) -> Matrix {
    t.compose()
}

/// DH factorization of a Hurwitz matrix from the Lyapunov solution of
/// `A X + X Aᵀ = −I`: `Q = X⁻¹`, `J = skew(AX)`, `R = −sym(AX)`.
pub fn dh_from_stable(a: &Matrix) -> DhResult<DhTriple> {
    matcore::ensure_square(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(DhTriple {
            j: Matrix::zeros(0, 0),
            r: Matrix::zeros(0, 0),
            q: Matrix::zeros(0, 0),
        });
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(DhError::NotStable { abscissa });
    }
    let x = lyapunov(a, &Matrix::identity(n, n)).map_err(|_| DhError::LyapunovFailure { min_eig: f64::NAN })?;
    let min_eig = sym_min_eig(&x);
    if !(min_eig > 0.0) {
        return Err(DhError::LyapunovFailure { min_eig });
    }
    let m = a * &x;
    let j = skew_part(&m);
    let r = -symmetrize(&m);
    let q = x
        .clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or(DhError::LyapunovFailure { min_eig })?;
    Ok(DhTriple { j, r: symmetrize(&r), q })
}

/// `(UᵀJU, UᵀRU, UᵀQU)`; composes to `Uᵀ (J − R) Q U`.
pub fn transform_dh(t: &DhTriple, u: &Matrix) -> DhResult<DhTriple> {
    if u.shape() != (t.dim(), t.dim()) {
        return Err(DhError::DimensionMismatch("U must match the triple dimension".into()));
    }
    if !is_orthogonal(u, 1e-10) {
        return Err(DhError::NotOrthogonal);
    }
    let ut = u.transpose();
    Ok(DhTriple {
        j: skew_part(&(&ut * &t.j * u)),
        r: symmetrize(&(&ut * &t.r * u)),
        q: symmetrize(&(&ut * &t.q * u)),
    })
}

// ── Linear matrix equation A E B = C ─────────────────────────────────

fn check_sun_dims(a: &Matrix, b: &Matrix, c: &Matrix) -> DhResult<()> {
    if a.nrows() != c.nrows() || b.ncols() != c.ncols() {
        return Err(DhError::DimensionMismatch(format!(
            "A {:?}, B {:?}, C {:?} incompatible for A E B = C",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    Ok(())
}

/// Whether `A E B = C` is solvable: `A A† C B† B = C`.
pub fn sun_solvable(a: &Matrix, b: &Matrix, c: &Matrix) -> DhResult<bool> {
    check_sun_dims(a, b, c)?;
    let ap = pinv(a, None)?;
    let bp = pinv(b, None)?;
    let lhs = a * &ap * c * &bp * b;
    Ok((lhs - c).norm() <= 1e-8 * (1.0 + c.norm()))
}

/// General solution `A†CB† + Z − A†A Z B B†`; `Z = 0` gives the minimum-norm one.
pub fn sun_solution(a: &Matrix, b: &Matrix, c: &Matrix, z: &Matrix) -> DhResult<Matrix> {
    if !sun_solvable(a, b, c)? {
        return Err(DhError::NotSolvable);
    }
    if z.shape() != (a.ncols(), b.nrows()) {
        return Err(DhError::DimensionMismatch(format!(
            "Z is {:?}, expected {}x{}",
            z.shape(),
            a.ncols(),
            b.nrows()
        )));
    }
    let ap = pinv(a, None)?;
    let bp = pinv(b, None)?;
    Ok(&ap * c * &bp + z - &ap * a * z * b * &bp)
}

/// PSD test of `R = [[B₁, C₁ᵀ], [C₁, D₁]]` (with `B₁` of size s×s) through the
/// generalized Schur complement: `D₁ ⪰ 0`, `null(D₁) ⊆ null(C₁ᵀ)` and
/// `B₁ − C₁ᵀ D₁† C₁ ⪰ 0`.
pub fn psd_block_check(r: &Matrix, s: usize) -> DhResult<bool> {
    let n = r.nrows();
    if !r.is_square() || !is_symmetric(r, 1e-12) {
        return Err(DhError::NotSymmetric);
    }
    if s == 0 || s >= n {
        return Err(DhError::DimensionMismatch(format!("block size {s} must satisfy 0 < s < {n}")));
    }
    let tol = 1e-9 * (1.0 + r.norm());
    let r = symmetrize(r);
    let b1 = r.view((0, 0), (s, s)).into_owned();
    let c1 = r.view((s, 0), (n - s, s)).into_owned();
    let d1 = r.view((s, s), (n - s, n - s)).into_owned();

    if sym_min_eig(&d1) < -tol {
        return Ok(false);
    }
    let dec = matcore::svd(&d1)?;
    let rank_tol = tol.max(matcore::default_rank_tol(d1.shape(), dec.s[0]));
    let kernel = null_space(&d1, Some(rank_tol))?;
    if kernel.ncols() > 0 && (c1.transpose() * &kernel).norm() > tol {
        return Ok(false);
    }
    let d_pinv = pinv(&d1, Some(rank_tol))?;
    let schur = &b1 - c1.transpose() * d_pinv * &c1;
    Ok(sym_min_eig(&schur) >= -tol)
}

// ── Feedback maps ───────────────────────────────────────────────────

fn check_triple_dim(n: usize, t: &DhTriple) -> DhResult<()> {
    if t.dim() != n {
        return Err(DhError::DimensionMismatch(format!("triple is {0}x{0}, plant has n = {n}", t.dim())));
    }
    Ok(())
}

/// `B†(A − (J − R)Q)`.
pub fn g_feedback(p: &SystemPair, t: &DhTriple) -> DhResult<Matrix> {
    check_triple_dim(p.n(), t)?;
    let bp = pinv(&p.b, None)?;
    Ok(bp * (&p.a - t.compose()))
}

/// `g(J,R,Q) − (I − B†B) Y`, the family of feedbacks realizing the triple.
pub fn ssf_feedback_family(p: &SystemPair, t: &DhTriple, y: &Matrix) -> DhResult<Matrix> {
    if y.shape() != (p.m(), p.n()) {
        return Err(DhError::DimensionMismatch("Y must be m x n".into()));
    }
    let bp = pinv(&p.b, None)?;
    let g = &bp * (&p.a - t.compose());
    Ok(g - (Matrix::identity(p.m(), p.m()) - bp * &p.b) * y)
}

/// `‖(I − BB†)(A − (J − R)Q)‖`.
pub fn ssf_residual(p: &SystemPair, t: &DhTriple, norm: NormKind) -> DhResult<f64> {
    check_triple_dim(p.n(), t)?;
    let proj = Projectors::of_pair(p)?;
    Ok(norm.eval(&(proj.left * (&p.a - t.compose()))))
}

/// `B†(A − (J − R)Q)C†`.
pub fn f_feedback(s: &SystemTriplet, t: &DhTriple) -> DhResult<Matrix> {
    check_triple_dim(s.n(), t)?;
    let proj = Projectors::of_triplet(s)?;
    Ok(proj.b_pinv * (&s.a - t.compose()) * proj.c_pinv)
}

/// `(‖(I − BB†)(A − (J−R)Q)‖, ‖(A − (J−R)Q)(C†C − I)‖)`.
pub fn sof_residuals(s: &SystemTriplet, t: &DhTriple, norm: NormKind) -> DhResult<(f64, f64)> {
    check_triple_dim(s.n(), t)?;
    let proj = Projectors::of_triplet(s)?;
    let diff = &s.a - t.compose();
    Ok((norm.eval(&(&proj.left * &diff)), norm.eval(&(&diff * &proj.right))))
}

/// `K = B†W + (I − B†B)Y`, mapping a pre-multiplied feedback `W` to `K`.
pub fn k_from_w(b: &Matrix, w: &Matrix, y: &Matrix) -> DhResult<Matrix> {
    let (n, m) = b.shape();
    if w.shape() != (n, n) || y.shape() != (m, n) {
        return Err(DhError::DimensionMismatch(format!(
            "expected W {n}x{n} and Y {m}x{n}, got {:?} and {:?}",
            w.shape(),
            y.shape()
        )));
    }
    let bp = pinv(b, None)?;
    Ok(&bp * w + (Matrix::identity(m, m) - &bp * b) * y)
}

/// `W = BK + (I − BB†)N`, so that `A − BB†W = A − BK`.
pub fn w_from_k(b: &Matrix, k: &Matrix, slack: &Matrix) -> DhResult<Matrix> {
    let (n, m) = b.shape();
    if k.shape() != (m, n) || slack.shape() != (n, n) {
        return Err(DhError::DimensionMismatch(format!(
            "expected K {m}x{n} and N {n}x{n}, got {:?} and {:?}",
            k.shape(),
            slack.shape()
        )));
    }
    let bp = pinv(b, None)?;
    Ok(b * k + (Matrix::identity(n, n) - b * bp) * slack)
}

/// `A + ρI`: stabilizing the shifted plant places the original closed-loop
/// spectrum left of `−ρ`.
pub fn rho_shift(a: &Matrix, rho: f64) -> Matrix {
    a + Matrix::identity(a.nrows(), a.ncols()) * rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn compose_trivial_cases() {
        let t = DhTriple::new(Matrix::zeros(3, 3), Matrix::identity(3, 3), Matrix::identity(3, 3)).unwrap();
        assert_eq!(t.compose(), -Matrix::identity(3, 3));
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let t = DhTriple::new(rot.clone(), Matrix::zeros(2, 2), Matrix::identity(2, 2)).unwrap();
        assert_eq!(t.compose(), rot);
        assert!(spectral_abscissa(&t.compose()).unwrap().abs() < 1e-15);
    }

    #[test]
    fn triple_validation() {
        let i = Matrix::identity(2, 2);
        assert!(DhTriple::new(i.clone(), i.clone(), i.clone()).is_err());
        assert!(DhTriple::new(Matrix::zeros(2, 2), -&i, i.clone()).is_err());
        assert!(DhTriple::new(Matrix::zeros(2, 2), i.clone(), Matrix::zeros(2, 2)).is_err());
        assert!(DhTriple::new(Matrix::zeros(2, 2), i.clone(), Matrix::identity(3, 3)).is_err());
    }

    #[test]
    fn random_triples_compose_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let n = rng.random_range(2..=5);
            let t = random_dh_triple(&mut rng, n);
            assert!(spectral_abscissa(&t.compose()).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn dh_from_stable_cases() {
        let a = -Matrix::identity(3, 3);
        let t = dh_from_stable(&a).unwrap();
        assert!((t.compose() - &a).norm() < 1e-10);
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 10.0, 0.0, -1.0]);
        let t = dh_from_stable(&a).unwrap();
        assert!((t.compose() - &a).norm() <= 1e-8 * a.norm());
        let unstable = Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        assert!(matches!(dh_from_stable(&unstable), Err(DhError::NotStable { .. })));
    }

    #[test]
    fn transform_identity_permutation_householder() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = random_dh_triple(&mut rng, 4);
        let same = transform_dh(&t, &Matrix::identity(4, 4)).unwrap();
        assert!((same.compose() - t.compose()).norm() < 1e-14);

        let mut perm = Matrix::zeros(4, 4);
        for (i, j) in [(0, 2), (1, 0), (2, 3), (3, 1)] {
            perm[(i, j)] = 1.0;
        }
        let tp = transform_dh(&t, &perm).unwrap();
        let (ev_old, _) = matcore::sym_eigen(t.q());
        let (ev_new, _) = matcore::sym_eigen(tp.q());
        assert!((ev_old - ev_new).norm() < 1e-12);
        assert!(sym_min_eig(tp.r()) >= -1e-12);

        let v = random_matrix(&mut rng, 4, 1);
        let h = Matrix::identity(4, 4) - &v * v.transpose() * (2.0 / v.norm_squared());
        let th = transform_dh(&t, &h).unwrap();
        assert!((th.compose() - h.transpose() * t.compose() * &h).norm() < 1e-10);

        let not_orth = Matrix::identity(4, 4) * 2.0;
        assert_eq!(transform_dh(&t, &not_orth).unwrap_err(), DhError::NotOrthogonal);
    }

    #[test]
    fn sun_small_cases() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let i = Matrix::identity(2, 2);
        assert!(sun_solvable(&i, &i, &c).unwrap());
        assert_eq!(sun_solution(&i, &i, &c, &Matrix::zeros(2, 2)).unwrap(), c);
        let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let one = Matrix::from_element(1, 1, 1.0);
        assert!(sun_solvable(&a, &one, &one).unwrap());
        assert!(!sun_solvable(&Matrix::zeros(1, 2), &one, &one).unwrap());
        assert_eq!(
            sun_solution(&Matrix::zeros(1, 2), &one, &one, &Matrix::zeros(2, 1)).unwrap_err(),
            DhError::NotSolvable
        );
    }

    #[test]
    fn sun_min_norm_versus_sampled_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 3, 4);
        let b = random_matrix(&mut rng, 2, 3);
        let e = random_matrix(&mut rng, 4, 2);
        let c = &a * e * &b;
        let e0 = sun_solution(&a, &b, &c, &Matrix::zeros(4, 2)).unwrap();
        assert!((&a * &e0 * &b - &c).norm() <= 1e-8 * (1.0 + c.norm()));
        for _ in 0..20 {
            let z = random_matrix(&mut rng, 4, 2);
            let ez = sun_solution(&a, &b, &c, &z).unwrap();
            assert!((&a * &ez * &b - &c).norm() <= 1e-8 * (1.0 + c.norm()));
            assert!(e0.norm() <= ez.norm() + 1e-12);
        }
    }

    #[test]
    fn psd_block_small_cases() {
        assert!(psd_block_check(&Matrix::identity(4, 4), 2).unwrap());
        let r = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(!psd_block_check(&r, 1).unwrap());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert_eq!(psd_block_check(&asym, 1).unwrap_err(), DhError::NotSymmetric);
        assert!(psd_block_check(&Matrix::identity(3, 3), 0).is_err());
    }

    #[test]
    fn psd_block_agrees_with_eigenvalues_on_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let r = random_sym_test_matrix(&mut rng, 6);
            let tol = 1e-9 * (1.0 + r.norm());
            let want = sym_min_eig(&r) >= -tol;
            assert_eq!(psd_block_check(&r, 3).unwrap(), want);
        }
    }

    #[test]
    fn g_feedback_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_stable(&mut rng, 4);
        let t = dh_from_stable(&a).unwrap();
        let b = random_matrix(&mut rng, 4, 2);
        let p = SystemPair::new(a.clone(), b).unwrap();
        assert!(g_feedback(&p, &t).unwrap().norm() < 1e-9);
        assert!(ssf_residual(&p, &t, NormKind::Frobenius).unwrap() < 1e-9);

        let t2 = random_dh_triple(&mut rng, 4);
        let pi = SystemPair::new(a.clone(), Matrix::identity(4, 4)).unwrap();
        assert!((g_feedback(&pi, &t2).unwrap() - (&a - t2.compose())).norm() < 1e-12);
        assert!(ssf_residual(&pi, &t2, NormKind::Spectral).unwrap() < 1e-12);
    }

    #[test]
    fn f_feedback_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 3, 3);
        let b = random_matrix(&mut rng, 3, 3);
        let c = random_matrix(&mut rng, 3, 3);
        let t = random_dh_triple(&mut rng, 3);
        let s = SystemTriplet::new(a.clone(), b.clone(), c.clone()).unwrap();
        let f = f_feedback(&s, &t).unwrap();
        assert!((&b * f * &c - (&a - t.compose())).norm() < 1e-10 * (1.0 + a.norm()));

        let b1 = random_matrix(&mut rng, 3, 1);
        let si = SystemTriplet::new(a.clone(), b1.clone(), Matrix::identity(3, 3)).unwrap();
        let pi = SystemPair::new(a, b1).unwrap();
        assert!((f_feedback(&si, &t).unwrap() - g_feedback(&pi, &t).unwrap()).norm() < 1e-12);

        let eye = SystemTriplet::new(s.a.clone(), Matrix::identity(3, 3), Matrix::identity(3, 3)).unwrap();
        let (l, r) = sof_residuals(&eye, &t, NormKind::Frobenius).unwrap();
        assert!(l < 1e-12 && r < 1e-12);
    }

    #[test]
    fn kr_wr_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = random_matrix(&mut rng, 3, 3);
        let w = random_matrix(&mut rng, 3, 3);
        let k = k_from_w(&b, &w, &Matrix::zeros(3, 3)).unwrap();
        assert!((k - b.clone().try_inverse().unwrap() * &w).norm() < 1e-10);

        let b = random_matrix(&mut rng, 4, 2);
        let k = random_matrix(&mut rng, 2, 4);
        let a = random_matrix(&mut rng, 4, 4);
        let w = w_from_k(&b, &k, &Matrix::zeros(4, 4)).unwrap();
        assert!((&w - &b * &k).norm() < 1e-14);
        let bp = pinv(&b, None).unwrap();
        assert!(((&a - &b * &k) - (&a - &b * &bp * &w)).norm() < 1e-10);
        let back = k_from_w(&b, &w, &Matrix::zeros(2, 4)).unwrap();
        assert!((back - &bp * &b * &k).norm() < 1e-10);
        assert!(k_from_w(&b, &w, &Matrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn rho_shift_moves_abscissa() {
        assert_eq!(rho_shift(&Matrix::identity(2, 2), 0.0), Matrix::identity(2, 2));
        let shifted = rho_shift(&-Matrix::identity(3, 3), 0.5);
        assert!((spectral_abscissa(&shifted).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn rescaling_leaves_compose_and_residuals_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = random_dh_triple(&mut rng, 4);
        let p = SystemPair::new(random_matrix(&mut rng, 4, 4), random_matrix(&mut rng, 4, 2)).unwrap();
        for alpha in [1e-3, 0.5, 2.0, 1e3] {
            let ta = t.rescale(alpha).unwrap();
            assert!((ta.compose() - t.compose()).norm() < 1e-10 * (1.0 + t.compose().norm()));
            let r0 = ssf_residual(&p, &t, NormKind::Frobenius).unwrap();
            let r1 = ssf_residual(&p, &ta, NormKind::Frobenius).unwrap();
            assert!((r0 - r1).abs() < 1e-9 * (1.0 + r0));
        }
    }

    #[test]
    fn inverse_triple_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = random_dh_triple(&mut rng, 3);
        let inv = t.to_inv();
        let norm = inv.normalized();
        assert!(norm.is_normalized());
        assert!((norm.compose(1e-12) - t.compose()).norm() < 1e-9 * (1.0 + t.compose().norm()));
    }
}
