//! Convex subproblems of the stabilization algorithms, assembled as conic
//! programs over named matrix variables.
//!
//! All feasibility-type programs use the `P = Q⁻¹` parametrization, in which
//! `(I − BB†)(A − (J − R)Q) = 0` becomes the linear condition
//! `(I − BB†)(AP − J + R) = 0`. Left projections `I − BB†` are applied through
//! an orthonormal basis `U₂` of their range and right projections `C†C − I`
//! through a basis `V₂` of `ker C`; both preserve Frobenius and spectral norms.

use crate::conic::builder::{MatExpr, ProgramBuilder};
use crate::conic::{ConicProgram, VarEntry, VarShape};
use crate::dhcore::{DhError, DhResult, DhTripleInv, SystemPair, SystemTriplet};
use crate::matcore::{null_space, pinv, range_splitter, Matrix, NormKind};

pub use crate::conic::builder;

/// Builder settings shared by every subproblem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiOptions {
    pub norm: NormKind,
    /// Strict `Q ≻ 0` and `P + ΔP ≻ 0` are imposed as `⪰ tol_pd·I`.
    pub tol_pd: f64,
    /// Optional lower bound on the eigenvalues of `R` and `Q`.
    pub margin: f64,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self { norm: NormKind::Frobenius, tol_pd: 1e-8, margin: 0.0 }
    }
}

impl LmiOptions {
    pub fn with_norm(norm: NormKind) -> Self {
        Self { norm, ..Self::default() }
    }

    fn q_floor(&self) -> f64 {
        self.tol_pd.max(self.margin)
    }
}

fn identity(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

/// Orthonormal basis of the range of `I − BB†`.
pub fn left_basis(b: &Matrix) -> DhResult<Matrix> {
    let (u, k) = range_splitter(b, None)?;
    let n = u.nrows();
    Ok(u.columns(k, n - k).into_owned())
}

/// Orthonormal basis of `ker C`, the range of `I − C†C`.
pub fn right_basis(c: &Matrix) -> DhResult<Matrix> {
    Ok(null_space(c, None)?)
}

/// Appends `‖M‖ ≤ t` for the scalar variable `t`.
pub fn encode_norm_epigraph(b: &mut ProgramBuilder, m: &MatExpr, t: usize, kind: NormKind) {
    let nv = b.nvars();
    let head = MatExpr::scalar_var(t, nv);
    if m.nrows() == 0 || m.ncols() == 0 {
        b.add_nonneg(&head);
        return;
    }
    match kind {
        NormKind::Frobenius => b.add_soc(&head, m),
        NormKind::Spectral => {
            let blk = MatExpr::block2(
                &MatExpr::scalar_identity(t, m.nrows(), nv),
                m,
                &m.transpose(),
                &MatExpr::scalar_identity(t, m.ncols(), nv),
            );
            b.add_psd(&blk);
        }
    }
}

fn psd_at_least(b: &mut ProgramBuilder, x: &MatExpr, floor: f64) {
    let n = x.nrows();
    b.add_psd(&x.add_constant(&(identity(n) * -floor)));
}

fn psd_at_most(b: &mut ProgramBuilder, x: &MatExpr, ceil: f64) {
    let n = x.nrows();
    b.add_psd(&x.scale(-1.0).add_constant(&(identity(n) * ceil)));
}

/// Frobenius trust region `‖X‖_F ≤ radius`.
fn trust_region(b: &mut ProgramBuilder, x: &MatExpr, radius: f64) {
    let head = MatExpr::constant(&Matrix::from_element(1, 1, radius), b.nvars());
    b.add_soc(&head, x);
}

fn check_state(n: usize, state: &DhTripleInv) -> DhResult<()> {
    if state.dim() != n {
        return Err(DhError::DimensionMismatch(format!("state has order {}, plant has {n}", state.dim())));
    }
    Ok(())
}

// ── SSF ─────────────────────────────────────────────────────────────

/// Minimizes `‖(I − BB†)(AP − J + R)‖` over skew `J`, `R ⪰ 0`, `P ⪰ I`. The
/// optimal value is zero exactly when `(A, B)` is stabilizable by state
/// feedback (up to the closure of the feasible set).
pub fn build_ssf_feasibility(p: &SystemPair, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = p.n();
    let u2 = left_basis(&p.b)?;
    let mut b = ProgramBuilder::new();
    let jv = b.add_variable("J", VarShape::Skew(n));
    let rv = b.add_variable("R", VarShape::Sym(n));
    let pv = b.add_variable("P", VarShape::Sym(n));
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let nv = b.nvars();
    let (j, r, pm) = (MatExpr::var(&jv, nv), MatExpr::var(&rv, nv), MatExpr::var(&pv, nv));
    let inner = pm.left_mul(&p.a).sub(&j).add(&r);
    encode_norm_epigraph(&mut b, &inner.left_mul(&u2.transpose()), t, opts.norm);
    psd_at_least(&mut b, &r, opts.margin);
    psd_at_least(&mut b, &pm, 1.0);
    if opts.margin > 0.0 {
        psd_at_most(&mut b, &pm, 1.0 / opts.margin);
    }
    Ok(b.finish())
}

/// The reduced feasibility program in the basis `U = [U₁ U₂]` of
/// [`range_splitter`], where `U₁` spans `range B` and `k = rank B`:
/// minimizes `‖[Â₂₁ Â₂₂]P − [J₂₁ − R₂₁, J₂₂ − R₂₂]‖` with `Â = UᵀAU`,
/// `P ⪰ I`, `J₂₂` skew and `R₂₂ ⪰ 0`.
pub fn build_ssf_feasibility_reduced(p: &SystemPair, u: &Matrix, k: usize, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = p.n();
    if u.shape() != (n, n) || k > n {
        return Err(DhError::DimensionMismatch(format!("basis must be {n}x{n} with k ≤ {n}")));
    }
    let nk = n - k;
    let ahat = u.transpose() * &p.a * u;
    let bottom = ahat.rows(k, nk).into_owned();
    let mut b = ProgramBuilder::new();
    let pv = b.add_variable("P", VarShape::Sym(n));
    let j21 = b.add_variable("J21", VarShape::Dense(nk, k));
    let j22 = b.add_variable("J22", VarShape::Skew(nk));
    let r21 = b.add_variable("R21", VarShape::Dense(nk, k));
    let r22 = b.add_variable("R22", VarShape::Sym(nk));
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let nv = b.nvars();
    let pm = MatExpr::var(&pv, nv);
    let left = MatExpr::var(&j21, nv).sub(&MatExpr::var(&r21, nv));
    let right = MatExpr::var(&j22, nv).sub(&MatExpr::var(&r22, nv));
    let mut rhs = MatExpr::zeros(nk, n, nv);
    for c in 0..k {
        for r in 0..nk {
            rhs.constant[(r, c)] = left.constant[(r, c)];
            rhs.coef.row_mut(c * nk + r).copy_from(&left.coef.row(c * nk + r));
        }
    }
    for c in 0..nk {
        for r in 0..nk {
            rhs.constant[(r, k + c)] = right.constant[(r, c)];
            rhs.coef.row_mut((k + c) * nk + r).copy_from(&right.coef.row(c * nk + r));
        }
    }
    let resid = pm.left_mul(&bottom).sub(&rhs);
    encode_norm_epigraph(&mut b, &resid, t, opts.norm);
    psd_at_least(&mut b, &pm, 1.0);
    psd_at_least(&mut b, &MatExpr::var(&r22, nv), opts.margin);
    Ok(b.finish())
}

/// Increment variables of a trust-region step. A variable whose radius
/// vanishes is omitted, which fixes it at zero.
struct StepEntries {
    dj: Option<VarEntry>,
    dr: Option<VarEntry>,
    dp: Option<VarEntry>,
    radii: [f64; 3],
}

fn declare_step(b: &mut ProgramBuilder, state: &DhTripleInv, eps: f64) -> StepEntries {
    let n = state.dim();
    let radii = [eps * state.j().norm(), eps * state.r().norm(), eps * state.p().norm()];
    StepEntries {
        dj: (radii[0] > 0.0 && n > 1).then(|| b.add_variable("dJ", VarShape::Skew(n))),
        dr: (radii[1] > 0.0).then(|| b.add_variable("dR", VarShape::Sym(n))),
        dp: (radii[2] > 0.0).then(|| b.add_variable("dP", VarShape::Sym(n))),
        radii,
    }
}

/// Expressions `(ΔJ, ΔR, ΔP)`; omitted variables are zero.
fn step_exprs(e: &StepEntries, n: usize, nv: usize) -> [MatExpr; 3] {
    let mk = |v: &Option<VarEntry>| v.as_ref().map_or_else(|| MatExpr::zeros(n, n, nv), |v| MatExpr::var(v, nv));
    [mk(&e.dj), mk(&e.dr), mk(&e.dp)]
}

/// Trust-region, `R + ΔR ⪰ margin·I` and `P + ΔP ⪰ tol_pd·I` rows.
fn step_cones(b: &mut ProgramBuilder, e: &StepEntries, d: &[MatExpr; 3], state: &DhTripleInv, opts: &LmiOptions) {
    for (k, v) in [&e.dj, &e.dr, &e.dp].into_iter().enumerate() {
        if v.is_some() {
            trust_region(b, &d[k], e.radii[k]);
        }
    }
    let r_new = d[1].add_constant(state.r());
    psd_at_least(b, &r_new, opts.margin);
    let p_new = d[2].add_constant(state.p());
    psd_at_least(b, &p_new, opts.tol_pd);
    if opts.margin > 0.0 {
        psd_at_most(b, &p_new, 1.0 / opts.margin);
    }
}

/// Linearization of `A − (J + ΔJ − R − ΔR)(P + ΔP)⁻¹` around the state:
/// `A − (J + ΔJ)Q + (R + ΔR)Q + (J − R)QΔPQ` with `Q = P⁻¹`.
fn linearized_closed_loop(a: &Matrix, state: &DhTripleInv, q: &Matrix, d: &[MatExpr; 3], nv: usize) -> MatExpr {
    let jr = state.j() - state.r();
    let base = a - &jr * q;
    let dj_q = d[0].right_mul(q);
    let dr_q = d[1].right_mul(q);
    let dp_term = d[2].left_mul(&(&jr * q)).right_mul(q);
    MatExpr::constant(&base, nv).sub(&dj_q).add(&dr_q).add(&dp_term)
}

/// One SSDP step of the state-feedback norm minimization: minimizes the
/// linearized `‖B†(A − (J − R)P⁻¹)‖` over increments subject to the
/// linearized feasibility equality, PSD constraints and Frobenius trust
/// regions `‖ΔX‖ ≤ eps·‖X‖`.
pub fn build_ssdp_step(p: &SystemPair, state: &DhTripleInv, eps: f64, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = p.n();
    check_state(n, state)?;
    let b_pinv = pinv(&p.b, None)?;
    let u2 = left_basis(&p.b)?;
    let q = state.q(opts.tol_pd);
    let mut b = ProgramBuilder::new();
    let e = declare_step(&mut b, state, eps);
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let nv = b.nvars();
    let d = step_exprs(&e, n, nv);
    let closed = linearized_closed_loop(&p.a, state, &q, &d, nv);
    encode_norm_epigraph(&mut b, &closed.left_mul(&b_pinv), t, opts.norm);
    // (I − BB†)(AΔP − ΔJ + ΔR) = 0.
    let incr = d[2].left_mul(&p.a).sub(&d[0]).add(&d[1]);
    b.add_zero(&incr.left_mul(&u2.transpose()));
    step_cones(&mut b, &e, &d, state, opts);
    Ok(b.finish())
}

/// Block-coordinate step over `(J, R)` for fixed `Q`: minimizes
/// `‖B†(A − (J − R)Q)‖` subject to `(I − BB†)(A − (J − R)Q) = 0`.
pub fn build_ssf_bcd_jr(p: &SystemPair, q: &Matrix, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = p.n();
    bcd_jr(&p.a, q, n, &pinv(&p.b, None)?, &left_basis(&p.b)?, None, opts)
}

/// Block-coordinate step over `Q` for fixed `(J, R)`.
pub fn build_ssf_bcd_q(p: &SystemPair, j: &Matrix, r: &Matrix, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = p.n();
    bcd_q(&p.a, j, r, n, &pinv(&p.b, None)?, &left_basis(&p.b)?, None, opts)
}

fn bcd_closed_loop_jr(a: &Matrix, q: &Matrix, j: &MatExpr, r: &MatExpr, nv: usize) -> MatExpr {
    MatExpr::constant(a, nv).sub(&j.sub(r).right_mul(q))
}

#[allow(clippy::too_many_arguments)]
fn bcd_jr(
    a: &Matrix,
    q: &Matrix,
    n: usize,
    left: &Matrix,
    u2: &Matrix,
    right: Option<(&Matrix, &Matrix)>,
    opts: &LmiOptions,
) -> DhResult<ConicProgram> {
    if q.shape() != (n, n) {
        return Err(DhError::DimensionMismatch(format!("Q must be {n}x{n}")));
    }
    let mut b = ProgramBuilder::new();
    let jv = b.add_variable("J", VarShape::Skew(n));
    let rv = b.add_variable("R", VarShape::Sym(n));
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let nv = b.nvars();
    let (j, r) = (MatExpr::var(&jv, nv), MatExpr::var(&rv, nv));
    let closed = bcd_closed_loop_jr(a, q, &j, &r, nv);
    finish_bcd(&mut b, &closed, left, u2, right, t, opts);
    psd_at_least(&mut b, &r, opts.margin);
    Ok(b.finish())
}

#[allow(clippy::too_many_arguments)]
fn bcd_q(
    a: &Matrix,
    j: &Matrix,
    r: &Matrix,
    n: usize,
    left: &Matrix,
    u2: &Matrix,
    right: Option<(&Matrix, &Matrix)>,
    opts: &LmiOptions,
) -> DhResult<ConicProgram> {
    if j.shape() != (n, n) || r.shape() != (n, n) {
        return Err(DhError::DimensionMismatch(format!("J and R must be {n}x{n}")));
    }
    let mut b = ProgramBuilder::new();
    let qv = b.add_variable("Q", VarShape::Sym(n));
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let nv = b.nvars();
    let qm = MatExpr::var(&qv, nv);
    let closed = MatExpr::constant(a, nv).sub(&qm.left_mul(&(j - r)));
    finish_bcd(&mut b, &closed, left, u2, right, t, opts);
    psd_at_least(&mut b, &qm, opts.q_floor());
    Ok(b.finish())
}

/// Objective `‖left·M·right_pinv‖` with equalities `U₂ᵀM = 0` and, for
/// output feedback, `M V₂ = 0`.
fn finish_bcd(
    b: &mut ProgramBuilder,
    closed: &MatExpr,
    left: &Matrix,
    u2: &Matrix,
    right: Option<(&Matrix, &Matrix)>,
    t: usize,
    opts: &LmiOptions,
) {
    let mut obj = closed.left_mul(left);
    if let Some((c_pinv, _)) = right {
        obj = obj.right_mul(c_pinv);
    }
    encode_norm_epigraph(b, &obj, t, opts.norm);
    b.add_zero(&closed.left_mul(&u2.transpose()));
    if let Some((_, v2)) = right {
        b.add_zero(&closed.right_mul(v2));
    }
}

// ── SOF ─────────────────────────────────────────────────────────────

/// One SSDP step of the output-feedback feasibility phase: minimizes
/// `t₁ + t₂` with `‖(I − BB†)M‖ ≤ t₁` and `‖M(C†C − I)‖ ≤ t₂` for the
/// linearized closed loop `M`, under the same cones and trust regions as
/// [`build_ssdp_step`] and without the incremental equality.
pub fn build_sof_feasibility_step(s: &SystemTriplet, state: &DhTripleInv, eps: f64, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = s.n();
    check_state(n, state)?;
    let u2 = left_basis(&s.b)?;
    let v2 = right_basis(&s.c)?;
    let q = state.q(opts.tol_pd);
    let mut b = ProgramBuilder::new();
    let e = declare_step(&mut b, state, eps);
    let t1 = b.add_scalar("t1");
    let t2 = b.add_scalar("t2");
    b.minimize(t1, 1.0);
    b.minimize(t2, 1.0);
    let nv = b.nvars();
    let d = step_exprs(&e, n, nv);
    let closed = linearized_closed_loop(&s.a, state, &q, &d, nv);
    encode_norm_epigraph(&mut b, &closed.left_mul(&u2.transpose()), t1, opts.norm);
    encode_norm_epigraph(&mut b, &closed.right_mul(&v2), t2, opts.norm);
    step_cones(&mut b, &e, &d, state, opts);
    Ok(b.finish())
}

/// Minimizes the output-feedback residual `‖(I − BB†)M‖ + ‖M(C†C − I)‖` with
/// `M = A − (J − R)Q` over `(J, R)` for fixed `Q`.
pub fn build_sof_residual_jr(s: &SystemTriplet, q: &Matrix, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = s.n();
    if q.shape() != (n, n) {
        return Err(DhError::DimensionMismatch(format!("Q must be {n}x{n}")));
    }
    let u2 = left_basis(&s.b)?;
    let v2 = right_basis(&s.c)?;
    let mut b = ProgramBuilder::new();
    let jv = b.add_variable("J", VarShape::Skew(n));
    let rv = b.add_variable("R", VarShape::Sym(n));
    let t1 = b.add_scalar("t1");
    let t2 = b.add_scalar("t2");
    b.minimize(t1, 1.0);
    b.minimize(t2, 1.0);
    let nv = b.nvars();
    let (j, r) = (MatExpr::var(&jv, nv), MatExpr::var(&rv, nv));
    let closed = bcd_closed_loop_jr(&s.a, q, &j, &r, nv);
    encode_norm_epigraph(&mut b, &closed.left_mul(&u2.transpose()), t1, opts.norm);
    encode_norm_epigraph(&mut b, &closed.right_mul(&v2), t2, opts.norm);
    psd_at_least(&mut b, &r, opts.margin);
    Ok(b.finish())
}

/// Output-feedback block step over `(J, R)` for fixed `Q`: minimizes
/// `‖B†(A − (J − R)Q)C†‖` subject to both feasibility equalities.
pub fn build_sof_bcd_jr(s: &SystemTriplet, q: &Matrix, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = s.n();
    let b_pinv = pinv(&s.b, None)?;
    let c_pinv = pinv(&s.c, None)?;
    let v2 = right_basis(&s.c)?;
    bcd_jr(&s.a, q, n, &b_pinv, &left_basis(&s.b)?, Some((&c_pinv, &v2)), opts)
}

/// Output-feedback block step over `Q` for fixed `(J, R)`.
pub fn build_sof_bcd_q(s: &SystemTriplet, j: &Matrix, r: &Matrix, opts: &LmiOptions) -> DhResult<ConicProgram> {
    let n = s.n();
    let b_pinv = pinv(&s.b, None)?;
    let c_pinv = pinv(&s.c, None)?;
    let v2 = right_basis(&s.c)?;
    bcd_q(&s.a, j, r, n, &b_pinv, &left_basis(&s.b)?, Some((&c_pinv, &v2)), opts)
}

// ── Decoding ────────────────────────────────────────────────────────

fn named(prog: &ConicProgram, x: &[f64], name: &str, n: usize) -> Matrix {
    prog.vars.decode(name, x).unwrap_or_else(|| Matrix::zeros(n, n))
}

/// `(J, R, P)` from a solution of [`build_ssf_feasibility`].
pub fn decode_feasibility(prog: &ConicProgram, x: &[f64], n: usize) -> DhTripleInv {
    DhTripleInv::from_solver(&named(prog, x, "J", n), &named(prog, x, "R", n), &named(prog, x, "P", n))
}

/// `(J + ΔJ, R + ΔR, P + ΔP)` from a solution of a step program.
pub fn decode_step(prog: &ConicProgram, x: &[f64], state: &DhTripleInv) -> DhTripleInv {
    let n = state.dim();
    DhTripleInv::from_solver(
        &(state.j() + named(prog, x, "dJ", n)),
        &(state.r() + named(prog, x, "dR", n)),
        &(state.p() + named(prog, x, "dP", n)),
    )
}

/// Decodes one named matrix variable.
pub fn decode_matrix(prog: &ConicProgram, x: &[f64], name: &str) -> Option<Matrix> {
    prog.vars.decode(name, x)
}
