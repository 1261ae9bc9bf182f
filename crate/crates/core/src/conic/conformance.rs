//! Fixed conformance programs with closed-form answers. Any
//! [`ConicBackend`] substituted for the built-in solver must pass them.

use super::builder::{MatExpr, ProgramBuilder};
use super::{certificate_violation, ConicBackend, ConicProgram, SolveStatus, SolverOptions, VarShape};
use crate::matcore::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expected {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct ConformanceCase {
    pub name: &'static str,
    pub program: ConicProgram,
    pub expected: Expected,
}

#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

fn scalar(b: &ProgramBuilder, idx: usize) -> MatExpr {
    MatExpr::scalar_var(idx, b.nvars())
}

fn cst(b: &ProgramBuilder, v: f64) -> MatExpr {
    MatExpr::constant(&m(1, 1, &[v]), b.nvars())
}

/// Stacks `1 × 1` expressions into a column.
fn column(b: &ProgramBuilder, parts: &[MatExpr]) -> MatExpr {
    let mut out = MatExpr::zeros(parts.len(), 1, b.nvars());
    for (i, p) in parts.iter().enumerate() {
        out.constant[(i, 0)] = p.constant[(0, 0)];
        out.coef.row_mut(i).copy_from(&p.coef.row(0));
    }
    out
}

fn norm_epigraph_case(name: &'static str, mat: Matrix, spectral: bool, value: f64) -> ConformanceCase {
    let mut b = ProgramBuilder::new();
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let mexpr = MatExpr::constant(&mat, b.nvars());
    if spectral {
        let (r, c) = (mat.nrows(), mat.ncols());
        let blk = MatExpr::block2(
            &MatExpr::scalar_identity(t, r, b.nvars()),
            &mexpr,
            &mexpr.transpose(),
            &MatExpr::scalar_identity(t, c, b.nvars()),
        );
        b.add_psd(&blk);
    } else {
        b.add_soc(&scalar(&b, t), &mexpr);
    }
    ConformanceCase { name, program: b.finish(), expected: Expected::Optimal(value) }
}

/// The 25 conformance programs, in a fixed order.
pub fn suite() -> Vec<ConformanceCase> {
    let mut cases = Vec::new();

    // 1. min x s.t. x ≥ 1.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_scalar("x");
        b.minimize(x, 1.0);
        b.add_nonneg(&scalar(&b, x).sub(&cst(&b, 1.0)));
        cases.push(ConformanceCase { name: "lp_lower_bound", program: b.finish(), expected: Expected::Optimal(1.0) });
    }
    // 2. Two crossing half-planes.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", VarShape::Vector(2));
        b.minimize(x.offset, 1.0);
        b.minimize(x.offset + 1, 1.0);
        let xv = MatExpr::var(&x, b.nvars());
        let cons = xv.transpose().right_mul(&m(2, 2, &[1.0, 2.0, 2.0, 1.0])).sub(&MatExpr::constant(&m(1, 2, &[2.0, 2.0]), b.nvars()));
        b.add_nonneg(&cons);
        b.add_nonneg(&xv);
        cases.push(ConformanceCase { name: "lp_two_halfplanes", program: b.finish(), expected: Expected::Optimal(4.0 / 3.0) });
    }
    // 3. Simplex with weighted objective.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", VarShape::Vector(3));
        for (k, w) in [1.0, 2.0, 3.0].iter().enumerate() {
            b.minimize(x.offset + k, *w);
        }
        let xv = MatExpr::var(&x, b.nvars());
        b.add_zero(&xv.transpose().right_mul(&m(3, 1, &[1.0, 1.0, 1.0])).sub(&cst(&b, 1.0)));
        b.add_nonneg(&xv);
        cases.push(ConformanceCase { name: "lp_simplex", program: b.finish(), expected: Expected::Optimal(1.0) });
    }
    // 4. Box maximization.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", VarShape::Vector(2));
        b.minimize(x.offset, -1.0);
        b.minimize(x.offset + 1, -1.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_nonneg(&xv);
        b.add_nonneg(&MatExpr::constant(&m(2, 1, &[1.0, 1.0]), b.nvars()).sub(&xv));
        cases.push(ConformanceCase { name: "lp_box", program: b.finish(), expected: Expected::Optimal(-2.0) });
    }
    // 5. x = 0 and x = 1.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_scalar("x");
        b.minimize(x, 1.0);
        b.add_zero(&scalar(&b, x));
        b.add_zero(&scalar(&b, x).sub(&cst(&b, 1.0)));
        cases.push(ConformanceCase { name: "lp_inconsistent_equalities", program: b.finish(), expected: Expected::Infeasible });
    }
    // 6. x ≥ 1 and x ≤ 0.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_scalar("x");
        b.minimize(x, 1.0);
        b.add_nonneg(&scalar(&b, x).sub(&cst(&b, 1.0)));
        b.add_nonneg(&scalar(&b, x).scale(-1.0));
        cases.push(ConformanceCase { name: "lp_infeasible_bounds", program: b.finish(), expected: Expected::Infeasible });
    }
    // 7. min −x, x ≥ 0.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_scalar("x");
        b.minimize(x, -1.0);
        b.add_nonneg(&scalar(&b, x));
        cases.push(ConformanceCase { name: "lp_unbounded_ray", program: b.finish(), expected: Expected::Unbounded });
    }
    // 8. Frobenius norm of the all-ones 2×2 matrix.
    {
        cases.push(norm_epigraph_case("soc_frobenius_ones", m(2, 2, &[1.0, 1.0, 1.0, 1.0]), false, 2.0));
    }
    // 9. Linear objective over the unit disc.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", VarShape::Vector(2));
        b.minimize(x.offset, 1.0);
        b.minimize(x.offset + 1, 1.0);
        b.add_soc(&cst(&b, 1.0), &MatExpr::var(&x, b.nvars()));
        cases.push(ConformanceCase { name: "soc_unit_disc", program: b.finish(), expected: Expected::Optimal(-(2f64.sqrt())) });
    }
    // 10. Distance from (1, 2) to the line x₁ + x₂ = 1.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", VarShape::Vector(2));
        let t = b.add_scalar("t");
        b.minimize(t, 1.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_zero(&xv.transpose().right_mul(&m(2, 1, &[1.0, 1.0])).sub(&cst(&b, 1.0)));
        b.add_soc(&scalar(&b, t), &xv.sub(&MatExpr::constant(&m(2, 1, &[1.0, 2.0]), b.nvars())));
        cases.push(ConformanceCase { name: "soc_distance_to_line", program: b.finish(), expected: Expected::Optimal(2f64.sqrt()) });
    }
    // 11. Spectral norm of diag(3, 1).
    {
        cases.push(norm_epigraph_case("psd_spectral_diag", m(2, 2, &[3.0, 0.0, 0.0, 1.0]), true, 3.0));
    }
    // 12. Spectral norm of [[1, 2], [3, 4]].
    {
        let sigma = ((30.0 + 884f64.sqrt()) / 2.0).sqrt();
        cases.push(norm_epigraph_case("psd_spectral_dense", m(2, 2, &[1.0, 2.0, 3.0, 4.0]), true, sigma));
    }
    // 13. min trace X, X ⪰ 0, X₁₁ = 1.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("X", VarShape::Sym(2));
        b.minimize(x.offset, 1.0);
        b.minimize(x.offset + 2, 1.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_psd(&xv);
        b.add_zero(&xv.left_mul(&m(1, 2, &[1.0, 0.0])).right_mul(&m(2, 1, &[1.0, 0.0])).sub(&cst(&b, 1.0)));
        cases.push(ConformanceCase { name: "psd_trace_fixed_corner", program: b.finish(), expected: Expected::Optimal(1.0) });
    }
    // 14. Largest eigenvalue of [[2, 1], [1, 2]].
    {
        let mut b = ProgramBuilder::new();
        let t = b.add_scalar("t");
        b.minimize(t, 1.0);
        let mm = MatExpr::constant(&m(2, 2, &[2.0, 1.0, 1.0, 2.0]), b.nvars());
        b.add_psd(&MatExpr::scalar_identity(t, 2, b.nvars()).sub(&mm));
        cases.push(ConformanceCase { name: "psd_max_eigenvalue", program: b.finish(), expected: Expected::Optimal(3.0) });
    }
    // 15. Smallest eigenvalue of [[2, 1], [1, 2]] as a maximization.
    {
        let mut b = ProgramBuilder::new();
        let t = b.add_scalar("t");
        b.minimize(t, -1.0);
        let mm = MatExpr::constant(&m(2, 2, &[2.0, 1.0, 1.0, 2.0]), b.nvars());
        b.add_psd(&mm.sub(&MatExpr::scalar_identity(t, 2, b.nvars())));
        cases.push(ConformanceCase { name: "psd_min_eigenvalue", program: b.finish(), expected: Expected::Optimal(-1.0) });
    }
    // 16. min ⟨C, X⟩ with unit diagonal, C = [[0, 1], [1, 0]].
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("X", VarShape::Sym(2));
        b.minimize(x.offset + 1, 2.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_psd(&xv);
        let mut d = MatExpr::zeros(2, 1, b.nvars());
        for i in 0..2 {
            let (c0, row) = xv.entry(i, i);
            d.constant[(i, 0)] = c0 - 1.0;
            d.coef.row_mut(i).copy_from_slice(&row);
        }
        b.add_zero(&d);
        cases.push(ConformanceCase { name: "psd_unit_diagonal_2", program: b.finish(), expected: Expected::Optimal(-2.0) });
    }
    // 17. min 1ᵀX1 with unit diagonal, 3 × 3.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("X", VarShape::Sym(3));
        let xv = MatExpr::var(&x, b.nvars());
        let ones = m(3, 1, &[1.0, 1.0, 1.0]);
        let obj = xv.left_mul(&ones.transpose()).right_mul(&ones);
        for (k, v) in obj.coef.row(0).iter().enumerate() {
            b.minimize(k, *v);
        }
        b.add_psd(&xv);
        let mut d = MatExpr::zeros(3, 1, b.nvars());
        for i in 0..3 {
            let (c0, row) = xv.entry(i, i);
            d.constant[(i, 0)] = c0 - 1.0;
            d.coef.row_mut(i).copy_from_slice(&row);
        }
        b.add_zero(&d);
        cases.push(ConformanceCase { name: "psd_unit_diagonal_3", program: b.finish(), expected: Expected::Optimal(0.0) });
    }
    // 18. Lovász theta of the 5-cycle.
    {
        let n = 5;
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("X", VarShape::Sym(n));
        let xv = MatExpr::var(&x, b.nvars());
        let ones = Matrix::from_element(n, 1, 1.0);
        let obj = xv.left_mul(&ones.transpose()).right_mul(&ones);
        for (k, v) in obj.coef.row(0).iter().enumerate() {
            b.minimize(k, -v);
        }
        b.add_psd(&xv);
        let mut eqs = MatExpr::zeros(n + 1, 1, b.nvars());
        let mut trace_row = vec![0.0; b.nvars()];
        for i in 0..n {
            let (_, row) = xv.entry(i, i);
            for (a, r) in trace_row.iter_mut().zip(&row) {
                *a += r;
            }
        }
        eqs.constant[(0, 0)] = -1.0;
        eqs.coef.row_mut(0).copy_from_slice(&trace_row);
        for i in 0..n {
            let (_, row) = xv.entry(i, (i + 1) % n);
            eqs.coef.row_mut(i + 1).copy_from_slice(&row);
        }
        b.add_zero(&eqs);
        cases.push(ConformanceCase { name: "psd_lovasz_theta_c5", program: b.finish(), expected: Expected::Optimal(-(5f64.sqrt())) });
    }
    // 19. Distance from (1, 1) to the half-plane x + y ≤ 0.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("x", VarShape::Vector(2));
        let t = b.add_scalar("t");
        b.minimize(t, 1.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_nonneg(&xv.transpose().right_mul(&m(2, 1, &[-1.0, -1.0])));
        b.add_soc(&scalar(&b, t), &xv.sub(&MatExpr::constant(&m(2, 1, &[1.0, 1.0]), b.nvars())));
        cases.push(ConformanceCase { name: "soc_distance_to_halfplane", program: b.finish(), expected: Expected::Optimal(2f64.sqrt()) });
    }
    // 20. Hyperbolic constraint xy ≥ 1 with y ≤ 4.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_scalar("x");
        let y = b.add_scalar("y");
        b.minimize(x, 1.0);
        let head = scalar(&b, x).add(&scalar(&b, y));
        let tail = column(&b, &[scalar(&b, x).sub(&scalar(&b, y)), cst(&b, 2.0)]);
        b.add_soc(&head, &tail);
        b.add_nonneg(&cst(&b, 4.0).sub(&scalar(&b, y)));
        cases.push(ConformanceCase { name: "soc_hyperbolic", program: b.finish(), expected: Expected::Optimal(0.25) });
    }
    // 21. X ⪰ 0 with X₁₁ = −1.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("X", VarShape::Sym(2));
        b.minimize(x.offset + 2, 1.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_psd(&xv);
        let (c0, row) = xv.entry(0, 0);
        let mut e = MatExpr::zeros(1, 1, b.nvars());
        e.constant[(0, 0)] = c0 + 1.0;
        e.coef.row_mut(0).copy_from_slice(&row);
        b.add_zero(&e);
        cases.push(ConformanceCase { name: "psd_infeasible_corner", program: b.finish(), expected: Expected::Infeasible });
    }
    // 22. min −X₁₂ with X ⪰ 0, X₁₁ = 1.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_variable("X", VarShape::Sym(2));
        b.minimize(x.offset + 1, -1.0);
        let xv = MatExpr::var(&x, b.nvars());
        b.add_psd(&xv);
        let (c0, row) = xv.entry(0, 0);
        let mut e = MatExpr::zeros(1, 1, b.nvars());
        e.constant[(0, 0)] = c0 - 1.0;
        e.coef.row_mut(0).copy_from_slice(&row);
        b.add_zero(&e);
        cases.push(ConformanceCase { name: "psd_unbounded_offdiagonal", program: b.finish(), expected: Expected::Unbounded });
    }
    // 23. Free rows carry no constraint.
    {
        let mut b = ProgramBuilder::new();
        let x = b.add_scalar("x");
        b.minimize(x, 1.0);
        b.add_nonneg(&scalar(&b, x).sub(&cst(&b, 2.0)));
        let mut prog = b.finish();
        prog.a.nrows += 1;
        prog.a.entries.push((1, 0, 5.0));
        prog.b.push(-7.0);
        prog.cones.push(super::Cone::new(super::ConeKind::Free, 1));
        cases.push(ConformanceCase { name: "lp_with_free_row", program: prog, expected: Expected::Optimal(2.0) });
    }
    // 24. Minimal-trace Lyapunov certificate for diag(−1, −2).
    {
        let mut b = ProgramBuilder::new();
        let p = b.add_variable("P", VarShape::Sym(2));
        b.minimize(p.offset, 1.0);
        b.minimize(p.offset + 2, 1.0);
        let a = m(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let pv = MatExpr::var(&p, b.nvars());
        let lyap = pv.left_mul(&a.transpose()).add(&pv.right_mul(&a));
        b.add_psd(&lyap.scale(-1.0).add_constant(&Matrix::identity(2, 2).scale(-1.0)));
        cases.push(ConformanceCase { name: "psd_lyapunov_min_trace", program: b.finish(), expected: Expected::Optimal(0.75) });
    }
    // 25. Stabilizing DH feasibility for a stable plant with one input.
    {
        let a = m(3, 3, &[-1.0, 2.0, 0.0, 0.0, -0.5, 1.0, 0.3, 0.0, -2.0]);
        let bm = m(3, 1, &[0.0, 0.0, 1.0]);
        let pair = crate::dhcore::SystemPair::new(a, bm).expect("valid pair");
        let prog = crate::lmi::build_ssf_feasibility(&pair, &crate::lmi::LmiOptions::default()).expect("valid plant");
        cases.push(ConformanceCase { name: "dh_feasibility_stable_plant", program: prog, expected: Expected::Optimal(0.0) });
    }

    cases
}

/// Runs one case against a backend.
pub fn check_case(backend: &dyn ConicBackend, case: &ConformanceCase, opts: &SolverOptions) -> CaseOutcome {
    let sol = backend.solve(&case.program, opts);
    let (passed, detail) = match case.expected {
        Expected::Optimal(v) => {
            let ok_status = sol.status == SolveStatus::Optimal;
            let ok_res = sol.residuals.max() <= opts.tol;
            let err = (sol.primal_objective - v).abs();
            let ok_val = err <= 1e-7 * (1.0 + v.abs());
            (
                ok_status && ok_res && ok_val,
                format!(
                    "status {} objective {:.10} (expected {:.10}) residuals {:.1e}/{:.1e}/{:.1e} in {} iterations",
                    sol.status,
                    sol.primal_objective,
                    v,
                    sol.residuals.primal_feas,
                    sol.residuals.dual_feas,
                    sol.residuals.duality_gap,
                    sol.iterations
                ),
            )
        }
        Expected::Infeasible | Expected::Unbounded => {
            let want = if case.expected == Expected::Infeasible {
                SolveStatus::InfeasibleCertificate
            } else {
                SolveStatus::UnboundedCertificate
            };
            let viol = certificate_violation(&case.program, &sol).unwrap_or(f64::INFINITY);
            (
                sol.status == want && viol <= 1e-6,
                format!("status {} certificate violation {:.1e}", sol.status, viol),
            )
        }
    };
    CaseOutcome { name: case.name, passed, detail }
}

/// Runs the whole suite against a backend.
pub fn check_backend(backend: &dyn ConicBackend, opts: &SolverOptions) -> Vec<CaseOutcome> {
    suite().iter().map(|c| check_case(backend, c, opts)).collect()
}
