use super::conformance::{check_case, suite};
use super::*;

#[test]
fn conformance_suite_passes() {
    let opts = SolverOptions::default();
    let mut failures = Vec::new();
    for case in suite() {
        let out = check_case(&InteriorPoint, &case, &opts);
        if !out.passed {
            failures.push(format!("{}: {}", out.name, out.detail));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

use proptest::prelude::*;

use crate::testutil::random_matrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample_program() -> ConicProgram {
    let mut b = builder::ProgramBuilder::new();
    let xv = b.add_variable("X", VarShape::Sym(3));
    let t = b.add_scalar("t");
    b.minimize(t, 1.0);
    let nv = b.nvars();
    let x = builder::MatExpr::var(&xv, nv);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_matrix(&mut rng, 3, 3);
    let resid = x.left_mul(&a).add_constant(&Matrix::identity(3, 3));
    let head = builder::MatExpr::scalar_var(t, nv);
    b.add_soc(&head, &resid);
    b.add_psd(&x.add_constant(&(-Matrix::identity(3, 3) * 0.5)));
    b.finish()
}

#[test]
fn dump_round_trip_is_exact() {
    let p = sample_program();
    let text = write_dump(&p);
    assert!(text.starts_with("conicprogram v1"));
    let q = parse_dump(&text).unwrap();
    assert_eq!(p.c, q.c);
    assert_eq!(p.b, q.b);
    assert_eq!(p.cones, q.cones);
    assert_eq!(p.vars, q.vars);
    assert_eq!(p.a.to_dense(), q.a.to_dense());
    assert_eq!(write_dump(&q), text);
}

#[test]
fn dump_rejects_malformed_input() {
    assert!(parse_dump("").is_err());
    assert!(parse_dump("conicprogram v2\n").is_err());
    let text = write_dump(&sample_program());
    assert!(parse_dump(&text.replace("end", "")).is_err());
    assert!(parse_dump(&text.replacen("dims", "dims 1 1 #", 1)).is_err());
    let bad_cone = text.replacen("psd 3", "psd 4", 1);
    assert!(parse_dump(&bad_cone).is_err());
    let overflow = "conicprogram v1\ndims 1 0\ncones 0\nvars 0\nobjective 2\n0 1e308\n0 1e308\nmatrix 0\nrhs 0\nend\n";
    assert!(parse_dump(&overflow.replace("0 1e308\n0 1e308", "0 1e308\n0 -1e308")).is_ok());
    assert!(parse_dump(overflow).unwrap_err().to_string().contains("overflow"));
}

#[test]
fn solves_are_deterministic() {
    let p = sample_program();
    let opts = SolverOptions::default();
    let s1 = solve(&p, &opts);
    let s2 = solve(&p, &opts);
    assert_eq!(s1, s2);
    assert!(s1.is_optimal());
}

#[test]
fn optimal_solutions_satisfy_cones_and_weak_duality() {
    let opts = SolverOptions::default();
    for case in conformance::suite() {
        let sol = solve(&case.program, &opts);
        if !sol.is_optimal() {
            continue;
        }
        assert!(primal_cone_violation(&case.program, &sol.slack) <= 10.0 * opts.tol, "{}", case.name);
        assert!(dual_cone_violation(&case.program, &sol.dual) <= 10.0 * opts.tol, "{}", case.name);
        let gap = sol.primal_objective - sol.dual_objective;
        assert!(gap >= -1e-7 * (1.0 + sol.primal_objective.abs()), "{}: {gap}", case.name);
    }
}

#[test]
fn invalid_programs_are_rejected() {
    let mut p = sample_program();
    p.b.pop();
    assert!(p.validate().is_err());
    assert_eq!(solve(&p, &SolverOptions::default()).status, SolveStatus::NumericalFailure);
}

fn arb_shape() -> impl Strategy<Value = VarShape> {
    prop_oneof![
        Just(VarShape::Scalar),
        (1usize..5).prop_map(VarShape::Vector),
        (2usize..4).prop_map(VarShape::Skew),
        (1usize..4).prop_map(VarShape::Sym),
        (1usize..4, 1usize..4).prop_map(|(r, c)| VarShape::Dense(r, c)),
    ]
}

fn arb_program() -> impl Strategy<Value = ConicProgram> {
    let cones = prop::collection::vec(
        prop_oneof![
            (1usize..4).prop_map(|k| Cone::new(ConeKind::Zero, k)),
            (1usize..4).prop_map(|k| Cone::new(ConeKind::Free, k)),
            (1usize..4).prop_map(|k| Cone::new(ConeKind::Nonneg, k)),
            (1usize..4).prop_map(|k| Cone::new(ConeKind::SecondOrder, k)),
            (1usize..3).prop_map(|k| Cone::new(ConeKind::Psd, k)),
        ],
        1..4,
    );
    (prop::collection::vec(arb_shape(), 1..3), cones).prop_flat_map(|(shapes, cones)| {
        let mut entries = Vec::new();
        let mut off = 0;
        for (i, s) in shapes.iter().enumerate() {
            entries.push(VarEntry { name: format!("v{i}"), shape: *s, offset: off });
            off += s.len();
        }
        let n = off;
        let m: usize = cones.iter().map(Cone::rows).sum();
        let val = prop_oneof![Just(0.0), -1e6f64..1e6, prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO];
        (
            prop::collection::vec(val.clone(), n),
            prop::collection::vec((0..m, 0..n, val.clone()), 0..12),
            prop::collection::vec(val, m),
        )
            .prop_map(move |(c, a, b)| {
                let mut sm = SparseMatrix::new(m, n);
                for (i, j, v) in a {
                    sm.push(i, j, v);
                }
                ConicProgram { c, a: sm, b, cones: cones.clone(), vars: VarMap { entries: entries.clone() } }
            })
    })
}

proptest! {
    #[test]
    fn dump_round_trip_prop(p in arb_program()) {
        let text = write_dump(&p);
        let q = parse_dump(&text).unwrap();
        prop_assert_eq!(&q.c, &p.c);
        prop_assert_eq!(&q.b, &p.b);
        prop_assert_eq!(&q.cones, &p.cones);
        prop_assert_eq!(&q.vars, &p.vars);
        prop_assert_eq!(q.a.to_dense(), p.a.to_dense());
    }

    #[test]
    fn var_shape_round_trip(shape in arb_shape(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = crate::random::randn(&mut rng, shape.len(), 1).iter().copied().collect();
        let m = shape.decode(&x);
        prop_assert_eq!(shape.encode(&m), x);
    }
}
