use proptest::prelude::*;

use super::*;
use crate::fixtures;

const MINIMAL: &str = "di 2 1 0\n0 1\n0 0\n0\n1\n";

#[test]
fn minimal_ssf_file_round_trips() {
    let pf = parse_problem_str(MINIMAL).unwrap();
    assert_eq!((pf.name.as_str(), pf.n(), pf.m(), pf.p()), ("di", 2, 1, 0));
    assert!(pf.is_ssf());
    assert_eq!(pf.a, Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
    let again = parse_problem_str(&emit_problem(&pf)).unwrap();
    assert_eq!(again, pf);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = "# toy\n\ndi 2 1 1\n0 1\n\n0 0\n# B\n0\n1\n1 1\n";
    let pf = parse_problem_str(text).unwrap();
    assert_eq!(pf.c, Some(Matrix::from_row_slice(1, 2, &[1.0, 1.0])));
}

#[test]
fn missing_row_is_a_parse_error() {
    let text = "short 3 1 0\n1 0 0\n0 1 0\n";
    match parse_problem_str(text) {
        Err(BenchError::Parse { line, msg }) => {
            assert_eq!(line, 4);
            assert!(msg.contains("row 3 of A"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_problem_files_are_rejected() {
    let cases = [
        ("", "end of input"),
        ("x 2 1\n", "header"),
        ("x 2 1 0 extra\n", "header"),
        ("x two 1 0\n", "invalid count"),
        ("x 0 1 0\n", "positive"),
        ("x 99999 1 0\n", "limit"),
        ("x 1 1 0\n1 2\n1\n", "has 2 entries"),
        ("x 1 1 0\nnan\n1\n", "non-finite"),
        ("x 1 1 0\ninf\n1\n", "non-finite"),
        ("x 1 1 0\n1e400\n1\n", "non-finite"),
        ("x 1 1 0\n0x10\n1\n", "invalid number"),
        ("x 1 1 0\n1\n1\n2\n", "trailing"),
        ("x 1 1 1\n1\n1\n", "row 1 of C"),
    ];
    for (text, needle) in cases {
        let err = parse_problem_str(text).unwrap_err().to_string();
        assert!(err.contains(needle), "{text:?}: {err}");
    }
}

#[test]
fn counterexample_fixture_carries_the_printed_digits() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path()).unwrap();
    let pf = parse_problem(&dir.path().join("counterexample_s3.prob")).unwrap();
    assert_eq!((pf.n(), pf.m(), pf.p()), (4, 2, 0));
    assert_eq!(pf.a[(0, 0)], -0.3633);
    assert_eq!(pf.a[(0, 3)], -2.2033);
    assert_eq!(pf.a[(2, 0)], -3.0730);
    assert_eq!(pf.a[(3, 3)], 0.9424);
    assert_eq!(pf.b[(0, 1)], -0.9610);
    assert_eq!(pf.b[(3, 0)], -1.1723);
    let k = read_matrix(&dir.path().join(KSTAR_FILE)).unwrap();
    assert_eq!(k.shape(), (2, 4));
    assert_eq!(k[(0, 3)], -35.6683);
    assert_eq!(k[(1, 0)], 10.1752);
}

#[test]
fn gain_files_round_trip_and_validate() {
    let k = fixtures::counterexample_k();
    assert_eq!(parse_matrix(&emit_matrix(&k)).unwrap(), k);
    assert_eq!(parse_matrix("1 1\n2.5\n").unwrap()[(0, 0)], 2.5);
    for text in ["", "2\n1\n", "1 2\n1\n", "1 1\n1\n2\n", "1 1\nNaN\n", "a b\n"] {
        assert!(parse_matrix(text).is_err(), "{text:?}");
    }
}

#[test]
fn missing_file_is_an_io_error() {
    let err = parse_problem(Path::new("/nonexistent/missing.prob")).unwrap_err();
    assert!(matches!(err, BenchError::Io { .. }));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(-0.0),
        -1e3..1e3f64,
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
    ]
}

fn arb_problem() -> impl Strategy<Value = ProblemFile> {
    (1usize..5, 1usize..4, 0usize..4).prop_flat_map(|(n, m, p)| {
        (
            prop::collection::vec(finite(), n * n),
            prop::collection::vec(finite(), n * m),
            prop::collection::vec(finite(), p * n),
            "[a-zA-Z_][a-zA-Z0-9_.,-]{0,12}",
        )
            .prop_map(move |(a, b, c, name)| ProblemFile {
                name,
                a: Matrix::from_row_slice(n, n, &a),
                b: Matrix::from_row_slice(n, m, &b),
                c: (p > 0).then(|| Matrix::from_row_slice(p, n, &c)),
            })
    })
}

proptest! {
    #[test]
    fn problem_round_trip_is_lossless(pf in arb_problem()) {
        let back = parse_problem_str(&emit_problem(&pf)).unwrap();
        prop_assert_eq!(back.name, pf.name);
        let bits = |m: &Matrix| m.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back.a), bits(&pf.a));
        prop_assert_eq!(bits(&back.b), bits(&pf.b));
        prop_assert_eq!(back.c.as_ref().map(bits), pf.c.as_ref().map(bits));
    }

    #[test]
    fn parsed_text_re_emits_stably(text in "([0-9 .e+-]{0,12}\n|[ -~]{0,12}\n){0,12}") {
        if let Ok(pf) = parse_problem_str(&text) {
            prop_assert_eq!(parse_problem_str(&emit_problem(&pf)).unwrap(), pf);
        }
        if let Ok(k) = parse_matrix(&text) {
            prop_assert_eq!(parse_matrix(&emit_matrix(&k)).unwrap(), k);
        }
        if let Ok(prog) = crate::conic::parse_dump(&text) {
            let dump = crate::conic::write_dump(&prog);
            prop_assert_eq!(crate::conic::write_dump(&crate::conic::parse_dump(&dump).unwrap()), dump);
        }
    }
}

#[test]
fn empty_directory_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_bench(dir.path(), &BenchOptions::default()).unwrap();
    assert!(report.rows.is_empty());
    assert_eq!(report.to_csv().trim(), CSV_HEADER.join(","));
}

#[test]
fn fixture_batch_stabilizes_every_feasible_plant() {
    let dir = tempfile::tempdir().unwrap();
    write_fixtures(dir.path()).unwrap();
    std::fs::write(dir.path().join("broken.prob"), "broken 2 1 0\n1 2\n").unwrap();
    let report = run_bench(dir.path(), &BenchOptions::default()).unwrap();
    let plants = fixtures::all();
    assert_eq!(report.rows.len(), plants.len() + 1);
    let broken = report.rows.iter().find(|r| r.problem == "broken").unwrap();
    assert_eq!(broken.status, RowStatus::ParseError);
    for plant in plants {
        let row = report.rows.iter().find(|r| r.problem == plant.name).unwrap();
        let expect = !plant.name.starts_with("unstabilizable");
        assert_eq!(row.is_stabilized(), expect, "{}: {:?}", plant.name, row.status);
        if expect {
            let (abscissa, stable) = verify_feedback(&plant.triplet(), row.k.as_ref().unwrap(), 0.0).unwrap();
            assert!(stable);
            assert_eq!(abscissa, row.abscissa);
        } else {
            assert_eq!(row.status, RowStatus::Feedback(FeedbackStatus::FailedFeasibility));
        }
    }
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), report.rows.len() + 1);
    assert!(report.to_table().lines().next().unwrap().starts_with("problem"));
}

#[test]
fn ssf_comparison_has_init_bcd_and_ssdp_columns() {
    let problems: Vec<_> = [fixtures::unstable3(), fixtures::chain3_output()]
        .into_iter()
        .map(|p| (p.name.clone(), Ok(ProblemFile::from(p))))
        .collect();
    let opts = BenchOptions { mode: BenchMode::CompareSsf, ..BenchOptions::default() };
    let report = run_problems(&problems, &opts);
    assert_eq!(report.rows.len(), 2 * opts.mode.configurations());
    let algs: Vec<&str> = report.rows[..3].iter().map(|r| r.algorithm.as_str()).collect();
    assert_eq!(algs, COMPARE_ALGORITHMS);
    let [init, bcd, ssdp] = [0, 1, 2].map(|i| &report.rows[i]);
    assert!(init.is_stabilized() && bcd.is_stabilized() && ssdp.is_stabilized());
    assert!(ssdp.norm_value <= init.norm_value && bcd.norm_value <= init.norm_value);
    assert!(report.rows[3..].iter().all(|r| r.status == RowStatus::Skipped));
    let table = report.comparison_table();
    let header: Vec<&str> = table.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["problem", "Init", "BCD", "SSDP"]);
    assert!(table.contains("skipped"));
}

#[test]
fn csv_quotes_awkward_names() {
    let mut row = BenchRow::blank("a,b", "ssf", NormKind::Frobenius, RowStatus::Skipped);
    row.norm_value = 1.5;
    let report = BenchReport { rows: vec![row] };
    let csv = report.to_csv();
    let line = csv.lines().nth(1).unwrap();
    assert!(line.starts_with("\"a,b\",ssf,-,fro,1.500000e0,,skipped,0,"), "{line}");
}
