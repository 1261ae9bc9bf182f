use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dhcore::{sof_residuals, ssf_residual};
use crate::fixtures;
use crate::matcore::{is_symmetric, spectral_norm};
use crate::testutil::{random_matrix, random_stable};

fn opts() -> StabOptions {
    StabOptions::default()
}

#[test]
fn verify_counterexample_gain() {
    let s = fixtures::counterexample_s3().triplet();
    let (abscissa, stable) = verify_feedback(&s, &fixtures::counterexample_k(), 0.0).unwrap();
    // Reference eigenvalue computation on the four-digit data.
    assert!((abscissa + 2.450_400_35).abs() < 1e-6, "{abscissa}");
    // Rounding the data to four digits moves the abscissa by up to 4e-3.
    assert!((abscissa + 2.4493).abs() < 5e-3);
    assert!(stable);
}

#[test]
fn verify_zero_gain_gives_open_loop_abscissa() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_stable(&mut rng, 4);
    let s = SystemTriplet::new(a.clone(), random_matrix(&mut rng, 4, 2), random_matrix(&mut rng, 3, 4)).unwrap();
    let (abscissa, stable) = verify_feedback(&s, &Matrix::zeros(2, 3), 0.0).unwrap();
    assert_eq!(abscissa, spectral_abscissa(&a).unwrap());
    assert!(stable);
    assert!(verify_feedback(&s, &Matrix::zeros(3, 2), 0.0).is_err());
}

#[test]
fn stable_plant_needs_no_feedback() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = random_stable(&mut rng, 3);
    let p = SystemPair::new(a, random_matrix(&mut rng, 3, 1)).unwrap();
    for r in [ssf_solve(&p, &opts()), ssf_bcd_solve(&p, &opts()), sof_solve(&p.to_triplet(), &opts())] {
        assert!(r.is_stabilized());
        assert!(r.k.norm() <= 1e-6);
    }
}

#[test]
fn ssf_counterexample_improves_on_the_reference_gain() {
    let p = fixtures::counterexample_s3().pair();
    let r = ssf_solve(&p, &StabOptions { norm: NormKind::Spectral, ..opts() });
    assert!(r.is_stabilized(), "{:?}", r.diagnostics);
    assert!(r.abscissa < 0.0);
    let reference = spectral_norm(&fixtures::counterexample_k());
    assert!((reference - 54.996_024).abs() < 1e-5);
    assert!(r.norm_value < reference / 10.0, "{}", r.norm_value);
    assert!(r.norm_value <= r.initial_objective);
    assert!((spectral_norm(&r.k) - r.norm_value).abs() < 1e-12);
}

#[test]
fn ssf_unstabilizable_pair_fails_feasibility() {
    let r = ssf_solve(&fixtures::unstabilizable_pair().pair(), &opts());
    assert_eq!(r.status, FeedbackStatus::FailedFeasibility);
    assert!(r.feasibility_value > 0.1);
    let r = ssf_bcd_solve(&fixtures::unstabilizable_pair().pair(), &opts());
    assert_eq!(r.status, FeedbackStatus::FailedFeasibility);
}

fn check_schedule(log: &[LogEntry], o: &StabOptions) {
    let steps: Vec<&LogEntry> = log.iter().filter(|e| e.eps.is_some()).collect();
    for w in steps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.phase != b.phase {
            continue;
        }
        let (ea, eb) = (a.eps.unwrap(), b.eps.unwrap());
        assert!(eb >= o.eps_min && eb <= o.eps_max);
        if a.outer == 0 {
            continue;
        }
        if a.accepted {
            assert_eq!(eb, (ea * 2.0).min(o.eps_max));
        } else {
            assert_eq!(eb, ea * 0.5);
        }
    }
}

fn check_monotone(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(w[1] < w[0], "non-monotone trace {trace:?}");
    }
}

#[test]
fn ssf_trust_region_schedule_and_monotonicity() {
    let o = opts();
    let r = ssf_solve(&fixtures::unstable3().pair(), &o);
    assert!(r.is_stabilized());
    assert!(r.iterations > 0);
    check_schedule(&r.phase_log, &o);
    let trace = r.accepted_trace(Phase::Optimization);
    check_monotone(&trace);
    assert_eq!(trace[0], r.initial_objective);
}

#[test]
fn bcd_trace_is_monotone() {
    let r = ssf_bcd_solve(&fixtures::counterexample_s3().pair(), &opts());
    assert!(r.is_stabilized());
    check_monotone(&r.accepted_trace(Phase::Optimization));
    assert!(r.norm_value <= r.initial_objective);
}

#[test]
fn rho_shift_moves_the_closed_loop_left() {
    let o = StabOptions { rho: 0.1, ..opts() };
    let r = ssf_solve(&fixtures::counterexample_s3().pair(), &o);
    assert!(r.is_stabilized());
    assert!(r.abscissa <= -0.1 + 1e-6, "{}", r.abscissa);
}

#[test]
fn identity_initialization_is_exact() {
    let s = fixtures::chain3_output().triplet();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = sof_initialize(&s, InitStrategy::Identity, &mut rng, &opts()).unwrap();
    assert_eq!(t.p(), &Matrix::identity(3, 3));
    assert!(sof_initialize(&s, InitStrategy::Auto, &mut rng, &opts()).is_err());
}

#[test]
fn random_initialization_is_reproducible() {
    let s = fixtures::chain3_output().triplet();
    let draw = |seed| sof_initialize(&s, InitStrategy::Random, &mut ChaCha8Rng::seed_from_u64(seed), &opts()).unwrap();
    let (a, b, c) = (draw(7), draw(7), draw(8));
    assert_eq!(a, b);
    assert_ne!(a.p(), c.p());
    assert!(is_symmetric(a.p(), 0.0));
    assert!(a.min_p_eig() > 0.0);
}

#[test]
fn abi_initialization_is_feasible_for_the_pair() {
    let plant = fixtures::counterexample_s3();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = plant.triplet();
    let t = sof_initialize(&s, InitStrategy::Abi, &mut rng, &opts()).unwrap();
    let mu = ssf_residual(&plant.pair(), &t.to_triple(1e-12), NormKind::Frobenius).unwrap();
    assert!(mu <= 1e-7, "{mu}");
}

#[test]
fn aic_initialization_is_feasible_for_output_injection() {
    let plant = fixtures::chain3_output();
    let c = plant.c.clone().unwrap();
    let injection = SystemTriplet::new(plant.a.clone(), Matrix::identity(3, 3), c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = sof_initialize(&injection, InitStrategy::Aic, &mut rng, &opts()).unwrap();
    let (left, right) = sof_residuals(&injection, &t.to_triple(1e-12), NormKind::Frobenius).unwrap();
    assert!(left + right <= 1e-7, "{left} + {right}");
}

#[test]
fn sof_chain_gain_lies_in_the_stability_interval() {
    let s = fixtures::chain3_output().triplet();
    for init in InitStrategy::CONCRETE {
        let r = sof_solve(&s, &StabOptions { init, random_restarts: 2, ..opts() });
        assert!(r.is_stabilized(), "{init}: {:?}", r.diagnostics);
        let k = r.k[(0, 0)];
        assert!(k > 1.0 && k < 4.0, "{init}: k = {k}");
        check_monotone(&r.accepted_trace(Phase::Feasibility));
        check_monotone(&r.accepted_trace(Phase::Optimization));
        check_schedule(&r.phase_log, &opts());
    }
}

#[test]
fn sof_unstabilizable_triplet_fails_feasibility() {
    let r = sof_solve(&fixtures::unstabilizable_triplet().triplet(), &StabOptions { max_outer: 30, ..opts() });
    assert_eq!(r.status, FeedbackStatus::FailedFeasibility);
}

#[test]
fn sof_with_full_actuation_and_sensing_stabilizes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_matrix(&mut rng, 3, 3) + Matrix::identity(3, 3);
    let eye = Matrix::identity(3, 3);
    let s = SystemTriplet::new(a, eye.clone(), eye).unwrap();
    let r = sof_solve(&s, &opts());
    assert!(r.is_stabilized());
}

#[test]
fn random_strategy_is_deterministic() {
    let s = fixtures::double_integrator_output().triplet();
    let o = StabOptions { init: InitStrategy::Random, random_restarts: 3, seed: 11, rho: 0.5, ..opts() };
    let a = sof_solve(&s, &o);
    let b = sof_solve(&s, &o);
    assert_eq!(a.phase_log, b.phase_log);
    assert_eq!(a.k, b.k);
}

#[test]
fn auto_strategy_escalates_until_feasible() {
    let s = fixtures::chain3_output().triplet();
    let r = sof_solve(&s, &StabOptions { init: InitStrategy::Auto, ..opts() });
    assert!(r.is_stabilized());
    assert_eq!(r.init, Some(InitStrategy::Identity));
}

#[test]
fn init_strategy_names_round_trip() {
    for s in InitStrategy::CONCRETE.into_iter().chain([InitStrategy::Auto]) {
        assert_eq!(s.name().parse::<InitStrategy>().unwrap(), s);
    }
    assert!("best".parse::<InitStrategy>().is_err());
}
