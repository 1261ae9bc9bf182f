//! Stabilization algorithms: state feedback by convex feasibility followed by
//! sequential semidefinite programming (SSDP), output feedback by SSDP
//! feasibility followed by block-coordinate descent (BCD), and the BCD
//! state-feedback baseline.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conic::{solve, ConicProgram, ConicSolution, SolverOptions};
use crate::dhcore::{rho_shift, DhError, DhResult, DhTripleInv, SystemPair, SystemTriplet};
use crate::lmi::{self, LmiOptions};
use crate::matcore::{pinv, spd_inverse, spectral_abscissa, sqrtm_psd, sym_min_eig, symmetrize, Matrix, NormKind};
use crate::random::randn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitStrategy {
    Identity,
    Random,
    Abi,
    Aic,
    /// Tries identity, abi, aic and random in turn until Phase 1 succeeds.
    Auto,
}

impl InitStrategy {
    pub const CONCRETE: [InitStrategy; 4] = [Self::Identity, Self::Random, Self::Abi, Self::Aic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Random => "random",
            Self::Abi => "abi",
            Self::Aic => "aic",
            Self::Auto => "auto",
        }
    }
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InitStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Self::Identity),
            "random" => Ok(Self::Random),
            "abi" => Ok(Self::Abi),
            "aic" => Ok(Self::Aic),
            "auto" => Ok(Self::Auto),
            _ => Err(format!("unknown initialization `{s}` (expected identity, random, abi, aic or auto)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabOptions {
    pub norm: NormKind,
    pub eps_min: f64,
    /// Feasibility accuracy: Phase 1 succeeds when its residual is at most `delta`.
    pub delta: f64,
    pub max_outer: usize,
    pub decrease_tol: f64,
    /// Measure the stop rule as `(F_prev − F_new) / max(1, F_prev)`; when
    /// false the absolute decrease is used.
    pub relative_decrease: bool,
    pub eps_shrink: f64,
    pub eps_grow: f64,
    pub eps_max: f64,
    pub init: InitStrategy,
    pub random_restarts: usize,
    pub seed: u64,
    /// Lower bound on the eigenvalues of `R` and `Q`.
    pub margin: f64,
    /// Solve on `A + ρI` and verify against `A`.
    pub rho: f64,
    /// A feedback is reported as stabilizing when its abscissa is below
    /// `stab_tol − rho`.
    pub stab_tol: f64,
    pub tol_pd: f64,
    pub solver: SolverOptions,
}

impl Default for StabOptions {
    fn default() -> Self {
        Self {
            norm: NormKind::Frobenius,
            eps_min: 1e-9,
            delta: 1e-9,
            max_outer: 100,
            decrease_tol: 1e-4,
            relative_decrease: true,
            eps_shrink: 0.5,
            eps_grow: 2.0,
            eps_max: 1.0,
            init: InitStrategy::Identity,
            random_restarts: 10,
            seed: 0,
            margin: 0.0,
            rho: 0.0,
            stab_tol: 0.0,
            tol_pd: 1e-8,
            solver: SolverOptions::default(),
        }
    }
}

impl StabOptions {
    pub fn lmi(&self) -> LmiOptions {
        LmiOptions { norm: self.norm, tol_pd: self.tol_pd, margin: self.margin }
    }

    /// Abscissa bound a verified feedback must beat on the original plant.
    pub fn stability_threshold(&self) -> f64 {
        self.stab_tol - self.rho
    }

    fn feasibility_solver(&self) -> SolverOptions {
        SolverOptions { tol: self.solver.tol.min(self.delta), ..self.solver }
    }

    fn decreased_enough(&self, prev: f64, new: f64) -> bool {
        let scale = if self.relative_decrease { prev.max(1.0) } else { 1.0 };
        (prev - new) / scale >= self.decrease_tol
    }
}

/// Iterate of a trust-region loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionState {
    pub triple: DhTripleInv,
    pub eps: f64,
    pub objective: f64,
    pub outer_iter: usize,
    pub inner_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeedbackStatus {
    Stabilized,
    FailedFeasibility,
    FailedNumerics,
}

impl FeedbackStatus {
    pub fn name(self) -> &'static str {
        match self {
            Self::Stabilized => "stabilized",
            Self::FailedFeasibility => "failed_feasibility",
            Self::FailedNumerics => "failed_numerics",
        }
    }
}

impl fmt::Display for FeedbackStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Feasibility,
    Optimization,
}

/// One trust-region or block-coordinate attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub phase: Phase,
    pub outer: usize,
    /// Trust-region radius factor; `None` for block-coordinate steps.
    pub eps: Option<f64>,
    /// Objective after the attempt (the candidate value when rejected).
    pub objective: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Timings {
    pub feasibility: Duration,
    pub optimization: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.feasibility + self.optimization
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackResult {
    pub k: Matrix,
    pub norm_kind: NormKind,
    /// `‖K‖` in `norm_kind`.
    pub norm_value: f64,
    /// Spectral abscissa of the closed loop of the original plant.
    pub abscissa: f64,
    pub status: FeedbackStatus,
    pub init: Option<InitStrategy>,
    /// Final Phase-1 residual relative to the size of its terms.
    pub feasibility_value: f64,
    /// Feedback at the start of Phase 2.
    pub initial_k: Matrix,
    pub initial_objective: f64,
    pub phase_log: Vec<LogEntry>,
    pub timings: Timings,
    /// Accepted outer iterations over both phases.
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

impl FeedbackResult {
    pub fn is_stabilized(&self) -> bool {
        self.status == FeedbackStatus::Stabilized
    }

    /// Objective values of accepted iterations of one phase, starting with
    /// the phase's initial value.
    pub fn accepted_trace(&self, phase: Phase) -> Vec<f64> {
        self.phase_log.iter().filter(|e| e.phase == phase && e.accepted).map(|e| e.objective).collect()
    }

    fn bare(status: FeedbackStatus, m: usize, p: usize, norm: NormKind, diagnostic: String) -> Self {
        Self {
            k: Matrix::zeros(m, p),
            norm_kind: norm,
            norm_value: 0.0,
            abscissa: f64::NAN,
            status,
            init: None,
            feasibility_value: f64::NAN,
            initial_k: Matrix::zeros(m, p),
            initial_objective: f64::NAN,
            phase_log: Vec::new(),
            timings: Timings::default(),
            iterations: 0,
            diagnostics: vec![diagnostic],
        }
    }
}

/// Spectral abscissa of `A − BKC` and whether it is below `tol`.
pub fn verify_feedback(s: &SystemTriplet, k: &Matrix, tol: f64) -> DhResult<(f64, bool)> {
    if k.shape() != (s.m(), s.p()) {
        return Err(DhError::DimensionMismatch(format!(
            "K is {}x{}, expected {}x{}",
            k.nrows(),
            k.ncols(),
            s.m(),
            s.p()
        )));
    }
    let abscissa = spectral_abscissa(&(&s.a - &s.b * k * &s.c))?;
    Ok((abscissa, abscissa < tol))
}

// ── Shared loops ────────────────────────────────────────────────────

fn solve_optimal(prog: &ConicProgram, opts: &SolverOptions) -> Result<ConicSolution, String> {
    let sol = solve(prog, opts);
    if sol.is_optimal() {
        Ok(sol)
    } else {
        Err(format!("subproblem ended with status {}{}", sol.status, sol.diagnostics.map(|d| format!(": {d}")).unwrap_or_default()))
    }
}

/// Outcome of a loop: the final iterate, accepted states (oldest first) and
/// the log.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome<S> {
    pub state: S,
    pub objective: f64,
    pub accepted: Vec<S>,
    pub log: Vec<LogEntry>,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

/// When a trust-region loop ends early.
enum Stop<'a> {
    /// The accepted decrease falls below the stop rule.
    SmallDecrease,
    /// The iterate satisfies the predicate; also checked at the start.
    Reached(&'a dyn Fn(&DhTripleInv, f64) -> bool),
}

/// SSDP trust-region loop. A candidate is accepted only when it strictly
/// decreases the objective; otherwise `eps` shrinks until it would fall
/// below `eps_min`, which ends the loop.
fn trust_region_loop(
    start: DhTripleInv,
    phase: Phase,
    opts: &StabOptions,
    solver: &SolverOptions,
    build: impl Fn(&DhTripleInv, f64) -> DhResult<ConicProgram>,
    objective: impl Fn(&DhTripleInv) -> f64,
    stop: Stop,
) -> LoopOutcome<DhTripleInv> {
    let f0 = objective(&start);
    let mut st = TrustRegionState { triple: start, eps: opts.eps_max.min(1.0), objective: f0, outer_iter: 0, inner_iter: 0 };
    let mut out = LoopOutcome {
        state: st.triple.clone(),
        objective: f0,
        accepted: vec![st.triple.clone()],
        log: vec![LogEntry { phase, outer: 0, eps: Some(st.eps), objective: f0, accepted: true }],
        iterations: 0,
        diagnostics: Vec::new(),
    };
    if let Stop::Reached(reached) = &stop {
        if reached(&st.triple, f0) {
            return out;
        }
    }
    'outer: while st.outer_iter < opts.max_outer {
        st.outer_iter += 1;
        loop {
            st.inner_iter += 1;
            let candidate = build(&st.triple, st.eps)
                .map_err(|e| e.to_string())
                .and_then(|prog| solve_optimal(&prog, solver).map(|sol| lmi::decode_step(&prog, &sol.primal, &st.triple)));
            let value = match &candidate {
                Ok(c) if c.min_p_eig() >= 0.5 * opts.tol_pd => objective(c),
                Ok(_) => f64::INFINITY,
                Err(e) => {
                    out.diagnostics.push(format!("{phase:?} step {} (eps {:e}): {e}", st.outer_iter, st.eps));
                    f64::INFINITY
                }
            };
            let accepted = value.is_finite() && value < st.objective;
            out.log.push(LogEntry { phase, outer: st.outer_iter, eps: Some(st.eps), objective: value, accepted });
            if accepted {
                let prev = st.objective;
                st.triple = candidate.expect("accepted candidate");
                st.objective = value;
                st.eps = (st.eps * opts.eps_grow).min(opts.eps_max);
                out.accepted.push(st.triple.clone());
                out.iterations += 1;
                let finished = match &stop {
                    Stop::SmallDecrease => !opts.decreased_enough(prev, value),
                    Stop::Reached(reached) => reached(&st.triple, value),
                };
                if finished {
                    break 'outer;
                }
                break;
            }
            let next = st.eps * opts.eps_shrink;
            if next < opts.eps_min {
                break 'outer;
            }
            st.eps = next;
        }
    }
    out.state = st.triple;
    out.objective = st.objective;
    out
}

/// `(J, R, Q)` iterate of a block-coordinate loop.
#[derive(Debug, Clone, PartialEq)]
pub struct JrqState {
    pub j: Matrix,
    pub r: Matrix,
    pub q: Matrix,
}

impl JrqState {
    pub fn from_inv(t: &DhTripleInv, floor: f64) -> Self {
        Self { j: t.j().clone(), r: t.r().clone(), q: t.q(floor) }
    }

    pub fn compose(&self) -> Matrix {
        (&self.j - &self.r) * &self.q
    }
}

/// Alternates the `(J, R)` and `Q` blocks. Each half step is kept only when
/// it strictly decreases the objective; the loop stops when a full sweep
/// changes nothing or decreases less than the stop rule allows.
fn bcd_loop(
    start: JrqState,
    opts: &StabOptions,
    build_jr: impl Fn(&Matrix) -> DhResult<ConicProgram>,
    build_q: impl Fn(&Matrix, &Matrix) -> DhResult<ConicProgram>,
    objective: impl Fn(&JrqState) -> f64,
) -> LoopOutcome<JrqState> {
    let f0 = objective(&start);
    let mut out = LoopOutcome {
        state: start.clone(),
        objective: f0,
        accepted: vec![start],
        log: vec![LogEntry { phase: Phase::Optimization, outer: 0, eps: None, objective: f0, accepted: true }],
        iterations: 0,
        diagnostics: Vec::new(),
    };
    for outer in 1..=opts.max_outer {
        let prev = out.objective;
        let mut changed = false;
        let jr = build_jr(&out.state.q)
            .map_err(|e| e.to_string())
            .and_then(|prog| {
                let sol = solve_optimal(&prog, &opts.solver)?;
                let j = lmi::decode_matrix(&prog, &sol.primal, "J").ok_or("missing J")?;
                let r = lmi::decode_matrix(&prog, &sol.primal, "R").ok_or("missing R")?;
                Ok(JrqState { j: crate::matcore::skew_part(&j), r: symmetrize(&r), q: out.state.q.clone() })
            });
        match jr {
            Ok(c) => {
                let v = objective(&c);
                if v < out.objective {
                    out.state = c;
                    out.objective = v;
                    changed = true;
                }
            }
            Err(e) => out.diagnostics.push(format!("block (J, R) at sweep {outer}: {e}")),
        }
        let qs = build_q(&out.state.j, &out.state.r)
            .map_err(|e| e.to_string())
            .and_then(|prog| {
                let sol = solve_optimal(&prog, &opts.solver)?;
                let q = lmi::decode_matrix(&prog, &sol.primal, "Q").ok_or("missing Q")?;
                Ok(JrqState { j: out.state.j.clone(), r: out.state.r.clone(), q: symmetrize(&q) })
            });
        match qs {
            Ok(c) if sym_min_eig(&c.q) > 0.0 => {
                let v = objective(&c);
                if v < out.objective {
                    out.state = c;
                    out.objective = v;
                    changed = true;
                }
            }
            Ok(_) => out.diagnostics.push(format!("block Q at sweep {outer}: not positive definite")),
            Err(e) => out.diagnostics.push(format!("block Q at sweep {outer}: {e}")),
        }
        out.log.push(LogEntry { phase: Phase::Optimization, outer, eps: None, objective: out.objective, accepted: changed });
        if !changed {
            break;
        }
        out.accepted.push(out.state.clone());
        out.iterations += 1;
        if !opts.decreased_enough(prev, out.objective) {
            break;
        }
    }
    out
}

// ── State feedback ──────────────────────────────────────────────────

/// Plant data shared by the state-feedback routines.
struct SsfContext {
    pair: SystemPair,
    original: SystemTriplet,
    b_pinv: Matrix,
}

impl SsfContext {
    fn new(p: &SystemPair, opts: &StabOptions) -> DhResult<Self> {
        let pair = SystemPair { a: rho_shift(&p.a, opts.rho), b: p.b.clone() };
        Ok(Self {
            original: p.to_triplet(),
            b_pinv: pinv(&p.b, None)?,
            pair,
        })
    }

    fn gain(&self, closed: &Matrix) -> Matrix {
        &self.b_pinv * (&self.pair.a - closed)
    }
}

/// Result of Phase 1 for state feedback: the normalized feasibility iterate,
/// its evaluated residual `‖(I − BB†)(AP − J + R)‖` and that residual
/// relative to `max(1, ‖AP‖ + ‖J‖ + ‖R‖)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsfFeasibility {
    pub triple: DhTripleInv,
    pub residual: f64,
    pub relative: f64,
}

/// Solves the state-feedback feasibility program once.
pub fn ssf_feasibility(p: &SystemPair, opts: &StabOptions) -> DhResult<Result<SsfFeasibility, String>> {
    let prog = lmi::build_ssf_feasibility(p, &opts.lmi())?;
    let sol = match solve_optimal(&prog, &opts.feasibility_solver()) {
        Ok(s) => s,
        Err(e) => return Ok(Err(e)),
    };
    let triple = lmi::decode_feasibility(&prog, &sol.primal, p.n()).normalized();
    let u2 = lmi::left_basis(&p.b)?;
    let ap = &p.a * triple.p();
    let residual = opts.norm.eval(&(u2.transpose() * (&ap - triple.j() + triple.r())));
    let scale = opts.norm.eval(&ap) + opts.norm.eval(triple.j()) + opts.norm.eval(triple.r());
    Ok(Ok(SsfFeasibility { triple, residual, relative: residual / scale.max(1.0) }))
}

/// SSDP minimization of `‖B†(A − (J − R)P⁻¹)‖` from a feasible start.
pub fn ssf_optimize_from(p: &SystemPair, start: DhTripleInv, opts: &StabOptions) -> DhResult<LoopOutcome<DhTripleInv>> {
    let ctx = SsfContext::new(p, &StabOptions { rho: 0.0, ..*opts })?;
    let lmi_opts = opts.lmi();
    Ok(trust_region_loop(
        start,
        Phase::Optimization,
        opts,
        &opts.solver,
        |st, eps| lmi::build_ssdp_step(&ctx.pair, st, eps, &lmi_opts),
        |st| opts.norm.eval(&ctx.gain(&st.compose(opts.tol_pd))),
        Stop::SmallDecrease,
    ))
}

/// BCD minimization of `‖B†(A − (J − R)Q)‖` from a start.
pub fn ssf_bcd_optimize_from(p: &SystemPair, start: JrqState, opts: &StabOptions) -> DhResult<LoopOutcome<JrqState>> {
    let ctx = SsfContext::new(p, &StabOptions { rho: 0.0, ..*opts })?;
    let lmi_opts = opts.lmi();
    Ok(bcd_loop(
        start,
        opts,
        |q| lmi::build_ssf_bcd_jr(&ctx.pair, q, &lmi_opts),
        |j, r| lmi::build_ssf_bcd_q(&ctx.pair, j, r, &lmi_opts),
        |st| opts.norm.eval(&ctx.gain(&st.compose())),
    ))
}

enum SsfMethod {
    Ssdp,
    Bcd,
}

/// Minimal-norm state feedback by convex feasibility followed by SSDP.
pub fn ssf_solve(p: &SystemPair, opts: &StabOptions) -> FeedbackResult {
    ssf_run(p, opts, SsfMethod::Ssdp)
}

/// State feedback with the BCD optimization phase.
pub fn ssf_bcd_solve(p: &SystemPair, opts: &StabOptions) -> FeedbackResult {
    ssf_run(p, opts, SsfMethod::Bcd)
}

fn ssf_run(p: &SystemPair, opts: &StabOptions, method: SsfMethod) -> FeedbackResult {
    let (n, m) = (p.n(), p.m());
    let numerics = |e: String| FeedbackResult::bare(FeedbackStatus::FailedNumerics, m, n, opts.norm, e);
    let ctx = match SsfContext::new(p, opts) {
        Ok(c) => c,
        Err(e) => return numerics(e.to_string()),
    };
    if let Some(r) = open_loop_result(&ctx.pair.a, &ctx.original, opts) {
        return r;
    }
    let t0 = Instant::now();
    let feas = match ssf_feasibility(&ctx.pair, opts) {
        Ok(Ok(f)) => f,
        Ok(Err(e)) => return numerics(format!("feasibility: {e}")),
        Err(e) => return numerics(e.to_string()),
    };
    let feasibility_time = t0.elapsed();
    let initial_k = ctx.gain(&feas.triple.compose(opts.tol_pd));
    let initial_objective = opts.norm.eval(&initial_k);
    let mut result = FeedbackResult {
        k: initial_k.clone(),
        norm_kind: opts.norm,
        norm_value: initial_objective,
        abscissa: f64::NAN,
        status: FeedbackStatus::FailedFeasibility,
        init: None,
        feasibility_value: feas.relative,
        initial_k,
        initial_objective,
        phase_log: vec![LogEntry { phase: Phase::Feasibility, outer: 0, eps: None, objective: feas.relative, accepted: true }],
        timings: Timings { feasibility: feasibility_time, optimization: Duration::ZERO },
        iterations: 0,
        diagnostics: Vec::new(),
    };
    if !(feas.relative <= opts.delta) {
        result.abscissa = verify_feedback(&ctx.original, &result.k, opts.stab_tol).map_or(f64::NAN, |v| v.0);
        result.diagnostics.push(format!("relative feasibility residual {:e} exceeds delta {:e}", feas.relative, opts.delta));
        return result;
    }
    let t1 = Instant::now();
    let inner = StabOptions { rho: 0.0, ..*opts };
    let candidates: Vec<Matrix> = match method {
        SsfMethod::Ssdp => match ssf_optimize_from(&ctx.pair, feas.triple, &inner) {
            Ok(out) => {
                result.phase_log.extend(out.log);
                result.iterations = out.iterations;
                result.diagnostics.extend(out.diagnostics);
                out.accepted.iter().map(|s| ctx.gain(&s.compose(opts.tol_pd))).collect()
            }
            Err(e) => return numerics(e.to_string()),
        },
        SsfMethod::Bcd => match ssf_bcd_optimize_from(&ctx.pair, JrqState::from_inv(&feas.triple, opts.tol_pd), &inner) {
            Ok(out) => {
                result.phase_log.extend(out.log);
                result.iterations = out.iterations;
                result.diagnostics.extend(out.diagnostics);
                out.accepted.iter().map(|s| ctx.gain(&s.compose())).collect()
            }
            Err(e) => return numerics(e.to_string()),
        },
    };
    result.timings.optimization = t1.elapsed();
    finish_with_verification(&mut result, &ctx.original, candidates, opts);
    result
}

/// `K = 0` when the (shifted) open loop is already stable; zero is then the
/// minimal-norm feedback.
fn open_loop_result(solved: &Matrix, original: &SystemTriplet, opts: &StabOptions) -> Option<FeedbackResult> {
    let stable = spectral_abscissa(solved).is_ok_and(|a| a < opts.stab_tol);
    if !stable {
        return None;
    }
    let k = Matrix::zeros(original.m(), original.p());
    let abscissa = verify_feedback(original, &k, opts.stab_tol).map_or(f64::NAN, |v| v.0);
    let mut r = FeedbackResult::bare(FeedbackStatus::Stabilized, original.m(), original.p(), opts.norm, "open loop is stable".into());
    r.abscissa = abscissa;
    r.feasibility_value = 0.0;
    r.initial_objective = 0.0;
    Some(r)
}

/// Picks the newest candidate gain that passes the eigenvalue check.
fn finish_with_verification(result: &mut FeedbackResult, plant: &SystemTriplet, candidates: Vec<Matrix>, opts: &StabOptions) {
    let last = candidates.len().saturating_sub(1);
    for (i, k) in candidates.iter().enumerate().rev() {
        match verify_feedback(plant, k, opts.stability_threshold()) {
            Ok((abscissa, true)) => {
                if i != last {
                    result.diagnostics.push(format!(
                        "final gain failed verification; returned accepted iterate {i} of {last}"
                    ));
                }
                result.k = k.clone();
                result.norm_value = opts.norm.eval(k);
                result.abscissa = abscissa;
                result.status = FeedbackStatus::Stabilized;
                return;
            }
            Ok(_) => {}
            Err(e) => result.diagnostics.push(format!("verification: {e}")),
        }
    }
    if let Some(k) = candidates.last() {
        result.k = k.clone();
        result.norm_value = opts.norm.eval(k);
        result.abscissa = verify_feedback(plant, k, opts.stab_tol).map_or(f64::NAN, |v| v.0);
    }
    result.status = FeedbackStatus::FailedNumerics;
    result.diagnostics.push(format!("no iterate passed verification (abscissa {:e})", result.abscissa));
}

// ── Output feedback ─────────────────────────────────────────────────

struct SofContext {
    shifted: SystemTriplet,
    original: SystemTriplet,
    b_pinv: Matrix,
    c_pinv: Matrix,
    u2: Matrix,
    v2: Matrix,
}

impl SofContext {
    fn new(s: &SystemTriplet, rho: f64) -> DhResult<Self> {
        Ok(Self {
            shifted: SystemTriplet { a: rho_shift(&s.a, rho), b: s.b.clone(), c: s.c.clone() },
            original: s.clone(),
            b_pinv: pinv(&s.b, None)?,
            c_pinv: pinv(&s.c, None)?,
            u2: lmi::left_basis(&s.b)?,
            v2: lmi::right_basis(&s.c)?,
        })
    }

    fn residual(&self, closed: &Matrix, norm: NormKind) -> f64 {
        let diff = &self.shifted.a - closed;
        norm.eval(&(self.u2.transpose() * &diff)) + norm.eval(&(&diff * &self.v2))
    }

    /// `residual / max(1, ‖A‖ + ‖(J − R)Q‖)` in the chosen norm.
    fn relative_residual(&self, st: &DhTripleInv, residual: f64, opts: &StabOptions) -> f64 {
        let scale = opts.norm.eval(&self.shifted.a) + opts.norm.eval(&st.compose(opts.tol_pd));
        residual / scale.max(1.0)
    }

    fn gain(&self, closed: &Matrix) -> Matrix {
        &self.b_pinv * (&self.shifted.a - closed) * &self.c_pinv
    }
}

fn solve_feasibility_p(pair: &SystemPair, opts: &StabOptions) -> DhResult<Matrix> {
    match ssf_feasibility(pair, opts)? {
        Ok(f) => Ok(f.triple.p().clone()),
        Err(e) => Err(DhError::InvalidTriple(format!("initialization feasibility solve failed: {e}"))),
    }
}

/// Initial `(J₀, R₀, P₀)` for the output-feedback algorithm. `P₀` follows
/// the strategy; `(J₀, R₀)` minimize the feasibility residual for
/// `Q = P₀⁻¹`. [`InitStrategy::Auto`] is resolved by [`sof_solve`] and
/// rejected here.
pub fn sof_initialize(s: &SystemTriplet, strategy: InitStrategy, rng: &mut ChaCha8Rng, opts: &StabOptions) -> DhResult<DhTripleInv> {
    let n = s.n();
    let p0 = match strategy {
        InitStrategy::Identity => Matrix::identity(n, n),
        InitStrategy::Random => {
            let g = randn(rng, n, n);
            symmetrize(&sqrtm_psd(&(&g * g.transpose())))
        }
        InitStrategy::Abi => solve_feasibility_p(&s.pair(), opts)?,
        InitStrategy::Aic => {
            let dual = SystemPair::new(s.a.transpose(), s.c.transpose())?;
            spd_inverse(&solve_feasibility_p(&dual, opts)?, opts.tol_pd)
        }
        InitStrategy::Auto => return Err(DhError::InvalidTriple("auto is not a concrete initialization".into())),
    };
    let q0 = spd_inverse(&p0, opts.tol_pd);
    let prog = lmi::build_sof_residual_jr(s, &q0, &opts.lmi())?;
    let sol = solve_optimal(&prog, &opts.feasibility_solver()).map_err(DhError::InvalidTriple)?;
    let j = lmi::decode_matrix(&prog, &sol.primal, "J").unwrap_or_else(|| Matrix::zeros(n, n));
    let r = lmi::decode_matrix(&prog, &sol.primal, "R").unwrap_or_else(|| Matrix::zeros(n, n));
    Ok(DhTripleInv::from_solver(&j, &r, &p0).normalized())
}

/// Phase 1 of the output-feedback algorithm: SSDP on the residual sum until
/// it drops below `delta`.
pub fn sof_feasibility_from(s: &SystemTriplet, start: DhTripleInv, opts: &StabOptions) -> DhResult<LoopOutcome<DhTripleInv>> {
    let ctx = SofContext::new(s, 0.0)?;
    let lmi_opts = opts.lmi();
    Ok(trust_region_loop(
        start,
        Phase::Feasibility,
        opts,
        &opts.feasibility_solver(),
        |st, eps| lmi::build_sof_feasibility_step(s, st, eps, &lmi_opts),
        |st| ctx.residual(&st.compose(opts.tol_pd), opts.norm),
        Stop::Reached(&|st, value| ctx.relative_residual(st, value, opts) < opts.delta),
    ))
}

/// Phase 2 of the output-feedback algorithm: BCD on `‖B†(A − (J − R)Q)C†‖`.
pub fn sof_optimize_from(s: &SystemTriplet, start: JrqState, opts: &StabOptions) -> DhResult<LoopOutcome<JrqState>> {
    let ctx = SofContext::new(s, 0.0)?;
    let lmi_opts = opts.lmi();
    Ok(bcd_loop(
        start,
        opts,
        |q| lmi::build_sof_bcd_jr(s, q, &lmi_opts),
        |j, r| lmi::build_sof_bcd_q(s, j, r, &lmi_opts),
        |st| opts.norm.eval(&ctx.gain(&st.compose())),
    ))
}

/// Runs both phases from one initialization.
fn sof_attempt(ctx: &SofContext, strategy: InitStrategy, rng: &mut ChaCha8Rng, opts: &StabOptions) -> FeedbackResult {
    let s = &ctx.shifted;
    let (m, p) = (s.m(), s.p());
    let numerics = |e: String| {
        let mut r = FeedbackResult::bare(FeedbackStatus::FailedNumerics, m, p, opts.norm, e);
        r.init = Some(strategy);
        r
    };
    let inner = StabOptions { rho: 0.0, ..*opts };
    let t0 = Instant::now();
    let start = match sof_initialize(s, strategy, rng, &inner) {
        Ok(t) => t,
        Err(e) => return numerics(format!("initialization: {e}")),
    };
    let feas = match sof_feasibility_from(s, start, &inner) {
        Ok(f) => f,
        Err(e) => return numerics(e.to_string()),
    };
    let feasibility_time = t0.elapsed();
    let relative = ctx.relative_residual(&feas.state, feas.objective, opts);
    let initial_k = ctx.gain(&feas.state.compose(opts.tol_pd));
    let initial_objective = opts.norm.eval(&initial_k);
    let mut result = FeedbackResult {
        k: initial_k.clone(),
        norm_kind: opts.norm,
        norm_value: initial_objective,
        abscissa: f64::NAN,
        status: FeedbackStatus::FailedFeasibility,
        init: Some(strategy),
        feasibility_value: relative,
        initial_k,
        initial_objective,
        phase_log: feas.log,
        timings: Timings { feasibility: feasibility_time, optimization: Duration::ZERO },
        iterations: feas.iterations,
        diagnostics: feas.diagnostics,
    };
    if !(relative < opts.delta) {
        result.abscissa = verify_feedback(&ctx.original, &result.k, opts.stab_tol).map_or(f64::NAN, |v| v.0);
        result.diagnostics.push(format!("relative feasibility residual {relative:e} did not reach delta {:e}", opts.delta));
        return result;
    }
    let t1 = Instant::now();
    let out = match sof_optimize_from(s, JrqState::from_inv(&feas.state, opts.tol_pd), &inner) {
        Ok(o) => o,
        Err(e) => return numerics(e.to_string()),
    };
    result.phase_log.extend(out.log);
    result.iterations += out.iterations;
    result.diagnostics.extend(out.diagnostics);
    let candidates = out.accepted.iter().map(|st| ctx.gain(&st.compose())).collect();
    result.timings.optimization = t1.elapsed();
    finish_with_verification(&mut result, &ctx.original, candidates, opts);
    result
}

fn better(a: &FeedbackResult, b: &FeedbackResult) -> bool {
    match (a.is_stabilized(), b.is_stabilized()) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.norm_value < b.norm_value,
        (false, false) => a.feasibility_value < b.feasibility_value,
    }
}

fn sof_with_strategy(ctx: &SofContext, strategy: InitStrategy, rng: &mut ChaCha8Rng, opts: &StabOptions) -> FeedbackResult {
    if strategy != InitStrategy::Random {
        return sof_attempt(ctx, strategy, rng, opts);
    }
    let mut best: Option<FeedbackResult> = None;
    for _ in 0..opts.random_restarts.max(1) {
        let r = sof_attempt(ctx, strategy, rng, opts);
        if best.as_ref().is_none_or(|b| better(&r, b)) {
            best = Some(r);
        }
    }
    best.expect("at least one attempt")
}

/// Minimal-norm static output feedback. The random strategy keeps the best
/// of `random_restarts` attempts; `auto` escalates through the strategies
/// until Phase 1 succeeds.
pub fn sof_solve(s: &SystemTriplet, opts: &StabOptions) -> FeedbackResult {
    let ctx = match SofContext::new(s, opts.rho) {
        Ok(c) => c,
        Err(e) => return FeedbackResult::bare(FeedbackStatus::FailedNumerics, s.m(), s.p(), opts.norm, e.to_string()),
    };
    if let Some(mut r) = open_loop_result(&ctx.shifted.a, &ctx.original, opts) {
        r.init = Some(opts.init);
        return r;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    if opts.init != InitStrategy::Auto {
        return sof_with_strategy(&ctx, opts.init, &mut rng, opts);
    }
    let order = [InitStrategy::Identity, InitStrategy::Abi, InitStrategy::Aic, InitStrategy::Random];
    let mut best: Option<FeedbackResult> = None;
    for strategy in order {
        let r = sof_with_strategy(&ctx, strategy, &mut rng, opts);
        let feasible = r.status != FeedbackStatus::FailedFeasibility;
        if best.as_ref().is_none_or(|b| better(&r, b)) {
            best = Some(r);
        }
        if feasible {
            break;
        }
    }
    best.expect("at least one strategy")
}

/// Runs every concrete strategy and keeps the best result.
pub fn sof_solve_best(s: &SystemTriplet, opts: &StabOptions) -> FeedbackResult {
    let mut best: Option<FeedbackResult> = None;
    for strategy in InitStrategy::CONCRETE {
        let r = sof_solve(s, &StabOptions { init: strategy, ..*opts });
        if best.as_ref().is_none_or(|b| better(&r, b)) {
            best = Some(r);
        }
    }
    best.expect("at least one strategy")
}

#[cfg(test)]
mod tests;
