//! Homogeneous self-dual interior-point method with Nesterov–Todd scaling and
//! Mehrotra predictor–corrector steps for
//!
//! ```text
//! minimize cᵀx  subject to  Gx + s = h,  s ∈ K
//! ```
//!
//! where `G` has full column rank and `K` contains no zero cones.

use nalgebra::{DMatrix, DVector};

use super::cones::{ConeSet, NtScaling};
use super::{IterLog, Residuals, SolveStatus, SolverOptions};

const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-12;
const REFINE_STEPS: usize = 3;

pub(crate) struct Reduced {
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub c: DVector<f64>,
    pub cones: ConeSet,
}

/// Iterate in homogeneous coordinates.
#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub tau: f64,
    pub kappa: f64,
}

pub(crate) enum Outcome {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
    Failure(String),
}

impl Outcome {
    pub fn status(&self) -> SolveStatus {
        match self {
            Outcome::Optimal => SolveStatus::Optimal,
            Outcome::PrimalInfeasible => SolveStatus::InfeasibleCertificate,
            Outcome::DualInfeasible => SolveStatus::UnboundedCertificate,
            Outcome::IterationLimit => SolveStatus::IterationLimit,
            Outcome::Failure(_) => SolveStatus::NumericalFailure,
        }
    }
}

pub(crate) struct IpmResult {
    pub iterate: Iterate,
    pub outcome: Outcome,
    pub iterations: usize,
    pub log: Vec<IterLog>,
}

/// Residuals of the scaled point `(x/τ, s/τ, z/τ)` measured in the caller's
/// original coordinates.
pub(crate) trait Measure {
    fn measure(&self, x: &DVector<f64>, s: &DVector<f64>, z: &DVector<f64>) -> (Residuals, f64, f64);
}

struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    m: DMatrix<f64>,
}

impl Factor {
    fn new(m: DMatrix<f64>) -> Result<Self, String> {
        let n = m.nrows();
        let scale = (0..n).map(|i| m[(i, i)]).fold(0.0f64, f64::max).max(1.0);
        let mut delta = 0.0;
        for _ in 0..12 {
            let mut reg = m.clone();
            for i in 0..n {
                reg[(i, i)] += delta;
            }
            if let Some(chol) = reg.cholesky() {
                return Ok(Self { chol, m });
            }
            delta = if delta == 0.0 { 1e-14 * scale } else { delta * 100.0 };
        }
        Err(format!(
            "normal-equation factorization failed (order {n}, max diagonal {scale:.3e}, regularization up to {delta:.1e})"
        ))
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(b);
        for _ in 0..REFINE_STEPS {
            let r = b - &self.m * &x;
            if r.norm() <= 1e-15 * (1.0 + b.norm()) {
                break;
            }
            x += self.chol.solve(&r);
        }
        x
    }
}

struct Direction {
    dx: DVector<f64>,
    ds_t: DVector<f64>,
    dz_t: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

pub(crate) fn run(prob: &Reduced, opts: &SolverOptions, measure: &dyn Measure) -> IpmResult {
    let cones = &prob.cones;
    let e = cones.identity();
    let nu = cones.degree as f64;
    let mut it = Iterate {
        x: DVector::zeros(prob.g.ncols()),
        s: e.clone(),
        z: e.clone(),
        tau: 1.0,
        kappa: 1.0,
    };
    let mut log = Vec::new();
    let hnorm = prob.h.norm();
    let cnorm = prob.c.norm();

    for iter in 0..=opts.max_iters {
        let rx = prob.g.tr_mul(&it.z) + &prob.c * it.tau;
        let rz = &it.s + &prob.g * &it.x - &prob.h * it.tau;
        let cx = prob.c.dot(&it.x);
        let hz = prob.h.dot(&it.z);
        let rtau = it.kappa + cx + hz;
        let mu = (it.s.dot(&it.z) + it.tau * it.kappa) / (nu + 1.0);

        let xs = &it.x / it.tau;
        let ss = &it.s / it.tau;
        let zs = &it.z / it.tau;
        let (res, pcost, dcost) = measure.measure(&xs, &ss, &zs);

        let mut entry = IterLog {
            iter,
            pcost,
            dcost,
            primal_feas: res.primal_feas,
            dual_feas: res.dual_feas,
            duality_gap: res.duality_gap,
            mu,
            tau: it.tau,
            kappa: it.kappa,
            step: 0.0,
        };

        let done = |outcome: Outcome, it: Iterate, mut log: Vec<IterLog>, entry: IterLog| {
            log.push(entry);
            IpmResult { iterate: it, outcome, iterations: iter, log }
        };

        if res.primal_feas <= opts.tol && res.dual_feas <= opts.tol && res.duality_gap <= opts.tol {
            return done(Outcome::Optimal, it, log, entry);
        }
        if hz < 0.0 {
            let gz = prob.g.tr_mul(&it.z).norm();
            if gz / (-hz) <= opts.tol * (1.0 + cnorm).max(1.0) && it.tau < it.kappa {
                return done(Outcome::PrimalInfeasible, it, log, entry);
            }
        }
        if cx < 0.0 {
            let gxs = (&prob.g * &it.x + &it.s).norm();
            if gxs / (-cx) <= opts.tol * (1.0 + hnorm).max(1.0) && it.tau < it.kappa {
                return done(Outcome::DualInfeasible, it, log, entry);
            }
        }
        if iter == opts.max_iters {
            return done(Outcome::IterationLimit, it, log, entry);
        }

        let nt = match NtScaling::new(cones, &it.s, &it.z) {
            Ok(nt) => nt,
            Err(_) => {
                let msg = format!("iterate left the cone interior at iteration {iter}");
                return done(Outcome::Failure(msg), it, log, entry);
            }
        };
        let lambda = nt.lambda.to_vector(cones);
        let gs = nt.w_inv_t_mat(cones, &prob.g);
        let hs = nt.w_inv_t(cones, &prob.h);
        let factor = match Factor::new(gs.tr_mul(&gs)) {
            Ok(f) => f,
            Err(msg) => return done(Outcome::Failure(msg), it, log, entry),
        };
        let u2 = factor.solve(&(&prob.c - gs.tr_mul(&hs)));
        let gs_u2 = &gs * &u2;
        let denom_base = prob.c.dot(&u2) + hs.dot(&gs_u2) + hs.norm_squared();

        let solve_dir = |eta: f64, bs: &DVector<f64>, bkappa: f64| -> Direction {
            let bx = &rx * (-(1.0 - eta));
            let bz = &rz * (1.0 - eta);
            let btau = rtau * (1.0 - eta);
            let r = nt.w_inv_t(cones, &bz) + cones.jordan_div(&nt.lambda, bs);
            let u1 = factor.solve(&(bx - gs.tr_mul(&r)));
            let gs_u1 = &gs * &u1;
            let num = btau + prob.c.dot(&u1) + hs.dot(&(&r + &gs_u1)) + bkappa / it.tau;
            let dtau = num / (denom_base + it.kappa / it.tau);
            let dx = u1 - &u2 * dtau;
            let dz_t = r + gs_u1 - &gs_u2 * dtau - &hs * dtau;
            let ds_t = cones.jordan_div(&nt.lambda, bs) - &dz_t;
            let dkappa = (bkappa - it.kappa * dtau) / it.tau;
            Direction { dx, ds_t, dz_t, dtau, dkappa }
        };

        let max_alpha = |d: &Direction| -> f64 {
            let mut a = cones.max_step(&nt.lambda, &d.ds_t).min(cones.max_step(&nt.lambda, &d.dz_t));
            if d.dtau < 0.0 {
                a = a.min(-it.tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-it.kappa / d.dkappa);
            }
            a
        };

        // Predictor.
        let lam_sq = cones.jordan(&lambda, &lambda);
        let aff = solve_dir(0.0, &(-&lam_sq), -it.tau * it.kappa);
        let alpha_aff = max_alpha(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector.
        let corr = cones.jordan(&aff.ds_t, &aff.dz_t);
        let bs = -&lam_sq - corr + &e * (sigma * mu);
        let bkappa = -it.tau * it.kappa - aff.dtau * aff.dkappa + sigma * mu;
        let dir = solve_dir(sigma, &bs, bkappa);
        let alpha = (STEP_FRACTION * max_alpha(&dir)).min(1.0);
        entry.step = alpha;
        log.push(entry);

        if !(alpha > MIN_STEP) || !dir.dx.iter().all(|v| v.is_finite()) || !dir.dtau.is_finite() {
            let msg = format!("step length collapsed to {alpha:.3e} at iteration {iter}");
            return IpmResult {
                iterate: it,
                outcome: Outcome::Failure(msg),
                iterations: iter,
                log,
            };
        }

        it.x += &dir.dx * alpha;
        it.s += nt.wt(cones, &dir.ds_t) * alpha;
        it.z += nt.w_inv(cones, &dir.dz_t) * alpha;
        it.tau += dir.dtau * alpha;
        it.kappa += dir.dkappa * alpha;
    }
    unreachable!("loop returns on the final iteration")
}
