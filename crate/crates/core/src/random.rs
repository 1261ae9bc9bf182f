//! Seeded random instance generators shared by tests, benches and the CLI.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dhcore::DhTriple;
use crate::matcore::{eig, sym_min_eig, Matrix};

pub fn random_matrix(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn randn(rng: &mut impl Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn random_skew(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = randn(rng, n, n);
    (&g - g.transpose()) * 0.5
}

/// `G Gᵀ` with `G` n×k, so rank ≤ k.
pub fn random_psd(rng: &mut impl Rng, n: usize, k: usize) -> Matrix {
    let g = randn(rng, n, k);
    &g * g.transpose()
}

pub fn random_pd(rng: &mut impl Rng, n: usize) -> Matrix {
    random_psd(rng, n, n) + Matrix::identity(n, n) * 0.1
}

/// Valid triple with `R` of random rank (possibly zero).
pub fn random_dh_triple(rng: &mut impl Rng, n: usize) -> DhTriple {
    let k = rng.random_range(0..=n);
    DhTriple::new(random_skew(rng, n), random_psd(rng, n, k), random_pd(rng, n)).expect("valid by construction")
}

/// Strictly Hurwitz matrix: a random matrix shifted left of its abscissa.
pub fn random_stable(rng: &mut impl Rng, n: usize) -> Matrix {
    let g = randn(rng, n, n);
    let abscissa = eig(&g).expect("finite input").abscissa();
    let margin = rng.random_range(0.05..1.0);
    g - Matrix::identity(n, n) * (abscissa + margin)
}

/// Random pair whose controllability matrix has full rank.
pub fn random_controllable_pair(rng: &mut impl Rng, n: usize, m: usize) -> (Matrix, Matrix) {
    loop {
        let a = randn(rng, n, n);
        let b = randn(rng, n, m);
        if controllability_rank(&a, &b) == n {
            return (a, b);
        }
    }
}

pub fn controllability_rank(a: &Matrix, b: &Matrix) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut ctrb = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        ctrb.columns_mut(i * m, m).copy_from(&block);
        block = a * block;
    }
    let dec = crate::matcore::svd(&ctrb).expect("finite");
    let tol = 1e-9 * dec.s.first().copied().unwrap_or(0.0);
    dec.rank(tol)
}

/// Symmetric test matrix that is clearly PSD (often rank-deficient) or
/// clearly indefinite.
pub fn random_sym_test_matrix(rng: &mut impl Rng, n: usize) -> Matrix {
    match rng.random_range(0..3) {
        0 => {
            let k = rng.random_range(0..=n);
            random_psd(rng, n, k)
        }
        1 => {
            let k = rng.random_range(1..=n);
            let m = random_psd(rng, n, k);
            let v = randn(rng, n, 1);
            let shift = rng.random_range(0.05..1.0) * (1.0 + m.norm());
            m - &v * v.transpose() * (shift / v.norm_squared())
        }
        _ => {
            let g = randn(rng, n, n);
            let s = (&g + g.transpose()) * 0.5;
            if sym_min_eig(&s).abs() < 1e-6 {
                s + Matrix::identity(n, n)
            } else {
                s
            }
        }
    }
}
