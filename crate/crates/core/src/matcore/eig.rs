use num_complex::Complex64;

use super::{ensure_finite, ensure_square, MatError, MatResult, Matrix};

/// Eigenvalues of a real square matrix, unordered.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(pub Vec<Complex64>);

impl Spectrum {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.0
    }

    /// Maximum real part; `-inf` for the empty spectrum.
    pub fn abscissa(&self) -> f64 {
        self.0.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sorted by real part descending, then imaginary part descending.
    pub fn sorted(&self) -> Vec<Complex64> {
        let mut v = self.0.clone();
        v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        v
    }

    /// Every eigenvalue has its conjugate in the multiset, within `tol`.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        let mut used = vec![false; self.0.len()];
        for (i, z) in self.0.iter().enumerate() {
            if used[i] {
                continue;
            }
            if z.im.abs() <= tol {
                used[i] = true;
                continue;
            }
            let partner = (0..self.0.len())
                .filter(|&j| j != i && !used[j])
                .find(|&j| (self.0[j] - z.conj()).norm() <= tol);
            match partner {
                Some(j) => {
                    used[i] = true;
                    used[j] = true;
                }
                None => return false,
            }
        }
        true
    }
}

const RADIX: f64 = 2.0;
const MAX_ITS_PER_EIGENVALUE: usize = 60;

/// Eigenvalues of `m` via balancing, Householder reduction to Hessenberg
/// form and the implicit double-shift QR iteration.
pub fn eig(m: &Matrix) -> MatResult<Spectrum> {
    ensure_square(m)?;
    ensure_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Spectrum(Vec::new()));
    }
    if n == 1 {
        return Ok(Spectrum(vec![Complex64::new(m[(0, 0)], 0.0)]));
    }
    let mut a = m.clone();
    balance(&mut a);
    let h = nalgebra::linalg::Hessenberg::new(a).h();
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| h[(i, j)]).collect()).collect();
    for (i, row) in rows.iter_mut().enumerate() {
        for v in row.iter_mut().take(i.saturating_sub(1)) {
            *v = 0.0;
        }
    }
    hqr(&mut rows).map(Spectrum)
}

/// Parlett–Reinsch balancing by powers of the radix.
fn balance(a: &mut Matrix) {
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    a.row_mut(i).scale_mut(g);
                    a.column_mut(i).scale_mut(f);
                }
            }
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroyed).
fn hqr(a: &mut [Vec<f64>]) -> MatResult<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![0.0; n];
    let mut wi = vec![0.0; n];
    let mut anorm = 0.0;
    for (i, row) in a.iter().enumerate() {
        for v in row.iter().skip(i.saturating_sub(1)) {
            anorm += v.abs();
        }
    }
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            // Find a negligible subdiagonal element.
            let mut l = nu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nu][nu];
            if l == nu {
                wr[nu] = x + t;
                wi[nu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nu - 1][nu - 1];
            let mut w = a[nu][nu - 1] * a[nu - 1][nu];
            if l == nu - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nu - 1] = x + z;
                    wr[nu] = x + z;
                    if z != 0.0 {
                        wr[nu] = x - w / z;
                    }
                    wi[nu - 1] = 0.0;
                    wi[nu] = 0.0;
                } else {
                    wr[nu - 1] = x + p;
                    wr[nu] = x + p;
                    wi[nu - 1] = -z;
                    wi[nu] = z;
                }
                nn -= 2;
                break;
            }
            if its >= MAX_ITS_PER_EIGENVALUE {
                return Err(MatError::NoConvergence {
                    routine: "eig",
                    iterations: its,
                });
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                let s = a[nu][nu - 1].abs() + a[nu - 1][nu.saturating_sub(2)].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Look for two consecutive small subdiagonal elements.
            let mut m = nu - 2;
            let mut z;
            loop {
                z = a[m][m];
                r = x - z;
                let s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            // Double QR step on rows l..=nu and columns m..=nu.
            let mut k = m;
            while k < nu {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nu - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nu {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nu - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nu < k + 3 { nu } else { k + 3 };
                    for row in a.iter_mut().take(mmin + 1).skip(l) {
                        p = x * row[k] + y * row[k + 1];
                        if k != nu - 1 {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k + 1] -= p * q;
                        row[k] -= p;
                    }
                }
                k += 1;
            }
        }
    }
    Ok(wr.into_iter().zip(wi).map(|(re, im)| Complex64::new(re, im)).collect())
}
