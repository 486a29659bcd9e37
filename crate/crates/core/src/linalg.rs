//! Small dense eigenvalue machinery for Jacobians.
//!
//! Eigenvalues come from balancing, Householder reduction to upper
//! Hessenberg form and the Francis double-shift QR iteration. The
//! characteristic polynomial (Faddeev-LeVerrier) and a complex LU
//! determinant are kept alongside as independent checks.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues sorted by descending real part, ties by descending
/// imaginary part.
pub fn eigenvalues<const N: usize>(m: &[[f64; N]; N]) -> Result<Vec<Complex64>> {
    let rows: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
    eigenvalues_dyn(&rows)
}

pub fn eigenvalues_dyn(m: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = m.len();
    if m.iter().any(|r| r.len() != n) {
        return Err(Error::Domain("matrix must be square".into()));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy keeps the QR sweep close to its classical form.
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = m[i][j];
        }
    }
    balance(&mut a, n);
    hessenberg(&mut a, n);
    let mut eig = hqr(&mut a, n)?;
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(eig)
}

fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    const SQRDX: f64 = RADIX * RADIX;
    loop {
        let mut done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let s = c + r;
                let mut g = r / RADIX;
                let mut f = 1.0;
                while c < g {
                    f *= RADIX;
                    c *= SQRDX;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= SQRDX;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for j in 1..=n {
                        a[j][i] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    if n < 3 {
        return;
    }
    let mut v = vec![0.0; n + 1];
    for k in 1..=n - 2 {
        let norm: f64 = (k + 1..=n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[k + 1][k] > 0.0 { -norm } else { norm };
        for i in k + 1..=n {
            v[i] = a[i][k];
        }
        v[k + 1] -= alpha;
        let vtv: f64 = (k + 1..=n).map(|i| v[i] * v[i]).sum();
        if vtv == 0.0 {
            continue;
        }
        // A <- (I - 2 v v^T / v^T v) A (I - 2 v v^T / v^T v)
        for j in 1..=n {
            let dot: f64 = (k + 1..=n).map(|i| v[i] * a[i][j]).sum();
            let f = 2.0 * dot / vtv;
            for i in k + 1..=n {
                a[i][j] -= f * v[i];
            }
        }
        for i in 1..=n {
            let dot: f64 = (k + 1..=n).map(|j| a[i][j] * v[j]).sum();
            let f = 2.0 * dot / vtv;
            for j in k + 1..=n {
                a[i][j] -= f * v[j];
            }
        }
        a[k + 1][k] = alpha;
        for i in k + 2..=n {
            a[i][k] = 0.0;
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

/// Francis double-shift QR on an upper Hessenberg matrix (1-based).
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<Complex64>> {
    const MAX_ITS: usize = 60;
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
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
            let mut x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nn - 1][nn - 1];
            let mut w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                let mut z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if its == MAX_ITS {
                return Err(Error::EigenNonConvergence);
            }
            if its > 0 && its % 10 == 0 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                let z = a[m][m];
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
            for i in m + 2..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k + 1 <= nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = if k != nn - 1 { a[k + 2][k - 1] } else { 0.0 };
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
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        let mut pp = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            pp += r * a[k + 2][j];
                            a[k + 2][j] -= pp * z;
                        }
                        a[k + 1][j] -= pp * y;
                        a[k][j] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        let mut pp = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            pp += z * a[i][k + 2];
                            a[i][k + 2] -= pp * r;
                        }
                        a[i][k + 1] -= pp * q;
                        a[i][k] -= pp;
                    }
                }
                k += 1;
            }
        }
    }
    Ok((1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect())
}

/// Coefficients of `det(lambda I - m)` by the Faddeev-LeVerrier
/// recursion: `n + 1` values, lowest degree first, the last always one.
pub fn characteristic_polynomial(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut mk = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                next[i][j] = (0..n).map(|l| m[i][l] * mk[l][j]).sum();
            }
            next[i][i] += coeffs[n - k + 1];
        }
        mk = next;
        let trace: f64 = (0..n).map(|i| (0..n).map(|l| m[i][l] * mk[l][i]).sum::<f64>()).sum();
        coeffs[n - k] = -trace / k as f64;
    }
    coeffs
}

/// Evaluates a real polynomial (lowest degree first) at a complex point.
pub fn eval_polynomial(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

/// `det(m - lambda I)` by complex LU with partial pivoting.
pub fn det_shifted(m: &[Vec<f64>], lambda: Complex64) -> Complex64 {
    let n = m.len();
    let mut a: Vec<Vec<Complex64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let v = Complex64::new(m[i][j], 0.0);
                    if i == j {
                        v - lambda
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm())).unwrap();
        if a[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for j in col..n {
                let delta = factor * a[col][j];
                a[row][j] -= delta;
            }
        }
    }
    det
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &[Vec<f64>]) -> f64 {
    m.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}
