//! Small deterministic solvers used by hazard calibration: Brent's method
//! for bracketed scalar roots and a damped Gauss-Newton (Levenberg-Marquardt)
//! least-squares fit for a handful of parameters.

use crate::error::{Error, Result};

/// Root of `f` inside `[a, b]`; `f(a)` and `f(b)` must differ in sign.
pub fn brent<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Calibration {
            reason: "root is not bracketed".into(),
            residual: fa.abs().min(fb.abs()),
        });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::Calibration { reason: format!("Brent did not converge in {max_iter} iterations"), residual: fb.abs() })
}

/// Minimise `½‖r(p)‖²`. Residual evaluations returning an error are treated
/// as rejected steps.
pub fn levenberg_marquardt<F>(mut residuals: F, start: &[f64], max_iter: usize) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = start.len();
    let mut p = start.to_vec();
    let mut r = residuals(&p)?;
    let mut cost = half_norm_sq(&r);
    let mut mu = 1e-3;
    for _ in 0..max_iter {
        // central-difference Jacobian
        let mut jac = vec![vec![0.0; n]; r.len()];
        for j in 0..n {
            let h = 1e-6 * p[j].abs().max(1.0);
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += h;
            lo[j] -= h;
            let column: Vec<f64> = match (residuals(&hi), residuals(&lo)) {
                (Ok(rh), Ok(rl)) => rh.iter().zip(&rl).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                (Ok(rh), Err(_)) => rh.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                (Err(_), Ok(rl)) => r.iter().zip(&rl).map(|(a, b)| (a - b) / h).collect(),
                (Err(e), Err(_)) => return Err(e),
            };
            for (row, v) in jac.iter_mut().zip(column) {
                row[j] = v;
            }
        }
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (i, row) in jac.iter().enumerate() {
            for a in 0..n {
                jtr[a] += row[a] * r[i];
                for b in 0..n {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if grad_norm < 1e-14 {
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut lhs = jtj.clone();
            for (a, row) in lhs.iter_mut().enumerate() {
                row[a] += mu * jtj[a][a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            let Some(step) = solve_dense(lhs, rhs) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
            if let Ok(rt) = residuals(&trial) {
                let ct = half_norm_sq(&rt);
                if ct < cost {
                    let rel = (cost - ct) / cost.max(1e-300);
                    p = trial;
                    r = rt;
                    cost = ct;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-15 {
                        return Ok((p, cost));
                    }
                    break;
                }
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    Ok((p, cost))
}

fn half_norm_sq(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let root = brent(|x| Ok(x * x * x - 2.0 * x - 5.0), 2.0, 3.0, 1e-14, 100).unwrap();
        assert!((root - 2.094_551_481_542_326_5).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        assert!(brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn lm_fits_exponential() {
        let xs = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 * (-0.7 * x).exp()).collect();
        let (p, cost) = levenberg_marquardt(
            |p| Ok(xs.iter().zip(&ys).map(|(x, y)| p[0] * (p[1] * x).exp() - y).collect()),
            &[1.0, 0.0],
            200,
        )
        .unwrap();
        assert!(cost < 1e-20);
        assert!((p[0] - 2.0).abs() < 1e-8 && (p[1] + 0.7).abs() < 1e-8);
    }
}
