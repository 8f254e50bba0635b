//! Composite Simpson rule on uniform grids.
//!
//! All integrals in the engine are taken on fixed node sets so results are
//! reproducible across platforms and thread counts. Callers evaluate the
//! integrand at the nodes (possibly in parallel) and reduce here in index
//! order.

/// Composite Simpson sum over equally spaced samples; `values.len()` must be
/// odd and at least 3.
pub fn simpson(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    debug_assert!(n >= 3 && n % 2 == 1, "simpson needs an odd node count >= 3");
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    step / 3.0 * (values[0] + 4.0 * odd + 2.0 * even + values[n - 1])
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().sum();
    step * (0.5 * (values[0] + values[n - 1]) + inner)
}

/// Simpson estimate plus a relative residual against a coarser rule on the
/// same nodes: Simpson on every other node when that grid is valid,
/// otherwise the trapezoid rule.
pub fn simpson_checked(values: &[f64], step: f64) -> (f64, f64) {
    let fine = simpson(values, step);
    let n = values.len();
    let coarse = if (n - 1) % 4 == 0 {
        let half: Vec<f64> = values.iter().step_by(2).copied().collect();
        simpson(&half, 2.0 * step)
    } else {
        trapezoid(values, step)
    };
    let scale = fine.abs().max(coarse.abs());
    let residual = if scale > 0.0 { (fine - coarse).abs() / scale } else { 0.0 };
    (fine, residual)
}

/// Nodes `a + i·(b − a)/(n − 1)` for `i in 0..n`.
pub fn nodes(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { b } else { a + i as f64 * step })
}

pub fn simpson_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let values: Vec<f64> = nodes(a, b, n).map(f).collect();
    simpson(&values, (b - a) / (n - 1) as f64)
}
