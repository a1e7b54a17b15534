//! Small numerical kernels shared by the solvers: bracketing root search,
//! golden-section minimisation, banded linear solves and quadrature rules.

/// Bisection on a sign-changing bracket. Returns the midpoint of the final
/// bracket once its width drops below `tol` (or `max_iter` is reached).
///
/// `f_lo` is `f(lo)`, passed in so callers that scanned already do not pay
/// for a second evaluation.
pub fn bisect<F, E>(mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64, max_iter: usize, mut f: F) -> Result<f64, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section search for a minimum of a unimodal function on `[a, b]`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`
/// solved by Gaussian elimination with partial pivoting (LAPACK `gtsv` scheme).
/// `lower[0]` and `upper[n-1]` are ignored. Returns `None` for a singular matrix.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    // dl[i] = A[i+1][i]; after elimination it holds the second superdiagonal
    let mut dl: Vec<f64> = (0..n).map(|i| if i + 1 < n { lower[i + 1] } else { 0.0 }).collect();
    let mut b = rhs.to_vec();
    du[n - 1] = 0.0;
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let bi = b[i];
            b[i] = b[i + 1];
            b[i + 1] = bi - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    if n >= 2 {
        x[n - 2] = (b[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (b[i] - du[i] * x[i + 1] - dl[i] * x[i + 2]) / d[i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Composite Simpson weights for `n` equispaced nodes with spacing `h`.
/// `n` must be odd; an even count falls back to Simpson plus one trapezoid
/// panel at the end.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    let simpson_n = if n % 2 == 1 { n } else { n - 1 };
    if simpson_n >= 3 {
        for (i, wi) in w.iter_mut().enumerate().take(simpson_n) {
            *wi = if i == 0 || i == simpson_n - 1 {
                h / 3.0
            } else if i % 2 == 1 {
                4.0 * h / 3.0
            } else {
                2.0 * h / 3.0
            };
        }
    }
    if simpson_n != n {
        w[n - 2] += 0.5 * h;
        w[n - 1] += 0.5 * h;
    }
    w
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// `count` logarithmically spaced points on `[lo, hi]` (both included).
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

/// Ordinary least squares fit `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Sub-grid location of a discrete maximum at index `i` by fitting a
/// parabola through the three neighbouring samples.
pub fn parabolic_peak(x: &[f64], u: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= u.len() {
        return x[i];
    }
    let (a, b, c) = (u[i - 1], u[i], u[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return x[i];
    }
    let h = x[i + 1] - x[i];
    x[i] + 0.5 * h * (a - c) / denom
}

/// Index of the largest entry.
pub fn argmax(u: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in u.iter().enumerate() {
        if *v > u[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry.
pub fn argmin(u: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in u.iter().enumerate() {
        if *v < u[best] {
            best = i;
        }
    }
    best
}

/// Empirical convergence order between two refinement levels.
pub fn observed_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt2() {
        let r: Result<f64, ()> = bisect(1.0, 2.0, -1.0, 1e-14, 200, |x| Ok(x * x - 2.0));
        assert!((r.unwrap() - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn golden_section_parabola() {
        let (x, fx) = golden_section(-3.0, 5.0, 1e-12, |x| (x - 1.25) * (x - 1.25) + 0.5);
        assert!((x - 1.25).abs() < 1e-6);
        assert!((fx - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        // Indefinite matrix with a zero leading pivot forces a row swap.
        let lower = [0.0, 3.0, -1.0, 2.0, 1.0];
        let diag = [0.0, 1.0, 4.0, -2.0, 5.0];
        let upper = [2.0, -1.0, 1.0, 3.0, 0.0];
        let x_true = [1.0, -2.0, 0.5, 3.0, -1.5];
        let n = 5;
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += lower[i] * x_true[i - 1];
            }
            if i + 1 < n {
                rhs[i] += upper[i] * x_true[i + 1];
            }
        }
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in x.iter().zip(x_true) {
            assert!((a - b).abs() < 1e-12, "{x:?}");
        }
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let n = 11;
        let h = 0.3;
        let w = simpson_weights(n, h);
        let s: f64 = (0..n).map(|i| w[i] * (i as f64 * h).powi(3)).sum();
        let exact = (3.0f64).powi(4) / 4.0;
        assert!((s - exact).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_degree() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn parabola_refines_peak() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = x.iter().map(|x| 1.0 - (x - 0.43) * (x - 0.43)).collect();
        let i = argmax(&u);
        assert!((parabolic_peak(&x, &u, i) - 0.43).abs() < 1e-12);
    }
}
