//! Gauss–Legendre rules on `[0, 1]`.

use num_complex::Complex64;

/// Nodes and weights of the `n`-point rule mapped to `[0, 1]`, computed
/// by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pn1) = if n == 1 { (x, 1.0) } else { (p1, p0) };
    (pn, n as f64 * (x * pn - pn1) / (x * x - 1.0))
}

/// `∫₀¹ f(t) dt` with the `n`-point rule.
pub fn integrate_unit(n: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    gauss_legendre_unit(n)
        .into_iter()
        .map(|(t, w)| f(t) * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1usize, 5, 64, 128] {
            let rule = gauss_legendre_unit(n);
            let w: f64 = rule.iter().map(|r| r.1).sum();
            assert!((w - 1.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let v: f64 = rule.iter().map(|&(t, w)| w * t.powi(deg as i32)).sum();
            assert!((v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn exponential_integral() {
        let v = integrate_unit(64, |t| Complex64::new(t, 0.0).exp());
        assert!((v.re - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }
}
