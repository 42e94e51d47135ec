//! Frequency bound for roots `x + iω`, `x ≥ 0`, of a normalized
//! quasipolynomial `P̃₀(z) + P̃_τ(z)e^{−z}`.
//!
//! Such a root satisfies `|P̃_τ|² = |P̃₀|² e^{2x} ≥ |P̃₀|² T_ord(x)` with
//! `T_ord` the Taylor polynomial of `e^{2x}`, so
//! `H(x, ω²) = |P̃_τ(x+iω)|² − |P̃₀(x+iω)|² T_ord(x) ≥ 0`.
//! Since `deg P̃₀ > deg P̃_τ`, `H(x, ·)` tends to `−∞` and `ω²` is at most
//! its largest real root.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::quasipoly::{Quasipolynomial, RealPolynomial};

pub const SUP_GRID: usize = 512;
pub const SUP_X_RESOLUTION: f64 = 1e-4;
pub const FALLBACK_X_MAX: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreqError {
    #[error("expected a normalized quasipolynomial (delay 1), got delay {0}")]
    NotNormalized(f64),
    #[error("coefficient {0} is not finite")]
    NonFinite(f64),
}

/// Polynomial in `(x, Ω)` with exact rational coefficients, indexed
/// `[x power][Ω power]`, trailing zeros trimmed in both directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BivariatePoly {
    coeffs: Vec<Vec<BigRational>>,
}

fn trim_row(row: &mut Vec<BigRational>) {
    while row.last().is_some_and(|c| c.is_zero()) {
        row.pop();
    }
}

impl BivariatePoly {
    pub fn new(mut coeffs: Vec<Vec<BigRational>>) -> Self {
        for row in coeffs.iter_mut() {
            trim_row(row);
        }
        while coeffs.last().is_some_and(|r| r.is_empty()) {
            coeffs.pop();
        }
        BivariatePoly { coeffs }
    }

    pub fn zero() -> Self {
        BivariatePoly { coeffs: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Coefficient of `x^i Ω^j`.
    pub fn coeff(&self, i: usize, j: usize) -> BigRational {
        self.coeffs
            .get(i)
            .and_then(|r| r.get(j))
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn rows(&self) -> &[Vec<BigRational>] {
        &self.coeffs
    }

    pub fn x_degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn omega_degree(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .map(|r| r.len())
            .max()
            .and_then(|l| l.checked_sub(1))
    }

    pub fn eval_exact(&self, x: &BigRational, omega: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for row in self.coeffs.iter().rev() {
            let mut inner = BigRational::zero();
            for c in row.iter().rev() {
                inner = inner * omega + c;
            }
            acc = acc * x + inner;
        }
        acc
    }

    pub fn eval(&self, x: f64, omega: f64) -> f64 {
        self.omega_poly_at(x).eval(omega)
    }

    /// `H(x, ·)` as a polynomial in `Ω`.
    pub fn omega_poly_at(&self, x: f64) -> RealPolynomial {
        let width = self.omega_degree().map_or(0, |d| d + 1);
        let mut out = vec![0.0; width];
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self
                .coeffs
                .iter()
                .rev()
                .fold(0.0, |acc, row| acc * x + row.get(j).map_or(0.0, to_f64));
        }
        RealPolynomial::new(out)
    }

    /// Floating-point copy of the coefficient grid.
    pub fn to_f64_grid(&self) -> Vec<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|r| r.iter().map(to_f64).collect())
            .collect()
    }

    fn mul(&self, other: &BivariatePoly) -> BivariatePoly {
        if self.is_zero() || other.is_zero() {
            return BivariatePoly::zero();
        }
        let nx = self.coeffs.len() + other.coeffs.len() - 1;
        let ny = self.omega_degree().unwrap() + other.omega_degree().unwrap() + 1;
        let mut out = vec![vec![BigRational::zero(); ny]; nx];
        for (i, ra) in self.coeffs.iter().enumerate() {
            for (j, a) in ra.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (k, rb) in other.coeffs.iter().enumerate() {
                    for (l, b) in rb.iter().enumerate() {
                        out[i + k][j + l] += a * b;
                    }
                }
            }
        }
        BivariatePoly::new(out)
    }

    fn add(&self, other: &BivariatePoly, sign: i32) -> BivariatePoly {
        let nx = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(nx);
        for i in 0..nx {
            let ra = self.coeffs.get(i).map_or(&[][..], |r| &r[..]);
            let rb = other.coeffs.get(i).map_or(&[][..], |r| &r[..]);
            let w = ra.len().max(rb.len());
            let row = (0..w)
                .map(|j| {
                    let a = ra.get(j).cloned().unwrap_or_else(BigRational::zero);
                    let b = rb.get(j).cloned().unwrap_or_else(BigRational::zero);
                    if sign >= 0 {
                        a + b
                    } else {
                        a - b
                    }
                })
                .collect();
            out.push(row);
        }
        BivariatePoly::new(out)
    }
}

impl Serialize for BivariatePoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_f64_grid().serialize(s)
    }
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite double.
pub fn rational_from_f64(v: f64) -> Result<BigRational, FreqError> {
    BigRational::from_float(v).ok_or(FreqError::NonFinite(v))
}

/// `|P(x + iω)|²` as a polynomial in `(x, ω)`: `U² + V²` with
/// `U = Re P(x+iω)`, `V = Im P(x+iω)`.
fn modulus_squared(p: &[BigRational]) -> BivariatePoly {
    let deg = p.len();
    if deg == 0 {
        return BivariatePoly::zero();
    }
    let mut u = vec![vec![BigRational::zero(); deg]; deg];
    let mut v = vec![vec![BigRational::zero(); deg]; deg];
    for (k, c) in p.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        // (x + iω)^k = Σ_j C(k, j) x^{k−j} i^j ω^j
        let mut binom = BigInt::one();
        for j in 0..=k {
            if j > 0 {
                binom = binom * BigInt::from(k - j + 1) / BigInt::from(j);
            }
            let term = c * BigRational::from_integer(binom.clone());
            match j % 4 {
                0 => u[k - j][j] += term,
                1 => v[k - j][j] += term,
                2 => u[k - j][j] -= term,
                _ => v[k - j][j] -= term,
            }
        }
    }
    let u = BivariatePoly::new(u);
    let v = BivariatePoly::new(v);
    u.mul(&u).add(&v.mul(&v), 1)
}

/// `T_ord(x) = Σ_{k ≤ ord} (2x)^k / k!`
pub fn taylor_exp2(ord: usize) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(ord + 1);
    let mut fact = BigInt::one();
    let mut pow = BigInt::one();
    for k in 0..=ord {
        if k > 0 {
            fact *= BigInt::from(k);
            pow *= BigInt::from(2);
        }
        out.push(BigRational::new(pow.clone(), fact.clone()));
    }
    out
}

/// `H(x, Ω) = |P_τ(x+iω)|² − |P₀(x+iω)|² T_ord(x)` with `ω² ↦ Ω`.
pub fn build_h_exact(p0: &[BigRational], ptau: &[BigRational], ord: usize) -> BivariatePoly {
    let t = BivariatePoly::new(taylor_exp2(ord).into_iter().map(|c| vec![c]).collect());
    let f = modulus_squared(ptau).add(&modulus_squared(p0).mul(&t), -1);
    // Only even powers of ω can survive for real coefficients.
    let mut out = Vec::with_capacity(f.coeffs.len());
    for row in &f.coeffs {
        let mut r = Vec::with_capacity(row.len() / 2 + 1);
        for (j, c) in row.iter().enumerate() {
            if j % 2 == 1 {
                assert!(c.is_zero(), "odd power of omega survived in H");
            } else {
                r.push(c.clone());
            }
        }
        out.push(r);
    }
    BivariatePoly::new(out)
}

pub fn build_h(q_norm: &Quasipolynomial, ord: usize) -> Result<BivariatePoly, FreqError> {
    if q_norm.delay() != 1.0 {
        return Err(FreqError::NotNormalized(q_norm.delay()));
    }
    let conv = |p: &RealPolynomial| -> Result<Vec<BigRational>, FreqError> {
        p.coeffs().iter().map(|&c| rational_from_f64(c)).collect()
    };
    Ok(build_h_exact(
        &conv(q_norm.p0())?,
        &conv(q_norm.ptau())?,
        ord,
    ))
}

/// Largest root `Ω ≥ 0` of `H(x, ·)`, if any.
pub fn max_omega_root(h: &BivariatePoly, x: f64) -> Option<f64> {
    let p = h.omega_poly_at(x);
    let bound = p.cauchy_bound()?;
    p.real_roots_in(0.0, bound).into_iter().last()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupSample {
    pub x: f64,
    pub omega_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupResult {
    pub sup: f64,
    pub x_at: f64,
    pub curve: Vec<SupSample>,
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `sup_{0 ≤ x ≤ x_max} max_k Ω_k(x)` over the nonnegative real roots of
/// `H(x, ·)`: a 512-point grid, then golden-section refinement to `1e−4`
/// around every sampled local maximum. `None` when no sample has a root.
pub fn sup_frequency(h: &BivariatePoly, x_max: f64) -> Option<SupResult> {
    let n = SUP_GRID;
    let xs: Vec<f64> = (0..n).map(|i| x_max * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<Option<f64>> = xs.par_iter().map(|&x| max_omega_root(h, x)).collect();
    let val = |i: usize| vals[i].unwrap_or(f64::NEG_INFINITY);
    let mut best: Option<(f64, f64)> = None;
    let mut consider = |x: f64, v: f64| {
        if v.is_finite() && best.is_none_or(|(_, bv)| v > bv) {
            best = Some((x, v));
        }
    };
    for i in 0..n {
        if vals[i].is_none() {
            continue;
        }
        let left = if i > 0 { val(i - 1) } else { f64::NEG_INFINITY };
        let right = if i + 1 < n {
            val(i + 1)
        } else {
            f64::NEG_INFINITY
        };
        consider(xs[i], val(i));
        if val(i) >= left && val(i) >= right && i > 0 && i + 1 < n {
            let f = |x: f64| max_omega_root(h, x).unwrap_or(f64::NEG_INFINITY);
            let (xr, vr) = golden_max(f, xs[i - 1], xs[i + 1], SUP_X_RESOLUTION);
            consider(xr, vr);
        }
    }
    let (x_at, sup) = best?;
    Some(SupResult {
        sup,
        x_at,
        curve: xs
            .into_iter()
            .zip(vals)
            .map(|(x, omega_max)| SupSample { x, omega_max })
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FreqBoundReport {
    pub order_used: usize,
    /// `√sup`, or `None` when the flag is false or no root can exist.
    pub omega_bound: Option<f64>,
    pub dominance_flag: bool,
    pub x_max: f64,
    /// Supremum of `Ω` found at each order tried.
    pub sup_by_order: Vec<Option<f64>>,
    pub x_at_sup: Option<f64>,
    pub sup_curve: Vec<SupSample>,
}

/// Upper end of the `x` range: twice the envelope bound at `x = 0`, which
/// already bounds `|z|` for every root with `Re z ≥ 0`.
pub fn default_x_max(q_norm: &Quasipolynomial) -> f64 {
    let r = 2.0 * q_norm.companion().envelope_bound(0.0);
    if r.is_finite() && r > 0.0 {
        r
    } else {
        FALLBACK_X_MAX
    }
}

/// Tries `ord = 0, 1, …, max_ord` and stops at the first order whose
/// supremum is at most `π²`.
pub fn frequency_bound(q_norm: &Quasipolynomial, max_ord: usize) -> FreqBoundReport {
    let x_max = default_x_max(q_norm);
    if q_norm.ptau().is_zero() {
        return FreqBoundReport {
            order_used: 0,
            omega_bound: None,
            dominance_flag: true,
            x_max,
            sup_by_order: vec![None],
            x_at_sup: None,
            sup_curve: Vec::new(),
        };
    }
    let pi2 = std::f64::consts::PI.powi(2);
    let mut sup_by_order = Vec::new();
    let mut last_curve = Vec::new();
    let mut last_x = None;
    for ord in 0..=max_ord {
        let h = build_h(q_norm, ord).expect("normalize() always yields delay 1");
        match sup_frequency(&h, x_max) {
            None => {
                sup_by_order.push(None);
                return FreqBoundReport {
                    order_used: ord,
                    omega_bound: None,
                    dominance_flag: true,
                    x_max,
                    sup_by_order,
                    x_at_sup: None,
                    sup_curve: Vec::new(),
                };
            }
            Some(s) => {
                sup_by_order.push(Some(s.sup));
                if s.sup <= pi2 {
                    return FreqBoundReport {
                        order_used: ord,
                        omega_bound: Some(s.sup.sqrt()),
                        dominance_flag: true,
                        x_max,
                        sup_by_order,
                        x_at_sup: Some(s.x_at),
                        sup_curve: s.curve,
                    };
                }
                last_curve = s.curve;
                last_x = Some(s.x_at);
            }
        }
    }
    FreqBoundReport {
        order_used: max_ord,
        omega_bound: None,
        dominance_flag: false,
        x_max,
        sup_by_order,
        x_at_sup: last_x,
        sup_curve: last_curve,
    }
}

/// Sign-aware comparison used by the soundness checks: `H(x, Ω) ≥ −tol·scale`
/// where `scale` is the sum of term magnitudes.
pub fn h_nonnegative(h: &BivariatePoly, x: f64, omega: f64, tol: f64) -> bool {
    let mut scale = 0.0;
    for (i, row) in h.rows().iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            scale += to_f64(&c.abs()) * x.abs().powi(i as i32) * omega.abs().powi(j as i32);
        }
    }
    h.eval(x, omega) >= -tol * scale.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    fn q(p0: &[f64], ptau: &[f64]) -> Quasipolynomial {
        Quasipolynomial::new(
            RealPolynomial::new(p0.to_vec()),
            RealPolynomial::new(ptau.to_vec()),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn pendulum_mu_minus_one_value() {
        let h = build_h(&q(&[2.0, -2.0, 1.0], &[-2.0]), 1).unwrap();
        let v = h.eval_exact(&rat(1), &rat(1));
        assert_eq!(v, rat(4));
    }

    #[test]
    fn taylor_polynomial() {
        let t = taylor_exp2(3);
        assert_eq!(
            t,
            vec![rat(1), rat(2), rat(2), BigRational::new(4.into(), 3.into())]
        );
    }

    #[test]
    fn no_delay_term_is_nonpositive_and_has_no_sup() {
        let h = build_h(&q(&[1.0, 0.5, 1.0], &[]), 2).unwrap();
        for x in [0.0, 0.5, 3.0] {
            for om in [0.0, 1.0, 10.0] {
                assert!(h.eval(x, om) <= 0.0);
            }
        }
        assert!(sup_frequency(&h, 10.0).is_none());
        let r = frequency_bound(&q(&[1.0, 0.5, 1.0], &[]), 5);
        assert_eq!(
            (r.order_used, r.omega_bound, r.dominance_flag),
            (0, None, true)
        );
    }

    #[test]
    fn requires_normalized_input() {
        let qq = Quasipolynomial::from_coefficients(&[1.0], &[1.0], 2.0).unwrap();
        assert_eq!(build_h(&qq, 0).unwrap_err(), FreqError::NotNormalized(2.0));
    }

    #[test]
    fn insufficient_order_reports_no_bound() {
        // z + 4e^{−z}: the supremum at every order is 16 > π².
        let r = frequency_bound(&q(&[0.0, 1.0], &[4.0]), 0);
        assert!(!r.dominance_flag);
        assert_eq!(r.omega_bound, None);
        assert!((r.sup_by_order[0].unwrap() - 16.0).abs() < 1e-6);
    }

    #[test]
    fn first_order_lowers_the_supremum() {
        let qq = q(
            &[-4.0 * -0.909 - 2.0, 2.0 * -0.909, 1.0],
            &[4.0 * -0.909 + 2.0, 2.0 * -0.909 + 2.0],
        );
        let x_max = default_x_max(&qq);
        let s0 = sup_frequency(&build_h(&qq, 0).unwrap(), x_max).unwrap().sup;
        let s1 = sup_frequency(&build_h(&qq, 1).unwrap(), x_max).unwrap().sup;
        let s3 = sup_frequency(&build_h(&qq, 3).unwrap(), x_max).unwrap().sup;
        assert!(s1 <= s0 + 1e-9 && s3 <= s1 + 1e-9, "{s0} {s1} {s3}");
    }
}
