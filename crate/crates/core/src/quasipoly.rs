//! Real polynomials and single-delay quasipolynomials
//! `Δ(λ) = P₀(λ) + P_τ(λ)·e^{−λτ}`.
//!
//! Coefficients are stored in ascending order and every evaluation goes
//! through Horner's scheme in complex arithmetic.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuasiError {
    #[error("delay must be positive and finite, got {0}")]
    InvalidDelay(f64),
    #[error("P0 must have degree n >= 1")]
    DegreeZeroP0,
    #[error("P0 must be monic, leading coefficient is {0}")]
    NotMonic(f64),
    #[error(
        "neutral-type quasipolynomial (m = n = {n}) is not supported: only the retarded \
         branch (m < n) has finitely many roots per vertical strip"
    )]
    NeutralUnsupported { n: usize },
    #[error("delayed polynomial degree m = {m} exceeds n = {n}")]
    DelayedDegreeTooLarge { n: usize, m: usize },
    #[error("field `{field}`: expected {expected} entries, found {found}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(&'static str),
    #[error("invalid search box: need re_min < re_max and im_min < im_max")]
    InvalidBox,
}

/// Real-coefficient polynomial, ascending powers, trailing zeros trimmed.
/// The zero polynomial has an empty coefficient vector and no degree.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealPolynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for RealPolynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        RealPolynomial::new(coeffs)
    }
}

impl From<RealPolynomial> for Vec<f64> {
    fn from(p: RealPolynomial) -> Self {
        p.coeffs
    }
}

impl RealPolynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        RealPolynomial { coeffs }
    }

    pub fn zero() -> Self {
        RealPolynomial { coeffs: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        RealPolynomial::new(vec![c])
    }

    /// `c·x^k`
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        RealPolynomial::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    /// `None` marks the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// `Σ |c_k| r^k`, the magnitude that rounding errors of `eval` scale with.
    pub fn abs_eval(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * r + c.abs())
    }

    /// Derivative values `p(z), p'(z), …, p^{(k_max)}(z)` by repeated
    /// synthetic division.
    pub fn derivatives_at(&self, z: Complex64, k_max: usize) -> Vec<Complex64> {
        let mut work: Vec<Complex64> = self.coeffs.iter().map(|&c| c.into()).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); k_max + 1];
        let mut factorial = 1.0;
        for (k, slot) in out.iter_mut().enumerate() {
            if work.is_empty() {
                break;
            }
            if k > 0 {
                factorial *= k as f64;
            }
            // One synthetic division step: remainder is the Taylor coefficient.
            let len = work.len();
            for i in (0..len - 1).rev() {
                let next = work[i + 1];
                work[i] += next * z;
            }
            *slot = work[0] * factorial;
            work.remove(0);
        }
        out
    }

    pub fn derivative(&self) -> Self {
        RealPolynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Self {
        RealPolynomial::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// `q(x) = p(x + c)`
    pub fn shift(&self, c: f64) -> Self {
        // Repeated synthetic division gives Taylor coefficients at c.
        let mut work = self.coeffs.clone();
        let n = work.len();
        for i in 0..n {
            for j in (i..n - 1).rev() {
                work[j] += c * work[j + 1];
            }
        }
        RealPolynomial::new(work)
    }

    /// `q(x) = p(s·x)`
    pub fn scale_arg(&self, s: f64) -> Self {
        let mut pow = 1.0;
        let coeffs = self
            .coeffs
            .iter()
            .map(|&c| {
                let v = c * pow;
                pow *= s;
                v
            })
            .collect();
        RealPolynomial::new(coeffs)
    }

    /// Cauchy bound `1 + max |c_i / c_d|` on the modulus of every root.
    /// `None` for constants.
    pub fn cauchy_bound(&self) -> Option<f64> {
        let d = self.degree()?;
        if d == 0 {
            return None;
        }
        let lead = self.leading();
        let m = self.coeffs[..d]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max);
        Some(1.0 + m)
    }

    /// Real roots in `[lo, hi]`, isolated between consecutive critical
    /// points (roots of the derivative, found recursively) and refined by
    /// bisection to `1e-10` relative width. Tangential roots are accepted
    /// when the value at a critical point is below rounding level.
    pub fn real_roots_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let Some(d) = self.degree() else {
            return Vec::new();
        };
        if d == 0 || !(lo <= hi) {
            return Vec::new();
        }
        if d == 1 {
            let r = -self.coeffs[0] / self.coeffs[1];
            return if r >= lo && r <= hi {
                vec![r]
            } else {
                Vec::new()
            };
        }
        let critical = self.derivative().real_roots_in(lo, hi);
        let mut points = Vec::with_capacity(critical.len() + 2);
        points.push(lo);
        points.extend(critical.iter().copied().filter(|&c| c > lo && c < hi));
        points.push(hi);

        let is_tiny = |x: f64| {
            let v = self.eval(x).abs();
            v == 0.0 || v <= 1e-13 * self.abs_eval(x.abs())
        };
        let mut roots: Vec<f64> = Vec::new();
        let push = |r: f64, roots: &mut Vec<f64>| {
            if let Some(&last) = roots.last() {
                if (r - last).abs() <= 1e-9 * r.abs().max(1.0) {
                    return;
                }
            }
            roots.push(r);
        };
        for (i, w) in points.windows(2).enumerate() {
            let (u, v) = (w[0], w[1]);
            let (fu, fv) = (self.eval(u), self.eval(v));
            let u_is_crit = i > 0;
            if fu == 0.0 || (u_is_crit && is_tiny(u)) {
                push(u, &mut roots);
            } else if fu * fv < 0.0 {
                push(bisect(|x| self.eval(x), u, v, fu), &mut roots);
            }
        }
        if self.eval(hi) == 0.0 {
            push(hi, &mut roots);
        }
        roots
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut flo: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-10 * mid.abs().max(1.0) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Add for &RealPolynomial {
    type Output = RealPolynomial;
    fn add(self, rhs: &RealPolynomial) -> RealPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RealPolynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &RealPolynomial {
    type Output = RealPolynomial;
    fn sub(self, rhs: &RealPolynomial) -> RealPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        RealPolynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &RealPolynomial {
    type Output = RealPolynomial;
    fn mul(self, rhs: &RealPolynomial) -> RealPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return RealPolynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        RealPolynomial::new(out)
    }
}

impl Neg for &RealPolynomial {
    type Output = RealPolynomial;
    fn neg(self) -> RealPolynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for RealPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            match k {
                0 => write!(f, "{}", c.abs())?,
                1 => write!(f, "{}·λ", c.abs())?,
                _ => write!(f, "{}·λ^{}", c.abs(), k)?,
            }
        }
        Ok(())
    }
}

/// `Δ(λ) = P₀(λ) + P_τ(λ)e^{−λτ}` with monic `P₀` of degree `n ≥ 1` and
/// `P_τ` of structural degree `m < n`.
///
/// `m` is kept separately from the trimmed degree of `P_τ` so that designs
/// whose top delayed coefficient happens to vanish keep their declared shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuasiDoc", into = "QuasiDoc")]
pub struct Quasipolynomial {
    p0: RealPolynomial,
    ptau: RealPolynomial,
    m: usize,
    delay: f64,
}

/// JSON interchange document `{"n", "m", "tau", "a": [a₀..a_{n−1}], "alpha": [α₀..α_m]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiDoc {
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    pub a: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl TryFrom<QuasiDoc> for Quasipolynomial {
    type Error = QuasiError;
    fn try_from(doc: QuasiDoc) -> Result<Self, QuasiError> {
        if doc.a.len() != doc.n {
            return Err(QuasiError::LengthMismatch {
                field: "a",
                expected: doc.n,
                found: doc.a.len(),
            });
        }
        if doc.alpha.len() != doc.m + 1 {
            return Err(QuasiError::LengthMismatch {
                field: "alpha",
                expected: doc.m + 1,
                found: doc.alpha.len(),
            });
        }
        Quasipolynomial::from_coefficients(&doc.a, &doc.alpha, doc.tau)
    }
}

impl From<Quasipolynomial> for QuasiDoc {
    fn from(q: Quasipolynomial) -> Self {
        QuasiDoc {
            n: q.n(),
            m: q.m,
            tau: q.delay,
            a: q.a_coeffs(),
            alpha: q.alpha_coeffs(),
        }
    }
}

impl Quasipolynomial {
    /// Builds `λⁿ + Σ a_k λ^k + (Σ α_k λ^k) e^{−λτ}` with `n = a.len()` and
    /// `m = alpha.len() − 1`.
    pub fn from_coefficients(a: &[f64], alpha: &[f64], tau: f64) -> Result<Self, QuasiError> {
        if a.iter().any(|c| !c.is_finite()) {
            return Err(QuasiError::NonFinite("a"));
        }
        if alpha.iter().any(|c| !c.is_finite()) {
            return Err(QuasiError::NonFinite("alpha"));
        }
        let mut p0 = a.to_vec();
        p0.push(1.0);
        let m = alpha.len().saturating_sub(1);
        Self::with_shape(
            RealPolynomial::new(p0),
            RealPolynomial::new(alpha.to_vec()),
            m,
            tau,
        )
    }

    /// Structural `m` is the trimmed degree of `ptau` (0 for the zero polynomial).
    pub fn new(p0: RealPolynomial, ptau: RealPolynomial, tau: f64) -> Result<Self, QuasiError> {
        let m = ptau.degree().unwrap_or(0);
        Self::with_shape(p0, ptau, m, tau)
    }

    /// Builds with an explicit structural delayed degree `m ≥ deg P_τ`.
    pub fn with_shape(
        p0: RealPolynomial,
        ptau: RealPolynomial,
        m: usize,
        tau: f64,
    ) -> Result<Self, QuasiError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(QuasiError::InvalidDelay(tau));
        }
        let n = match p0.degree() {
            Some(d) if d >= 1 => d,
            _ => return Err(QuasiError::DegreeZeroP0),
        };
        if p0.leading() != 1.0 {
            return Err(QuasiError::NotMonic(p0.leading()));
        }
        let actual_m = ptau.degree().unwrap_or(0);
        let m = m.max(actual_m);
        if m == n {
            return Err(QuasiError::NeutralUnsupported { n });
        }
        if m > n {
            return Err(QuasiError::DelayedDegreeTooLarge { n, m });
        }
        Ok(Quasipolynomial {
            p0,
            ptau,
            m,
            delay: tau,
        })
    }

    pub fn n(&self) -> usize {
        self.p0.coeffs.len() - 1
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn p0(&self) -> &RealPolynomial {
        &self.p0
    }

    pub fn ptau(&self) -> &RealPolynomial {
        &self.ptau
    }

    /// Quasipolynomial degree `n + m + 1`, the largest multiplicity any
    /// characteristic root can have.
    pub fn degree(&self) -> usize {
        self.n() + self.m + 1
    }

    /// `a₀..a_{n−1}`
    pub fn a_coeffs(&self) -> Vec<f64> {
        self.p0.coeffs[..self.n()].to_vec()
    }

    /// `α₀..α_m`, zero padded to the structural degree.
    pub fn alpha_coeffs(&self) -> Vec<f64> {
        (0..=self.m).map(|k| self.ptau.coeff(k)).collect()
    }

    pub fn eval(&self, lambda: Complex64) -> Complex64 {
        self.p0.eval_complex(lambda) + self.ptau.eval_complex(lambda) * (-lambda * self.delay).exp()
    }

    /// Sum of term magnitudes at `λ`; rounding error of `eval` is a small
    /// multiple of `ε` times this.
    pub fn magnitude_scale(&self, lambda: Complex64) -> f64 {
        let r = lambda.norm();
        self.p0.abs_eval(r) + self.ptau.abs_eval(r) * (-lambda.re * self.delay).exp()
    }

    /// `Δ(λ), Δ'(λ), …, Δ^{(k_max)}(λ)`; the delayed term is expanded by
    /// Leibniz' rule.
    pub fn eval_derivatives(&self, lambda: Complex64, k_max: usize) -> Vec<Complex64> {
        let d0 = self.p0.derivatives_at(lambda, k_max);
        let dt = self.ptau.derivatives_at(lambda, k_max);
        let e = (-lambda * self.delay).exp();
        let mut out = d0;
        for k in 0..=k_max {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            for j in 0..=k {
                if j > 0 {
                    binom = binom * (k - j + 1) as f64 / j as f64;
                }
                acc += dt[j] * binom * (-self.delay).powi((k - j) as i32);
            }
            out[k] += acc * e;
        }
        out
    }

    /// `Δ̃(z) = τⁿ Δ(λ₀ + z/τ) = P̃₀(z) + P̃_τ(z)e^{−z}`; roots map by
    /// `z = τ(λ − λ₀)`.
    pub fn normalize(&self, lambda0: f64) -> Quasipolynomial {
        let tau = self.delay;
        let n = self.n() as i32;
        let tn = tau.powi(n);
        let p0 = self.p0.shift(lambda0).scale_arg(1.0 / tau).scale(tn);
        let ptau = self
            .ptau
            .shift(lambda0)
            .scale_arg(1.0 / tau)
            .scale(tn * (-lambda0 * tau).exp());
        let mut c = p0.coeffs;
        *c.last_mut().expect("n >= 1") = 1.0;
        Quasipolynomial {
            p0: RealPolynomial::new(c),
            ptau,
            m: self.m,
            delay: 1.0,
        }
    }

    /// Inverse of [`normalize`](Self::normalize) for a unit-delay input.
    pub fn denormalize(&self, lambda0: f64, tau: f64) -> Result<Quasipolynomial, QuasiError> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(QuasiError::InvalidDelay(tau));
        }
        let n = self.n() as i32;
        let tn = tau.powi(-n);
        let p0 = self.p0.shift(-tau * lambda0).scale_arg(tau).scale(tn);
        let ptau = self
            .ptau
            .shift(-tau * lambda0)
            .scale_arg(tau)
            .scale(tn * (lambda0 * tau).exp());
        let mut c = p0.coeffs;
        *c.last_mut().expect("n >= 1") = 1.0;
        Quasipolynomial::with_shape(RealPolynomial::new(c), ptau, self.m, tau)
    }

    /// State-space form `ξ' = A₀ξ + A_τ ξ(t − τ)` for `ξ = (y, y', …, y^{(n−1)})`.
    pub fn companion(&self) -> CompanionPair {
        let n = self.n();
        let mut a0 = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a0[(i, i + 1)] = 1.0;
        }
        for k in 0..n {
            a0[(n - 1, k)] = -self.p0.coeff(k);
        }
        let mut atau = DMatrix::zeros(n, n);
        for k in 0..=self.m.min(n - 1) {
            atau[(n - 1, k)] = -self.ptau.coeff(k);
        }
        CompanionPair {
            a0,
            atau,
            btau: DMatrix::zeros(n, n),
            delay: self.delay,
        }
    }

    /// Frequency bound for roots on the imaginary axis.
    ///
    /// Any such root `iω` zeroes `𝓕(ω) = |P₀(iω)|² − |P_τ(iω)|²`, a
    /// polynomial in `Ω = ω²`; the Cauchy bound of that polynomial bounds `ω²`.
    pub fn imag_axis_bound(&self) -> ImagAxisBound {
        let crossing = crossing_polynomial(&self.p0, &self.ptau);
        let Some(cauchy) = crossing.cauchy_bound() else {
            return ImagAxisBound::NoCrossing;
        };
        if crossing.real_roots_in(0.0, cauchy).is_empty() {
            ImagAxisBound::NoCrossing
        } else {
            ImagAxisBound::Bounded(cauchy.sqrt())
        }
    }
}

/// `𝓕(Ω) = |P₀(i√Ω)|² − |P_τ(i√Ω)|²` as a polynomial in `Ω`.
pub fn crossing_polynomial(p0: &RealPolynomial, ptau: &RealPolynomial) -> RealPolynomial {
    fn modulus_sq_on_axis(p: &RealPolynomial) -> RealPolynomial {
        // P(iω) = U(Ω) + iω·V(Ω)
        let deg = p.coeffs().len();
        let mut u = vec![0.0; deg / 2 + 1];
        let mut v = vec![0.0; deg / 2 + 1];
        for (k, &c) in p.coeffs().iter().enumerate() {
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                u[k / 2] += sign * c;
            } else {
                v[k / 2] += sign * c;
            }
        }
        let u = RealPolynomial::new(u);
        let v = RealPolynomial::new(v);
        let omega = RealPolynomial::monomial(1.0, 1);
        &(&u * &u) + &(&omega * &(&v * &v))
    }
    &modulus_sq_on_axis(p0) - &modulus_sq_on_axis(ptau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "omega")]
pub enum ImagAxisBound {
    /// `𝓕 > 0` for every `ω`: no root can sit on the imaginary axis.
    NoCrossing,
    Bounded(f64),
}

/// Companion matrices of the scalar DDE; `btau` is identically zero for
/// the retarded equations handled here.
#[derive(Clone, Debug, PartialEq)]
pub struct CompanionPair {
    pub a0: DMatrix<f64>,
    pub atau: DMatrix<f64>,
    pub btau: DMatrix<f64>,
    pub delay: f64,
}

impl CompanionPair {
    /// `det(λI − A₀ − A_τ e^{−λτ})` via complex Gaussian elimination with
    /// partial pivoting.
    pub fn characteristic_det(&self, lambda: Complex64) -> Complex64 {
        let n = self.a0.nrows();
        let e = (-lambda * self.delay).exp();
        let mut m: Vec<Vec<Complex64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let id = if i == j {
                            lambda
                        } else {
                            Complex64::new(0.0, 0.0)
                        };
                        id - self.a0[(i, j)] - e * self.atau[(i, j)]
                    })
                    .collect()
            })
            .collect();
        let mut det = Complex64::new(1.0, 0.0);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm()))
                .expect("non-empty");
            if m[piv][col].norm() == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            if piv != col {
                m.swap(piv, col);
                det = -det;
            }
            det *= m[col][col];
            for r in col + 1..n {
                let f = m[r][col] / m[col][col];
                for c in col..n {
                    let v = m[col][c];
                    m[r][c] -= f * v;
                }
            }
        }
        det
    }

    /// Right-half modulus bound `‖A₀‖₂ + ‖A_τ‖₂ e^{−τx}` on every
    /// characteristic root with real part `x`.
    pub fn envelope_bound(&self, x: f64) -> f64 {
        spectral_norm(&self.a0) + spectral_norm(&self.atau) * (-self.delay * x).exp()
    }
}

/// Free-function form of [`CompanionPair::envelope_bound`].
pub fn envelope_bound(cp: &CompanionPair, x: f64) -> f64 {
    cp.envelope_bound(x)
}

/// Matrix 2-norm by power iteration on `AᵀA` (200 iterations max,
/// `1e-12` relative convergence).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.ncols();
    if n == 0 || a.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let ata = a.transpose() * a;
    // Irregular start vector so it is not orthogonal to a structured eigvec.
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.618_033_988_749_895 * i as f64);
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..200 {
        let w = &ata * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let converged = (nw - est).abs() <= 1e-12 * nw;
        est = nw;
        v = w / nw;
        if converged {
            break;
        }
    }
    est.sqrt()
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SearchBox {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self, QuasiError> {
        if !(re_min < re_max && im_min < im_max)
            || ![re_min, re_max, im_min, im_max]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(QuasiError::InvalidBox);
        }
        Ok(SearchBox {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    /// Square of half-width `r` centred at `c`.
    pub fn around(c: Complex64, r: f64) -> Result<Self, QuasiError> {
        SearchBox::new(c.re - r, c.re + r, c.im - r, c.im + r)
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(
            0.5 * (self.re_min + self.re_max),
            0.5 * (self.im_min + self.im_max),
        )
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.re_min < self.re_max && self.im_min < self.im_max)
    }

    pub fn expanded(&self, d: f64) -> SearchBox {
        SearchBox {
            re_min: self.re_min - d,
            re_max: self.re_max + d,
            im_min: self.im_min - d,
            im_max: self.im_max + d,
        }
    }

    /// Counter-clockwise corners starting at the lower left.
    pub fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }
}
