//! Kummer and Whittaker functions, two-term Kummer combinations and the
//! second-order equations they satisfy.
//!
//! The combination `F(z) = αΦ(a, b, z) + βΦ(a, b+1, z)` satisfies
//! `F'' + Q F' + R F = 0` with
//!
//! ```text
//! D(z) = ((a−b)α² − αbβ) z − αb²β − b²β²
//! N(z) = a(((a−b)α² − αbβ) z − βb(b+1)α) − ab²β²
//! Q(z) = −1 + (b+1)/z − α(aα − αb − βb)/D(z)
//! R(z) = −N(z) / (z·D(z))
//! ```
//!
//! `R = −N/D` without the `1/z` factor does not reduce to Kummer's
//! equation at `β = 0`; [`RForm::Literal`] keeps that variant around only
//! so the residual checks can show it failing.

mod dd;
pub mod gamma;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::quadrature::gauss_legendre_unit;
use dd::DdComplex;

pub use gamma::gamma;

const MAX_TERMS: usize = 10_000;
const SERIES_REL_TOL: f64 = 1e-16;
const BRANCH_CUT_REL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecfunError {
    #[error("b = {0} is zero or a negative integer")]
    InvalidB(Complex64),
    #[error("α and β cannot both vanish")]
    ZeroCombination,
    #[error("series did not converge in {terms} terms (partial sum {partial})")]
    NonConvergence { terms: usize, partial: Complex64 },
    #[error("integral representation needs Re(b) > Re(a) > 0, got a = {a}, b = {b}")]
    IntegralDomain { a: Complex64, b: Complex64 },
    #[error("64- and 128-point quadratures disagree by {0:e}")]
    QuadratureDisagreement(f64),
    #[error("contiguous relations need a ≠ b and z ≠ 0")]
    ContiguousDomain,
    #[error("singular point of the combination ODE at z = {0}")]
    Singular(Complex64),
    #[error("z = {0} is on or too close to a logarithm branch cut")]
    BranchCut(Complex64),
    #[error("root region needs b >= 2, got b = {0}")]
    RegionDomain(f64),
    #[error("{0}")]
    InvalidArgument(&'static str),
}

type Result<T> = std::result::Result<T, SpecfunError>;

fn is_nonpositive_integer(b: Complex64) -> bool {
    b.im == 0.0 && b.re <= 0.0 && b.re.fract() == 0.0
}

/// Ascending factorial `(α)_k`.
pub fn pochhammer(alpha: Complex64, k: usize) -> Complex64 {
    (0..k).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (alpha + j as f64))
}

/// Parameters `(a, b)` of `Φ(a, b, ·)`, with `b ∉ {0, −1, −2, …}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KummerParams {
    pub a: Complex64,
    pub b: Complex64,
}

impl KummerParams {
    pub fn new(a: impl Into<Complex64>, b: impl Into<Complex64>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        if is_nonpositive_integer(b) {
            return Err(SpecfunError::InvalidB(b));
        }
        Ok(KummerParams { a, b })
    }

    pub fn real(a: f64, b: f64) -> Result<Self> {
        Self::new(Complex64::new(a, 0.0), Complex64::new(b, 0.0))
    }

    fn shifted(&self, da: f64, db: f64) -> KummerParams {
        KummerParams {
            a: self.a + da,
            b: self.b + db,
        }
    }
}

fn series(a: Complex64, b: Complex64, z: Complex64) -> Result<Complex64> {
    let zd = DdComplex::from_c64(z);
    let ad = DdComplex::from_c64(a);
    let bd = DdComplex::from_c64(b);
    let mut term = DdComplex::from_c64(Complex64::new(1.0, 0.0));
    let mut sum = term;
    let mut small_run = 0;
    for k in 0..MAX_TERMS {
        let kf = k as f64;
        let num = ad.add_f64(kf) * zd;
        let den = bd.add_f64(kf) * DdComplex::from_c64(Complex64::new(kf + 1.0, 0.0));
        term = (term * num).div(den);
        sum = sum + term;
        let decreasing = ((a + kf) * z).norm() < ((b + kf) * (kf + 1.0)).norm();
        if decreasing && term.norm_f64() <= SERIES_REL_TOL * sum.norm_f64() {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum.to_c64());
            }
        } else {
            small_run = 0;
        }
    }
    Err(SpecfunError::NonConvergence {
        terms: MAX_TERMS,
        partial: sum.to_c64(),
    })
}

/// Kummer's confluent hypergeometric function `Φ(a, b, z) = Σ (a)_k/(b)_k z^k/k!`.
///
/// For `Re z < −1` the series is evaluated through Kummer's transformation
/// `Φ(a, b, z) = e^z Φ(b−a, b, −z)` so its terms no longer alternate.
pub fn kummer_phi(p: &KummerParams, z: Complex64) -> Result<Complex64> {
    if z.re < -1.0 {
        Ok(z.exp() * series(p.b - p.a, p.b, -z)?)
    } else {
        series(p.a, p.b, z)
    }
}

/// `dᵏ/dzᵏ Φ(a, b, z) = (a)_k/(b)_k Φ(a+k, b+k, z)`.
pub fn kummer_phi_derivative(p: &KummerParams, z: Complex64, order: usize) -> Result<Complex64> {
    let coef = pochhammer(p.a, order) / pochhammer(p.b, order);
    if coef == Complex64::new(0.0, 0.0) {
        return Ok(coef);
    }
    Ok(coef * kummer_phi(&p.shifted(order as f64, order as f64), z)?)
}

/// Euler integral `Γ(b)/(Γ(a)Γ(b−a)) ∫₀¹ e^{zt} t^{a−1}(1−t)^{b−a−1} dt`,
/// 128-point Gauss–Legendre checked against the 64-point rule.
pub fn kummer_phi_integral(p: &KummerParams, z: Complex64) -> Result<Complex64> {
    let (a, b) = (p.a, p.b);
    if !(b.re > a.re && a.re > 0.0) {
        return Err(SpecfunError::IntegralDomain { a, b });
    }
    let integrand = |t: f64| {
        let lt = Complex64::new(t.ln(), 0.0);
        let l1t = Complex64::new((1.0 - t).ln(), 0.0);
        (z * t + (a - 1.0) * lt + (b - a - 1.0) * l1t).exp()
    };
    let rule = |n: usize| -> Complex64 {
        gauss_legendre_unit(n)
            .into_iter()
            .map(|(t, w)| integrand(t) * w)
            .sum()
    };
    let coarse = rule(64);
    let fine = rule(128);
    let diff = (coarse - fine).norm() / fine.norm().max(1.0);
    if diff > 1e-9 {
        return Err(SpecfunError::QuadratureDisagreement(diff));
    }
    Ok(gamma(b) / (gamma(a) * gamma(b - a)) * fine)
}

/// Scaled residuals of the two contiguous relations
///
/// ```text
/// Φ(a, b+1, z)   = (−b(a+z)Φ(a, b, z) + abΦ(a+1, b, z)) / (z(a−b))
/// Φ(a+1, b+1, z) = −(−bΦ(a+1, b, z) + bΦ(a, b, z)) / z
/// ```
///
/// Every Φ value is evaluated independently; each residual is divided by
/// the largest magnitude among the terms of its relation (at least 1).
pub fn contiguous_residuals(p: &KummerParams, z: Complex64) -> Result<(Complex64, Complex64)> {
    let (a, b) = (p.a, p.b);
    if a == b || z == Complex64::new(0.0, 0.0) {
        return Err(SpecfunError::ContiguousDomain);
    }
    let f_ab = kummer_phi(p, z)?;
    let f_ab1 = kummer_phi(&p.shifted(0.0, 1.0), z)?;
    let f_a1b = kummer_phi(&p.shifted(1.0, 0.0), z)?;
    let f_a1b1 = kummer_phi(&p.shifted(1.0, 1.0), z)?;

    let t1 = -b * (a + z) * f_ab / (z * (a - b));
    let t2 = a * b * f_a1b / (z * (a - b));
    let r1 = f_ab1 - (t1 + t2);
    let s1 = [f_ab1.norm(), t1.norm(), t2.norm(), 1.0]
        .into_iter()
        .fold(0.0, f64::max);

    let u1 = b * f_a1b / z;
    let u2 = -b * f_ab / z;
    let r2 = f_a1b1 - (u1 + u2);
    let s2 = [f_a1b1.norm(), u1.norm(), u2.norm(), 1.0]
        .into_iter()
        .fold(0.0, f64::max);
    Ok((r1 / s1, r2 / s2))
}

/// `zΦ'' + (b−z)Φ' − aΦ` divided by the sum of the three term magnitudes.
pub fn kummer_ode_residual(p: &KummerParams, z: Complex64) -> Result<f64> {
    let f = kummer_phi(p, z)?;
    let f1 = kummer_phi_derivative(p, z, 1)?;
    let f2 = kummer_phi_derivative(p, z, 2)?;
    let (t0, t1, t2) = (p.a * f, (p.b - z) * f1, z * f2);
    let scale = t0.norm() + t1.norm() + t2.norm();
    Ok(if scale == 0.0 {
        0.0
    } else {
        (t2 + t1 - t0).norm() / scale
    })
}

/// Zeros of `Φ(a, b, ·)` in a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiZeros {
    pub zeros: Vec<Complex64>,
    /// Winding number of `Φ` along the box boundary.
    pub winding: i64,
}

fn phase_walk(
    f: &dyn Fn(Complex64) -> Result<Complex64>,
    a: Complex64,
    b: Complex64,
    fa: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64> {
    let d = (fb / fa).arg();
    if d.abs() < 0.5 || depth == 0 {
        return Ok(d);
    }
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    Ok(phase_walk(f, a, m, fa, fm, depth - 1)? + phase_walk(f, m, b, fm, fb, depth - 1)?)
}

/// Newton from a `grid × grid` lattice of starting points, deduplicated at
/// `1e−7`, together with the boundary winding number as a count check.
pub fn phi_zeros(
    p: &KummerParams,
    bx: &crate::quasipoly::SearchBox,
    grid: usize,
) -> Result<PhiZeros> {
    let f = |z: Complex64| kummer_phi(p, z);
    let corners = bx.corners();
    let mut total = 0.0;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        let (fa, fb) = (f(a)?, f(b)?);
        let mut s = 0.0;
        // Start from a fixed number of panels so short-range winding is not missed.
        let panels = 64;
        let mut prev = (a, fa);
        for k in 1..=panels {
            let z = a + (b - a) * (k as f64 / panels as f64);
            let fz = if k == panels { fb } else { f(z)? };
            s += phase_walk(&f, prev.0, z, prev.1, fz, 30)?;
            prev = (z, fz);
        }
        total += s;
    }
    let winding = (total / std::f64::consts::TAU).round() as i64;

    let mut zeros: Vec<Complex64> = Vec::new();
    let g = grid.max(2);
    for i in 0..g {
        for j in 0..g {
            let mut z = Complex64::new(
                bx.re_min + bx.width() * (i as f64 + 0.5) / g as f64,
                bx.im_min + bx.height() * (j as f64 + 0.5) / g as f64,
            );
            let mut converged = false;
            for _ in 0..60 {
                let fz = f(z)?;
                let d = kummer_phi_derivative(p, z, 1)?;
                if d == Complex64::new(0.0, 0.0) {
                    break;
                }
                let step = fz / d;
                z -= step;
                if !(z.re.is_finite() && z.im.is_finite()) || z.norm() > 10.0 * bx.diameter() + 10.0
                {
                    break;
                }
                if step.norm() <= 1e-14 * z.norm().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if converged && bx.contains(z) && zeros.iter().all(|w| (w - z).norm() > 1e-7) {
                zeros.push(z);
            }
        }
    }
    zeros.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(PhiZeros { zeros, winding })
}

/// Parameter vector `(a, b, α, β)` of the Kummer-type function
/// `F(z) = αΦ(a, b, z) + βΦ(a, b+1, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CombinationParams {
    pub a: Complex64,
    pub b: Complex64,
    pub alpha: f64,
    pub beta: f64,
}

impl CombinationParams {
    pub fn new(
        a: impl Into<Complex64>,
        b: impl Into<Complex64>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        if is_nonpositive_integer(b) {
            return Err(SpecfunError::InvalidB(b));
        }
        if is_nonpositive_integer(b + 1.0) {
            return Err(SpecfunError::InvalidB(b + 1.0));
        }
        if alpha == 0.0 && beta == 0.0 {
            return Err(SpecfunError::ZeroCombination);
        }
        Ok(CombinationParams { a, b, alpha, beta })
    }

    pub fn real(a: f64, b: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Complex64::new(a, 0.0), Complex64::new(b, 0.0), alpha, beta)
    }

    fn lower(&self) -> KummerParams {
        KummerParams {
            a: self.a,
            b: self.b,
        }
    }

    fn upper(&self) -> KummerParams {
        KummerParams {
            a: self.a,
            b: self.b + 1.0,
        }
    }

    /// Slope `D'` of the affine function `D(z) = D'z + D(0)`.
    pub fn d_slope(&self) -> Complex64 {
        let (a, b, al, be) = (self.a, self.b, self.alpha, self.beta);
        (a - b) * al * al - al * b * be
    }

    pub fn d_intercept(&self) -> Complex64 {
        let (b, al, be) = (self.b, self.alpha, self.beta);
        -al * b * b * be - b * b * be * be
    }

    pub fn d_at(&self, z: Complex64) -> Complex64 {
        self.d_slope() * z + self.d_intercept()
    }

    /// `α(aα − αb − βb)`, the numerator of the `1/D` term of `Q`.
    fn q_pole_coefficient(&self) -> Complex64 {
        let (a, b, al, be) = (self.a, self.b, self.alpha, self.beta);
        al * (a * al - al * b - be * b)
    }

    pub fn n_at(&self, z: Complex64) -> Complex64 {
        let (a, b, al, be) = (self.a, self.b, self.alpha, self.beta);
        a * (self.d_slope() * z - be * b * (b + 1.0) * al) - a * b * b * be * be
    }

    /// The point `β(β+α)b² / (((a−b)α − βb)α)` where `D` vanishes, if `D`
    /// is not constant.
    pub fn excluded_point(&self) -> Option<Complex64> {
        let (a, b, al, be) = (self.a, self.b, self.alpha, self.beta);
        let den = ((a - b) * al - be * b) * al;
        if den == Complex64::new(0.0, 0.0) {
            None
        } else {
            Some(be * (be + al) * b * b / den)
        }
    }
}

/// `F(z) = αΦ(a, b, z) + βΦ(a, b+1, z)`.
pub fn combo_f(p: &CombinationParams, z: Complex64) -> Result<Complex64> {
    let mut v = Complex64::new(0.0, 0.0);
    if p.alpha != 0.0 {
        v += p.alpha * kummer_phi(&p.lower(), z)?;
    }
    if p.beta != 0.0 {
        v += p.beta * kummer_phi(&p.upper(), z)?;
    }
    Ok(v)
}

/// `dᵏF/dzᵏ` through the shift rule for each Kummer term.
pub fn combo_f_derivative(p: &CombinationParams, z: Complex64, order: usize) -> Result<Complex64> {
    let mut v = Complex64::new(0.0, 0.0);
    if p.alpha != 0.0 {
        v += p.alpha * kummer_phi_derivative(&p.lower(), z, order)?;
    }
    if p.beta != 0.0 {
        v += p.beta * kummer_phi_derivative(&p.upper(), z, order)?;
    }
    Ok(v)
}

/// Which expression is used for the zeroth-order coefficient `R`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RForm {
    /// `R = −N/D`
    Literal,
    /// `R = −N/(zD)`, the form that reduces to Kummer's equation at `β = 0`.
    Rederived,
}

/// The `R` form used throughout the crate.
pub const SELECTED_R_FORM: RForm = RForm::Rederived;

/// Coefficients of the combination ODE at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OdeData {
    pub q_val: Complex64,
    pub q_prime: Complex64,
    pub r_val: Complex64,
    pub n_val: Complex64,
    pub d_val: Complex64,
    /// `G = R − Q²/4 − Q'/2`
    pub g_val: Complex64,
}

pub fn ode_data(p: &CombinationParams, z: Complex64) -> Result<OdeData> {
    ode_data_with_form(p, z, SELECTED_R_FORM)
}

pub fn ode_data_with_form(p: &CombinationParams, z: Complex64, form: RForm) -> Result<OdeData> {
    if z == Complex64::new(0.0, 0.0) {
        return Err(SpecfunError::Singular(z));
    }
    let slope = p.d_slope();
    let intercept = p.d_intercept();
    let d = slope * z + intercept;
    let d_scale = (slope * z).norm() + intercept.norm();
    if d_scale == 0.0 || d.norm() <= 1e-14 * d_scale {
        return Err(SpecfunError::Singular(z));
    }
    let n = p.n_at(z);
    let c = p.q_pole_coefficient();
    let b1 = p.b + 1.0;
    let q = -1.0 + b1 / z - c / d;
    let q_prime = -b1 / (z * z) + c * slope / (d * d);
    let r = match form {
        RForm::Literal => -n / d,
        RForm::Rederived => -n / (z * d),
    };
    let g = r - q * q / 4.0 - q_prime / 2.0;
    Ok(OdeData {
        q_val: q,
        q_prime,
        r_val: r,
        n_val: n,
        d_val: d,
        g_val: g,
    })
}

/// Residual `F'' + QF' + RF` scaled by `|F''| + |QF'| + |RF|`.
pub fn combo_ode_residual(p: &CombinationParams, z: Complex64, form: RForm) -> Result<f64> {
    let f = combo_f(p, z)?;
    let f1 = combo_f_derivative(p, z, 1)?;
    let f2 = combo_f_derivative(p, z, 2)?;
    let o = ode_data_with_form(p, z, form)?;
    let (t1, t2) = (o.q_val * f1, o.r_val * f);
    let scale = f2.norm() + t1.norm() + t2.norm();
    Ok(if scale == 0.0 {
        0.0
    } else {
        (f2 + t1 + t2).norm() / scale
    })
}

fn check_branch(w: Complex64, at: Complex64) -> Result<()> {
    if w == Complex64::new(0.0, 0.0) {
        return Err(SpecfunError::Singular(at));
    }
    if w.re < 0.0 && w.im.abs() <= BRANCH_CUT_REL * w.norm() {
        return Err(SpecfunError::BranchCut(at));
    }
    Ok(())
}

/// `𝒬(z) = ½(−z + (b+1) log z − (α(aα−αb−βb)/D′) log D(z))`, a primitive of
/// `Q/2` with principal logarithms.
pub fn q_primitive(p: &CombinationParams, z: Complex64) -> Result<Complex64> {
    check_branch(z, z)?;
    let slope = p.d_slope();
    let c = p.q_pole_coefficient();
    let pole_term = if slope == Complex64::new(0.0, 0.0) {
        // D is constant; the 1/D term of Q integrates to a linear term.
        c / p.d_intercept() * z
    } else {
        let d = p.d_at(z);
        check_branch(d, z)?;
        c / slope * d.ln()
    };
    Ok(0.5 * (-z + (p.b + 1.0) * z.ln() - pole_term))
}

/// Whittaker-type function `W(z) = e^{𝒬(z)}F(z)`, solving `W'' + GW = 0`.
pub fn whittaker_w(p: &CombinationParams, z: Complex64) -> Result<Complex64> {
    let qp = q_primitive(p, z)?;
    Ok(qp.exp() * combo_f(p, z)?)
}

/// `W'(z) = e^{𝒬}(F' + QF/2)`.
pub fn whittaker_w_derivative(p: &CombinationParams, z: Complex64) -> Result<Complex64> {
    let qp = q_primitive(p, z)?;
    let o = ode_data(p, z)?;
    Ok(qp.exp() * (combo_f_derivative(p, z, 1)? + 0.5 * o.q_val * combo_f(p, z)?))
}

/// Classical Whittaker function `M_{k,l}(z) = e^{−z/2} z^{1/2+l} Φ(1/2+l−k, 1+2l, z)`.
pub fn whittaker_m(k: Complex64, l: Complex64, z: Complex64) -> Result<Complex64> {
    let p = KummerParams::new(l + 0.5 - k, 2.0 * l + 1.0)?;
    check_branch(z, z)?;
    Ok((-z / 2.0).exp() * (z.ln() * (l + 0.5)).exp() * kummer_phi(&p, z)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    ImaginaryAxis,
    RightHalf,
    LeftHalf,
}

/// Where the nontrivial zeros of `Φ(a, b, ·)` can lie, for real `a` and `b ≥ 2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootRegion {
    pub kind: RegionKind,
    /// `(c_im, c_re)` such that every zero satisfies `c_im·Im(z)² − c_re·Re(z)² > 0`;
    /// `None` on the axis case.
    pub hyperbola: Option<(f64, f64)>,
}

impl RootRegion {
    /// Whether `z` satisfies the region's constraints (strictly).
    pub fn admits(&self, z: Complex64) -> bool {
        let side = match self.kind {
            RegionKind::ImaginaryAxis => return z.re == 0.0,
            RegionKind::RightHalf => z.re > 0.0,
            RegionKind::LeftHalf => z.re < 0.0,
        };
        let (ci, cr) = self.hyperbola.expect("set off-axis");
        side && ci * z.im * z.im - cr * z.re * z.re > 0.0
    }
}

pub fn kummer_root_region(a: f64, b: f64) -> Result<RootRegion> {
    if !(b >= 2.0) {
        return Err(SpecfunError::RegionDomain(b));
    }
    let kind = if b == 2.0 * a {
        RegionKind::ImaginaryAxis
    } else if b > 2.0 * a {
        RegionKind::RightHalf
    } else {
        RegionKind::LeftHalf
    };
    let hyperbola = (kind != RegionKind::ImaginaryAxis)
        .then(|| ((b - 2.0 * a).powi(2), 4.0 * a * (b - a) - 2.0 * b));
    Ok(RootRegion { kind, hyperbola })
}

/// Sum of the three terms of the Green–Hille identity for `φ = W`, `K ≡ 1`
/// along the segment `[0, z_end]`:
///
/// ```text
/// [conj(W) W']₀^{z_end} − ∫ |W'|² conj(dz) + ∫ |W|² G dz
/// ```
///
/// The integrals use the composite midpoint rule with `samples` panels.
/// All three terms only involve `|e^{𝒬}|²`, so the result does not depend
/// on logarithm branches. The lower bracket vanishes for `Re b > 0`.
pub fn green_hille_residual(
    p: &CombinationParams,
    z_end: Complex64,
    samples: usize,
) -> Result<Complex64> {
    if samples < 16 {
        return Err(SpecfunError::InvalidArgument(
            "green_hille_residual needs samples >= 16",
        ));
    }
    if !(p.b.re > 0.0) {
        return Err(SpecfunError::InvalidArgument(
            "green_hille_residual needs Re(b) > 0",
        ));
    }
    if z_end == Complex64::new(0.0, 0.0) {
        return Ok(z_end);
    }
    if let Some(zd) = p.excluded_point() {
        let t = zd / z_end;
        let on_line = t.im.abs() * z_end.norm() <= 1e-12 * (1.0 + zd.norm());
        if on_line && t.re > 1e-12 && t.re <= 1.0 + 1e-12 {
            return Err(SpecfunError::Singular(zd));
        }
    }
    let weight = |z: Complex64| -> Complex64 {
        // log|e^{𝒬}|² = −Re z + Re((b+1) log z) − Re(κ log D)
        let slope = p.d_slope();
        let c = p.q_pole_coefficient();
        let pole = if slope == Complex64::new(0.0, 0.0) {
            (c / p.d_intercept() * z).re
        } else {
            (c / slope * p.d_at(z).ln()).re
        };
        Complex64::new((-z.re + ((p.b + 1.0) * z.ln()).re - pole).exp(), 0.0)
    };
    let h = 1.0 / samples as f64;
    let mut i1 = Complex64::new(0.0, 0.0);
    let mut i2 = Complex64::new(0.0, 0.0);
    for i in 0..samples {
        let z = z_end * ((i as f64 + 0.5) * h);
        let o = ode_data(p, z)?;
        let f = combo_f(p, z)?;
        let wp = combo_f_derivative(p, z, 1)? + 0.5 * o.q_val * f;
        let w2 = weight(z);
        i1 += w2 * wp.norm_sqr();
        i2 += w2 * f.norm_sqr() * o.g_val;
    }
    i1 *= h * z_end.conj();
    i2 *= h * z_end;
    let o = ode_data(p, z_end)?;
    let f = combo_f(p, z_end)?;
    let wp = combo_f_derivative(p, z_end, 1)? + 0.5 * o.q_val * f;
    let bracket = weight(z_end) * f.conj() * wp;
    Ok(bracket - i1 + i2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn phi12_closed(z: Complex64) -> Complex64 {
        (z.exp() - 1.0) / z
    }

    #[test]
    fn pochhammer_values() {
        assert_eq!(pochhammer(c(3.7, -1.0), 0), c(1.0, 0.0));
        assert_eq!(pochhammer(c(1.0, 0.0), 4), c(24.0, 0.0));
        assert_eq!(pochhammer(c(2.0, 0.0), 3), c(24.0, 0.0));
    }

    #[test]
    fn phi_basic_values() {
        let p = KummerParams::real(0.3, 1.7).unwrap();
        assert_eq!(kummer_phi(&p, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
        let p = KummerParams::real(1.0, 2.0).unwrap();
        let v = kummer_phi(&p, c(1.0, 0.0)).unwrap();
        assert!((v.re - (E - 1.0)).abs() < 1e-15);
        let p = KummerParams::real(2.5, 2.5).unwrap();
        for z in [c(3.0, 1.0), c(-4.0, 2.0), c(0.5, -7.0)] {
            let v = kummer_phi(&p, z).unwrap();
            assert!((v - z.exp()).norm() <= 1e-14 * z.exp().norm());
        }
    }

    #[test]
    fn phi_large_imaginary_argument_keeps_precision() {
        let p = KummerParams::real(1.0, 2.0).unwrap();
        for z in [c(0.0, 20.0), c(-3.0, 19.0), c(14.0, -14.0), c(-20.0, 0.0)] {
            let v = kummer_phi(&p, z).unwrap();
            let want = phi12_closed(z);
            assert!(
                (v - want).norm() <= 1e-13 * want.norm(),
                "{z}: {v} vs {want}"
            );
        }
    }

    #[test]
    fn invalid_b_rejected() {
        assert!(KummerParams::real(1.0, -2.0).is_err());
        assert!(KummerParams::real(1.0, 0.0).is_err());
        assert!(KummerParams::real(1.0, -2.5).is_ok());
        assert!(CombinationParams::real(1.0, -1.0 + 0.0, 1.0, 0.0).is_err());
        assert_eq!(
            CombinationParams::real(1.0, 3.0, 0.0, 0.0).unwrap_err(),
            SpecfunError::ZeroCombination
        );
    }

    #[test]
    fn integral_representation_matches_series() {
        let cases = [
            (1.0, 3.0, c(0.0, 0.0)),
            (1.0, 2.0, c(1.0, 0.0)),
            (1.0, 4.0, c(-2.0, 0.0)),
        ];
        for (a, b, z) in cases {
            let p = KummerParams::real(a, b).unwrap();
            let i = kummer_phi_integral(&p, z).unwrap();
            let s = kummer_phi(&p, z).unwrap();
            assert!((i - s).norm() <= 1e-10 * s.norm(), "{a},{b},{z}");
        }
        let i = kummer_phi_integral(&KummerParams::real(1.0, 2.0).unwrap(), c(1.0, 0.0)).unwrap();
        assert!((i.re - (E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn integral_domain_enforced() {
        let p = KummerParams::real(2.0, 1.5).unwrap();
        assert!(matches!(
            kummer_phi_integral(&p, c(0.1, 0.0)),
            Err(SpecfunError::IntegralDomain { .. })
        ));
    }

    #[test]
    fn contiguous_relations_hold() {
        for (a, b, z) in [(1.0, 3.0, c(1.0, 1.0)), (0.5, 2.5, c(-3.0, 0.0))] {
            let p = KummerParams::real(a, b).unwrap();
            let (r1, r2) = contiguous_residuals(&p, z).unwrap();
            assert!(r1.norm() < 1e-10 && r2.norm() < 1e-10, "{r1} {r2}");
        }
        let p = KummerParams::real(1.0, 3.0).unwrap();
        assert_eq!(
            contiguous_residuals(&p, c(0.0, 0.0)).unwrap_err(),
            SpecfunError::ContiguousDomain
        );
    }

    #[test]
    fn combo_reductions() {
        let p = CombinationParams::real(1.2, 2.7, 0.4, 0.0).unwrap();
        let z = c(0.8, -0.3);
        let want = 0.4 * kummer_phi(&KummerParams::real(1.2, 2.7).unwrap(), z).unwrap();
        assert!((combo_f(&p, z).unwrap() - want).norm() < 1e-15);
        let p = CombinationParams::real(1.2, 2.7, 0.4, -1.1).unwrap();
        assert!((combo_f(&p, c(0.0, 0.0)).unwrap() - c(0.4 - 1.1, 0.0)).norm() < 1e-15);
        let mu = -1.0;
        let p = CombinationParams::real(1.0, 3.0, 1.0 + mu, -(1.0 + 2.0 * mu) / 3.0).unwrap();
        assert!((combo_f(&p, c(0.0, 0.0)).unwrap().re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn q_reduces_to_kummer_coefficient_when_beta_zero() {
        let (a, b) = (1.3, 2.6);
        let p = CombinationParams::real(a, b, 0.7, 0.0).unwrap();
        let z = c(1.1, 0.4);
        let o = ode_data(&p, z).unwrap();
        assert!((o.q_val - (b / z - 1.0)).norm() < 1e-14);
        assert!((o.r_val + a / z).norm() < 1e-14);
    }

    #[test]
    fn selected_r_form_solves_the_combination_ode() {
        let p = CombinationParams::real(1.0, 3.0, 0.0, 1.0 / 3.0).unwrap();
        assert!(combo_ode_residual(&p, c(2.0, 0.0), RForm::Rederived).unwrap() < 1e-8);
        assert!(combo_ode_residual(&p, c(2.0, 0.0), RForm::Literal).unwrap() > 1e-2);
    }

    #[test]
    fn ode_data_rejects_excluded_points() {
        let p = CombinationParams::real(1.0, 3.0, 0.5, 0.25).unwrap();
        let zd = p.excluded_point().unwrap();
        assert!(matches!(ode_data(&p, zd), Err(SpecfunError::Singular(_))));
        assert!(matches!(
            ode_data(&p, c(0.0, 0.0)),
            Err(SpecfunError::Singular(_))
        ));
    }

    fn second_difference(f: impl Fn(Complex64) -> Complex64, z: Complex64, h: f64) -> Complex64 {
        (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h)
    }

    #[test]
    fn whittaker_type_equation_holds() {
        let mu = -1.0;
        let p = CombinationParams::real(1.0, 3.0, 1.0 + mu, -(1.0 + 2.0 * mu) / 3.0).unwrap();
        let z = c(1.0, 1.0);
        let w = |s| whittaker_w(&p, s).unwrap();
        let w2 = second_difference(w, z, 1e-4);
        let g = ode_data(&p, z).unwrap().g_val;
        assert!((w2 + g * w(z)).norm() < 1e-6, "{}", (w2 + g * w(z)).norm());
    }

    #[test]
    fn whittaker_w_derivative_matches_difference() {
        let p = CombinationParams::real(1.0, 3.0, 0.3, -0.2).unwrap();
        let z = c(0.7, 1.3);
        let h = 1e-5;
        let fd = (whittaker_w(&p, z + h).unwrap() - whittaker_w(&p, z - h).unwrap()) / (2.0 * h);
        assert!((fd - whittaker_w_derivative(&p, z).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn classical_whittaker_equation() {
        let (k, l) = (c(0.0, 0.0), c(1.0, 0.0));
        let z = c(1.0, 0.0);
        let m = |s| whittaker_m(k, l, s).unwrap();
        let lhs = second_difference(m, z, 1e-4);
        let rhs = (0.25 - k / z + (l * l - 0.25) / (z * z)) * m(z);
        assert!((lhs - rhs).norm() < 1e-6);
    }

    #[test]
    fn branch_cut_is_rejected() {
        let p = CombinationParams::real(1.0, 3.0, 0.3, -0.2).unwrap();
        assert!(matches!(
            whittaker_w(&p, c(-2.0, 0.0)),
            Err(SpecfunError::BranchCut(_))
        ));
    }

    #[test]
    fn root_regions() {
        assert_eq!(
            kummer_root_region(1.0, 2.0).unwrap().kind,
            RegionKind::ImaginaryAxis
        );
        let r = kummer_root_region(1.0, 3.0).unwrap();
        assert_eq!(r.kind, RegionKind::RightHalf);
        assert_eq!(r.hyperbola, Some((1.0, 2.0)));
        assert_eq!(
            kummer_root_region(2.0, 3.0).unwrap().kind,
            RegionKind::LeftHalf
        );
        assert_eq!(
            kummer_root_region(1.0, 1.5).unwrap_err(),
            SpecfunError::RegionDomain(1.5)
        );
    }

    #[test]
    fn located_zeros_match_winding() {
        let bx = crate::quasipoly::SearchBox::new(-10.0, 10.0, -10.0, 10.0).unwrap();
        let z = phi_zeros(&KummerParams::real(1.0, 2.0).unwrap(), &bx, 24).unwrap();
        assert_eq!(z.winding, 2);
        assert_eq!(z.zeros.len(), 2);
        assert!((z.zeros[0] - c(0.0, -2.0 * PI)).norm() < 1e-10);
        let z = phi_zeros(&KummerParams::real(1.0, 3.0).unwrap(), &bx, 24).unwrap();
        assert_eq!(z.winding as usize, z.zeros.len());
    }

    #[test]
    fn kummer_equation_residual() {
        let p = KummerParams::real(0.7, 2.3).unwrap();
        for z in [c(1.0, 2.0), c(-5.0, 0.5), c(8.0, -3.0)] {
            assert!(kummer_ode_residual(&p, z).unwrap() < 1e-13);
        }
    }

    #[test]
    fn zeros_of_phi_1_2_on_axis() {
        let p = KummerParams::real(1.0, 2.0).unwrap();
        for k in 1..4 {
            let z = c(0.0, 2.0 * PI * k as f64);
            assert!(kummer_phi(&p, z).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn green_hille_vanishes_at_a_zero_of_phi() {
        let p = CombinationParams::real(1.0, 2.0, 1.0, 0.0).unwrap();
        let z = c(0.0, 2.0 * PI);
        let r = green_hille_residual(&p, z, 4096).unwrap();
        assert!(r.norm() < 1e-6, "{r}");
    }

    #[test]
    fn green_hille_degenerate_short_path() {
        let p = CombinationParams::real(1.0, 3.0, 0.3, -0.2).unwrap();
        let r = green_hille_residual(&p, c(1e-6, 0.0), 16).unwrap();
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn green_hille_second_order_convergence() {
        let p = CombinationParams::real(1.0, 3.0, 0.3, -0.2).unwrap();
        let z = c(1.5, 2.0);
        let r1 = green_hille_residual(&p, z, 64).unwrap().norm();
        let r2 = green_hille_residual(&p, z, 128).unwrap().norm();
        let r3 = green_hille_residual(&p, z, 256).unwrap().norm();
        assert!(r2 < r1 && r3 < r2);
        assert!(r1 / r2 > 3.5 && r2 / r3 > 3.5, "{r1} {r2} {r3}");
    }

    #[test]
    fn green_hille_rejects_singular_path() {
        let p = CombinationParams::real(1.0, 3.0, 0.5, 0.25).unwrap();
        let zd = p.excluded_point().unwrap();
        assert!(matches!(
            green_hille_residual(&p, zd * 2.0, 32),
            Err(SpecfunError::Singular(_))
        ));
    }
}
