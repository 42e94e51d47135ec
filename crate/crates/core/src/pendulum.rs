//! Delayed PD designs for the pendulum `θ'' + (g/L)θ + k_d θ'(t−τ) + k_p θ(t−τ) = 0`
//! and the linearized inverted pendulum on a cart.

use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freqbound::{build_h_exact, BivariatePoly};
use crate::midcore::{force_multiplicity, MidDesign, MidError};
use crate::quasipoly::{QuasiError, Quasipolynomial, RealPolynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PendulumError {
    #[error("g and L must be positive and finite")]
    InvalidPhysics,
    #[error("epsilon must lie in [0, 4/3), got {0}")]
    InvalidEpsilon(f64),
    #[error("delay {tau} outside (0, {tau_max}) where the triple root is real")]
    DelayOutOfRange { tau: f64, tau_max: f64 },
    #[error("this design is only defined for the classical pendulum")]
    ClassicalOnly,
    #[error("assignment infeasible: Newton stalled with residual {residual:e}")]
    Infeasible { residual: f64 },
    #[error(transparent)]
    Mid(#[from] MidError),
    #[error(transparent)]
    Quasi(#[from] QuasiError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Variant {
    Classical,
    InvertedOnCart { eps: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumConfig {
    pub g: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub variant: Variant,
}

impl PendulumConfig {
    pub fn classical(g: f64, l: f64) -> Result<Self, PendulumError> {
        Self::new(g, l, Variant::Classical)
    }

    pub fn new(g: f64, l: f64, variant: Variant) -> Result<Self, PendulumError> {
        if !(g.is_finite() && l.is_finite() && g > 0.0 && l > 0.0) {
            return Err(PendulumError::InvalidPhysics);
        }
        if let Variant::InvertedOnCart { eps } = variant {
            if !(0.0..4.0 / 3.0).contains(&eps) {
                return Err(PendulumError::InvalidEpsilon(eps));
            }
        }
        Ok(PendulumConfig { g, l, variant })
    }

    pub fn ratio(&self) -> f64 {
        self.g / self.l
    }

    /// Gain applied to the delayed term: 1 for the classical pendulum,
    /// `1/(1 − 3ε/4)` on the cart.
    fn input_gain(&self) -> f64 {
        match self.variant {
            Variant::Classical => 1.0,
            Variant::InvertedOnCart { eps } => 1.0 / (1.0 - 0.75 * eps),
        }
    }

    /// Open-loop `(a₁, a₀)` of `λ² + a₁λ + a₀`.
    pub fn open_loop(&self) -> (f64, f64) {
        match self.variant {
            Variant::Classical => (0.0, self.ratio()),
            Variant::InvertedOnCart { .. } => (0.0, -self.input_gain()),
        }
    }

    /// Upper end `√(2L/g)` of the delays with a real triple root.
    pub fn tau_max(&self) -> f64 {
        (2.0 * self.l / self.g).sqrt()
    }

    /// Closed-loop characteristic quasipolynomial for the given gains.
    pub fn closed_loop(&self, k_p: f64, k_d: f64, tau: f64) -> Result<Quasipolynomial, QuasiError> {
        let (a1, a0) = self.open_loop();
        let c = self.input_gain();
        Quasipolynomial::from_coefficients(&[a0, a1], &[c * k_p, c * k_d], tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PdDesign {
    pub k_p: f64,
    pub k_d: f64,
    pub tau: f64,
    pub lambda0: f64,
    pub mu: f64,
    /// `μ ≥ −1`, where the kernel argument applies.
    pub certificate_eligible: bool,
}

impl PdDesign {
    pub fn quasi(&self, cfg: &PendulumConfig) -> Result<Quasipolynomial, QuasiError> {
        cfg.closed_loop(self.k_p, self.k_d, self.tau)
    }

    /// Kernel parameter `A = −1 − 2μ` of the triple-root design.
    pub fn a_param(&self) -> f64 {
        -1.0 - 2.0 * self.mu
    }

    pub fn mid_design(&self) -> Result<MidDesign, MidError> {
        force_multiplicity(2, 1, self.tau, self.lambda0, self.a_param())
    }
}

fn eligible(mu: f64) -> bool {
    mu >= -1.0 - 1e-12
}

/// Quadruple root at `λ₀ = −√(2g/L)` with `τ = √(2L/g)`.
pub fn gmid_design(cfg: &PendulumConfig) -> Result<PdDesign, PendulumError> {
    if cfg.variant != Variant::Classical {
        return Err(PendulumError::ClassicalOnly);
    }
    let r = cfg.ratio();
    let e2 = (-2.0f64).exp();
    let lambda0 = -(2.0 * r).sqrt();
    let tau = cfg.tau_max();
    Ok(PdDesign {
        k_p: -5.0 * e2 * r,
        k_d: -e2 * (2.0 * r).sqrt(),
        tau,
        lambda0,
        mu: tau * lambda0,
        certificate_eligible: false,
    })
}

/// `λ₀(τ) = (−2 + √(2 − gτ²/L))/τ`
pub fn triple_root_location(ratio: f64, tau: f64) -> f64 {
    (-2.0 + (2.0 - ratio * tau * tau).sqrt()) / tau
}

/// Triple root design for a given delay:
///
/// ```text
/// k_d = 2(τλ₀ + 1)e^{τλ₀}/τ
/// k_p = 2(5Lτλ₀ + gτ² + 3L)e^{τλ₀}/(τ²L)
/// ```
pub fn intermediate_design(cfg: &PendulumConfig, tau: f64) -> Result<PdDesign, PendulumError> {
    if cfg.variant != Variant::Classical {
        return Err(PendulumError::ClassicalOnly);
    }
    let tau_max = cfg.tau_max();
    if !(tau > 0.0 && tau < tau_max) {
        return Err(PendulumError::DelayOutOfRange { tau, tau_max });
    }
    let (g, l) = (cfg.g, cfg.l);
    let lambda0 = triple_root_location(cfg.ratio(), tau);
    let mu = tau * lambda0;
    let e = mu.exp();
    Ok(PdDesign {
        k_p: 2.0 * (5.0 * l * mu + g * tau * tau + 3.0 * l) * e / (tau * tau * l),
        k_d: 2.0 * (mu + 1.0) * e / tau,
        tau,
        lambda0,
        mu,
        certificate_eligible: eligible(mu),
    })
}

/// `(λ₀, A)` such that `force_multiplicity(2, 1, τ, λ₀, A)` has
/// `P₀(λ) = λ² + a₁λ + a₀`. Damped Newton from `(−1/τ, 0)`.
pub fn solve_assignment(tau: f64, a1: f64, a0: f64) -> Result<(f64, f64), PendulumError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(QuasiError::InvalidDelay(tau).into());
    }
    let resid = |l0: f64, a: f64| -> Result<[f64; 2], PendulumError> {
        let d = force_multiplicity(2, 1, tau, l0, a)?;
        let c = d.quasi.a_coeffs();
        Ok([c[1] - a1, c[0] - a0])
    };
    let norm = |r: [f64; 2]| r[0].abs().max(r[1].abs());
    let target = 1e-10 * a1.abs().max(a0.abs()).max(1.0);
    let (mut x, mut y) = (-1.0 / tau, 0.0);
    let mut r = resid(x, y)?;
    for _ in 0..100 {
        if norm(r) <= 1e-6 * target {
            return Ok((x, y));
        }
        let hx = 1e-7 * x.abs().max(1.0);
        let hy = 1e-7 * y.abs().max(1.0);
        let rxp = resid(x + hx, y)?;
        let rxm = resid(x - hx, y)?;
        let ryp = resid(x, y + hy)?;
        let rym = resid(x, y - hy)?;
        let j = [
            [
                (rxp[0] - rxm[0]) / (2.0 * hx),
                (ryp[0] - rym[0]) / (2.0 * hy),
            ],
            [
                (rxp[1] - rxm[1]) / (2.0 * hx),
                (ryp[1] - rym[1]) / (2.0 * hy),
            ],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (r[0] * j[1][1] - r[1] * j[0][1]) / det;
        let dy = (j[0][0] * r[1] - j[1][0] * r[0]) / det;
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let (nx, ny) = (x - step * dx, y - step * dy);
            let nr = resid(nx, ny)?;
            if norm(nr) < norm(r) {
                x = nx;
                y = ny;
                r = nr;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if norm(r) <= target {
        return Ok((x, y));
    }
    Err(PendulumError::Infeasible { residual: norm(r) })
}

/// Triple-root design for either variant through [`solve_assignment`].
pub fn assignment_design(
    cfg: &PendulumConfig,
    tau: f64,
) -> Result<(PdDesign, MidDesign), PendulumError> {
    let (a1, a0) = cfg.open_loop();
    let (lambda0, a_param) = solve_assignment(tau, a1, a0)?;
    let mid = force_multiplicity(2, 1, tau, lambda0, a_param)?;
    let alpha = mid.quasi.alpha_coeffs();
    let c = cfg.input_gain();
    let mu = tau * lambda0;
    let pd = PdDesign {
        k_p: alpha[0] / c,
        k_d: alpha[1] / c,
        tau,
        lambda0,
        mu,
        certificate_eligible: eligible(mu) && a_param <= 1.0,
    };
    Ok((pd, mid))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Figure2Row {
    pub ratio: f64,
    pub tau: f64,
    pub lambda0: f64,
}

/// `λ₀(τ)` on `τ_i = τ_max·i/tau_grid`, `i = 1..=tau_grid`; the last row
/// is the limit `−√(2g/L)` at `τ_max`.
pub fn figure2_table(ratios: &[f64], tau_grid: usize) -> Vec<Figure2Row> {
    let mut rows = Vec::with_capacity(ratios.len() * tau_grid);
    for &r in ratios {
        let tau_max = (2.0 / r).sqrt();
        for i in 1..=tau_grid {
            let (tau, lambda0) = if i == tau_grid {
                (tau_max, -(2.0 * r).sqrt())
            } else {
                let t = tau_max * i as f64 / tau_grid as f64;
                (t, triple_root_location(r, t))
            };
            rows.push(Figure2Row {
                ratio: r,
                tau,
                lambda0,
            });
        }
    }
    rows
}

pub fn figure2_csv(rows: &[Figure2Row]) -> String {
    let mut s = String::from("ratio,tau,lambda0\n");
    for r in rows {
        writeln!(s, "{:.16e},{:.16e},{:.16e}", r.ratio, r.tau, r.lambda0).expect("write to String");
    }
    s
}

/// `q_μ(t) = (−1 − 2μ)t² + 2μt + 1`
pub fn q_mu(mu: f64) -> RealPolynomial {
    RealPolynomial::new(vec![1.0, 2.0 * mu, -1.0 - 2.0 * mu])
}

/// Normalized closed loop `z² + 2μz − 4μ − 2 + ((2μ+2)z + 4μ + 2)e^{−z}`
/// with exact rational coefficients `(P̃₀, P̃_τ)`.
pub fn normalized_exact(mu: &BigRational) -> (Vec<BigRational>, Vec<BigRational>) {
    let r = |v: i64| BigRational::from_integer(v.into());
    let p0 = vec![-r(4) * mu - r(2), r(2) * mu, BigRational::one()];
    let ptau = vec![r(4) * mu + r(2), r(2) * mu + r(2)];
    (p0, ptau)
}

pub fn normalized_quasi(mu: f64) -> Quasipolynomial {
    Quasipolynomial::with_shape(
        RealPolynomial::new(vec![-4.0 * mu - 2.0, 2.0 * mu, 1.0]),
        RealPolynomial::new(vec![4.0 * mu + 2.0, 2.0 * mu + 2.0]),
        1,
        1.0,
    )
    .expect("monic, m = 1 < 2")
}

/// First-order `H_μ(x, Ω)` written out coefficient by coefficient:
///
/// ```text
/// −(1+2x)Ω² − 2x(2x² + (4μ+1)x + 4μ² + 10μ + 4)Ω
/// − 2x⁵ + (−8μ−1)x⁴ − 4(2μ+1)(μ−2)x³ + 8(2μ+1)²x²
/// ```
pub fn h_mu_closed_form(mu: &BigRational) -> BivariatePoly {
    let r = |v: i64| BigRational::from_integer(v.into());
    let z = BigRational::zero;
    let mu2 = mu * mu;
    let tmu1 = r(2) * mu + r(1);
    let grid = vec![
        vec![z(), z(), r(-1)],
        vec![z(), r(-2) * (r(4) * &mu2 + r(10) * mu + r(4)), r(-2)],
        vec![r(8) * &tmu1 * &tmu1, r(-2) * (r(4) * mu + r(1))],
        vec![r(-4) * &tmu1 * (mu - r(2)), r(-4)],
        vec![r(-8) * mu - r(1)],
        vec![r(-2)],
    ];
    BivariatePoly::new(grid)
}

/// `H_μ` produced by the generic expansion.
pub fn h_mu_expanded(mu: &BigRational) -> BivariatePoly {
    let (p0, ptau) = normalized_exact(mu);
    build_h_exact(&p0, &ptau, 1)
}

/// `D_μ(x)`, the discriminant of `H_μ` in `Ω` divided by `x²`.
pub fn d_mu(mu: f64) -> RealPolynomial {
    let m2 = mu * mu;
    RealPolynomial::new(vec![
        64.0 * m2 * m2 + 320.0 * m2 * mu + 656.0 * m2 + 448.0 * mu + 96.0,
        128.0 * m2 * mu + 576.0 * m2 + 512.0 * mu + 128.0,
        64.0 * m2 + 256.0 * mu + 128.0,
    ])
}

/// `μ`-free upper envelope `Ω⁺(x) = x/(1+2x)·(−2x² + 3x + 2 + 2√(4x+3))`.
pub fn omega_plus_envelope(x: f64) -> f64 {
    x / (1.0 + 2.0 * x) * (-2.0 * x * x + 3.0 * x + 2.0 + 2.0 * (4.0 * x + 3.0).sqrt())
}

/// `(x*, Ω⁺(x*))`, the maximizer of [`omega_plus_envelope`] on `x ≥ 0`.
pub fn omega_plus_max() -> (f64, f64) {
    let (mut a, mut b) = (0.0f64, 4.0f64);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while b - a > 1e-12 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if omega_plus_envelope(c) >= omega_plus_envelope(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let x = 0.5 * (a + b);
    (x, omega_plus_envelope(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midcore::multiplicity_check;
    use std::f64::consts::E;

    fn unit() -> PendulumConfig {
        PendulumConfig::classical(1.0, 1.0).unwrap()
    }

    #[test]
    fn gmid_values() {
        let d = gmid_design(&unit()).unwrap();
        assert!((d.k_p + 0.676_676_416_183_063_5).abs() < 1e-15);
        assert!((d.k_d + 0.191_392_993_020_821_9).abs() < 1e-15);
        assert!((d.tau - 2f64.sqrt()).abs() < 1e-15 && (d.lambda0 + 2f64.sqrt()).abs() < 1e-15);
        let q = d.quasi(&unit()).unwrap();
        assert_eq!(multiplicity_check(&q, d.lambda0, 4), 4);
        let d2 = gmid_design(&PendulumConfig::classical(2.0, 1.0).unwrap()).unwrap();
        assert!((d2.lambda0 + 2.0).abs() < 1e-15);
    }

    #[test]
    fn unit_delay_case() {
        let d = intermediate_design(&unit(), 1.0).unwrap();
        assert_eq!(d.lambda0, -1.0);
        assert_eq!(d.k_d, 0.0);
        assert!((d.k_p + 2.0 / E).abs() < 1e-15);
        assert!(d.certificate_eligible);
    }

    #[test]
    fn tau_point_nine() {
        let d = intermediate_design(&unit(), 0.9).unwrap();
        assert!((d.lambda0 + 1.010_143_098).abs() < 1e-9, "{}", d.lambda0);
        assert!(d.certificate_eligible);
        let q = d.quasi(&unit()).unwrap();
        assert_eq!(multiplicity_check(&q, d.lambda0, 4), 3);
        let mid = d.mid_design().unwrap();
        for (x, y) in q.alpha_coeffs().iter().zip(mid.quasi.alpha_coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn approaches_gmid_at_tau_max() {
        let cfg = PendulumConfig::classical(3.0, 1.5).unwrap();
        let g = gmid_design(&cfg).unwrap();
        let d = intermediate_design(&cfg, cfg.tau_max() * (1.0 - 1e-12)).unwrap();
        assert!((d.lambda0 - g.lambda0).abs() < 1e-5);
        assert!(matches!(
            intermediate_design(&cfg, cfg.tau_max()),
            Err(PendulumError::DelayOutOfRange { .. })
        ));
    }

    #[test]
    fn assignment_recovers_classical_root() {
        let (l0, a) = solve_assignment(1.0, 0.0, 1.0).unwrap();
        assert!((l0 + 1.0).abs() < 1e-10 && (a - 1.0).abs() < 1e-9);
        let (l0, a) = solve_assignment(0.5, 0.0, -1.0).unwrap();
        assert!((l0 + 1.0).abs() < 1e-13 && a.abs() < 1e-12, "{l0} {a}");
    }

    #[test]
    fn assignment_inverted_pendulum() {
        let cfg = PendulumConfig::new(1.0, 1.0, Variant::InvertedOnCart { eps: 0.0 }).unwrap();
        let (pd, mid) = assignment_design(&cfg, 0.5).unwrap();
        assert_eq!(mid.multiplicity, 3);
        let q = pd.quasi(&cfg).unwrap();
        assert_eq!(multiplicity_check(&q, pd.lambda0, 4), 3);
    }

    #[test]
    fn assignment_infeasible_beyond_tau_max() {
        assert!(matches!(
            solve_assignment(2.0, 0.0, 1.0),
            Err(PendulumError::Infeasible { .. })
        ));
    }

    #[test]
    fn epsilon_validation() {
        assert!(PendulumConfig::new(1.0, 1.0, Variant::InvertedOnCart { eps: 4.0 / 3.0 }).is_err());
        assert!(PendulumConfig::classical(0.0, 1.0).is_err());
    }

    #[test]
    fn figure2_endpoints() {
        let rows = figure2_table(&[1.0, 4.0], 50);
        assert_eq!(rows.len(), 100);
        let last = rows[49];
        assert!((last.lambda0 + 2f64.sqrt()).abs() < 1e-15);
        let r1 = rows
            .iter()
            .find(|r| r.ratio == 1.0 && (r.tau - 2f64.sqrt() * 0.5).abs() < 1e-12);
        assert!(r1.is_some());
        assert!(rows[99].tau < rows[49].tau);
        assert!(figure2_csv(&rows).starts_with("ratio,tau,lambda0\n"));
    }

    #[test]
    fn kernel_matches_q_mu() {
        let mu = -0.9;
        let d = PdDesign {
            k_p: 0.0,
            k_d: 0.0,
            tau: 1.0,
            lambda0: mu,
            mu,
            certificate_eligible: true,
        };
        let k = crate::midcore::kernel_polynomial(2, 1, d.a_param());
        for (x, y) in k.coeffs().iter().zip(q_mu(mu).coeffs()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn normalized_form_matches_design() {
        let d = intermediate_design(&unit(), 0.9).unwrap();
        let n = d.quasi(&unit()).unwrap().normalize(d.lambda0);
        let want = normalized_quasi(d.mu);
        for (x, y) in n.p0().coeffs().iter().zip(want.p0().coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in n.alpha_coeffs().iter().zip(want.alpha_coeffs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_maximum() {
        let (x, v) = omega_plus_max();
        assert!((x - 1.446).abs() < 1e-3, "{x}");
        assert!((v - 3.003).abs() < 1e-3, "{v}");
    }

    #[test]
    fn discriminant_sign() {
        for mu in [-1.0, -0.9, -0.6] {
            assert!(d_mu(mu).eval(0.1) > 0.0 && d_mu(mu).eval(1.0) > 0.0);
            assert!(d_mu(mu).eval(5.0) < 0.0);
        }
        assert!((d_mu(-0.9).eval(1.0) - 22.7584).abs() < 1e-9);
    }
}
