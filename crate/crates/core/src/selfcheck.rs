//! End-to-end checks of the library against frozen reference values.
//! Each criterion returns a pass flag and a one-line detail string.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::freqbound::{build_h, sup_frequency};
use crate::midcore::{
    certify_claim, derivative_residuals, factorization_relative, force_multiplicity,
    multiplicity_check, CertifyInput, Verdict,
};
use crate::pendulum::{
    figure2_csv, figure2_table, gmid_design, h_mu_closed_form, h_mu_expanded, intermediate_design,
    normalized_quasi, omega_plus_envelope, omega_plus_max, triple_root_location, PdDesign,
    PendulumConfig,
};
use crate::quasipoly::{Quasipolynomial, SearchBox};
use crate::roots::verify_dominance_numeric;
use crate::simulate::{fit_decay_rate, integrate, DdeProblem, History};
use crate::specfun::{
    combo_ode_residual, contiguous_residuals, kummer_ode_residual, kummer_phi, kummer_root_region,
    phi_zeros, CombinationParams, KummerParams, RForm, SELECTED_R_FORM,
};

const SEED: u64 = 0x6d69_6464_656c_6179;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn result(id: u8, name: &'static str, passed: bool, detail: String) -> CriterionResult {
    CriterionResult {
        id,
        name,
        passed,
        detail,
    }
}

fn failed(id: u8, name: &'static str, err: impl std::fmt::Display) -> CriterionResult {
    result(id, name, false, format!("error: {err}"))
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn unit_pendulum() -> PendulumConfig {
    PendulumConfig::classical(1.0, 1.0).expect("g = L = 1")
}

/// The `τ = 0.9` triple-root design on the unit pendulum.
pub fn prop6_design() -> PdDesign {
    intermediate_design(&unit_pendulum(), 0.9).expect("0.9 < sqrt 2")
}

/// Certify input for the `τ = 0.9` design with `a₀` lowered so that
/// `Δ(λ₀ + 0.3) = 0`.
pub fn planted_input() -> CertifyInput {
    let d = prop6_design();
    let q = d.quasi(&unit_pendulum()).expect("valid design");
    let shift = q.eval(c(d.lambda0 + 0.3, 0.0)).re;
    let mut a = q.a_coeffs();
    a[0] -= shift;
    CertifyInput {
        n: 2,
        m: 1,
        tau: d.tau,
        a,
        alpha: q.alpha_coeffs(),
        lambda0: d.lambda0,
        a_param: d.a_param(),
    }
}

pub fn criterion1() -> CriterionResult {
    const NAME: &str = "GMID pendulum quadruple root";
    let cfg = unit_pendulum();
    let d = match gmid_design(&cfg) {
        Ok(d) => d,
        Err(e) => return failed(1, NAME, e),
    };
    let gains_ok = (d.k_p + 5.0 * (-2.0f64).exp()).abs() < 1e-15
        && (d.k_d + 2f64.sqrt() * (-2.0f64).exp()).abs() < 1e-15
        && (d.tau - 2f64.sqrt()).abs() < 1e-15;
    let q = match d.quasi(&cfg) {
        Ok(q) => q,
        Err(e) => return failed(1, NAME, e),
    };
    let mult = multiplicity_check(&q, d.lambda0, 5);
    let worst = derivative_residuals(&q, d.lambda0, 3)
        .into_iter()
        .fold(0.0, f64::max);
    let check = match verify_dominance_numeric(&q, d.lambda0, 20.0) {
        Ok(c) => c,
        Err(e) => return failed(1, NAME, e),
    };
    let covers = check.re_max >= 3.0 && check.im_max >= 20.0;
    let passed = gains_ok && mult == 4 && worst < 1e-9 && check.dominant && covers;
    result(
        1,
        NAME,
        passed,
        format!(
            "multiplicity {mult}, max residual {worst:.2e}, {} roots in (lambda0+1e-8, {:.2}] x [-{:.1}, {:.1}]",
            check.winding_right, check.re_max, check.im_max, check.im_max
        ),
    )
}

pub fn criterion2() -> CriterionResult {
    const NAME: &str = "triple root at tau = 0.9 certified";
    let cfg = unit_pendulum();
    let d = prop6_design();
    let q = match d.quasi(&cfg) {
        Ok(q) => q,
        Err(e) => return failed(2, NAME, e),
    };
    let mult = multiplicity_check(&q, d.lambda0, 4);
    let worst = derivative_residuals(&q, d.lambda0, 2)
        .into_iter()
        .fold(0.0, f64::max);
    let cert = match certify_claim(&q, d.lambda0, d.a_param(), 5) {
        Ok(c) => c,
        Err(e) => return failed(2, NAME, e),
    };
    let passed = mult == 3
        && worst < 1e-8
        && (d.lambda0 + 1.01009).abs() < 1e-3
        && cert.verdict == Verdict::Certified
        && cert.numeric.dominant;
    result(
        2,
        NAME,
        passed,
        format!(
            "lambda0 = {:.9}, multiplicity {mult}, residual {worst:.2e}, verdict {:?}, numeric box re <= {:.2}, |im| <= {:.2}",
            d.lambda0, cert.verdict, cert.numeric.re_max, cert.numeric.im_max
        ),
    )
}

pub fn criterion3() -> CriterionResult {
    const NAME: &str = "frequency bound for the pendulum family";
    let mus = [(-1, 1), (-9, 10), (-909, 1000), (-3, 4), (-1, 2)];
    let exact = mus.iter().all(|&(p, q)| {
        let mu = BigRational::new(p.into(), q.into());
        h_mu_expanded(&mu) == h_mu_closed_form(&mu)
    });
    let q = normalized_quasi(-0.909);
    let h = match build_h(&q, 1) {
        Ok(h) => h,
        Err(e) => return failed(3, NAME, e),
    };
    let x_max = crate::freqbound::default_x_max(&q);
    let Some(sup) = sup_frequency(&h, x_max) else {
        return result(3, NAME, false, "no real frequency found at order 1".into());
    };
    let (x_star, env_max) = omega_plus_max();
    let dominated = sup.curve.iter().all(|s| {
        s.omega_max
            .is_none_or(|w| w <= omega_plus_envelope(s.x) + 1e-9)
    });
    let passed = exact
        && sup.sup <= 3.003 + 0.01
        && env_max <= 3.003 + 0.01
        && (x_star - 1.446).abs() <= 0.01
        && dominated
        && env_max.sqrt() < PI;
    result(
        3,
        NAME,
        passed,
        format!(
            "H exact at 5 mu: {exact}; order-1 sup at mu = -0.909 is {:.5} (x = {:.4}); mu-free envelope max {env_max:.5} at x* = {x_star:.4}; omega bound {:.4} < pi",
            sup.sup,
            sup.x_at,
            env_max.sqrt()
        ),
    )
}

pub fn criterion4() -> CriterionResult {
    const NAME: &str = "factorization and quadrature identities";
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst_fact: f64 = 0.0;
    let mut worst_quad: f64 = 0.0;
    let mut worst_mult = usize::MAX;
    for _ in 0..20 {
        let n = rng.gen_range(2..=4usize);
        let m = rng.gen_range(1..n);
        let tau = rng.gen_range(0.2..2.0);
        let lambda0 = rng.gen_range(-3.0..0.0);
        let a = rng.gen_range(-2.0..2.0);
        let d = match force_multiplicity(n, m, tau, lambda0, a) {
            Ok(d) => d,
            Err(e) => return failed(4, NAME, e),
        };
        worst_mult = worst_mult.min(d.multiplicity.saturating_sub(n + m - 1));
        for _ in 0..20 {
            let s = c(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)) / tau;
            let lam = c(lambda0, 0.0) + s;
            match factorization_relative(&d, lam) {
                Ok(r) => worst_fact = worst_fact.max(r),
                Err(e) => return failed(4, NAME, e),
            }
            let scale = d.quasi.magnitude_scale(lam);
            worst_quad =
                worst_quad.max((d.quasi.eval(lam) - d.quadrature_form(lam)).norm() / scale);
        }
    }
    let passed = worst_fact < 1e-8 && worst_quad < 1e-8 && worst_mult >= 1;
    result(
        4,
        NAME,
        passed,
        format!(
            "20 designs x 20 points: factorization {worst_fact:.2e}, quadrature {worst_quad:.2e}"
        ),
    )
}

pub fn criterion5() -> CriterionResult {
    const NAME: &str = "special-function oracles";
    let run = || -> Result<(bool, String), crate::specfun::SpecfunError> {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 5);
        let p12 = KummerParams::real(1.0, 2.0)?;
        let mut phi_err: f64 = 0.0;
        for i in 0..=40 {
            for j in 0..=40 {
                let z = c(-20.0 + i as f64, -20.0 + j as f64);
                if z.norm() > 20.0 || z.norm() == 0.0 {
                    continue;
                }
                let want = (z.exp() - 1.0) / z;
                let got = kummer_phi(&p12, z)?;
                phi_err = phi_err.max((got - want).norm() / want.norm());
            }
        }
        let mut contig: f64 = 0.0;
        let mut ode: f64 = 0.0;
        for _ in 0..50 {
            let a = rng.gen_range(0.2..3.0);
            let b = rng.gen_range(1.5..5.0);
            let z = c(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0));
            let p = KummerParams::real(a, b)?;
            let (r1, r2) = contiguous_residuals(&p, z)?;
            contig = contig.max(r1.norm()).max(r2.norm());
            ode = ode.max(kummer_ode_residual(&p, z)?);
        }
        let mut combo: f64 = 0.0;
        for _ in 0..100 {
            let p = CombinationParams::real(
                rng.gen_range(0.5..2.0),
                rng.gen_range(2.0..4.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )?;
            let z = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            combo = combo.max(combo_ode_residual(&p, z, SELECTED_R_FORM)?);
        }
        let mut ratio = f64::INFINITY;
        for _ in 0..10 {
            let p = CombinationParams::real(
                rng.gen_range(0.5..2.0),
                rng.gen_range(2.0..4.0),
                1.0,
                0.0,
            )?;
            let z = c(rng.gen_range(0.5..5.0), rng.gen_range(-5.0..5.0));
            let good = combo_ode_residual(&p, z, RForm::Rederived)?.max(1e-16);
            let bad = combo_ode_residual(&p, z, RForm::Literal)?;
            ratio = ratio.min(bad / good);
        }
        let ok = phi_err < 1e-12 && contig < 1e-10 && ode < 1e-8 && combo < 1e-8 && ratio >= 1e4;
        Ok((
            ok,
            format!(
                "Phi(1,2) {phi_err:.2e}, contiguous {contig:.2e}, Kummer ODE {ode:.2e}, combination ODE {combo:.2e}, literal/selected residual ratio >= {ratio:.1e}"
            ),
        ))
    };
    match run() {
        Ok((ok, s)) => result(5, NAME, ok, s),
        Err(e) => failed(5, NAME, e),
    }
}

pub fn criterion6() -> CriterionResult {
    const NAME: &str = "Kummer zero regions";
    let bx = SearchBox {
        re_min: -10.0,
        re_max: 10.0,
        im_min: -10.0,
        im_max: 10.0,
    };
    let run = || -> Result<(bool, String), crate::specfun::SpecfunError> {
        let z12 = phi_zeros(&KummerParams::real(1.0, 2.0)?, &bx, 32)?;
        let z13 = phi_zeros(&KummerParams::real(1.0, 3.0)?, &bx, 32)?;
        let region = kummer_root_region(1.0, 3.0)?;
        let off_axis = z12.zeros.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let hyper = z13
            .zeros
            .iter()
            .all(|z| z.re > 0.0 && z.im * z.im - 2.0 * z.re * z.re > 0.0);
        let ok = !z12.zeros.is_empty()
            && z12.zeros.len() as i64 == z12.winding
            && off_axis < 1e-8
            && !z13.zeros.is_empty()
            && z13.zeros.len() as i64 == z13.winding
            && hyper
            && z13.zeros.iter().all(|&z| region.admits(z));
        Ok((
            ok,
            format!(
                "Phi(1,2,.): {} zeros, max |Re| {off_axis:.1e}; Phi(1,3,.): {} zeros (winding {}), all with Re > 0 and Im^2 - 2Re^2 > 0: {hyper}",
                z12.zeros.len(),
                z13.zeros.len(),
                z13.winding
            ),
        ))
    };
    match run() {
        Ok((ok, s)) => result(6, NAME, ok, s),
        Err(e) => failed(6, NAME, e),
    }
}

pub fn criterion7() -> CriterionResult {
    const NAME: &str = "triple-root location versus delay";
    let ratios: Vec<f64> = (1..=7).map(f64::from).collect();
    let rows = figure2_table(&ratios, 200);
    let csv = figure2_csv(&rows);
    let csv_ok = csv.lines().count() == rows.len() + 1 && rows.len() == 7 * 200;
    let mut worst_end: f64 = 0.0;
    let mut monotone = true;
    let mut diverges = true;
    for &r in &ratios {
        let tau_max = (2.0 / r).sqrt();
        let end = triple_root_location(r, tau_max * (1.0 - 1e-14));
        worst_end = worst_end.max((end + (2.0 * r).sqrt()).abs());
        let turn = (1.0 / r).sqrt();
        let branch: Vec<_> = rows
            .iter()
            .filter(|row| row.ratio == r && row.tau <= turn * (1.0 + 1e-12))
            .collect();
        monotone &= branch.windows(2).all(|w| w[1].lambda0 > w[0].lambda0);
        let small = triple_root_location(r, 1e-6);
        diverges &= small < -1e5 && small < branch[0].lambda0;
    }
    let passed = csv_ok && worst_end < 1e-6 && monotone && diverges;
    result(
        7,
        NAME,
        passed,
        format!(
            "{} rows for g/L = 1..7; endpoint error {worst_end:.1e}; increasing in tau on (0, sqrt(L/g)]: {monotone}; lambda0 -> -inf as tau -> 0: {diverges}",
            rows.len()
        ),
    )
}

pub fn criterion8() -> CriterionResult {
    const NAME: &str = "simulated decay rate";
    let run = || -> Result<(bool, String), Box<dyn std::error::Error>> {
        let cfg = unit_pendulum();
        let d = prop6_design();
        let q = d.quasi(&cfg)?;
        let tau = d.tau;
        let prob = DdeProblem {
            quasi: q,
            history: History::constant(1.0),
            t_end: 20.0 * tau,
            dt: tau / 100.0,
        };
        let traj = integrate(&prob)?;
        let fit = fit_decay_rate(&traj, [5.0 * tau, 20.0 * tau])?;
        let rel = (fit.rate - d.lambda0).abs() / d.lambda0.abs();

        let decay = Quasipolynomial::from_coefficients(&[1.0], &[0.0], 1.0)?;
        let t = integrate(&DdeProblem {
            quasi: decay,
            history: History::constant(1.0),
            t_end: 5.0,
            dt: 0.01,
        })?;
        let e1 = (t.states[100][0] - (-1.0f64).exp()).abs();

        let osc = Quasipolynomial::from_coefficients(&[1.0, 0.0], &[0.0], 1.0)?;
        let t = integrate(&DdeProblem {
            quasi: osc,
            history: History::Polynomial { coeffs: vec![1.0] },
            t_end: 20.0,
            dt: 0.01,
        })?;
        let drift = t
            .states
            .iter()
            .map(|s| (s[0] * s[0] + s[1] * s[1] - 1.0).abs())
            .fold(0.0, f64::max);
        let ok = rel <= 0.1 && e1 < 1e-6 && drift < 1e-5;
        Ok((
            ok,
            format!(
                "fitted rate {:.5} vs lambda0 {:.5} ({:.2}%); y' = -y error {e1:.1e}; y'' + y = 0 energy drift {drift:.1e}",
                fit.rate,
                d.lambda0,
                100.0 * rel
            ),
        ))
    };
    match run() {
        Ok((ok, s)) => result(8, NAME, ok, s),
        Err(e) => failed(8, NAME, e),
    }
}

pub fn criterion9() -> CriterionResult {
    const NAME: &str = "planted root is refuted";
    let input = planted_input();
    let q = match input.quasi() {
        Ok(q) => q,
        Err(e) => return failed(9, NAME, e),
    };
    let planted = q.eval(c(input.lambda0 + 0.3, 0.0)).norm();
    let cert = match certify_claim(&q, input.lambda0, input.a_param, 5) {
        Ok(c) => c,
        Err(e) => return failed(9, NAME, e),
    };
    let found = cert
        .numeric
        .offending
        .iter()
        .any(|r| (r.location - c(input.lambda0 + 0.3, 0.0)).norm() < 1e-6);
    let doc = serde_json::to_string(&input).expect("serializable input");
    let code = crate::cli::certify_exit_code(&doc);
    let passed = cert.verdict == Verdict::Refuted && found && code == 3;
    result(
        9,
        NAME,
        passed,
        format!(
            "|Delta(lambda0 + 0.3)| = {planted:.1e}; verdict {:?}; planted root located: {found}; certify exit code {code}",
            cert.verdict
        ),
    )
}

pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion1(),
        criterion2(),
        criterion3(),
        criterion4(),
        criterion5(),
        criterion6(),
        criterion7(),
        criterion8(),
        criterion9(),
    ]
}

pub fn table(results: &[CriterionResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "{} {}: {} ({})\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.detail
        ));
    }
    s
}
