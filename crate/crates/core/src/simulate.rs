//! Fixed-step integration of `y^{(n)} + Σ a_k y^{(k)} + Σ α_k y^{(k)}(t − τ) = 0`
//! in companion form, and decay-rate fitting on the result.
//!
//! The step divides the delay exactly, so `t − τ` always lands on a stored
//! grid point; the half-step stage values are read from cubic Hermite
//! interpolants built on stored states and derivatives.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quasipoly::{Quasipolynomial, RealPolynomial};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("dt must be positive and at most tau/20 (dt = {dt}, tau = {tau})")]
    StepTooLarge { dt: f64, tau: f64 },
    #[error("tau/dt = {0} is not an integer")]
    Misaligned(f64),
    #[error("t_end = {t_end} is shorter than 5 tau = {min}")]
    HorizonTooShort { t_end: f64, min: f64 },
    #[error(
        "sampled history needs at least two points covering [-tau, 0] with {n} components each"
    )]
    BadHistory { n: usize },
    #[error("window [{t1}, {t2}] must satisfy 2 tau <= t1 < t2 <= t_end")]
    BadWindow { t1: f64, t2: f64 },
    #[error("only {0} envelope peaks in the window, need at least 5")]
    TooFewPeaks(usize),
}

/// Initial function on `[−τ, 0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum History {
    /// `y(t) = p(t)`; the state derivatives are those of `p`.
    Polynomial { coeffs: Vec<f64> },
    /// Samples of `(y, y', …, y^{(n−1)})` at increasing times, linearly
    /// interpolated.
    Sampled {
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
    },
}

impl History {
    pub fn constant(v: f64) -> Self {
        History::Polynomial { coeffs: vec![v] }
    }

    fn state(&self, t: f64, n: usize) -> Vec<f64> {
        match self {
            History::Polynomial { coeffs } => {
                let p = RealPolynomial::new(coeffs.clone());
                p.derivatives_at(t.into(), n.saturating_sub(1))
                    .into_iter()
                    .take(n)
                    .map(|c| c.re)
                    .collect()
            }
            History::Sampled { times, states } => {
                let k = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[k - 1], times[k]);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                (0..n)
                    .map(|j| (1.0 - w) * states[k - 1][j] + w * states[k][j])
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdeProblem {
    pub quasi: Quasipolynomial,
    pub history: History,
    pub t_end: f64,
    pub dt: f64,
}

impl DdeProblem {
    /// Checks the step and horizon constraints; returns `τ/dt`.
    pub fn validate(&self) -> Result<usize, SimError> {
        let tau = self.quasi.delay();
        let (dt, t_end) = (self.dt, self.t_end);
        if !(dt > 0.0 && dt <= tau / 20.0 * (1.0 + 1e-12)) {
            return Err(SimError::StepTooLarge { dt, tau });
        }
        let ratio = tau / dt;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 * ratio {
            return Err(SimError::Misaligned(ratio));
        }
        if !(t_end >= 5.0 * tau * (1.0 - 1e-12)) {
            return Err(SimError::HorizonTooShort {
                t_end,
                min: 5.0 * tau,
            });
        }
        if let History::Sampled { times, states } = &self.history {
            let n = self.quasi.n();
            let ok = times.len() >= 2
                && times.len() == states.len()
                && states.iter().all(|s| s.len() >= n)
                && times.windows(2).all(|w| w[0] < w[1])
                && times[0] <= -tau + 1e-12
                && *times.last().unwrap() >= -1e-12;
            if !ok {
                return Err(SimError::BadHistory { n });
            }
        }
        Ok(k as usize)
    }
}

/// Uniform-grid solution starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub dt: f64,
    pub delay: f64,
    /// Row `i` is `(y, y', …, y^{(n−1)})` at `t = i·dt`.
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Scalar samples `y(i·dt)`, e.g. from a closed-form expression.
    pub fn from_samples(dt: f64, delay: f64, ys: Vec<f64>) -> Self {
        Trajectory {
            dt,
            delay,
            states: ys.into_iter().map(|y| vec![y]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.states.len().saturating_sub(1))
    }

    pub fn y(&self) -> Vec<f64> {
        self.states.iter().map(|s| s[0]).collect()
    }

    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(1, |s| s.len());
        let mut s = String::from("t,y");
        for k in 1..n {
            write!(s, ",y{k}").expect("write to String");
        }
        s.push('\n');
        for (i, row) in self.states.iter().enumerate() {
            write!(s, "{:.16e}", self.time(i)).expect("write to String");
            for v in row {
                write!(s, ",{v:.16e}").expect("write to String");
            }
            s.push('\n');
        }
        s
    }
}

struct Rhs {
    a0: DMatrix<f64>,
    atau: DMatrix<f64>,
}

impl Rhs {
    fn eval(&self, x: &DVector<f64>, xd: &DVector<f64>) -> DVector<f64> {
        &self.a0 * x + &self.atau * xd
    }
}

fn hermite(
    x0: &DVector<f64>,
    d0: &DVector<f64>,
    x1: &DVector<f64>,
    d1: &DVector<f64>,
    h: f64,
    s: f64,
) -> DVector<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    x0 * h00 + d0 * (h10 * h) + x1 * h01 + d1 * (h11 * h)
}

/// Classical fourth-order Runge–Kutta on the companion system.
pub fn integrate(prob: &DdeProblem) -> Result<Trajectory, SimError> {
    let lag = prob.validate()?;
    let q = &prob.quasi;
    let n = q.n();
    let cp = q.companion();
    let rhs = Rhs {
        a0: cp.a0,
        atau: cp.atau,
    };
    let dt = prob.dt;
    let tau = q.delay();
    let steps = (prob.t_end / dt).round() as usize;

    let hist = |t: f64| DVector::from_vec(prob.history.state(t, n));

    let mut xs: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    let mut ds: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    xs.push(hist(0.0));

    // Delayed state at t = (i + s)·dt − τ for step i, s ∈ {0, ½, 1}.
    let delayed = |xs: &[DVector<f64>], ds: &[DVector<f64>], i: usize, s: f64| -> DVector<f64> {
        if i < lag || (i == lag && s == 0.0) {
            return hist((i as f64 + s) * dt - tau);
        }
        let j = i - lag;
        if s == 0.0 {
            xs[j].clone()
        } else if s == 1.0 {
            xs[j + 1].clone()
        } else {
            hermite(&xs[j], &ds[j], &xs[j + 1], &ds[j + 1], dt, s)
        }
    };

    for i in 0..steps {
        let x = xs[i].clone();
        let xd0 = delayed(&xs, &ds, i, 0.0);
        let k1 = rhs.eval(&x, &xd0);
        ds.push(k1.clone());
        let xdh = delayed(&xs, &ds, i, 0.5);
        let xd1 = delayed(&xs, &ds, i, 1.0);
        let k2 = rhs.eval(&(&x + &k1 * (0.5 * dt)), &xdh);
        let k3 = rhs.eval(&(&x + &k2 * (0.5 * dt)), &xdh);
        let k4 = rhs.eval(&(&x + &k3 * dt), &xd1);
        xs.push(&x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0));
    }
    Ok(Trajectory {
        dt,
        delay: tau,
        states: xs
            .into_iter()
            .map(|v| v.iter().copied().collect())
            .collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    /// Coefficient of `ln t` in the envelope model.
    pub log_power: f64,
    pub peaks: usize,
    pub window: [f64; 2],
}

/// Decay rate of `|y|` over `[t1, t2]`.
///
/// The window is cut into blocks of length at least `τ` (between 5 and 40
/// of them) and the maximum of `|y|` in each block is taken as an envelope
/// sample. `ln|y|` at those samples is fitted by least squares to
/// `c + rate·t + p·ln t`, which absorbs the polynomial factor a multiple
/// dominant root puts in front of the exponential.
pub fn fit_decay_rate(traj: &Trajectory, window: [f64; 2]) -> Result<DecayFit, SimError> {
    let [t1, t2] = window;
    if !(t1 >= 2.0 * traj.delay - 1e-12 && t2 > t1 && t2 <= traj.t_end() + 1e-9) {
        return Err(SimError::BadWindow { t1, t2 });
    }
    let blocks = ((t2 - t1) / traj.delay).floor().clamp(5.0, 40.0) as usize;
    let width = (t2 - t1) / blocks as f64;
    let mut pts = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let lo = t1 + b as f64 * width;
        let hi = lo + width;
        let i0 = (lo / traj.dt).ceil() as usize;
        let i1 = ((hi / traj.dt).floor() as usize).min(traj.len() - 1);
        let best = (i0..=i1)
            .map(|i| (i, traj.states[i][0].abs()))
            .filter(|(_, v)| *v > 0.0 && v.is_finite())
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, v)) = best {
            pts.push((traj.time(i), v.ln()));
        }
    }
    if pts.len() < 5 {
        return Err(SimError::TooFewPeaks(pts.len()));
    }
    // Centre and scale t for conditioning.
    let tm = 0.5 * (t1 + t2);
    let ts = 0.5 * (t2 - t1);
    let a = DMatrix::from_fn(pts.len(), 3, |r, c| match c {
        0 => 1.0,
        1 => (pts[r].0 - tm) / ts,
        _ => pts[r].0.ln(),
    });
    let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .expect("SVD computed with both factors");
    Ok(DecayFit {
        rate: coef[1] / ts,
        log_power: coef[2],
        peaks: pts.len(),
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn exponential_decay_scalar() {
        let q = Quasipolynomial::from_coefficients(&[1.0], &[0.0], 1.0).unwrap();
        let prob = DdeProblem {
            quasi: q,
            history: History::constant(1.0),
            t_end: 5.0,
            dt: 0.01,
        };
        let tr = integrate(&prob).unwrap();
        assert!((tr.states[100][0] - 1.0 / E).abs() < 1e-6);
        assert_eq!(tr.len(), 501);
    }

    #[test]
    fn harmonic_oscillator_energy() {
        let q = Quasipolynomial::from_coefficients(&[1.0, 0.0], &[0.0], 1.0).unwrap();
        let prob = DdeProblem {
            quasi: q,
            history: History::Polynomial { coeffs: vec![1.0] },
            t_end: 20.0,
            dt: 0.01,
        };
        let tr = integrate(&prob).unwrap();
        let e0 = 1.0;
        let drift = tr
            .states
            .iter()
            .map(|s| (s[0] * s[0] + s[1] * s[1] - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-5, "{drift}");
    }

    #[test]
    fn pure_delay_equation_against_method_of_steps() {
        // y' = −y(t − 1), y = 1 on [−1, 0]: y = 1 − t on [0, 1] and
        // y = 1 − t + (t − 1)²/2 on [1, 2].
        let q = Quasipolynomial::from_coefficients(&[0.0], &[1.0], 1.0).unwrap();
        let prob = DdeProblem {
            quasi: q,
            history: History::constant(1.0),
            t_end: 5.0,
            dt: 0.01,
        };
        let tr = integrate(&prob).unwrap();
        for (i, t) in [(50usize, 0.5f64), (150, 1.5), (200, 2.0)] {
            let want = if t <= 1.0 {
                1.0 - t
            } else {
                1.0 - t + (t - 1.0).powi(2) / 2.0
            };
            assert!((tr.states[i][0] - want).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn validation() {
        let q = Quasipolynomial::from_coefficients(&[1.0], &[0.5], 1.0).unwrap();
        let mk = |dt: f64, t_end: f64| DdeProblem {
            quasi: q.clone(),
            history: History::constant(1.0),
            t_end,
            dt,
        };
        assert!(matches!(
            mk(0.1, 10.0).validate(),
            Err(SimError::StepTooLarge { .. })
        ));
        assert!(matches!(
            mk(0.03, 10.0).validate(),
            Err(SimError::Misaligned(_))
        ));
        assert!(matches!(
            mk(0.01, 4.0).validate(),
            Err(SimError::HorizonTooShort { .. })
        ));
        assert_eq!(mk(0.01, 10.0).validate().unwrap(), 100);
    }

    #[test]
    fn fit_pure_exponential() {
        let dt = 0.01;
        let ys = (0..=4000).map(|i| (-2.0 * i as f64 * dt).exp()).collect();
        let tr = Trajectory::from_samples(dt, 1.0, ys);
        let f = fit_decay_rate(&tr, [10.0, 30.0]).unwrap();
        assert!((f.rate + 2.0).abs() < 1e-3, "{}", f.rate);
    }

    #[test]
    fn fit_with_polynomial_factor() {
        let dt = 0.01;
        let ys = (0..=4000)
            .map(|i| {
                let t = i as f64 * dt;
                (-t).exp() * (1.0 + t * t)
            })
            .collect();
        let tr = Trajectory::from_samples(dt, 1.0, ys);
        let f = fit_decay_rate(&tr, [10.0, 30.0]).unwrap();
        assert!((f.rate + 1.0).abs() < 0.05, "{}", f.rate);
    }

    #[test]
    fn fit_rejects_bad_window() {
        let tr = Trajectory::from_samples(0.1, 1.0, vec![1.0; 100]);
        assert!(matches!(
            fit_decay_rate(&tr, [1.0, 5.0]),
            Err(SimError::BadWindow { .. })
        ));
        let tr = Trajectory::from_samples(0.1, 1.0, vec![0.0; 100]);
        assert!(matches!(
            fit_decay_rate(&tr, [2.0, 9.0]),
            Err(SimError::TooFewPeaks(0))
        ));
    }

    #[test]
    fn csv_header() {
        let tr = Trajectory {
            dt: 0.5,
            delay: 1.0,
            states: vec![vec![1.0, 0.0], vec![0.5, -1.0]],
        };
        assert!(tr.to_csv().starts_with("t,y,y1\n"));
    }
}
