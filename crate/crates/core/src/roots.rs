//! Argument-principle root finder for retarded quasipolynomials.
//!
//! The phase of `Δ` is tracked along polygonal contours; a segment is split
//! until the phase moves by less than `π/4` over each half. Boxes are
//! quadrisected until every cell holds at most one root (or is smaller than
//! the tolerance), and roots are then polished by Newton's method.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::midcore::multiplicity_check;
use crate::quasipoly::{Quasipolynomial, SearchBox};

const COLLISION_REL: f64 = 1e-11;
const MAX_SEGMENT_DEPTH: usize = 48;
const PERTURBATIONS: usize = 3;
const FIRST_PERTURBATION: f64 = 1e-6;
pub const MULTIPLICITY_CAP: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RootError {
    #[error("a root lies on or too close to the contour near {0}")]
    Collision(Complex64),
    #[error("root on the boundary of {0:?} persists after {PERTURBATIONS} perturbations")]
    PersistentCollision(SearchBox),
    #[error("phase total {0} is not close to a multiple of 2π")]
    Inconsistent(f64),
    #[error("winding {found} in a cell below tolerance exceeds the cap {MULTIPLICITY_CAP}")]
    MultiplicityCap { found: usize },
    #[error("child windings sum to {children}, parent has {parent}")]
    Conservation { parent: i64, children: i64 },
    #[error("invalid search box")]
    InvalidBox,
}

fn evaluate(q: &Quasipolynomial, z: Complex64) -> Result<Complex64, RootError> {
    let f = q.eval(z);
    if !(f.norm() > COLLISION_REL * q.magnitude_scale(z)) {
        return Err(RootError::Collision(z));
    }
    Ok(f)
}

fn phase(a: Complex64, b: Complex64) -> f64 {
    (b / a).arg()
}

fn segment_phase(
    q: &Quasipolynomial,
    a: Complex64,
    fa: Complex64,
    b: Complex64,
    fb: Complex64,
    depth: usize,
) -> Result<f64, RootError> {
    let m = 0.5 * (a + b);
    let fm = evaluate(q, m)?;
    let (d1, d2) = (phase(fa, fm), phase(fm, fb));
    let limit = std::f64::consts::FRAC_PI_4;
    if d1.abs() < limit && d2.abs() < limit {
        return Ok(d1 + d2);
    }
    if depth >= MAX_SEGMENT_DEPTH || (b - a).norm() <= 1e-14 * (1.0 + a.norm()) {
        return Err(RootError::Collision(m));
    }
    Ok(segment_phase(q, a, fa, m, fm, depth + 1)? + segment_phase(q, m, fm, b, fb, depth + 1)?)
}

/// Winding number of `Δ` along the closed polygon through `vertices`
/// (counter-clockwise gives the number of enclosed roots).
pub fn polygon_winding(q: &Quasipolynomial, vertices: &[Complex64]) -> Result<i64, RootError> {
    let step = 0.25 / q.delay().max(1.0);
    let mut total = 0.0;
    let nv = vertices.len();
    for i in 0..nv {
        let (a, b) = (vertices[i], vertices[(i + 1) % nv]);
        let pieces = ((b - a).norm() / step).ceil().clamp(4.0, 4096.0) as usize;
        let mut za = a;
        let mut fa = evaluate(q, za)?;
        for k in 1..=pieces {
            let zb = a + (b - a) * (k as f64 / pieces as f64);
            let fb = evaluate(q, zb)?;
            total += segment_phase(q, za, fa, zb, fb, 0)?;
            za = zb;
            fa = fb;
        }
    }
    let turns = total / std::f64::consts::TAU;
    let rounded = turns.round();
    if (turns - rounded).abs() > 0.05 {
        return Err(RootError::Inconsistent(total));
    }
    Ok(rounded as i64)
}

fn box_winding_exact(q: &Quasipolynomial, bx: &SearchBox) -> Result<i64, RootError> {
    polygon_winding(q, &bx.corners())
}

/// Number of roots inside `bx`, with multiplicity. A root on the boundary
/// makes the box grow outward by `1e−6`, then `2e−6`, then `4e−6`.
pub fn winding_count(q: &Quasipolynomial, bx: &SearchBox) -> Result<usize, RootError> {
    winding_count_perturbed(q, bx).map(|(w, _)| w)
}

fn winding_count_perturbed(
    q: &Quasipolynomial,
    bx: &SearchBox,
) -> Result<(usize, SearchBox), RootError> {
    if bx.is_degenerate() {
        return Err(RootError::InvalidBox);
    }
    let mut candidate = *bx;
    let mut delta = FIRST_PERTURBATION;
    for attempt in 0..=PERTURBATIONS {
        match box_winding_exact(q, &candidate) {
            Ok(w) => return Ok((w.max(0) as usize, candidate)),
            Err(RootError::Collision(_)) if attempt < PERTURBATIONS => {
                candidate = bx.expanded(delta);
                delta *= 2.0;
            }
            Err(RootError::Collision(_)) => break,
            Err(e) => return Err(e),
        }
    }
    Err(RootError::PersistentCollision(*bx))
}

/// Counter-clockwise regular polygon approximating a circle.
pub fn circle_polygon(center: Complex64, radius: f64, sides: usize) -> Vec<Complex64> {
    (0..sides)
        .map(|k| {
            center + Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / sides as f64)
        })
        .collect()
}

pub fn circle_winding(
    q: &Quasipolynomial,
    center: Complex64,
    radius: f64,
) -> Result<usize, RootError> {
    polygon_winding(q, &circle_polygon(center, radius, 64)).map(|w| w.max(0) as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RootRecord {
    pub location: Complex64,
    pub multiplicity: usize,
    /// `|Δ(z)|` divided by the sum of term magnitudes at `z`.
    pub residual: f64,
    /// Newton did not converge; the location is the centre of a cell
    /// smaller than the tolerance.
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    #[serde(rename = "box")]
    pub search_box: SearchBox,
    pub roots: Vec<RootRecord>,
    pub total_winding: usize,
    pub dominant: Option<RootRecord>,
    /// Gap between the dominant real part and the next smaller one.
    pub margin: Option<f64>,
}

fn newton(q: &Quasipolynomial, z0: Complex64, mult: usize) -> Option<Complex64> {
    let mut z = z0;
    for _ in 0..60 {
        let d = q.eval_derivatives(z, 1);
        if d[0] == Complex64::new(0.0, 0.0) {
            return Some(z);
        }
        if d[1] == Complex64::new(0.0, 0.0) || !d[1].is_finite() {
            return None;
        }
        let step = d[0] / d[1] * mult as f64;
        z -= step;
        if !z.is_finite() {
            return None;
        }
        if step.norm() <= 1e-14 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    // Multiple roots stall at rounding level; accept if the residual is tiny.
    let r = q.eval(z).norm() / q.magnitude_scale(z);
    (r < 1e-12).then_some(z)
}

fn residual(q: &Quasipolynomial, z: Complex64) -> f64 {
    q.eval(z).norm() / q.magnitude_scale(z)
}

fn split(q: &Quasipolynomial, cell: &SearchBox) -> Result<Vec<(SearchBox, usize)>, RootError> {
    let mut last = None;
    for k in 0..6 {
        let shift = 0.0131 + 0.0731 * k as f64;
        let cx = cell.re_min + cell.width() * (0.5 + shift * if k % 2 == 0 { 1.0 } else { -1.0 });
        let cy =
            cell.im_min + cell.height() * (0.5 + 0.8 * shift * if k % 2 == 0 { 1.0 } else { -1.0 });
        let children = [
            SearchBox {
                re_min: cell.re_min,
                re_max: cx,
                im_min: cell.im_min,
                im_max: cy,
            },
            SearchBox {
                re_min: cx,
                re_max: cell.re_max,
                im_min: cell.im_min,
                im_max: cy,
            },
            SearchBox {
                re_min: cx,
                re_max: cell.re_max,
                im_min: cy,
                im_max: cell.im_max,
            },
            SearchBox {
                re_min: cell.re_min,
                re_max: cx,
                im_min: cy,
                im_max: cell.im_max,
            },
        ];
        let mut out = Vec::with_capacity(4);
        let mut failed = None;
        for c in children {
            match box_winding_exact(q, &c) {
                Ok(w) => out.push((c, w.max(0) as usize)),
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            }
        }
        match failed {
            None => return Ok(out),
            Some(RootError::Collision(z)) => last = Some(z),
            Some(e) => return Err(e),
        }
    }
    Err(RootError::Collision(last.unwrap_or(cell.center())))
}

/// Winding around `z` on circles of radius `10·tol`, `100·tol`, … up to
/// `limit`; the first radius whose contour stays clear of roots decides.
fn confirm_multiplicity(q: &Quasipolynomial, z: Complex64, w: usize, tol: f64, limit: f64) -> bool {
    let mut r = 10.0 * tol;
    loop {
        match circle_winding(q, z, r) {
            Ok(found) => return found == w,
            Err(_) if r < limit => r = (10.0 * r).min(limit),
            Err(_) => return false,
        }
    }
}

fn locate(
    q: &Quasipolynomial,
    cell: SearchBox,
    w: usize,
    tol: f64,
) -> Result<Vec<RootRecord>, RootError> {
    if w == 0 {
        return Ok(Vec::new());
    }
    if let Some(z) = newton(q, cell.center(), w) {
        if cell.contains(z) {
            let accept = w == 1 || confirm_multiplicity(q, z, w, tol, cell.diameter());
            if accept {
                return Ok(vec![RootRecord {
                    location: z,
                    multiplicity: w,
                    residual: residual(q, z),
                    flagged: false,
                }]);
            }
        }
    }
    if cell.diameter() < tol {
        if w > MULTIPLICITY_CAP {
            return Err(RootError::MultiplicityCap { found: w });
        }
        let z = cell.center();
        return Ok(vec![RootRecord {
            location: z,
            multiplicity: w,
            residual: residual(q, z),
            flagged: true,
        }]);
    }
    let children = split(q, &cell)?;
    let sum: usize = children.iter().map(|c| c.1).sum();
    if sum != w {
        return Err(RootError::Conservation {
            parent: w as i64,
            children: sum as i64,
        });
    }
    let (a, b) = children.split_at(2);
    let run = |part: &[(SearchBox, usize)]| -> Result<Vec<RootRecord>, RootError> {
        let mut out = Vec::new();
        for &(c, cw) in part {
            out.extend(locate(q, c, cw, tol)?);
        }
        Ok(out)
    };
    let (ra, rb) = rayon::join(|| run(a), || run(b));
    let mut out = ra?;
    out.extend(rb?);
    Ok(out)
}

fn sort_roots(roots: &mut [RootRecord]) {
    roots.sort_by(|a, b| {
        (a.location.re, a.location.im)
            .partial_cmp(&(b.location.re, b.location.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
}

/// All roots inside `bx`, located to about `tol`.
pub fn find_roots(
    q: &Quasipolynomial,
    bx: &SearchBox,
    tol: f64,
) -> Result<SpectrumReport, RootError> {
    let (total, used) = winding_count_perturbed(q, bx)?;
    let mut roots = locate(q, used, total, tol)?;
    sort_roots(&mut roots);
    let dominant = roots
        .iter()
        .copied()
        .max_by(|a, b| a.location.re.total_cmp(&b.location.re));
    let margin = dominant.and_then(|d| {
        roots
            .iter()
            .map(|r| r.location.re)
            .filter(|&re| re < d.location.re - tol)
            .max_by(f64::total_cmp)
            .map(|re| d.location.re - re)
    });
    Ok(SpectrumReport {
        search_box: used,
        roots,
        total_winding: total,
        dominant,
        margin,
    })
}

/// Outcome of [`verify_dominance_numeric`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub dominant: bool,
    /// Roots counted in `(λ₀ + 1e−8, re_max] × [−im_max, im_max]`.
    pub winding_right: usize,
    pub re_max: f64,
    pub im_max: f64,
    /// Winding around the circle of radius `2h` centred at `λ₀`.
    pub disk_winding: usize,
    pub multiplicity: usize,
    /// `λ₀` minus the largest real part of the other roots found; negative
    /// when a root lies to the right of `λ₀`.
    pub margin: Option<f64>,
    pub offending: Vec<RootRecord>,
}

/// Checks numerically that no root of `q` has real part above `λ₀ + 1e−8`.
///
/// Every root with `Re λ ≥ λ₀` has modulus at most
/// `R = ‖A₀‖₂ + ‖A_τ‖₂ e^{−τλ₀}`, so the region
/// `(λ₀ + 1e−8, R + 1] × [−Y, Y]` with `Y = max(im_cap, R + 1)` covers them
/// all. It is split into two horizontal strips `|Im| ≥ h`, a box
/// `Re ≥ λ₀ + h, |Im| ≤ h` and a disk of radius `2h` around `λ₀` whose
/// winding must equal the multiplicity of `λ₀`, with `h = 0.1/τ`.
pub fn verify_dominance_numeric(
    q: &Quasipolynomial,
    lambda0: f64,
    im_cap: f64,
) -> Result<DominanceCheck, RootError> {
    let tau = q.delay();
    let im_cap = im_cap.max(std::f64::consts::PI / tau);
    let env = q.companion().envelope_bound(lambda0);
    let h = 0.1 / tau;
    let left = lambda0 + 1e-8;
    let re_max = (env + 1.0).max(lambda0 + 2.0 * h);
    let y = im_cap.max(env + 1.0);
    let strip_up = SearchBox {
        re_min: left,
        re_max,
        im_min: h,
        im_max: y,
    };
    let strip_dn = SearchBox {
        re_min: left,
        re_max,
        im_min: -y,
        im_max: -h,
    };
    let centre = SearchBox {
        re_min: lambda0 + h,
        re_max,
        im_min: -h,
        im_max: h,
    };

    let mult = multiplicity_check(q, lambda0, q.degree());
    let l0 = Complex64::new(lambda0, 0.0);
    let disk = circle_winding(q, l0, 2.0 * h)?;
    let mut offending = Vec::new();
    let mut winding_right = 0;
    for bx in [&strip_up, &strip_dn, &centre] {
        let w = winding_count(q, bx)?;
        if w > 0 {
            winding_right += w;
            offending.extend(find_roots(q, bx, 1e-6)?.roots);
        }
    }
    if disk > mult {
        // Roots near λ₀ besides λ₀ itself; keep those to its right.
        let near = SearchBox::around(l0, 2.0 * h).map_err(|_| RootError::InvalidBox)?;
        let cluster = 1e-5 * (1.0 + lambda0.abs());
        for r in find_roots(q, &near, 1e-9)?.roots {
            let d = (r.location - l0).norm();
            if d > cluster && d < 2.0 * h && r.location.re > left {
                winding_right += r.multiplicity;
                offending.push(r);
            }
        }
    }
    sort_roots(&mut offending);

    let margin = if let Some(worst) = offending
        .iter()
        .map(|r| r.location.re)
        .max_by(f64::total_cmp)
    {
        Some(lambda0 - worst)
    } else {
        let mut found = None;
        for k in 0..4 {
            let s = f64::from(1u32 << k);
            let wide = SearchBox {
                re_min: lambda0 - 5.0 * s / tau,
                re_max: lambda0 + h,
                im_min: -y * s,
                im_max: y * s,
            };
            found = find_roots(q, &wide, 1e-3)?
                .roots
                .iter()
                .filter(|r| (r.location - l0).norm() > 1e-3)
                .map(|r| r.location.re)
                .max_by(f64::total_cmp)
                .map(|re| lambda0 - re);
            if found.is_some() {
                break;
            }
        }
        found
    };

    Ok(DominanceCheck {
        dominant: winding_right == 0,
        winding_right,
        re_max,
        im_max: y,
        disk_winding: disk,
        multiplicity: mult,
        margin,
        offending,
    })
}
