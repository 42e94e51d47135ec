//! Minimal double-double complex arithmetic for series accumulation.
//!
//! Kummer series for large imaginary arguments have terms up to ~1e7 times
//! the final value; carrying ~32 significant digits keeps the result at
//! full double precision.

use num_complex::Complex64;
use std::ops::{Add, Mul};

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Dd {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub(crate) fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn recip(self) -> Self {
        // One Newton step on 1/x from the double estimate.
        let q1 = 1.0 / self.hi;
        let r = Dd::from_f64(1.0) + (self * Dd::from_f64(-q1));
        let q2 = r.hi / self.hi;
        let (s, e) = quick_two_sum(q1, q2);
        let r2 = r + (self * Dd { hi: -q2, lo: 0.0 });
        let q3 = r2.hi / self.hi;
        let (s2, e2) = quick_two_sum(s, e + q3);
        Dd { hi: s2, lo: e2 }
    }

    fn neg(self) -> Self {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct DdComplex {
    re: Dd,
    im: Dd,
}

impl DdComplex {
    pub(crate) fn from_c64(z: Complex64) -> Self {
        DdComplex {
            re: Dd::from_f64(z.re),
            im: Dd::from_f64(z.im),
        }
    }

    pub(crate) fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }

    pub(crate) fn norm_f64(self) -> f64 {
        self.to_c64().norm()
    }

    pub(crate) fn add_f64(self, x: f64) -> Self {
        DdComplex {
            re: self.re + Dd::from_f64(x),
            im: self.im,
        }
    }

    pub(crate) fn div(self, o: DdComplex) -> DdComplex {
        // (a+ib)/(c+id) = (a+ib)(c−id)/(c²+d²)
        let den = o.re * o.re + o.im * o.im;
        let inv = den.recip();
        let conj = DdComplex {
            re: o.re,
            im: o.im.neg(),
        };
        let num = self * conj;
        DdComplex {
            re: num.re * inv,
            im: num.im * inv,
        }
    }
}

impl Add for DdComplex {
    type Output = DdComplex;
    fn add(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re + o.re,
            im: self.im + o.im,
        }
    }
}

impl Mul for DdComplex {
    type Output = DdComplex;
    fn mul(self, o: DdComplex) -> DdComplex {
        DdComplex {
            re: self.re * o.re + (self.im * o.im).neg(),
            im: self.re * o.im + self.im * o.re,
        }
    }
}
