//! Numeric types the compiled expressions can be evaluated over.
//!
//! Real theories run on `f64`. Complex theories (a field together with its
//! conjugate) run on `Complex64` with `φ* = conj(φ)` fed in as an independent
//! component. [`Dd`] is a double-double type used where an algebraic identity
//! has to be checked beyond double precision.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    const IS_COMPLEX: bool;

    fn from_f64(x: f64) -> Self;
    /// `re + i·im`; `None` when the type is real and `im != 0`.
    fn from_parts(re: f64, im: f64) -> Option<Self>;
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn powf(self, e: f64) -> Self;
    fn exp(self) -> Self;
    /// The imaginary unit, if the type has one.
    fn imag_unit() -> Option<Self>;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn is_finite(self) -> bool {
        self.re().is_finite() && self.im().is_finite()
    }
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(re)
    }
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: f64) -> Self {
        f64::powf(self, e)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn imag_unit() -> Option<Self> {
        None
    }
}

impl Scalar for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(Complex64::new(re, im))
    }
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn powi(self, n: i32) -> Self {
        Complex64::powi(&self, n)
    }
    fn powf(self, e: f64) -> Self {
        Complex64::powf(self, e)
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn imag_unit() -> Option<Self> {
        Some(Complex64::i())
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
///
/// Addition and multiplication are error-free to about 106 bits.
/// `exp` and non-integer powers are only as accurate as `f64`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
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
    pub const fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::new(0.0);
        }
        // One Newton step from the f64 root doubles the precision.
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = ((self.hi - p) - e + self.lo) / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Dd { hi, lo }
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

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
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

impl Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

impl Scalar for Dd {
    const IS_COMPLEX: bool = false;

    fn from_f64(x: f64) -> Self {
        Dd::new(x)
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        (im == 0.0).then_some(Dd::new(re))
    }
    fn re(self) -> f64 {
        self.to_f64()
    }
    fn im(self) -> f64 {
        0.0
    }
    fn modulus(self) -> f64 {
        self.to_f64().abs()
    }
    fn conj(self) -> Self {
        self
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { Dd::new(1.0) / self } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = Dd::new(1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }
    fn powf(self, e: f64) -> Self {
        Dd::new(self.to_f64().powf(e))
    }
    fn exp(self) -> Self {
        let e = self.hi.exp();
        Dd::new(e) * Dd::new(1.0 + self.lo)
    }
    fn imag_unit() -> Option<Self> {
        None
    }
}

/// Complex double-double, for the same identities on complex theories.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CDd {
    pub re: Dd,
    pub im: Dd,
}

impl CDd {
    pub const fn new(re: Dd, im: Dd) -> Self {
        CDd { re, im }
    }
}

impl Add for CDd {
    type Output = CDd;
    fn add(self, o: CDd) -> CDd {
        CDd::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for CDd {
    type Output = CDd;
    fn sub(self, o: CDd) -> CDd {
        CDd::new(self.re - o.re, self.im - o.im)
    }
}

impl Neg for CDd {
    type Output = CDd;
    fn neg(self) -> CDd {
        CDd::new(-self.re, -self.im)
    }
}

impl Mul for CDd {
    type Output = CDd;
    fn mul(self, o: CDd) -> CDd {
        CDd::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl Div for CDd {
    type Output = CDd;
    fn div(self, o: CDd) -> CDd {
        let n = o.re * o.re + o.im * o.im;
        let num = self * o.conj();
        CDd::new(num.re / n, num.im / n)
    }
}

impl Scalar for CDd {
    const IS_COMPLEX: bool = true;

    fn from_f64(x: f64) -> Self {
        CDd::new(Dd::new(x), Dd::new(0.0))
    }
    fn from_parts(re: f64, im: f64) -> Option<Self> {
        Some(CDd::new(Dd::new(re), Dd::new(im)))
    }
    fn re(self) -> f64 {
        self.re.to_f64()
    }
    fn im(self) -> f64 {
        self.im.to_f64()
    }
    fn modulus(self) -> f64 {
        (self.re * self.re + self.im * self.im).sqrt().to_f64()
    }
    fn conj(self) -> Self {
        CDd::new(self.re, -self.im)
    }
    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { CDd::one() / self } else { self };
        let mut k = n.unsigned_abs();
        let mut acc = CDd::one();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }
    fn powf(self, e: f64) -> Self {
        let z = Complex64::new(self.re(), self.im()).powf(e);
        CDd::new(Dd::new(z.re), Dd::new(z.im))
    }
    fn exp(self) -> Self {
        let z = Complex64::new(self.re(), self.im()).exp();
        CDd::new(Dd::new(z.re), Dd::new(z.im))
    }
    fn imag_unit() -> Option<Self> {
        Some(CDd::new(Dd::new(0.0), Dd::new(1.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dd_recovers_cancelled_digits() {
        let big = Dd::new(1.0e16);
        let small = Dd::new(1.0);
        let r = (big + small) - big;
        assert_eq!(r.to_f64(), 1.0);
        // 0.1 * 3 - 0.3 is exactly representable as the product rounding error.
        let p = Dd::new(0.1) * Dd::new(3.0) - Dd::new(0.3);
        assert!((p.to_f64() - (0.1f64.mul_add(3.0, -0.3))).abs() < 1e-30);
    }

    #[test]
    fn dd_division_and_sqrt() {
        let third = Dd::new(1.0) / Dd::new(3.0);
        let back = third * Dd::new(3.0) - Dd::new(1.0);
        assert!(back.to_f64().abs() < 1e-31);
        let r = Dd::new(2.0).sqrt();
        let sq = r * r - Dd::new(2.0);
        assert!(sq.to_f64().abs() < 1e-30);
    }

    #[test]
    fn real_types_reject_imaginary_parts() {
        assert!(f64::from_parts(1.0, 0.5).is_none());
        assert_eq!(Complex64::from_parts(1.0, 0.5), Some(Complex64::new(1.0, 0.5)));
        assert!(f64::imag_unit().is_none());
    }

    #[test]
    fn complex_dd_keeps_the_low_word() {
        let a = CDd::from_parts(1.0e16, 1.0).unwrap();
        let b = CDd::from_parts(1.0, 1.0e16).unwrap();
        let i = CDd::imag_unit().unwrap();
        // (a + i·b) has real part 1e16 - 1e16 and imaginary 1 + 1.
        let r = a + i * b;
        assert_eq!(r.re(), 0.0);
        assert_eq!(r.im(), 2.0);
        let q = (a * b) / b - a;
        assert!(q.modulus() < 1e-15);
    }
}
