//! Scalar abstraction shared by `f64` and a double-double type.
//!
//! The correction-source extraction runs in either precision; the
//! double-double path exists so that large-`s` extrapolation of residuals
//! is not swamped by rounding of the lower orders.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub trait Real:
    Copy
    + fmt::Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;
    fn sqrt(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..n {
            acc *= self;
        }
        acc
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, about 32 significant digits.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

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

impl DoubleDouble {
    pub const fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// `ln(1 + x)` for small `x` through `2 atanh(x / (2 + x))`.
    fn ln_1p_small(self) -> Self {
        let y = self / (Self::new(2.0) + self);
        let y2 = y * y;
        let mut term = y;
        let mut sum = y;
        let mut k = 1.0;
        loop {
            term *= y2;
            k += 2.0;
            let add = term / Self::new(k);
            sum += add;
            if add.hi.abs() <= 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
            if k > 400.0 {
                break;
            }
        }
        sum + sum
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self - o * Self::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Self::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::new(q3)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}
impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}
impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Real for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self::new(x)
    }
    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        // x = 2^e * m with m in [0.75, 1.5)
        let mut e = self.hi.log2().round() as i32;
        let mut m = self * Self::new(2f64.powi(-e));
        if m.hi >= 1.5 {
            m *= Self::new(0.5);
            e += 1;
        } else if m.hi < 0.75 {
            m *= Self::new(2.0);
            e -= 1;
        }
        LN2 * Self::new(e as f64) + (m - Self::one()).ln_1p_small()
    }
    fn ln_1p(self) -> Self {
        if self.hi.abs() < 0.25 {
            self.ln_1p_small()
        } else {
            (Self::one() + self).ln()
        }
    }
    fn sqrt(self) -> Self {
        if self.hi == 0.0 {
            return Self::zero();
        }
        let x = Self::new(self.hi.sqrt());
        // one Newton step doubles the digits
        (x + self / x) * Self::new(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble::new(x)
    }

    #[test]
    fn arithmetic_carries_extra_digits() {
        let third = dd(1.0) / dd(3.0);
        let back = third * dd(3.0) - dd(1.0);
        assert!(back.to_f64().abs() < 1e-31);
        let tiny = dd(1.0) + dd(1e-20) - dd(1.0);
        assert!((tiny.to_f64() - 1e-20).abs() < 1e-35);
    }

    #[test]
    fn ln_and_sqrt_match_f64_and_invert() {
        for &x in &[1e-12, 0.3, 1.0, 2.0, 7.5, 1e9] {
            let l = dd(x).ln();
            assert!((l.to_f64() - x.ln()).abs() <= 4e-16 * x.ln().abs().max(1.0), "{x}");
            let s = dd(x).sqrt();
            let err = s * s - dd(x);
            assert!(err.to_f64().abs() <= 1e-30 * x, "{x}");
        }
        // ln(1+y) against its own series identity ln((1+y)^2) = 2 ln(1+y)
        let y = dd(1e-3) / dd(7.0);
        let l1 = y.ln_1p();
        let l2 = (y * y + y + y).ln_1p();
        assert!((l2 - l1 - l1).to_f64().abs() < 1e-33);
    }
}
