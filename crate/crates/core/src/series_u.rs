//! Truncated power series in `u = 1/s` with coefficients in a [`Real`] type.

use crate::real::Real;

/// `Σ_{n=0}^{order} c_n u^n`; products and logs are truncated at `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesInU<T> {
    coeffs: Vec<T>,
}

impl<T: Real> SeriesInU<T> {
    pub fn zero(order: usize) -> Self {
        Self { coeffs: vec![T::zero(); order + 1] }
    }

    pub fn constant(order: usize, c: T) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// `c u^n`, truncated away if `n > order`.
    pub fn monomial(order: usize, n: usize, c: T) -> Self {
        let mut s = Self::zero(order);
        if n <= order {
            s.coeffs[n] = c;
        }
        s
    }

    pub fn from_coeffs(order: usize, coeffs: &[T]) -> Self {
        let mut s = Self::zero(order);
        for (dst, &c) in s.coeffs.iter_mut().zip(coeffs) {
            *dst = c;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> T {
        self.coeffs.get(n).copied().unwrap_or_else(T::zero)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: T) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&a| a * c).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let m = self.order().min(other.order());
        let mut out = Self::zero(m);
        for i in 0..=m {
            for j in 0..=m - i {
                out.coeffs[i + j] += self.coeffs[i] * other.coeffs[j];
            }
        }
        out
    }

    /// Quotient; the divisor must have a nonzero constant term.
    pub fn div(&self, other: &Self) -> Option<Self> {
        let m = self.order().min(other.order());
        let d0 = other.coeffs[0];
        if d0 == T::zero() {
            return None;
        }
        let mut q = Self::zero(m);
        for n in 0..=m {
            let mut acc = self.coeffs[n];
            for i in 1..=n {
                acc -= other.coeffs[i] * q.coeffs[n - i];
            }
            q.coeffs[n] = acc / d0;
        }
        Some(q)
    }

    /// Natural log; the constant term must be positive.
    pub fn log(&self) -> Option<Self> {
        let m = self.order();
        let g0 = self.coeffs[0];
        if !(g0 > T::zero()) {
            return None;
        }
        // n f_n g_0 = n g_n − Σ_{k=1}^{n−1} k f_k g_{n−k}
        let mut f = Self::zero(m);
        f.coeffs[0] = if g0 == T::one() { T::zero() } else { g0.ln() };
        for n in 1..=m {
            let mut acc = T::from_f64(n as f64) * self.coeffs[n];
            for k in 1..n {
                acc -= T::from_f64(k as f64) * f.coeffs[k] * self.coeffs[n - k];
            }
            f.coeffs[n] = acc / (T::from_f64(n as f64) * g0);
        }
        Some(f)
    }

    pub fn eval(&self, u: T) -> T {
        let mut acc = T::zero();
        for &c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }

    fn zip(&self, other: &Self, op: impl Fn(T, T) -> T) -> Self {
        let m = self.order().min(other.order());
        Self { coeffs: (0..=m).map(|n| op(self.coeffs[n], other.coeffs[n])).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::DoubleDouble;
    use proptest::prelude::*;

    fn series(c: &[f64]) -> SeriesInU<f64> {
        SeriesInU::from_coeffs(c.len() - 1, c)
    }

    #[test]
    fn log_of_one_plus_u() {
        let l = series(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]).log().unwrap();
        let expect = [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25, 0.2];
        for (n, e) in expect.iter().enumerate() {
            assert!((l.coeff(n) - e).abs() < 1e-15);
        }
        assert!(series(&[0.0, 1.0]).log().is_none());
    }

    #[test]
    fn geometric_quotient() {
        let one = SeriesInU::constant(6, 1.0);
        let q = one.div(&series(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(q.coeffs().iter().all(|&c| (c - 1.0).abs() < 1e-15));
        assert!(one.div(&series(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0])).is_none());
    }

    #[test]
    fn evaluation_matches_truncated_function() {
        let l = series(&[1.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).log().unwrap();
        let u = 1e-2;
        assert!((l.eval(u) - (0.003f64).ln_1p()).abs() < 1e-17);
    }

    #[test]
    fn double_double_series_agrees_with_f64() {
        let a = series(&[2.0, 0.5, -0.25, 0.125]);
        let d = SeriesInU::from_coeffs(3, &[2.0, 0.5, -0.25, 0.125].map(DoubleDouble::from));
        let (la, ld) = (a.log().unwrap(), d.log().unwrap());
        for n in 0..=3 {
            assert!((la.coeff(n) - ld.coeff(n).to_f64()).abs() < 1e-15);
        }
    }

    fn coeffs() -> impl Strategy<Value = Vec<f64>> {
        (0.5f64..2.0, prop::collection::vec(-1.0f64..1.0, 5)).prop_map(|(c0, rest)| std::iter::once(c0).chain(rest).collect())
    }

    proptest! {
        #[test]
        fn log_of_product_is_sum_of_logs(a in coeffs(), b in coeffs()) {
            let (sa, sb) = (series(&a), series(&b));
            let lhs = sa.mul(&sb).log().unwrap();
            let rhs = sa.log().unwrap().add(&sb.log().unwrap());
            for n in 0..=5 {
                prop_assert!((lhs.coeff(n) - rhs.coeff(n)).abs() < 1e-12);
            }
        }

        #[test]
        fn quotient_times_divisor_is_dividend(a in coeffs(), b in coeffs()) {
            let (sa, sb) = (series(&a), series(&b));
            let back = sa.div(&sb).unwrap().mul(&sb);
            for n in 0..=5 {
                prop_assert!((back.coeff(n) - sa.coeff(n)).abs() < 1e-12);
            }
        }
    }
}
