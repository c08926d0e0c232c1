//! Double-double arithmetic (an unevaluated sum `hi + lo` of two `f64`),
//! used only to evaluate the finite-difference side of gradient checks.

use std::cmp::Ordering;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use num_traits::{One, Zero};

use super::params::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const LN2: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub(crate) fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn from_parts(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Multiplication by `2^k`, exact.
    fn ldexp(self, k: i32) -> Self {
        let f = 2f64.powi(k);
        Self { hi: self.hi * f, lo: self.lo * f }
    }

    fn exp_impl(self) -> Self {
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::zero();
        }
        // x = k ln2 + r, then exp(r) = exp(r / 1024)^1024.
        let k = (self.hi / LN2.hi).round();
        let r = (self - LN2 * Self::new(k)).ldexp(-10);
        let mut term = Self::one();
        let mut sum = Self::one();
        for n in 1..=12 {
            term = term * r / Self::new(n as f64);
            sum += term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    fn tanh_impl(self) -> Self {
        if self.hi.abs() > 40.0 {
            return Self::new(self.hi.signum());
        }
        if self.hi.abs() < 0.25 {
            // Odd series; avoids the cancellation in e^2x - 1 near zero.
            let x2 = self * self;
            let mut sinh = self;
            let mut cosh = Self::one();
            let (mut ts, mut tc) = (self, Self::one());
            for n in 1..=12 {
                ts = ts * x2 / Self::new(((2 * n) * (2 * n + 1)) as f64);
                tc = tc * x2 / Self::new(((2 * n - 1) * (2 * n)) as f64);
                sinh += ts;
                cosh += tc;
            }
            return sinh / cosh;
        }
        let e = (self + self).exp_impl();
        (e - Self::one()) / (e + Self::one())
    }
}

impl Scalar for DoubleDouble {
    fn of_f64(v: f64) -> Self {
        Self::new(v)
    }

    fn as_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn exp(self) -> Self {
        self.exp_impl()
    }

    fn tanh(self) -> Self {
        self.tanh_impl()
    }

    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::from_parts(s, e + f)
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
        Self::from_parts(p, e + (self.hi * o.lo + self.lo * o.hi))
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
        Self::from_parts(q1, q2) + Self::new(q3)
    }
}

macro_rules! assign_ops {
    ($($tr:ident $f:ident $op:tt),*) => {$(
        impl $tr for DoubleDouble {
            fn $f(&mut self, o: Self) {
                *self = *self $op o;
            }
        }
    )*};
}

assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self::new(0.0)
    }

    fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self::new(1.0)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&o.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&o.lo),
            ord => Some(ord),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: DoubleDouble, hi: f64, lo: f64, tol: f64) {
        let err = ((a.hi - hi) + (a.lo - lo)).abs();
        assert!(err <= tol * hi.abs(), "{a:?} vs ({hi:e}, {lo:e})");
    }

    // References computed with 250-bit arithmetic. The squarings in `exp`
    // cost a few bits, hence 1e-28 rather than 1e-32.
    #[test]
    fn exp_matches_reference() {
        close(DoubleDouble::one().exp(), std::f64::consts::E, 1.4456468917292502e-16, 1e-28);
        close(DoubleDouble::new(-3.25).exp(), 0.03877420783172201, 1.1433418851841824e-18, 1e-28);
        close(DoubleDouble::new(10.5).exp(), 36315.502674246636, 1.577797006387782e-12, 1e-28);
    }

    #[test]
    fn tanh_and_sigmoid_match_reference() {
        close(DoubleDouble::new(0.5).tanh(), 0.46211715726000974, 2.1916603238260928e-17, 1e-28);
        close(DoubleDouble::new(-2.75).tanh(), -0.9918597245682077, -4.4082273619711644e-17, 1e-28);
        close(DoubleDouble::new(0.001).tanh(), 0.0009999996666668, 1.7800613799166557e-20, 1e-28);
        let one = DoubleDouble::one();
        close(one / (one + DoubleDouble::new(-0.7).exp()), 0.668187772168166, 4.6882662817831034e-17, 1e-28);
    }

    #[test]
    fn arithmetic_keeps_low_part() {
        let a = DoubleDouble::new(1.0) + DoubleDouble::new(1e-20);
        assert_eq!(a.hi, 1.0);
        assert_eq!(a.lo, 1e-20);
        let third = DoubleDouble::one() / DoubleDouble::new(3.0);
        let back = third * DoubleDouble::new(3.0) - DoubleDouble::one();
        assert!(back.as_f64().abs() < 1e-31);
        assert!(DoubleDouble::new(2.0) > a && a > DoubleDouble::one());
    }
}
