//! Second-order forward-mode differentiation with hyper-dual numbers.
//!
//! A hyper-dual number `a + b·e1 + c·e2 + d·e1e2` with `e1² = e2² = 0`
//! propagates a value, two directional first derivatives and the mixed second
//! derivative through any composition of the operations below. Seeding
//! `e1 = e_i`, `e2 = e_j` yields `∂f/∂x_i`, `∂f/∂x_j` and `∂²f/∂x_i∂x_j` exactly
//! (up to roundoff), which is how [`crate::mop::AutoDiffMop`] fills in
//! Jacobians and Hessians for problems written once against [`Scalar`].

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Numeric type a problem can be written against to get derivatives for free.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + Send
    + Sync
{
    fn cst(v: f64) -> Self;
    /// Real part.
    fn re(self) -> f64;
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn powf(self, p: f64) -> Self;
    fn abs(self) -> Self;

    fn powi(self, p: i32) -> Self {
        let mut acc = Self::cst(1.0);
        for _ in 0..p.unsigned_abs() {
            acc *= self;
        }
        if p < 0 {
            Self::cst(1.0) / acc
        } else {
            acc
        }
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, p: i32) -> Self {
        f64::powi(self, p)
    }
}

/// Hyper-dual number `re + e1·ε1 + e2·ε2 + e12·ε1ε2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    /// Applies a scalar function given its value and first two derivatives at `re`.
    #[inline]
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            re: f0,
            e1: f1 * self.e1,
            e2: f1 * self.e2,
            e12: f1 * self.e12 + f2 * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Self) -> Self {
        let r = o.re;
        self * o.chain(1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r))
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl AddAssign for HyperDual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for HyperDual {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for HyperDual {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Add<f64> for HyperDual {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self { re: self.re + o, ..self }
    }
}

impl Sub<f64> for HyperDual {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Self { re: self.re - o, ..self }
    }
}

impl Mul<f64> for HyperDual {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Self::new(self.re * o, self.e1 * o, self.e2 * o, self.e12 * o)
    }
}

impl Div<f64> for HyperDual {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Self::new(self.re / o, self.e1 / o, self.e2 / o, self.e12 / o)
    }
}

impl Scalar for HyperDual {
    fn cst(v: f64) -> Self {
        Self::new(v, 0.0, 0.0, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let r = self.re;
        self.chain(r.ln(), 1.0 / r, -1.0 / (r * r))
    }
    fn powf(self, p: f64) -> Self {
        let r = self.re;
        self.chain(r.powf(p), p * r.powf(p - 1.0), p * (p - 1.0) * r.powf(p - 2.0))
    }
    fn abs(self) -> Self {
        if self.re < 0.0 {
            -self
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(x: f64) -> HyperDual {
        HyperDual::new(x, 1.0, 1.0, 0.0)
    }

    #[test]
    fn second_derivative_of_cubic() {
        // f = x^3 → f' = 3x^2, f'' = 6x
        let x = seed(2.0);
        let y = x * x * x;
        assert_eq!(y.re, 8.0);
        assert_eq!(y.e1, 12.0);
        assert_eq!(y.e12, 12.0);
    }

    #[test]
    fn quotient_and_transcendentals() {
        let x0 = 0.7_f64;
        let x = seed(x0);
        let y = x.sin() / (x.exp() + 1.0);
        let f = |t: f64| t.sin() / (t.exp() + 1.0);
        let h = 1e-4;
        let d1 = (f(x0 + h) - f(x0 - h)) / (2.0 * h);
        let d2 = (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
        assert!((y.e1 - d1).abs() < 1e-8);
        assert!((y.e12 - d2).abs() < 1e-6);
    }

    #[test]
    fn mixed_partial() {
        // f(x, y) = x^2 y → ∂²f/∂x∂y = 2x
        let x = HyperDual::new(3.0, 1.0, 0.0, 0.0);
        let y = HyperDual::new(5.0, 0.0, 1.0, 0.0);
        let f = x * x * y;
        assert_eq!(f.e12, 6.0);
        assert_eq!(f.e1, 30.0);
        assert_eq!(f.e2, 9.0);
    }

    #[test]
    fn powf_and_sqrt_agree() {
        let x = seed(1.3);
        let a = x.sqrt();
        let b = x.powf(0.5);
        assert!((a.e1 - b.e1).abs() < 1e-14);
        assert!((a.e12 - b.e12).abs() < 1e-14);
    }
}
