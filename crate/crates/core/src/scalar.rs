//! Scalar kinds shared by every map evaluation.
//!
//! The same polynomial code runs over reals, complex numbers, truncated power
//! series (used to compose parametrizations and to take derivatives along
//! curves) and intervals (used for cell images in grid classification).

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;

    fn scale(&self, c: f64) -> Self;

    /// Size used for escape tests. For series this is the size of the
    /// constant term, for intervals the largest endpoint magnitude.
    fn magnitude(&self) -> f64;

    fn add_const(self, c: f64) -> Self {
        self + Self::constant(c)
    }
}

impl Scalar for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    #[inline]
    fn add_const(self, c: f64) -> Self {
        self + c
    }
}

impl Scalar for Complex64 {
    #[inline]
    fn constant(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    #[inline]
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    #[inline]
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    #[inline]
    fn add_const(self, c: f64) -> Self {
        Complex64::new(self.re + c, self.im)
    }
}

/// Truncated power series `c_0 + c_1 t + ... + c_N t^N` with real
/// coefficients.
///
/// `order` is the truncation order; constants carry `usize::MAX` so they never
/// lower the order of a product.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    coeffs: Vec<f64>,
    order: usize,
}

impl Series {
    pub fn new(mut coeffs: Vec<f64>, order: usize) -> Self {
        coeffs.truncate(order.saturating_add(1));
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Series { coeffs, order }
    }

    /// `c + s t` truncated at `order`.
    pub fn variable(c: f64, s: f64, order: usize) -> Self {
        Series::new(vec![c, s], order)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

impl Add for Series {
    type Output = Series;
    fn add(self, rhs: Series) -> Series {
        let order = self.order.min(rhs.order);
        let len = self.coeffs.len().max(rhs.coeffs.len()).min(order.saturating_add(1));
        let coeffs = (0..len).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        Series { coeffs, order }
    }
}

impl Sub for Series {
    type Output = Series;
    fn sub(self, rhs: Series) -> Series {
        let order = self.order.min(rhs.order);
        let len = self.coeffs.len().max(rhs.coeffs.len()).min(order.saturating_add(1));
        let coeffs = (0..len).map(|k| self.coeff(k) - rhs.coeff(k)).collect();
        Series { coeffs, order }
    }
}

impl Mul for Series {
    type Output = Series;
    fn mul(self, rhs: Series) -> Series {
        let order = self.order.min(rhs.order);
        let len = (self.coeffs.len() + rhs.coeffs.len() - 1).min(order.saturating_add(1));
        let mut coeffs = vec![0.0; len];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                if i + j >= len {
                    break;
                }
                coeffs[i + j] += a * b;
            }
        }
        Series { coeffs, order }
    }
}

impl Neg for Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            order: self.order,
        }
    }
}

impl Scalar for Series {
    fn constant(v: f64) -> Self {
        Series {
            coeffs: vec![v],
            order: usize::MAX,
        }
    }
    fn scale(&self, c: f64) -> Self {
        Series {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
            order: self.order,
        }
    }
    fn magnitude(&self) -> f64 {
        self.coeffs[0].abs()
    }
    fn add_const(mut self, c: f64) -> Self {
        self.coeffs[0] += c;
        self
    }
}

/// Closed interval `[lo, hi]`. Endpoints are not outward rounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let p = [
            self.lo * rhs.lo,
            self.lo * rhs.hi,
            self.hi * rhs.lo,
            self.hi * rhs.hi,
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

impl Scalar for Interval {
    fn constant(v: f64) -> Self {
        Interval::new(v, v)
    }
    fn scale(&self, c: f64) -> Self {
        if c >= 0.0 {
            Interval::new(self.lo * c, self.hi * c)
        } else {
            Interval::new(self.hi * c, self.lo * c)
        }
    }
    fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Horner evaluation of `c[0] + c[1] y + ... + c[d] y^d`.
pub fn horner<S: Scalar>(coeffs: &[f64], y: &S) -> S {
    let mut it = coeffs.iter().rev();
    let mut acc = S::constant(*it.next().expect("empty polynomial"));
    for &c in it {
        acc = (acc * y.clone()).add_const(c);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_product_truncates() {
        let t = Series::variable(1.0, 1.0, 3);
        let p = t.clone() * t.clone() * t.clone() * t;
        // (1+t)^4 = 1 + 4t + 6t^2 + 4t^3 + t^4
        assert_eq!(p.coeffs(), &[1.0, 4.0, 6.0, 4.0]);
    }

    #[test]
    fn constants_do_not_lower_order() {
        let t = Series::variable(0.0, 1.0, 5);
        let p = Series::constant(2.0) * t.clone() * t;
        assert_eq!(p.order(), 5);
        assert_eq!(p.coeff(2), 2.0);
    }

    #[test]
    fn interval_product_encloses() {
        let i = Interval::new(-1.0, 2.0);
        let j = Interval::new(-1.0, 0.5);
        assert_eq!(i * j, Interval::new(-2.0, 1.0));
        assert_eq!(-j, Interval::new(-0.5, 1.0));
    }

    #[test]
    fn horner_matches_direct() {
        let c = [-6.0, 0.5, 1.0];
        let y = 1.7_f64;
        assert!((horner(&c, &y) - (y * y + 0.5 * y - 6.0)).abs() < 1e-15);
        let z = Complex64::new(0.3, -1.1);
        let d = horner(&c, &z) - (z * z + z * 0.5 - 6.0);
        assert!(d.norm() < 1e-15);
    }
}
