use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use rug::float::Constant;
use rug::Float;

/// A complex number with MPFR real and imaginary parts. Binary operations
/// run at the smaller of the operands' precisions.
#[derive(Clone, Debug, PartialEq)]
pub struct HighComplex {
    pub re: Float,
    pub im: Float,
}

impl HighComplex {
    pub fn new(re: Float, im: Float) -> Self {
        let prec = re.prec().min(im.prec());
        Self {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_f64(prec: u32, re: f64, im: f64) -> Self {
        Self {
            re: Float::with_val(prec, re),
            im: Float::with_val(prec, im),
        }
    }

    pub fn from_int(prec: u32, n: i64) -> Self {
        Self::from_f64(prec, 0.0, 0.0).add_int(n)
    }

    pub fn zero(prec: u32) -> Self {
        Self::from_f64(prec, 0.0, 0.0)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(prec, 1.0, 0.0)
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().min(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        Self {
            re: Float::with_val(prec, &self.re),
            im: Float::with_val(prec, &self.im),
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }

    pub fn add_int(mut self, n: i64) -> Self {
        self.re += n;
        self
    }

    pub fn scale(&self, s: &Float) -> Self {
        let prec = self.prec().min(s.prec());
        Self {
            re: Float::with_val(prec, &self.re * s),
            im: Float::with_val(prec, &self.im * s),
        }
    }

    pub fn scale_int(&self, n: i64) -> Self {
        let prec = self.prec();
        Self {
            re: Float::with_val(prec, &self.re * n),
            im: Float::with_val(prec, &self.im * n),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re.clone(),
            im: Float::with_val(self.im.prec(), -&self.im),
        }
    }

    pub fn norm_sqr(&self) -> Float {
        let prec = self.prec();
        let mut n = Float::with_val(prec, self.re.square_ref());
        n += Float::with_val(prec, self.im.square_ref());
        n
    }

    pub fn abs(&self) -> Float {
        self.norm_sqr().sqrt()
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn recip(&self) -> Self {
        let n = self.norm_sqr();
        let prec = self.prec();
        Self {
            re: Float::with_val(prec, &self.re / &n),
            im: Float::with_val(prec, -Float::with_val(prec, &self.im / &n)),
        }
    }

    /// Integer power by repeated squaring; negative exponents invert.
    pub fn powi(&self, n: i64) -> Self {
        let mut base = if n < 0 { self.recip() } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one(self.prec());
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let prec = self.prec();
        let r = Float::with_val(prec, self.re.exp_ref());
        let (s, c) = Float::with_val(prec, &self.im).sin_cos(Float::new(prec));
        Self {
            re: Float::with_val(prec, &r * &c),
            im: Float::with_val(prec, &r * &s),
        }
    }

    /// `exp(2πi·self·k)`, the usual `q`-parameter (with `k` rational scale).
    pub fn q_power(&self, num: i64, den: i64) -> Self {
        let prec = self.prec();
        let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
        let factor = Float::with_val(prec, two_pi * num) / den;
        let z = Self {
            re: -Float::with_val(prec, &self.im * &factor),
            im: Float::with_val(prec, &self.re * &factor),
        };
        z.exp()
    }

    /// `|self - other|` as an f64, convenient for tolerance checks.
    pub fn dist(&self, other: &Self) -> f64 {
        (self - other).abs().to_f64()
    }

    /// `(a·self + b)/(c·self + d)` for integer entries.
    pub fn mobius(&self, a: i64, b: i64, c: i64, d: i64) -> Self {
        let num = self.scale_int(a).add_int(b);
        let den = self.scale_int(c).add_int(d);
        &num / &den
    }
}

impl fmt::Display for HighComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (re, im) = self.to_f64();
        if im < 0.0 {
            write!(f, "{re} - {}i", -im)
        } else {
            write!(f, "{re} + {im}i")
        }
    }
}

impl<'a> Add<&'a HighComplex> for &'a HighComplex {
    type Output = HighComplex;
    fn add(self, rhs: &HighComplex) -> HighComplex {
        let prec = self.prec().min(rhs.prec());
        HighComplex {
            re: Float::with_val(prec, &self.re + &rhs.re),
            im: Float::with_val(prec, &self.im + &rhs.im),
        }
    }
}

impl<'a> Sub<&'a HighComplex> for &'a HighComplex {
    type Output = HighComplex;
    fn sub(self, rhs: &HighComplex) -> HighComplex {
        let prec = self.prec().min(rhs.prec());
        HighComplex {
            re: Float::with_val(prec, &self.re - &rhs.re),
            im: Float::with_val(prec, &self.im - &rhs.im),
        }
    }
}

impl<'a> Mul<&'a HighComplex> for &'a HighComplex {
    type Output = HighComplex;
    fn mul(self, rhs: &HighComplex) -> HighComplex {
        let prec = self.prec().min(rhs.prec());
        let ac = Float::with_val(prec, &self.re * &rhs.re);
        let bd = Float::with_val(prec, &self.im * &rhs.im);
        let ad = Float::with_val(prec, &self.re * &rhs.im);
        let bc = Float::with_val(prec, &self.im * &rhs.re);
        HighComplex {
            re: ac - bd,
            im: ad + bc,
        }
    }
}

impl<'a> Div<&'a HighComplex> for &'a HighComplex {
    type Output = HighComplex;
    fn div(self, rhs: &HighComplex) -> HighComplex {
        self * &rhs.recip()
    }
}

impl Neg for HighComplex {
    type Output = HighComplex;
    fn neg(self) -> HighComplex {
        HighComplex {
            re: -self.re,
            im: -self.im,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_identities() {
        let z = HighComplex::from_f64(128, 0.3, 1.7);
        let w = HighComplex::from_f64(128, -2.0, 0.5);
        let back = &(&z * &w) / &w;
        assert!(back.dist(&z) < 1e-35);
        assert!(z.powi(-3).dist(&z.recip().powi(3)) < 1e-35);
        assert!((&z.powi(5) - &(&z.square().square() * &z)).abs().to_f64() < 1e-33);
    }

    #[test]
    fn exp_of_i_pi_is_minus_one() {
        let pi = Float::with_val(200, Constant::Pi);
        let z = HighComplex::new(Float::with_val(200, 0), pi);
        let e = z.exp();
        assert!(e.dist(&HighComplex::from_f64(200, -1.0, 0.0)) < 1e-55);
    }

    #[test]
    fn mixed_precision_takes_minimum() {
        let a = HighComplex::from_f64(64, 1.0, 1.0);
        let b = HighComplex::from_f64(256, 1.0, 1.0);
        assert_eq!((&a + &b).prec(), 64);
        assert_eq!((&b * &a).prec(), 64);
    }
}
