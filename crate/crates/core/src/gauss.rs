//! Gaussian integers and Gaussian rationals.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An element `re + im*i` of Z[i] with machine-word parts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gi {
    pub re: i64,
    pub im: i64,
}

impl Gi {
    pub const ZERO: Gi = Gi { re: 0, im: 0 };
    pub const ONE: Gi = Gi { re: 1, im: 0 };
    pub const I: Gi = Gi { re: 0, im: 1 };

    pub const fn new(re: i64, im: i64) -> Self {
        Gi { re, im }
    }

    pub fn conj(self) -> Self {
        Gi::new(self.re, -self.im)
    }

    pub fn norm(self) -> i64 {
        self.re * self.re + self.im * self.im
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    /// `i^k` for any integer `k`.
    pub fn unit(k: i64) -> Self {
        match k.rem_euclid(4) {
            0 => Gi::new(1, 0),
            1 => Gi::new(0, 1),
            2 => Gi::new(-1, 0),
            _ => Gi::new(0, -1),
        }
    }

    pub fn checked_add(self, o: Gi) -> Option<Gi> {
        Some(Gi::new(self.re.checked_add(o.re)?, self.im.checked_add(o.im)?))
    }

    pub fn checked_sub(self, o: Gi) -> Option<Gi> {
        Some(Gi::new(self.re.checked_sub(o.re)?, self.im.checked_sub(o.im)?))
    }

    pub fn checked_mul(self, o: Gi) -> Option<Gi> {
        let re = self.re.checked_mul(o.re)?.checked_sub(self.im.checked_mul(o.im)?)?;
        let im = self.re.checked_mul(o.im)?.checked_add(self.im.checked_mul(o.re)?)?;
        Some(Gi::new(re, im))
    }

    /// Euclidean quotient: `self / d` rounded to the nearest Gaussian integer,
    /// so the remainder has norm at most `norm(d)/2`.
    pub fn div_round(self, d: Gi) -> Gi {
        let n = d.norm() as i128;
        let num = (self.re as i128 * d.re as i128 + self.im as i128 * d.im as i128,
                   self.im as i128 * d.re as i128 - self.re as i128 * d.im as i128);
        let round = |x: i128| -> i64 { (2 * x + n).div_euclid(2 * n) as i64 };
        Gi::new(round(num.0), round(num.1))
    }

    /// Exact division, if `d` divides `self`.
    pub fn div_exact(self, d: Gi) -> Option<Gi> {
        let q = self.div_round(d);
        if q.checked_mul(d)? == self {
            Some(q)
        } else {
            None
        }
    }

    /// The unit `u` with `u*self` in the normal quadrant (re > 0, im >= 0).
    pub fn normalizing_unit(self) -> Gi {
        match (self.re.signum(), self.im.signum()) {
            (1, _) if self.im >= 0 => Gi::ONE,
            (_, 1) if self.re <= 0 => Gi::new(0, -1),
            (-1, _) if self.im <= 0 => Gi::new(-1, 0),
            (_, -1) => Gi::I,
            _ => Gi::ONE,
        }
    }
}

impl Add for Gi {
    type Output = Gi;
    fn add(self, o: Gi) -> Gi {
        Gi::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Gi {
    type Output = Gi;
    fn sub(self, o: Gi) -> Gi {
        Gi::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Gi {
    type Output = Gi;
    fn mul(self, o: Gi) -> Gi {
        Gi::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl Neg for Gi {
    type Output = Gi;
    fn neg(self) -> Gi {
        Gi::new(-self.re, -self.im)
    }
}

impl AddAssign for Gi {
    fn add_assign(&mut self, o: Gi) {
        *self = *self + o;
    }
}

impl fmt::Display for Gi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re, self.im) {
            (r, 0) => write!(f, "{r}"),
            (0, 1) => write!(f, "i"),
            (0, -1) => write!(f, "-i"),
            (0, m) => write!(f, "{m}i"),
            (r, m) if m < 0 => write!(f, "{r}-{}i", -m),
            (r, m) => write!(f, "{r}+{m}i"),
        }
    }
}

/// An element of Q(i), kept in lowest terms by `BigRational`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GaussRat {
    pub re: BigRational,
    pub im: BigRational,
}

impl GaussRat {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        GaussRat { re, im }
    }

    pub fn zero() -> Self {
        GaussRat::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        GaussRat::from_int(1)
    }

    pub fn i() -> Self {
        GaussRat::new(BigRational::zero(), BigRational::one())
    }

    pub fn from_int(n: i64) -> Self {
        GaussRat::new(BigRational::from_integer(n.into()), BigRational::zero())
    }

    pub fn from_bigint(n: BigInt) -> Self {
        GaussRat::new(BigRational::from_integer(n), BigRational::zero())
    }

    pub fn from_gi(g: Gi) -> Self {
        GaussRat::new(
            BigRational::from_integer(g.re.into()),
            BigRational::from_integer(g.im.into()),
        )
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        GaussRat::new(BigRational::new(num.into(), den.into()), BigRational::zero())
    }

    /// `i^k`.
    pub fn unit(k: i64) -> Self {
        GaussRat::from_gi(Gi::unit(k))
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.re.is_one() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        GaussRat::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm();
        Some(GaussRat::new(&self.re / &n, -&self.im / &n))
    }

    pub fn pow(&self, e: i64) -> Option<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = GaussRat::one();
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &b;
            }
            b = &b * &b;
            k >>= 1;
        }
        Some(acc)
    }

    /// The value as an integer, when it is one.
    pub fn to_integer(&self) -> Option<BigInt> {
        if self.im.is_zero() && self.re.is_integer() {
            Some(self.re.to_integer())
        } else {
            None
        }
    }

    pub fn to_i64(&self) -> Option<i64> {
        self.to_integer()?.to_i64()
    }

    pub fn to_complex(&self) -> num_complex::Complex64 {
        let f = |r: &BigRational| r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN);
        num_complex::Complex64::new(f(&self.re), f(&self.im))
    }
}

impl fmt::Display for GaussRat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", self.re);
        }
        if self.re.is_zero() {
            return write!(f, "{}i", self.im);
        }
        if self.im.is_negative() {
            write!(f, "{}-{}i", self.re, -&self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

macro_rules! gr_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl<'a> $tr<&'a GaussRat> for &'a GaussRat {
            type Output = GaussRat;
            fn $m(self, o: &'a GaussRat) -> GaussRat {
                let f: fn(&GaussRat, &GaussRat) -> GaussRat = $body;
                f(self, o)
            }
        }
        impl $tr for GaussRat {
            type Output = GaussRat;
            fn $m(self, o: GaussRat) -> GaussRat {
                (&self).$m(&o)
            }
        }
    };
}

gr_binop!(Add, add, |a, b| GaussRat::new(&a.re + &b.re, &a.im + &b.im));
gr_binop!(Sub, sub, |a, b| GaussRat::new(&a.re - &b.re, &a.im - &b.im));
gr_binop!(Mul, mul, |a, b| GaussRat::new(
    &a.re * &b.re - &a.im * &b.im,
    &a.re * &b.im + &a.im * &b.re
));
gr_binop!(Div, div, |a, b| a * &b.inv().expect("division by zero GaussRat"));

impl Neg for GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat::new(-self.re, -self.im)
    }
}

impl Neg for &GaussRat {
    type Output = GaussRat;
    fn neg(self) -> GaussRat {
        GaussRat::new(-&self.re, -&self.im)
    }
}

impl AddAssign<&GaussRat> for GaussRat {
    fn add_assign(&mut self, o: &GaussRat) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

impl SubAssign<&GaussRat> for GaussRat {
    fn sub_assign(&mut self, o: &GaussRat) {
        self.re -= &o.re;
        self.im -= &o.im;
    }
}

impl MulAssign<&GaussRat> for GaussRat {
    fn mul_assign(&mut self, o: &GaussRat) {
        *self = &*self * o;
    }
}

fn int_json(n: &BigInt) -> serde_json::Value {
    match n.to_i64() {
        Some(v) => serde_json::Value::from(v),
        None => serde_json::Value::from(n.to_string()),
    }
}

fn json_int(v: &serde_json::Value) -> Option<BigInt> {
    match v {
        serde_json::Value::Number(n) => n.as_i64().map(BigInt::from),
        serde_json::Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

impl GaussRat {
    /// `[reNum, reDen, imNum, imDen]`; integers beyond 64 bits become strings.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(vec![
            int_json(self.re.numer()),
            int_json(self.re.denom()),
            int_json(self.im.numer()),
            int_json(self.im.denom()),
        ])
    }

    pub fn from_json(v: &serde_json::Value) -> Option<Self> {
        let a = v.as_array()?;
        if a.len() != 4 {
            return None;
        }
        let p: Vec<BigInt> = a.iter().map(json_int).collect::<Option<_>>()?;
        if p[1].is_zero() || p[3].is_zero() {
            return None;
        }
        Some(GaussRat::new(
            BigRational::new(p[0].clone(), p[1].clone()),
            BigRational::new(p[2].clone(), p[3].clone()),
        ))
    }
}

impl Serialize for GaussRat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GaussRat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        GaussRat::from_json(&v).ok_or_else(|| serde::de::Error::custom("bad GaussRat"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_remainder_is_small() {
        for (a, b) in [((7, 3), (2, 1)), ((-5, 9), (1, -3)), ((4, 0), (1, 1))] {
            let (a, b) = (Gi::new(a.0, a.1), Gi::new(b.0, b.1));
            let q = a.div_round(b);
            let r = a - q * b;
            assert!(2 * r.norm() <= b.norm(), "{a} / {b}");
        }
    }

    #[test]
    fn normalizing_unit_lands_in_quadrant() {
        for re in -3..=3 {
            for im in -3..=3 {
                let g = Gi::new(re, im);
                if g.is_zero() {
                    continue;
                }
                let h = g.normalizing_unit() * g;
                assert!(h.re > 0 && h.im >= 0, "{g} -> {h}");
            }
        }
    }

    #[test]
    fn gaussrat_inverse_and_json() {
        let z = GaussRat::new(BigRational::new(3.into(), 4.into()), BigRational::new((-2).into(), 5.into()));
        assert!((&z * &z.inv().unwrap()).is_one());
        assert_eq!(GaussRat::from_json(&z.to_json()), Some(z.clone()));
        assert_eq!(GaussRat::i().pow(4), Some(GaussRat::one()));
        assert_eq!(z.to_string(), "3/4-2/5i");
    }
}
