//! Exact arithmetic primitives: N-adic valuations, N-free parts and an
//! exact rational type used for zero-set membership.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{MoranError, Result};

/// `value = N^exponent * unit` with `N` not dividing `unit`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Valuation {
    pub exponent: u32,
    pub unit: BigInt,
}

impl Valuation {
    pub fn one() -> Self {
        Valuation { exponent: 0, unit: BigInt::one() }
    }

    /// Rebuilds `N^exponent * unit`.
    pub fn reconstruct(&self, n: u32) -> BigInt {
        self.unit.clone() * BigInt::from(n).pow(self.exponent)
    }
}

/// N-adic valuation by repeated division.
pub fn valuation(a: &BigInt, n: u32) -> Result<Valuation> {
    if a.is_zero() {
        return Err(MoranError::Domain("valuation of zero undefined".into()));
    }
    check_base(n)?;
    let base = BigInt::from(n);
    let mut unit = a.clone();
    let mut exponent = 0u32;
    loop {
        let (q, r) = unit.div_rem(&base);
        if !r.is_zero() {
            break;
        }
        unit = q;
        exponent += 1;
    }
    Ok(Valuation { exponent, unit })
}

/// Valuation of a machine integer; `tau_N` for the sequence entries.
pub fn valuation_i64(a: i64, n: u32) -> Result<(u32, i64)> {
    if a == 0 {
        return Err(MoranError::Domain("valuation of zero undefined".into()));
    }
    check_base(n)?;
    let base = n as i64;
    let mut unit = a;
    let mut e = 0;
    while unit % base == 0 {
        unit /= base;
        e += 1;
    }
    Ok((e, unit))
}

/// Valuation of a product, accumulated factor by factor.
pub fn product_valuation(factors: &[BigInt], n: u32) -> Result<Valuation> {
    let mut acc = Valuation::one();
    for f in factors {
        let v = valuation(f, n)?;
        acc.exponent += v.exponent;
        acc.unit *= v.unit;
    }
    Ok(acc)
}

fn check_base(n: u32) -> Result<()> {
    if n < 2 {
        return Err(MoranError::Domain(format!("valuation base must be >= 2, got {n}")));
    }
    Ok(())
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    a.gcd(&b)
}

/// Exact rational number, always in lowest terms with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    pub fn new(numer: BigInt, denom: BigInt) -> Result<Self> {
        if denom.is_zero() {
            return Err(MoranError::Domain("zero denominator".into()));
        }
        Ok(ExactRational(BigRational::new(numer, denom)))
    }

    pub fn from_integer(n: BigInt) -> Self {
        ExactRational(BigRational::from_integer(n))
    }

    pub fn zero() -> Self {
        ExactRational(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactRational(BigRational::one())
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        ExactRational(self.0.abs())
    }

    pub fn as_big_rational(&self) -> &BigRational {
        &self.0
    }

    /// Fractional part in `[0, 1)`.
    pub fn fract_floor(&self) -> ExactRational {
        let (n, d) = (self.numer(), self.denom());
        ExactRational(BigRational::new(n.mod_floor(d), d.clone()))
    }

    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(self.numer(), self.denom())
    }

    /// N-adic valuation of a nonzero rational, `tau(p) - tau(q)`, with the
    /// N-free numerator and denominator.
    pub fn valuation(&self, n: u32) -> Result<(i64, BigInt, BigInt)> {
        let vp = valuation(self.numer(), n)?;
        let vq = valuation(self.denom(), n)?;
        Ok((vp.exponent as i64 - vq.exponent as i64, vp.unit, vq.unit))
    }
}

/// Converts `n/d` to the nearest-ish f64 without overflowing for large operands.
pub fn ratio_to_f64(n: &BigInt, d: &BigInt) -> f64 {
    if let (Some(a), Some(b)) = (n.to_f64(), d.to_f64()) {
        if a.is_finite() && b.is_finite() && b != 0.0 {
            let (na, nb) = (n.bits(), d.bits());
            if na <= 53 && nb <= 53 {
                return a / b;
            }
        }
    }
    // Shift both operands down to ~60 significant bits.
    let shift = n.bits().max(d.bits()).saturating_sub(60);
    let scaled_n = (n >> shift).to_f64().unwrap_or(0.0);
    let scaled_d = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
    if scaled_d == 0.0 {
        // denominator much smaller than numerator
        let e = n.bits() as i64 - d.bits() as i64;
        return n.signum().to_f64().unwrap_or(0.0) * 2f64.powi(e.min(1023) as i32);
    }
    scaled_n / scaled_d
}

impl fmt::Debug for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl FromStr for ExactRational {
    type Err = MoranError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse =
            |x: &str| x.trim().parse::<BigInt>().map_err(|_| MoranError::Parse(format!("invalid rational '{s}'")));
        match s.split_once('/') {
            Some((a, b)) => ExactRational::new(parse(a)?, parse(b)?),
            None => Ok(ExactRational::from_integer(parse(s)?)),
        }
    }
}

impl Serialize for ExactRational {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactRational {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl From<i64> for ExactRational {
    fn from(v: i64) -> Self {
        ExactRational::from_integer(BigInt::from(v))
    }
}

impl From<BigInt> for ExactRational {
    fn from(v: BigInt) -> Self {
        ExactRational::from_integer(v)
    }
}

impl From<BigRational> for ExactRational {
    fn from(v: BigRational) -> Self {
        ExactRational(v)
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident) => {
        impl $tr for ExactRational {
            type Output = ExactRational;
            fn $m(self, rhs: ExactRational) -> ExactRational {
                ExactRational(self.0.$m(rhs.0))
            }
        }
        impl<'a> $tr<&'a ExactRational> for &'a ExactRational {
            type Output = ExactRational;
            fn $m(self, rhs: &'a ExactRational) -> ExactRational {
                ExactRational((&self.0).$m(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl Neg for ExactRational {
    type Output = ExactRational;
    fn neg(self) -> ExactRational {
        ExactRational(-self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(a: i64, n: u32) -> (u32, BigInt) {
        let r = valuation(&BigInt::from(a), n).unwrap();
        (r.exponent, r.unit)
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(v(18, 2), (1, BigInt::from(9)));
        assert_eq!(v(4, 3), (0, BigInt::from(4)));
        assert_eq!(v(144, 2), (4, BigInt::from(9)));
        assert_eq!(v(-144, 2), (4, BigInt::from(-9)));
    }

    #[test]
    fn valuation_of_zero_is_an_error() {
        let err = valuation(&BigInt::zero(), 2).unwrap_err();
        assert!(err.to_string().contains("valuation of zero undefined"));
        assert!(valuation_i64(0, 3).is_err());
    }

    #[test]
    fn product_valuation_examples() {
        let big = |xs: &[i64]| xs.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>();
        let r = product_valuation(&big(&[18, 18, 18]), 2).unwrap();
        assert_eq!((r.exponent, r.unit), (3, BigInt::from(729)));
        let r = product_valuation(&[], 2).unwrap();
        assert_eq!((r.exponent, r.unit), (0, BigInt::one()));
        let r = product_valuation(&big(&[36, 18]), 2).unwrap();
        assert_eq!((r.exponent, r.unit), (3, BigInt::from(81)));
        assert!(product_valuation(&big(&[3, 0]), 2).is_err());
    }

    #[test]
    fn reconstruction_up_to_1e100() {
        let a: BigInt = "7".repeat(100).parse::<BigInt>().unwrap() * BigInt::from(3).pow(17);
        let r = valuation(&a, 3).unwrap();
        assert!(r.exponent >= 17);
        assert_eq!(r.reconstruct(3), a);
        assert!(!(r.unit.clone() % 3u32).is_zero());
    }

    #[test]
    fn rational_parse_and_display() {
        let r: ExactRational = "6/-4".parse().unwrap();
        assert_eq!(r.to_string(), "-3/2");
        assert!(r.denom() > &BigInt::zero());
        assert_eq!("12".parse::<ExactRational>().unwrap().to_string(), "12");
        assert!("1/0".parse::<ExactRational>().is_err());
        assert_eq!(r.fract_floor().to_string(), "1/2");
    }

    #[test]
    fn ratio_to_f64_handles_huge_operands() {
        let n = BigInt::from(3).pow(400);
        let d = BigInt::from(3).pow(399) * BigInt::from(2);
        assert!((ratio_to_f64(&n, &d) - 1.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn valuation_is_additive(a in 1i64..1_000_000_000, b in 1i64..1_000_000_000, n in prop::sample::select(vec![2u32, 3, 5, 7])) {
            let va = valuation(&BigInt::from(a), n).unwrap();
            let vb = valuation(&BigInt::from(b), n).unwrap();
            let vab = valuation(&(BigInt::from(a) * BigInt::from(b)), n).unwrap();
            prop_assert_eq!(vab.exponent, va.exponent + vb.exponent);
            prop_assert_eq!(vab.unit, va.unit * vb.unit);
        }

        #[test]
        fn reconstruction_is_exact(digits in "[1-9][0-9]{0,99}", n in prop::sample::select(vec![2u32, 3, 5])) {
            let a: BigInt = digits.parse().unwrap();
            let r = valuation(&a, n).unwrap();
            prop_assert_eq!(r.reconstruct(n), a);
            prop_assert!(!(r.unit.clone() % n).is_zero());
        }

        #[test]
        fn rational_add_sub_roundtrip(p in -10_000i64..10_000, q in 1i64..10_000, r in -10_000i64..10_000, s in 1i64..10_000) {
            let x = ExactRational::new(p.into(), q.into()).unwrap();
            let y = ExactRational::new(r.into(), s.into()).unwrap();
            let back = (x.clone() + y.clone()) - y;
            prop_assert_eq!(back.numer(), x.numer());
            prop_assert_eq!(back.denom(), x.denom());
        }
    }
}
