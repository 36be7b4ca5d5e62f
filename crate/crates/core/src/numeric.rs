//! Exact rational arithmetic and `k`-bit precision checks.
//!
//! Every probability, cost and contract value in the crate is a [`Rational`].
//! There is no floating point anywhere on a solver path; `to_f64` exists only
//! for display columns.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// An exact fraction of arbitrary-precision integers, always in reduced form
/// with a positive denominator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    /// Builds `num / den` in reduced form.
    pub fn new(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Self> {
        let den = den.into();
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(BigRational::new(num.into(), den)))
    }

    /// Infallible constructor for literals; panics on a zero denominator.
    pub fn frac(num: i64, den: i64) -> Self {
        Self::new(num, den).expect("zero denominator")
    }

    pub fn integer(value: impl Into<BigInt>) -> Self {
        Rational(BigRational::from_integer(value.into()))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    /// `2^-exp`.
    pub fn dyadic(num: i64, exp: u32) -> Self {
        Rational(BigRational::new(
            BigInt::from(num),
            BigInt::one() << exp as usize,
        ))
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

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn abs(&self) -> Self {
        Rational(self.0.abs())
    }

    pub fn recip(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(self.0.recip()))
    }

    pub fn checked_div(&self, rhs: &Rational) -> Result<Self> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(Rational(&self.0 / &rhs.0))
    }

    pub fn pow(&self, exp: u32) -> Self {
        Rational(Pow::pow(&self.0, exp))
    }

    pub fn floor(&self) -> BigInt {
        self.0.floor().to_integer()
    }

    /// Midpoint `(self + other) / 2`.
    pub fn midpoint(&self, other: &Rational) -> Self {
        Rational((&self.0 + &other.0) / BigInt::from(2))
    }

    pub fn clamp_unit(self) -> Self {
        if self.is_negative() {
            Rational::zero()
        } else if self > Rational::one() {
            Rational::one()
        } else {
            self
        }
    }

    /// Lossy conversion for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Formats the value rounded to `digits` decimal places, half away from
    /// zero, computed exactly.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let scale = BigInt::from(10).pow(digits as u32);
        let scaled = &self.0 * BigRational::from_integer(scale.clone());
        let twice = scaled.abs() * BigInt::from(2) + BigRational::one();
        let rounded = (twice / BigInt::from(2)).floor().to_integer();
        let sign = if self.is_negative() && !rounded.is_zero() { "-" } else { "" };
        let (int_part, frac_part) = rounded.div_rem(&scale);
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
        }
    }

    /// Parses `a/b`, an integer, or, when `k` is declared, a decimal whose
    /// value is a multiple of `2^-k`.
    pub fn parse_with_precision(s: &str, k: Option<BitPrecision>) -> Result<Self> {
        let s = s.trim();
        if s.contains('.') {
            let k = k.ok_or_else(|| {
                Error::Parse(format!("decimal literal {s:?} requires a declared bit precision"))
            })?;
            let value = parse_decimal(s)?;
            if !is_k_valid(&value, k) {
                return Err(Error::Parse(format!(
                    "decimal literal {s:?} is not a multiple of 2^-{}",
                    k.bits()
                )));
            }
            return Ok(value);
        }
        s.parse()
    }
}

fn parse_decimal(s: &str) -> Result<Rational> {
    let bad = || Error::Parse(format!("invalid decimal literal {s:?}"));
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac_part) = body.split_once('.').ok_or_else(bad)?;
    if (int_part.is_empty() && frac_part.is_empty())
        || !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
    let den = BigInt::from(10).pow(frac_part.len() as u32);
    let value = Rational::new(num, den)?;
    Ok(if neg { -value } else { value })
}

impl FromStr for Rational {
    type Err = Error;

    /// Accepts `a/b` or a bare integer, with optional sign on the numerator.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid rational {s:?}"));
        match s.split_once('/') {
            Some((n, d)) => {
                let num: BigInt = n.trim().parse().map_err(|_| bad())?;
                let den: BigInt = d.trim().parse().map_err(|_| bad())?;
                Rational::new(num, den)
            }
            None => {
                let num: BigInt = s.parse().map_err(|_| bad())?;
                Ok(Rational::integer(num))
            }
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<i64> for Rational {
    fn from(v: i64) -> Self {
        Rational::integer(v)
    }
}

impl From<BigInt> for Rational {
    fn from(v: BigInt) -> Self {
        Rational::integer(v)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational(self.0.$method(rhs.0))
            }
        }
        impl<'a> $trait<&'a Rational> for Rational {
            type Output = Rational;
            fn $method(self, rhs: &'a Rational) -> Rational {
                Rational(self.0.$method(&rhs.0))
            }
        }
        impl<'a> $trait<Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: Rational) -> Rational {
                Rational((&self.0).$method(rhs.0))
            }
        }
        impl<'a, 'b> $trait<&'b Rational> for &'a Rational {
            type Output = Rational;
            fn $method(self, rhs: &'b Rational) -> Rational {
                Rational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
// Panics on a zero divisor, like the integer types; use `checked_div` when the
// divisor is data-dependent.
forward_binop!(Div, div);

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl Neg for &Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-&self.0)
    }
}

impl AddAssign<&Rational> for Rational {
    fn add_assign(&mut self, rhs: &Rational) {
        self.0 += &rhs.0;
    }
}

impl AddAssign for Rational {
    fn add_assign(&mut self, rhs: Rational) {
        self.0 += rhs.0;
    }
}

impl SubAssign<&Rational> for Rational {
    fn sub_assign(&mut self, rhs: &Rational) {
        self.0 -= &rhs.0;
    }
}

impl Sum for Rational {
    fn sum<I: Iterator<Item = Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

impl<'a> Sum<&'a Rational> for Rational {
    fn sum<I: Iterator<Item = &'a Rational>>(iter: I) -> Self {
        iter.fold(Rational::zero(), |acc, x| acc + x)
    }
}

/// Reduced fraction `num / den`; errors on a zero denominator.
pub fn reduce(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Result<Rational> {
    Rational::new(num, den)
}

/// Number of bits `k` used to represent instance values: every value is a
/// multiple of `2^-k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitPrecision(u32);

impl BitPrecision {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Domain("bit precision must be positive".into()));
        }
        Ok(BitPrecision(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// `2^k` as an integer.
    pub fn scale(self) -> BigInt {
        BigInt::one() << self.0 as usize
    }

    /// `2^-k`.
    pub fn unit(self) -> Rational {
        Rational::dyadic(1, self.0)
    }
}

impl fmt::Display for BitPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// True iff `r * 2^k` is an integer.
pub fn is_k_valid(r: &Rational, k: BitPrecision) -> bool {
    // The reduced denominator must be a power of two no larger than 2^k.
    let den = r.denom();
    let twos = den.trailing_zeros().unwrap_or(0);
    (den >> twos as usize).is_one() && twos <= k.bits() as u64
}

/// True iff `r = a/b` in lowest terms with `1 <= a, b <= 2^k`.
pub fn in_bounded_set(r: &Rational, k: BitPrecision) -> Result<bool> {
    if !r.is_positive() {
        return Err(Error::Domain(format!("{r} is not positive")));
    }
    let bound = k.scale();
    Ok(r.numer() <= &bound && r.denom() <= &bound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn k(bits: u32) -> BitPrecision {
        BitPrecision::new(bits).unwrap()
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce(2, 4).unwrap(), r("1/2"));
        let zero = reduce(0, 7).unwrap();
        assert_eq!((zero.numer().clone(), zero.denom().clone()), (BigInt::zero(), BigInt::one()));
        assert_eq!(reduce(-3, -6).unwrap(), r("1/2"));
        assert_eq!(reduce(3, -6).unwrap().to_string(), "-1/2");
        assert_eq!(reduce(1, 0), Err(Error::DivisionByZero));
    }

    #[test]
    fn k_validity() {
        assert!(is_k_valid(&r("3/8"), k(3)));
        assert!(!is_k_valid(&r("3/8"), k(2)));
        assert!(!is_k_valid(&r("1/3"), k(8)));
        assert!(is_k_valid(&r("0"), k(1)));
        assert!(is_k_valid(&r("5"), k(1)));
        assert!(is_k_valid(&r("-7/4"), k(2)));
    }

    #[test]
    fn bounded_set_membership() {
        assert!(in_bounded_set(&r("1/2"), k(1)).unwrap());
        assert!(!in_bounded_set(&r("3/5"), k(2)).unwrap());
        assert!(in_bounded_set(&r("1"), k(1)).unwrap());
        assert!(in_bounded_set(&r("4/3"), k(2)).unwrap());
        assert!(matches!(in_bounded_set(&r("0"), k(3)), Err(Error::Domain(_))));
        assert!(matches!(in_bounded_set(&r("-1/2"), k(3)), Err(Error::Domain(_))));
    }

    #[test]
    fn display_and_parse() {
        assert_eq!(r("6/4").to_string(), "3/2");
        assert_eq!(r("-8/4").to_string(), "-2");
        assert_eq!(r(" 12 ").to_string(), "12");
        assert!("1/0".parse::<Rational>().is_err());
        assert!("abc".parse::<Rational>().is_err());
        assert!("0.5".parse::<Rational>().is_err());
    }

    #[test]
    fn decimals_need_precision() {
        assert_eq!(Rational::parse_with_precision("0.375", Some(k(3))).unwrap(), r("3/8"));
        assert_eq!(Rational::parse_with_precision(".5", Some(k(1))).unwrap(), r("1/2"));
        assert!(Rational::parse_with_precision("0.375", Some(k(2))).is_err());
        assert!(Rational::parse_with_precision("0.1", Some(k(8))).is_err());
        assert!(Rational::parse_with_precision("0.5", None).is_err());
        assert_eq!(Rational::parse_with_precision("3/7", None).unwrap(), r("3/7"));
    }

    #[test]
    fn decimal_display() {
        assert_eq!(r("1/3").to_decimal_string(4), "0.3333");
        assert_eq!(r("2/3").to_decimal_string(2), "0.67");
        assert_eq!(r("-1/8").to_decimal_string(2), "-0.13");
        assert_eq!(r("19/180").to_decimal_string(0), "0");
        assert_eq!(r("7/2").to_decimal_string(0), "4");
    }

    #[test]
    fn arithmetic_is_exact() {
        let a = r("1/3");
        let b = r("1/6");
        assert_eq!(&a + &b, r("1/2"));
        assert_eq!(&a - &b, r("1/6"));
        assert_eq!(&a * &b, r("1/18"));
        assert_eq!(a.checked_div(&b).unwrap(), r("2"));
        assert_eq!(a.checked_div(&Rational::zero()), Err(Error::DivisionByZero));
        assert_eq!(r("2/3").pow(3), r("8/27"));
        assert_eq!(r("1/4").midpoint(&r("1/2")), r("3/8"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rational() -> impl Strategy<Value = Rational> {
            (-1000i64..1000, 1i64..1000).prop_map(|(n, d)| Rational::frac(n, d))
        }

        proptest! {
            #[test]
            fn reduced_form_is_canonical(n in -10_000i64..10_000, d in 1i64..10_000, m in 1i64..50) {
                let a = reduce(n, d).unwrap();
                let b = reduce(n * m, d * m).unwrap();
                prop_assert_eq!(&a, &b);
                prop_assert!(a.denom().is_positive());
                prop_assert!(a.numer().gcd(a.denom()).is_one());
                prop_assert_eq!(reduce(a.numer().clone(), a.denom().clone()).unwrap(), a);
            }

            #[test]
            fn add_then_subtract_roundtrips(a in rational(), b in rational()) {
                prop_assert_eq!(&(&a + &b) - &b, a);
            }

            #[test]
            fn k_valid_closed_under_subtraction(x in -4096i64..4096, y in -4096i64..4096, bits in 1u32..12) {
                let kk = k(bits);
                let a = Rational::dyadic(x, bits);
                let b = Rational::dyadic(y, bits);
                prop_assert!(is_k_valid(&a, kk) && is_k_valid(&b, kk));
                prop_assert!(is_k_valid(&(&a - &b), kk));
            }

            #[test]
            fn display_parse_roundtrip(a in rational()) {
                prop_assert_eq!(a.to_string().parse::<Rational>().unwrap(), a);
            }
        }
    }
}
