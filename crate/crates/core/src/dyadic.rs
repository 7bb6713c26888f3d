//! Exact binary rationals `m * 2^e` and outward-rounded enclosures built on them.
//!
//! Every dissection ratio of the construction is a dyadic rational, so interval
//! endpoints, lengths and the products `Θ_k` are exactly representable. The
//! mantissas of those products can grow to millions of bits, so the module also
//! offers directed rounding to a fixed number of significant bits and a small
//! interval type ([`DyadicInterval`]) whose endpoints are rounded outward.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseDyadicError {
    #[error("empty dyadic literal")]
    Empty,
    #[error("malformed dyadic literal `{0}` (expected `p`, `p/2^q` or `p/q` with q a power of two)")]
    Malformed(String),
    #[error("denominator of `{0}` is not a power of two")]
    NotDyadic(String),
}

/// Rounding direction for [`DyadicRational::round`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// An exact rational number `mant * 2^exp` with `mant` odd (or zero).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    mant: BigInt,
    exp: i64,
}

impl DyadicRational {
    pub fn new(mant: impl Into<BigInt>, exp: i64) -> Self {
        let mut d = DyadicRational { mant: mant.into(), exp };
        d.normalize();
        d
    }

    pub fn zero() -> Self {
        DyadicRational { mant: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        DyadicRational { mant: BigInt::one(), exp: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(v, 0)
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Self {
        DyadicRational { mant: BigInt::one(), exp: e }
    }

    /// `1/2`.
    pub fn half() -> Self {
        Self::pow2(-1)
    }

    /// Exact conversion of a finite `f64`.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Self::zero());
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1i64 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (m, e) = if raw_exp == 0 {
            (frac as i64, -1074)
        } else {
            ((frac | (1u64 << 52)) as i64, raw_exp - 1075)
        };
        Some(Self::new(sign * m, e))
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz as usize;
            self.exp += tz as i64;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    /// Number of significant bits of the odd mantissa (0 for zero).
    pub fn mantissa_bits(&self) -> u64 {
        self.mant.bits()
    }

    /// Exponent of the leading bit: `2^top <= |x| < 2^(top+1)`.
    pub fn top(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64 - 1)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn signum(&self) -> i8 {
        match self.mant.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn is_positive(&self) -> bool {
        self.signum() > 0
    }

    pub fn is_negative(&self) -> bool {
        self.signum() < 0
    }

    pub fn abs(&self) -> Self {
        DyadicRational { mant: self.mant.abs(), exp: self.exp }
    }

    /// Exact multiplication by `2^e`.
    pub fn mul_pow2(&self, e: i64) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        DyadicRational { mant: self.mant.clone(), exp: self.exp + e }
    }

    /// Round to at most `prec` significant bits in the given direction.
    pub fn round(&self, prec: u64, dir: Round) -> Self {
        let bits = self.mant.bits();
        if prec == 0 || bits <= prec {
            return self.clone();
        }
        let shift = bits - prec;
        let divisor = BigInt::one() << shift as usize;
        let (q, r) = self.mant.div_mod_floor(&divisor);
        let q = if dir == Round::Up && !r.is_zero() { q + 1 } else { q };
        Self::new(q, self.exp + shift as i64)
    }

    /// `self + other` rounded to `prec` bits. Avoids materializing huge exact
    /// sums when the operands differ by many orders of magnitude.
    pub fn add_rounded(&self, other: &Self, prec: u64, dir: Round) -> Self {
        if other.is_zero() {
            return self.round(prec, dir);
        }
        if self.is_zero() {
            return other.round(prec, dir);
        }
        let (ta, tb) = (self.top().unwrap(), other.top().unwrap());
        let (big, small, tbig, tsmall) = if ta >= tb { (self, other, ta, tb) } else { (other, self, tb, ta) };
        if tbig - tsmall > prec as i64 + 4 {
            // |small| is below the rounding quantum: widen big by a quarter
            // quantum in the direction of small, then round.
            let r = big.round(prec + 2, dir);
            let nudge = DyadicRational::pow2(tbig - prec as i64 - 1);
            return match (dir, small.signum()) {
                (Round::Up, 1) => (&r + &nudge).round(prec, Round::Up),
                (Round::Down, -1) => (&r - &nudge).round(prec, Round::Down),
                _ => r.round(prec, dir),
            };
        }
        (self + other).round(prec, dir)
    }

    pub fn sub_rounded(&self, other: &Self, prec: u64, dir: Round) -> Self {
        self.add_rounded(&-other, prec, dir)
    }

    pub fn mul_rounded(&self, other: &Self, prec: u64, dir: Round) -> Self {
        (self * other).round(prec, dir)
    }

    /// Nearest `f64` (up to a double rounding in the last place); saturates to
    /// `±inf` or `±0` outside the native range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits();
        let (m, shift) = if bits > 64 {
            let s = bits - 64;
            ((&self.mant >> s as usize), s as i64)
        } else {
            (self.mant.clone(), 0)
        };
        let mf = m.to_f64().unwrap_or(0.0);
        ldexp(mf, self.exp + shift)
    }

    /// `log2 |x|` as a float (`-inf` for zero).
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let bits = self.mant.bits();
        let (m, shift) = if bits > 64 {
            let s = bits - 64;
            ((self.mant.abs() >> s as usize), s as i64)
        } else {
            (self.mant.abs(), 0)
        };
        m.to_f64().unwrap_or(1.0).log2() + (self.exp + shift) as f64
    }

    /// `p/2^q` rendering with `q >= 0`.
    pub fn to_ratio_string(&self) -> String {
        if self.exp >= 0 {
            let p: BigInt = &self.mant << self.exp as usize;
            format!("{p}/2^0")
        } else {
            format!("{}/2^{}", self.mant, -self.exp)
        }
    }

    /// Numerator `p` and exponent `q >= 0` with `self = p / 2^q`.
    pub fn to_ratio(&self) -> (BigInt, u64) {
        if self.exp >= 0 {
            (&self.mant << self.exp as usize, 0)
        } else {
            (self.mant.clone(), (-self.exp) as u64)
        }
    }

    pub fn min(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn max(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

/// `x * 2^e` without intermediate overflow for large `|e|`.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

impl Default for DyadicRational {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ratio_string())
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.mant.bits() > 128 {
            write!(f, "Dyadic(~{:e}, {} bits)", self.to_f64(), self.mant.bits())
        } else {
            write!(f, "Dyadic({})", self.to_ratio_string())
        }
    }
}

impl FromStr for DyadicRational {
    type Err = ParseDyadicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ParseDyadicError::Empty);
        }
        let malformed = || ParseDyadicError::Malformed(s.to_string());
        match s.split_once('/') {
            None => {
                let p: BigInt = s.parse().map_err(|_| malformed())?;
                Ok(Self::new(p, 0))
            }
            Some((num, den)) => {
                let p: BigInt = num.trim().parse().map_err(|_| malformed())?;
                let den = den.trim();
                if let Some(q) = den.strip_prefix("2^") {
                    let q: i64 = q.trim().parse().map_err(|_| malformed())?;
                    return Ok(Self::new(p, -q));
                }
                let d: BigInt = den.parse().map_err(|_| malformed())?;
                if d.sign() != Sign::Plus {
                    return Err(malformed());
                }
                let tz = d.trailing_zeros().unwrap_or(0);
                if (&d >> tz as usize) != BigInt::one() {
                    return Err(ParseDyadicError::NotDyadic(s.to_string()));
                }
                Ok(Self::new(p, -(tz as i64)))
            }
        }
    }
}

impl Serialize for DyadicRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_ratio_string())
    }
}

impl<'de> Deserialize<'de> for DyadicRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let (ta, tb) = (self.top().unwrap(), other.top().unwrap());
        if ta != tb {
            let mag = ta.cmp(&tb);
            return if sa > 0 { mag } else { mag.reverse() };
        }
        // Same leading exponent: aligning costs at most the longer mantissa.
        let e = self.exp.min(other.exp);
        let a: BigInt = &self.mant << (self.exp - e) as usize;
        let b: BigInt = &other.mant << (other.exp - e) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a DyadicRational> for &'a DyadicRational {
    type Output = DyadicRational;
    fn add(self, rhs: &DyadicRational) -> DyadicRational {
        if rhs.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return rhs.clone();
        }
        let e = self.exp.min(rhs.exp);
        let a: BigInt = &self.mant << (self.exp - e) as usize;
        let b: BigInt = &rhs.mant << (rhs.exp - e) as usize;
        DyadicRational::new(a + b, e)
    }
}

impl<'a> Sub<&'a DyadicRational> for &'a DyadicRational {
    type Output = DyadicRational;
    fn sub(self, rhs: &DyadicRational) -> DyadicRational {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a DyadicRational> for &'a DyadicRational {
    type Output = DyadicRational;
    fn mul(self, rhs: &DyadicRational) -> DyadicRational {
        DyadicRational::new(&self.mant * &rhs.mant, self.exp + rhs.exp)
    }
}

impl Neg for &DyadicRational {
    type Output = DyadicRational;
    fn neg(self) -> DyadicRational {
        DyadicRational { mant: -&self.mant, exp: self.exp }
    }
}

impl Neg for DyadicRational {
    type Output = DyadicRational;
    fn neg(self) -> DyadicRational {
        DyadicRational { mant: -self.mant, exp: self.exp }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<DyadicRational> for DyadicRational {
            type Output = DyadicRational;
            fn $m(self, rhs: DyadicRational) -> DyadicRational {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&DyadicRational> for DyadicRational {
            type Output = DyadicRational;
            fn $m(self, rhs: &DyadicRational) -> DyadicRational {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// A closed interval `[lo, hi]` with dyadic endpoints. Arithmetic rounds the
/// endpoints outward to `prec` significant bits, so the true result of the
/// corresponding real operation always lies inside.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub lo: DyadicRational,
    pub hi: DyadicRational,
}

impl DyadicInterval {
    pub fn point(x: DyadicRational) -> Self {
        DyadicInterval { lo: x.clone(), hi: x }
    }

    pub fn new(lo: DyadicRational, hi: DyadicRational) -> Self {
        debug_assert!(lo <= hi, "inverted interval");
        DyadicInterval { lo, hi }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn exact(&self) -> Option<&DyadicRational> {
        self.is_exact().then_some(&self.lo)
    }

    pub fn contains(&self, x: &DyadicRational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn width(&self) -> DyadicRational {
        &self.hi - &self.lo
    }

    pub fn add(&self, o: &Self, prec: u64) -> Self {
        DyadicInterval {
            lo: self.lo.add_rounded(&o.lo, prec, Round::Down),
            hi: self.hi.add_rounded(&o.hi, prec, Round::Up),
        }
    }

    pub fn sub(&self, o: &Self, prec: u64) -> Self {
        DyadicInterval {
            lo: self.lo.sub_rounded(&o.hi, prec, Round::Down),
            hi: self.hi.sub_rounded(&o.lo, prec, Round::Up),
        }
    }

    pub fn neg(&self) -> Self {
        DyadicInterval { lo: -&self.hi, hi: -&self.lo }
    }

    pub fn mul(&self, o: &Self, prec: u64) -> Self {
        if self.is_exact() && o.is_exact() {
            let p = &self.lo * &o.lo;
            return DyadicInterval { lo: p.round(prec, Round::Down), hi: p.round(prec, Round::Up) };
        }
        let cands = [&self.lo * &o.lo, &self.lo * &o.hi, &self.hi * &o.lo, &self.hi * &o.hi];
        let lo = cands.iter().min().unwrap().round(prec, Round::Down);
        let hi = cands.iter().max().unwrap().round(prec, Round::Up);
        DyadicInterval { lo, hi }
    }

    pub fn mul_pow2(&self, e: i64) -> Self {
        DyadicInterval { lo: self.lo.mul_pow2(e), hi: self.hi.mul_pow2(e) }
    }

    /// Enclosure of `|x|` over the interval.
    pub fn abs(&self) -> Self {
        if self.lo.signum() >= 0 {
            self.clone()
        } else if self.hi.signum() <= 0 {
            self.neg()
        } else {
            DyadicInterval { lo: DyadicRational::zero(), hi: DyadicRational::max(&-&self.lo, &self.hi) }
        }
    }

    /// Midpoint (exact) and an upper bound on the half-width.
    pub fn midpoint_radius(&self) -> (DyadicRational, DyadicRational) {
        let mid = (&self.lo + &self.hi).mul_pow2(-1);
        let rad = (&self.hi - &self.lo).mul_pow2(-1);
        (mid, rad)
    }

    /// Like [`midpoint_radius`](Self::midpoint_radius) but with the midpoint
    /// rounded to `prec` bits and the radius widened to compensate.
    pub fn midpoint_radius_rounded(&self, prec: u64) -> (DyadicRational, DyadicRational) {
        let mid = self.lo.add_rounded(&self.hi, prec, Round::Down).mul_pow2(-1);
        let r1 = self.hi.sub_rounded(&mid, prec, Round::Up);
        let r2 = mid.sub_rounded(&self.lo, prec, Round::Up);
        (mid, DyadicRational::max(&r1, &r2))
    }

    pub fn to_f64_bounds(&self) -> (f64, f64) {
        (self.lo.to_f64(), self.hi.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(s: &str) -> DyadicRational {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_render() {
        assert_eq!(d("3/8"), DyadicRational::new(3, -3));
        assert_eq!(d("-15/2^5"), DyadicRational::new(-15, -5));
        assert_eq!(d("4"), DyadicRational::pow2(2));
        assert_eq!(d("12/2^2").to_ratio_string(), "3/2^0");
        assert_eq!(d("-9/32").to_ratio_string(), "-9/2^5");
        assert!(matches!("1/3".parse::<DyadicRational>(), Err(ParseDyadicError::NotDyadic(_))));
        assert!("abc".parse::<DyadicRational>().is_err());
    }

    #[test]
    fn ordering_across_scales() {
        assert!(d("1/2") > d("1/2^100"));
        assert!(d("-1/2") < d("-1/2^100"));
        assert!(d("3/4") > d("5/8"));
        assert!(DyadicRational::pow2(-1_000_000) > DyadicRational::zero());
        assert_eq!(d("2/4").cmp(&d("1/2")), Ordering::Equal);
    }

    #[test]
    fn rounding_brackets_value() {
        let x = d("12345/2^20");
        let lo = x.round(4, Round::Down);
        let hi = x.round(4, Round::Up);
        assert!(lo <= x && x <= hi);
        assert!(lo.mantissa_bits() <= 4 && hi.mantissa_bits() <= 4);
        let y = -&x;
        assert!(y.round(4, Round::Down) <= y && y <= y.round(4, Round::Up));
    }

    #[test]
    fn add_rounded_with_huge_gap() {
        let one = DyadicRational::one();
        let tiny = DyadicRational::pow2(-10_000_000);
        let up = one.add_rounded(&tiny, 64, Round::Up);
        let down = one.add_rounded(&tiny, 64, Round::Down);
        assert!(up > one && down == one);
        let down2 = one.sub_rounded(&tiny, 64, Round::Down);
        assert!(down2 < one);
        assert!(one.sub_rounded(&tiny, 64, Round::Up) == one);
    }

    #[test]
    fn float_conversion() {
        assert_eq!(d("3/8").to_f64(), 0.375);
        assert_eq!(DyadicRational::pow2(-2000).to_f64(), 0.0);
        assert!((DyadicRational::pow2(-2000).log2_abs() + 2000.0).abs() < 1e-12);
        assert_eq!(DyadicRational::from_f64(0.1).unwrap().to_f64(), 0.1);
    }

    #[test]
    fn interval_mul_contains_product() {
        let a = DyadicInterval::new(d("-1/4"), d("1/2"));
        let b = DyadicInterval::new(d("1/8"), d("3/8"));
        let p = a.mul(&b, 8);
        assert!(p.contains(&(d("-1/4") * d("3/8"))));
        assert!(p.contains(&(d("1/2") * d("3/8"))));
    }

    proptest! {
        #[test]
        fn ring_ops_match_f64(a in -1_000_000i64..1_000_000, ea in -40i64..40,
                              b in -1_000_000i64..1_000_000, eb in -40i64..40) {
            let x = DyadicRational::new(a, ea);
            let y = DyadicRational::new(b, eb);
            let fx = a as f64 * 2f64.powi(ea as i32);
            let fy = b as f64 * 2f64.powi(eb as i32);
            prop_assert_eq!((&x * &y).to_f64(), fx * fy);
            prop_assert_eq!(&(&x + &y) - &y, x.clone());
            prop_assert_eq!(x.cmp(&y), fx.partial_cmp(&fy).unwrap());
        }

        #[test]
        fn ratio_string_round_trips(a in any::<i64>(), e in -200i64..200) {
            let x = DyadicRational::new(a, e);
            let back: DyadicRational = x.to_ratio_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn rounded_add_encloses_exact(a in any::<i64>(), ea in -80i64..80,
                                      b in any::<i64>(), eb in -300i64..80, prec in 2u64..70) {
            let x = DyadicRational::new(a, ea);
            let y = DyadicRational::new(b, eb);
            let exact = &x + &y;
            prop_assert!(x.add_rounded(&y, prec, Round::Down) <= exact);
            prop_assert!(x.add_rounded(&y, prec, Round::Up) >= exact);
        }
    }
}
