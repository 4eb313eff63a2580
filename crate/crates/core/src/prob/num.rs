use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact probabilities.
pub type Rational = BigRational;

/// Number types a pmf can be stored in.
pub trait Prob:
    Clone
    + PartialEq
    + PartialOrd
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Send
    + Sync
    + 'static
{
    /// Whether arithmetic in this type is exact.
    const EXACT: bool;

    fn to_f64(&self) -> f64;

    /// Exact for rationals (binary expansion of the float).
    fn from_f64(x: f64) -> Self;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_rational(r: &Rational) -> Self;

    /// Sum-to-one test: exact for rationals, 1e-12 for floats.
    fn is_unit_total(&self) -> bool;

    fn is_neg(&self) -> bool {
        *self < Self::zero()
    }
}

impl Prob for f64 {
    const EXACT: bool = false;

    fn to_f64(&self) -> f64 {
        *self
    }

    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_rational(r: &Rational) -> Self {
        Prob::to_f64(r)
    }

    fn is_unit_total(&self) -> bool {
        (self - 1.0).abs() <= 1e-12
    }
}

impl Prob for Rational {
    const EXACT: bool = true;

    fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        match (self.numer().to_f64(), self.denom().to_f64()) {
            (Some(n), Some(d)) if n.is_finite() && d.is_finite() && d != 0.0 => n / d,
            _ => {
                // Huge numerator/denominator: shift both down before converting.
                let bits = self.denom().bits().max(self.numer().bits()) as i64 - 900;
                let shift = bits.max(0) as usize;
                let n = (self.numer() >> shift).to_f64().unwrap_or(0.0);
                let d = (self.denom() >> shift).to_f64().unwrap_or(1.0);
                n / d
            }
        }
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(Rational::zero)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }

    fn is_unit_total(&self) -> bool {
        self.is_one()
    }
}

/// Best rational approximation of `x` with denominator at most `max_den`
/// (continued-fraction convergents and semiconvergents).
pub fn snap_to_rational(x: f64, max_den: u64) -> Rational {
    if !x.is_finite() {
        return Rational::zero();
    }
    let negative = x < 0.0;
    let target = Rational::from_f64(x.abs());
    let max_den = BigInt::from(max_den.max(1));

    // Convergents p_k/q_k of the exact binary value.
    let (mut p0, mut q0) = (BigInt::zero(), BigInt::one());
    let (mut p1, mut q1) = (BigInt::one(), BigInt::zero());
    let mut rest = target.clone();
    let best = loop {
        let a = rest.floor().to_integer();
        let p2 = &a * &p1 + &p0;
        let q2 = &a * &q1 + &q0;
        if q2 > max_den {
            // Largest admissible semiconvergent, compared with the last convergent.
            let k = (&max_den - &q0).div_floor(&q1);
            let ps = &k * &p1 + &p0;
            let qs = &k * &q1 + &q0;
            let semi = BigRational::new(ps, qs);
            let conv = BigRational::new(p1.clone(), q1.clone());
            let es = (&semi - &target).abs();
            let ec = (&conv - &target).abs();
            break if es < ec { semi } else { conv };
        }
        let frac = &rest - BigRational::from_integer(a);
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        if frac.is_zero() {
            break BigRational::new(p1.clone(), q1.clone());
        }
        rest = frac.recip();
    };
    if negative {
        -best
    } else {
        best
    }
}

/// Formats a rational as `num/den` (or `num` when integral).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `num/den`, an integer, or a decimal literal into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(n, d));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    // Decimal literal, read exactly (0.1 -> 1/10).
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Some(if scale >= 0 {
        BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_recovers_simple_fractions() {
        assert_eq!(snap_to_rational(0.25, 1_000_000_000), Rational::from_ratio(1, 4));
        assert_eq!(snap_to_rational(1.0 / 3.0, 1_000_000_000), Rational::from_ratio(1, 3));
        assert_eq!(snap_to_rational(0.1, 1_000_000_000), Rational::from_ratio(1, 10));
        assert_eq!(snap_to_rational(0.0, 10), Rational::zero());
    }

    #[test]
    fn snap_respects_denominator_cap() {
        let r = snap_to_rational(std::f64::consts::PI - 3.0, 100);
        assert!(r.denom() <= &BigInt::from(100));
        // 14/99 is closer to pi - 3 than 1/7.
        assert_eq!(r, Rational::from_ratio(14, 99));
        let r = snap_to_rational(0.123456789123, 1_000);
        assert!(r.denom() <= &BigInt::from(1_000));
        assert!((Prob::to_f64(&r) - 0.123456789123).abs() < 1e-5);
    }

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rational("3/4"), Some(Rational::from_ratio(3, 4)));
        assert_eq!(parse_rational("0.1"), Some(Rational::from_ratio(1, 10)));
        assert_eq!(parse_rational("2"), Some(Rational::from_ratio(2, 1)));
        assert_eq!(parse_rational("25e-2"), Some(Rational::from_ratio(1, 4)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(format_rational(&Rational::from_ratio(6, 8)), "3/4");
    }

    #[test]
    fn huge_rational_converts() {
        let big = num_traits::pow(BigInt::from(3), 1000);
        let r = BigRational::new(big.clone(), big * BigInt::from(4) + BigInt::one());
        assert!((Prob::to_f64(&r) - 0.25).abs() < 1e-15);
    }
}
