//! Exact fixed-point lengths.
//!
//! Every length in the library is an integer multiple of `2^-80`. Input
//! literals (edge weights, point offsets) are quantized onto the even grid
//! `2^-79`, so any distance between input locations is an even number of
//! units and every pairwise midpoint is again exactly representable. Sums,
//! differences and comparisons are exact, which makes ties between path
//! lengths a property of the input rather than of rounding.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

/// Fractional bits of the fixed-point representation.
pub const FRAC_BITS: u32 = 80;

const SCALE: f64 = (1u128 << FRAC_BITS) as f64;

/// Largest magnitude accepted for an input literal.
pub const MAX_INPUT: f64 = 1.0e9;

/// A signed length on the `2^-80` grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Length(i128);

impl Length {
    pub const ZERO: Length = Length(0);

    /// Raw grid units.
    pub const fn units(self) -> i128 {
        self.0
    }

    pub const fn from_units(units: i128) -> Self {
        Length(units)
    }

    /// Converts an input literal, rounding to the nearest point of the even
    /// grid. Returns `None` for non-finite values or magnitudes above
    /// [`MAX_INPUT`].
    pub fn from_input(x: f64) -> Option<Self> {
        if !x.is_finite() || x.abs() > MAX_INPUT {
            return None;
        }
        let half = (x * (SCALE / 2.0)).round();
        Some(Length(half as i128 * 2))
    }

    /// Converts a query value (threshold, offset) to the nearest grid unit.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() || x.abs() > MAX_INPUT * 1.0e6 {
            return None;
        }
        Some(Length((x * SCALE).round() as i128))
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    /// Exact half. Only exact for an even number of units; odd values round
    /// toward negative infinity.
    pub fn half(self) -> Self {
        Length(self.0 >> 1)
    }

    pub fn is_even(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn abs(self) -> Self {
        Length(self.0.abs())
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// Midpoint of two lengths, rounded toward negative infinity when the
    /// sum is odd.
    pub fn mid(a: Length, b: Length) -> Length {
        Length((a.0 + b.0) >> 1)
    }

    /// The exact decimal expansion (at most 80 fractional digits).
    pub fn to_exact_decimal(self) -> String {
        let mut s = String::new();
        if self.0 < 0 {
            s.push('-');
        }
        let u = self.0.unsigned_abs();
        s.push_str(&(u >> FRAC_BITS).to_string());
        let mask = (1u128 << FRAC_BITS) - 1;
        let mut frac = u & mask;
        if frac != 0 {
            s.push('.');
            while frac != 0 {
                frac *= 10;
                s.push(char::from(b'0' + (frac >> FRAC_BITS) as u8));
                frac &= mask;
            }
        }
        s
    }

    /// Parses a plain decimal (`-12.375`), rounding to the nearest unit.
    /// Exact for strings produced by [`Length::to_exact_decimal`].
    pub fn parse_exact(text: &str) -> Option<Length> {
        const EXTRA: u32 = 24;
        let (neg, body) = match text.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, text),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() && frac.is_empty() {
            return None;
        }
        let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || !digits(frac) {
            return None;
        }
        let whole: u128 = if int.is_empty() { 0 } else { int.parse().ok()? };
        if whole > MAX_INPUT as u128 * 1_000_000 {
            return None;
        }
        // fraction in units of 2^-(80 + EXTRA), accumulated from the last digit
        let one = 1u128 << (FRAC_BITS + EXTRA);
        let mut x = 0u128;
        for b in frac.bytes().rev() {
            x = (u128::from(b - b'0') * one + x) / 10;
        }
        let rounded = (x + (1 << (EXTRA - 1))) >> EXTRA;
        let units = (whole << FRAC_BITS) as i128 + rounded as i128;
        Some(Length(if neg { -units } else { units }))
    }
}

impl Add for Length {
    type Output = Length;
    fn add(self, rhs: Length) -> Length {
        Length(self.0 + rhs.0)
    }
}

impl AddAssign for Length {
    fn add_assign(&mut self, rhs: Length) {
        self.0 += rhs.0;
    }
}

impl Sub for Length {
    type Output = Length;
    fn sub(self, rhs: Length) -> Length {
        Length(self.0 - rhs.0)
    }
}

impl SubAssign for Length {
    fn sub_assign(&mut self, rhs: Length) {
        self.0 -= rhs.0;
    }
}

impl Neg for Length {
    type Output = Length;
    fn neg(self) -> Length {
        Length(-self.0)
    }
}

impl Sum for Length {
    fn sum<I: Iterator<Item = Length>>(iter: I) -> Length {
        iter.fold(Length::ZERO, Add::add)
    }
}

impl fmt::Display for Length {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_round_trip() {
        for x in [0.1, 2.5, 3.0, 7.25, 9.999, 1e-6, 123456.789] {
            let l = Length::from_input(x).unwrap();
            assert_eq!(l.to_f64(), x);
            assert!(l.is_even());
        }
    }

    #[test]
    fn sums_of_inputs_halve_exactly() {
        let a = Length::from_input(0.1).unwrap();
        let b = Length::from_input(0.7).unwrap();
        let s = a + b;
        assert_eq!(s.half() + s.half(), s);
    }

    #[test]
    fn rejects_non_finite_and_huge() {
        assert!(Length::from_input(f64::NAN).is_none());
        assert!(Length::from_input(f64::INFINITY).is_none());
        assert!(Length::from_input(1e10).is_none());
    }

    #[test]
    fn exact_decimal_round_trip() {
        let a = Length::from_input(0.1).unwrap();
        let b = Length::from_input(7.3).unwrap();
        for x in [a, b, Length::mid(a, b), -b, Length::ZERO, Length::from_units(1), Length::from_units(-3)] {
            let s = x.to_exact_decimal();
            assert_eq!(Length::parse_exact(&s), Some(x), "{s}");
        }
        assert_eq!(Length::from_input(1.5).unwrap().to_exact_decimal(), "1.5");
        assert_eq!(Length::parse_exact("2"), Length::from_input(2.0));
        assert_eq!(Length::parse_exact("0.25"), Length::from_input(0.25));
        assert!(Length::parse_exact("1e3").is_none());
        assert!(Length::parse_exact(".").is_none());
    }

    #[test]
    fn ordering_is_numeric() {
        let a = Length::from_input(-1.0).unwrap();
        let b = Length::from_input(0.5).unwrap();
        assert!(a < b);
        assert_eq!((b - a).to_f64(), 1.5);
    }
}
