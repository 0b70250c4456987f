//! Exact dyadic rationals `num / 2^exp`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Serialize, Serializer};

/// A dyadic rational kept in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: i128,
    exp: u32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { num: 0, exp: 0 };
    pub const ONE: Dyadic = Dyadic { num: 1, exp: 0 };

    pub fn new(num: i128, exp: u32) -> Self {
        Dyadic { num, exp }.normalized()
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic { num: v as i128, exp: 0 }
    }

    /// `2^e` for any integer `e`.
    pub fn pow2(e: i32) -> Self {
        if e >= 0 {
            Dyadic { num: 1i128 << e, exp: 0 }
        } else {
            Dyadic { num: 1, exp: (-e) as u32 }
        }
    }

    fn normalized(mut self) -> Self {
        if self.num == 0 {
            self.exp = 0;
            return self;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
        self
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    /// Multiply by `2^e`.
    pub fn scale_pow2(self, e: i32) -> Self {
        if e >= 0 {
            let e = e as u32;
            if e <= self.exp {
                Dyadic { num: self.num, exp: self.exp - e }
            } else {
                Dyadic { num: self.num << (e - self.exp), exp: 0 }
            }
        } else {
            Dyadic { num: self.num, exp: self.exp + (-e) as u32 }.normalized()
        }
    }

    pub fn abs(self) -> Self {
        Dyadic { num: self.num.abs(), exp: self.exp }
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 * 2f64.powi(-(self.exp as i32))
    }

    fn aligned(a: Self, b: Self) -> (i128, i128, u32) {
        let e = a.exp.max(b.exp);
        (a.num << (e - a.exp), b.num << (e - b.exp), e)
    }

    /// Exact quotient when `other` is a power of two.
    pub fn div_pow2(self, other: Dyadic) -> Option<Dyadic> {
        if other.num <= 0 || other.num.count_ones() != 1 {
            return None;
        }
        let e = other.num.trailing_zeros() as i32 - other.exp as i32;
        Some(self.scale_pow2(-e))
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let (a, b, e) = Dyadic::aligned(self, rhs);
        Dyadic { num: a + b, exp: e }.normalized()
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { num: -self.num, exp: self.exp }
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        Dyadic { num: self.num * rhs.num, exp: self.exp + rhs.exp }.normalized()
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = Dyadic::aligned(*self, *other);
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl Serialize for Dyadic {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_is_exact() {
        let a = Dyadic::new(3, 2);
        let b = Dyadic::new(1, 1);
        assert_eq!(a + b, Dyadic::new(5, 2));
        assert_eq!(a - b, Dyadic::new(1, 2));
        assert_eq!(a * b, Dyadic::new(3, 3));
        assert_eq!(Dyadic::new(4, 3), Dyadic::new(1, 1));
        assert!(a > b);
    }

    #[test]
    fn pow2_and_division() {
        assert_eq!(Dyadic::pow2(-3).to_f64(), 0.125);
        assert_eq!(Dyadic::pow2(4).to_f64(), 16.0);
        let q = Dyadic::from_int(6).div_pow2(Dyadic::pow2(2)).unwrap();
        assert_eq!(q, Dyadic::new(3, 1));
        assert!(Dyadic::from_int(1).div_pow2(Dyadic::from_int(3)).is_none());
    }
}
