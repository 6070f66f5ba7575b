//! Exact dyadic rationals `n / 2^e`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Largest exponent we allow before refusing to shift; keeps every
/// intermediate numerator comfortably inside an `i128`.
const MAX_EXP: u32 = 96;

/// A rational number with a power-of-two denominator, always stored in
/// canonical form (odd numerator, or zero with exponent zero).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDyadic", into = "RawDyadic")]
pub struct DyadicRational {
    num: i128,
    exp: u32,
}

#[derive(Serialize, Deserialize)]
struct RawDyadic {
    num: i64,
    exp: u32,
}

impl TryFrom<RawDyadic> for DyadicRational {
    type Error = String;
    fn try_from(raw: RawDyadic) -> Result<Self, Self::Error> {
        if raw.exp > MAX_EXP {
            return Err(format!("dyadic exponent {} too large", raw.exp));
        }
        Ok(DyadicRational::new(raw.num as i128, raw.exp))
    }
}

impl From<DyadicRational> for RawDyadic {
    fn from(d: DyadicRational) -> Self {
        RawDyadic {
            num: d.num as i64,
            exp: d.exp,
        }
    }
}

impl DyadicRational {
    pub const ZERO: DyadicRational = DyadicRational { num: 0, exp: 0 };
    pub const ONE: DyadicRational = DyadicRational { num: 1, exp: 0 };

    pub fn new(num: i128, exp: u32) -> Self {
        assert!(exp <= MAX_EXP, "dyadic exponent {exp} out of range");
        let mut d = DyadicRational { num, exp };
        d.normalize();
        d
    }

    pub fn from_int(n: i64) -> Self {
        DyadicRational::new(n as i128, 0)
    }

    /// `2^k` for any integer `k` (negative allowed).
    pub fn pow2(k: i32) -> Self {
        if k >= 0 {
            DyadicRational::new(1i128 << k, 0)
        } else {
            DyadicRational::new(1, (-k) as u32)
        }
    }

    fn normalize(&mut self) {
        if self.num == 0 {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().min(self.exp);
        self.num >>= tz;
        self.exp -= tz;
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn exponent(&self) -> u32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn halve(self) -> Self {
        DyadicRational::new(self.num, self.exp + 1)
    }

    /// Multiply by `2^k`.
    pub fn scale_pow2(self, k: i32) -> Self {
        self * DyadicRational::pow2(k)
    }

    /// `Some(k)` when the value is exactly `2^k`.
    pub fn log2_exact(&self) -> Option<i32> {
        if self.num <= 0 || self.num.count_ones() != 1 {
            return None;
        }
        Some(self.num.trailing_zeros() as i32 - self.exp as i32)
    }

    /// Exact whenever the value fits in 53 significant bits, which holds
    /// for every endpoint the cap constructions produce.
    pub fn to_f64(&self) -> f64 {
        self.num as f64 / 2f64.powi(self.exp as i32)
    }

    fn aligned(a: Self, b: Self) -> (i128, i128, u32) {
        let e = a.exp.max(b.exp);
        (a.num << (e - a.exp), b.num << (e - b.exp), e)
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl Add for DyadicRational {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (a, b, e) = Self::aligned(self, rhs);
        DyadicRational::new(a + b, e)
    }
}

impl Sub for DyadicRational {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let (a, b, e) = Self::aligned(self, rhs);
        DyadicRational::new(a - b, e)
    }
}

impl Neg for DyadicRational {
    type Output = Self;
    fn neg(self) -> Self {
        DyadicRational::new(-self.num, self.exp)
    }
}

impl Mul for DyadicRational {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let num = self
            .num
            .checked_mul(rhs.num)
            .expect("dyadic multiplication overflow");
        DyadicRational::new(num, self.exp + rhs.exp)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = Self::aligned(*self, *other);
        a.cmp(&b)
    }
}

impl fmt::Debug for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}
