//! Fixed-point lengths.
//!
//! All edge lengths, distances, radii and thresholds are carried as 64-bit
//! integers in units of 1/2^16. Start times and arrival times of the
//! decomposition BFS are then exact integers, so tie handling is
//! deterministic and invariant checks never see float drift.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};

/// Number of fractional bits.
pub const FRAC_BITS: u32 = 16;

/// A nonnegative length in 1/2^16 units.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Fx(pub u64);

impl Fx {
    pub const ZERO: Fx = Fx(0);
    /// One natural length unit.
    pub const ONE: Fx = Fx(1 << FRAC_BITS);
    /// Sentinel for "unreachable". Strictly greater than any distance a
    /// desk-scale instance can produce, with headroom so that
    /// `INF + weight` never wraps.
    pub const INF: Fx = Fx(u64::MAX / 4);

    /// `k` natural units.
    pub fn from_units(k: u64) -> Fx {
        Fx(k << FRAC_BITS)
    }

    pub fn is_inf(self) -> bool {
        self >= Fx::INF
    }

    /// Natural-unit value as f64 (exact while the raw value fits in 53 bits).
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / (1u64 << FRAC_BITS) as f64
    }

    /// Nearest fixed-point value to `x` natural units, rounding half up.
    pub fn from_f64(x: f64) -> Fx {
        assert!(x >= 0.0 && x.is_finite(), "length must be finite and >= 0");
        Fx((x * (1u64 << FRAC_BITS) as f64).round() as u64)
    }

    /// Smallest fixed-point value >= `x` natural units.
    pub fn from_f64_ceil(x: f64) -> Fx {
        assert!(x >= 0.0 && x.is_finite(), "length must be finite and >= 0");
        Fx((x * (1u64 << FRAC_BITS) as f64).ceil() as u64)
    }

    /// Saturating addition that also pins the INF sentinel.
    pub fn sat_add(self, other: Fx) -> Fx {
        if self.is_inf() || other.is_inf() {
            Fx::INF
        } else {
            Fx(self.0.saturating_add(other.0))
        }
    }

    /// `ceil(self * factor)` computed in integer arithmetic so it is exact
    /// and reproducible for raw values past the f64 mantissa.
    ///
    /// The factor is itself rounded up to a multiple of 2^-32, so the result
    /// is always >= the real product.
    pub fn mul_real_ceil(self, factor: f64) -> Fx {
        assert!(factor >= 0.0 && factor.is_finite());
        let scale = (1u128) << 32;
        let f_fixed = (factor * scale as f64).ceil() as u128;
        let prod = (self.0 as u128) * f_fixed;
        let up = prod.div_ceil(scale);
        assert!(up <= u64::MAX as u128, "fixed-point overflow in mul_real_ceil");
        Fx(up as u64)
    }

    /// Integer division by another length; the "round number" of a time
    /// value when `unit` is the round length.
    pub fn div_floor(self, unit: Fx) -> u64 {
        assert!(unit.0 > 0);
        self.0 / unit.0
    }

    /// Checked subtraction.
    pub fn checked_sub(self, other: Fx) -> Option<Fx> {
        self.0.checked_sub(other.0).map(Fx)
    }

    /// Exact decimal rendering (2^16 divides 10^16, so 16 fractional digits
    /// always suffice). Trailing zeros are stripped.
    pub fn to_decimal_string(self) -> String {
        let int = self.0 >> FRAC_BITS;
        let frac = self.0 & ((1 << FRAC_BITS) - 1);
        if frac == 0 {
            return int.to_string();
        }
        // frac/2^16 = frac * 5^16 / 10^16
        let digits = (frac as u128) * 152_587_890_625u128; // 5^16
        let mut s = format!("{digits:016}");
        while s.ends_with('0') {
            s.pop();
        }
        format!("{int}.{s}")
    }

    /// Parse a nonnegative decimal, rounding half up to the nearest 1/2^16.
    /// Round-trips exactly with `to_decimal_string`.
    pub fn parse_decimal(s: &str) -> Result<Fx, String> {
        let s = s.trim();
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(format!("empty length literal {s:?}"));
        }
        let int: u64 = if int_part.is_empty() {
            0
        } else {
            int_part
                .parse()
                .map_err(|e| format!("bad length literal {s:?}: {e}"))?
        };
        if frac_part.len() > 30 {
            return Err(format!("length literal {s:?} has too many digits"));
        }
        let mut num: u128 = 0;
        let mut den: u128 = 1;
        for ch in frac_part.chars() {
            let d = ch
                .to_digit(10)
                .ok_or_else(|| format!("bad length literal {s:?}"))?;
            num = num * 10 + d as u128;
            den *= 10;
        }
        // round(frac * 2^16) with half-up ties
        let scaled = (num * (1 << FRAC_BITS) + den / 2) / den;
        let raw = (int as u128)
            .checked_mul(1 << FRAC_BITS)
            .and_then(|v| v.checked_add(scaled))
            .ok_or_else(|| format!("length literal {s:?} overflows"))?;
        if raw > u64::MAX as u128 {
            return Err(format!("length literal {s:?} overflows"));
        }
        Ok(Fx(raw as u64))
    }
}

impl Add for Fx {
    type Output = Fx;
    fn add(self, other: Fx) -> Fx {
        Fx(self.0.checked_add(other.0).expect("fixed-point overflow"))
    }
}

impl AddAssign for Fx {
    fn add_assign(&mut self, other: Fx) {
        *self = *self + other;
    }
}

impl Sub for Fx {
    type Output = Fx;
    fn sub(self, other: Fx) -> Fx {
        Fx(self.0.checked_sub(other.0).expect("fixed-point underflow"))
    }
}

impl Sum for Fx {
    fn sum<I: Iterator<Item = Fx>>(iter: I) -> Fx {
        iter.fold(Fx::ZERO, |a, b| a + b)
    }
}

impl fmt::Debug for Fx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inf() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.to_decimal_string())
        }
    }
}

impl fmt::Display for Fx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
