//! Money and fraction newtypes.
//!
//! Ledger amounts are held as signed integer femto-euros (1e-15 €) so that every
//! credit/debit books exactly; conversions to and from `f64` only happen when
//! a rate is applied (premium, withdrawal fraction) or when a value is
//! reported.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

const UNITS_PER_EURO: f64 = 1e15;

/// A euro amount with femto-euro resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoneyAmount(i128);

impl MoneyAmount {
    pub const ZERO: MoneyAmount = MoneyAmount(0);

    /// Nearest representable amount to `euros`. Non-finite input maps to zero.
    pub fn from_euros(euros: f64) -> Self {
        if !euros.is_finite() {
            return Self::ZERO;
        }
        MoneyAmount((euros * UNITS_PER_EURO).round() as i128)
    }

    pub const fn from_raw(units: i128) -> Self {
        MoneyAmount(units)
    }

    pub const fn raw(self) -> i128 {
        self.0
    }

    pub fn to_euros(self) -> f64 {
        self.0 as f64 / UNITS_PER_EURO
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// `self × fraction`, rounded to the nearest femto-euro.
    pub fn scale(self, fraction: Fraction) -> Self {
        Self::from_euros(self.to_euros() * fraction.get())
    }

    pub fn min(self, other: Self) -> Self {
        Ord::min(self, other)
    }

    /// Value rounded half-up to cents, as reported in output files.
    pub fn cents(self) -> f64 {
        round_half_up(self.to_euros(), 2)
    }
}

impl fmt::Display for MoneyAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.cents())
    }
}

impl Add for MoneyAmount {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        MoneyAmount(self.0 + rhs.0)
    }
}

impl Sub for MoneyAmount {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        MoneyAmount(self.0 - rhs.0)
    }
}

impl Neg for MoneyAmount {
    type Output = Self;
    fn neg(self) -> Self {
        MoneyAmount(-self.0)
    }
}

impl AddAssign for MoneyAmount {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl SubAssign for MoneyAmount {
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl Sum for MoneyAmount {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a MoneyAmount> for MoneyAmount {
    fn sum<I: Iterator<Item = &'a MoneyAmount>>(iter: I) -> Self {
        iter.copied().sum()
    }
}

impl Serialize for MoneyAmount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_euros())
    }
}

impl<'de> Deserialize<'de> for MoneyAmount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let euros = f64::deserialize(d)?;
        if !euros.is_finite() {
            return Err(serde::de::Error::custom("money amount must be finite"));
        }
        Ok(Self::from_euros(euros))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("fraction {0} is outside [0, 1]")]
pub struct FractionError(pub f64);

/// A dimensionless value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Fraction(f64);

impl Fraction {
    pub const ZERO: Fraction = Fraction(0.0);
    pub const ONE: Fraction = Fraction(1.0);

    pub fn new(value: f64) -> Result<Self, FractionError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Fraction(value))
        } else {
            Err(FractionError(value))
        }
    }

    pub const fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Fraction {
    type Error = FractionError;
    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Fraction::new(value)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Fraction::new(v).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Round half-up (towards +∞ on ties) to `decimals` places.
pub fn round_half_up(value: f64, decimals: u32) -> f64 {
    if !value.is_finite() {
        return value;
    }
    let scale = 10f64.powi(decimals as i32);
    let scaled = value * scale;
    // Nudge by a few ulps so that 303.165 stored as 303.16499999… still ties up.
    let nudged = scaled + scaled.abs() * 4.0 * f64::EPSILON;
    let r = (nudged + 0.5).floor() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}
