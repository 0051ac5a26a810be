//! Reverse-Kelly premium pricing.
//!
//! Kelly's `f = p/a − q/b` with `a = q`, `p = 1 − q` is solved for the odds
//! term `b`, read as premium over lent collateral:
//!
//! ```text
//! f       = Q / (liquidity + premium reserve)
//! b       = q² / (1 − q(f + 1))
//! premium = b · Q
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::MoneyAmount;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum QuoteError {
    #[error("pool volume is zero; no invoice can be served")]
    ZeroVolume,
    #[error("non-collateralized share q = {0} must lie strictly between 0 and 1")]
    InvalidShare(f64),
    #[error("demanded collateral must be positive")]
    NonPositiveCollateral,
    #[error("q(f+1) = {product} >= 1 (q = {q}, f = {f}); the premium is undefined")]
    NonPositiveDenominator { q: f64, f: f64, product: f64 },
}

/// The `(f, b, premium)` triple for one invoice against one pool state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiumQuote {
    /// Share of pool volume the invoice demands.
    pub f: f64,
    /// Potential-profit / potential-loss ratio.
    pub b: f64,
    pub premium: MoneyAmount,
}

/// Demanded collateral as a share of pool volume.
pub fn compute_f(demanded: MoneyAmount, volume: MoneyAmount) -> Result<f64, QuoteError> {
    if !volume.is_positive() {
        return Err(QuoteError::ZeroVolume);
    }
    // Ratio of the integer representations keeps f exact to f64 precision.
    Ok(demanded.raw() as f64 / volume.raw() as f64)
}

pub fn compute_b(q: f64, f: f64) -> Result<f64, QuoteError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(QuoteError::InvalidShare(q));
    }
    let product = q * (f + 1.0);
    let denominator = 1.0 - product;
    if !(denominator > 0.0) {
        return Err(QuoteError::NonPositiveDenominator { q, f, product });
    }
    Ok(q * q / denominator)
}

/// Price the premium for lending `demanded` against a pool of `volume`.
pub fn quote_premium(
    q: f64,
    demanded: MoneyAmount,
    volume: MoneyAmount,
) -> Result<PremiumQuote, QuoteError> {
    if !demanded.is_positive() {
        return Err(QuoteError::NonPositiveCollateral);
    }
    let f = compute_f(demanded, volume)?;
    let b = compute_b(q, f)?;
    Ok(PremiumQuote {
        f,
        b,
        premium: MoneyAmount::from_euros(b * demanded.to_euros()),
    })
}
