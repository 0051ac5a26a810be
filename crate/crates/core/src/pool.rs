//! The pool ledger: liquidity reserve, premium reserve and the running totals
//! needed to audit them.
//!
//! Every mutation preserves
//!
//! ```text
//! liquidity + premium_reserve + outstanding_lent + cumulative_withdrawn
//!     = initial volume + cumulative_lp_deposits + cumulative_premium_collected
//! ```
//!
//! exactly, because all amounts are integer femto-euros.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invoice::Invoice;
use crate::money::{Fraction, MoneyAmount};
use crate::quote::{quote_premium, PremiumQuote, QuoteError};

/// Ledger misuse. These indicate a driver bug, never a market outcome.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LedgerError {
    #[error("invoice {0} was already accepted")]
    AlreadyAccepted(u64),
    #[error("invoice {id} arrives on day {arrival} but the pool is on day {pool_day}")]
    WrongArrivalDay {
        id: u64,
        arrival: u32,
        pool_day: u32,
    },
    #[error("invoice {0} was never accepted")]
    NotAccepted(u64),
    #[error("invoice {0} was already repaid")]
    AlreadyRepaid(u64),
    #[error("invoice {0} is bogus and cannot repay")]
    BogusRepayment(u64),
    #[error("invoice {id} is due on day {due:?}, not day {pool_day}")]
    NotDue {
        id: u64,
        due: Option<u32>,
        pool_day: u32,
    },
    #[error("negative amount {0}")]
    NegativeAmount(MoneyAmount),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum Rejection {
    #[error("insufficient funds in the pool")]
    InsufficientFunds,
    #[error("premium cannot be quoted: {0}")]
    UnquotablePremium(QuoteError),
}

/// Result of offering an invoice to the pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Accepted(PremiumQuote),
    Rejected(Rejection),
}

impl Decision {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Decision::Accepted(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub day: u32,
    pub liquidity: MoneyAmount,
    pub premium_reserve: MoneyAmount,
    pub cumulative_premium_collected: MoneyAmount,
    pub cumulative_withdrawn: MoneyAmount,
    pub cumulative_lp_deposits: MoneyAmount,
    pub outstanding_lent: MoneyAmount,
    pub loss_total: MoneyAmount,
    initial_volume: MoneyAmount,
}

impl PoolState {
    pub fn new(liquidity: MoneyAmount, premium: MoneyAmount) -> Self {
        PoolState {
            day: 0,
            liquidity,
            premium_reserve: premium,
            cumulative_premium_collected: MoneyAmount::ZERO,
            cumulative_withdrawn: MoneyAmount::ZERO,
            cumulative_lp_deposits: MoneyAmount::ZERO,
            outstanding_lent: MoneyAmount::ZERO,
            loss_total: MoneyAmount::ZERO,
            initial_volume: liquidity + premium,
        }
    }

    pub fn from_euros(liquidity: f64, premium: f64) -> Self {
        Self::new(
            MoneyAmount::from_euros(liquidity),
            MoneyAmount::from_euros(premium),
        )
    }

    /// Liquidity plus premium reserve.
    pub fn volume(&self) -> MoneyAmount {
        self.liquidity + self.premium_reserve
    }

    pub fn initial_volume(&self) -> MoneyAmount {
        self.initial_volume
    }

    /// Signed gap of the conservation identity; zero for any ledger built
    /// only through the operations below.
    pub fn conservation_residual(&self) -> MoneyAmount {
        (self.liquidity + self.premium_reserve + self.outstanding_lent + self.cumulative_withdrawn)
            - (self.initial_volume
                + self.cumulative_lp_deposits
                + self.cumulative_premium_collected)
    }

    pub fn quote(&self, q: f64, demanded: MoneyAmount) -> Result<PremiumQuote, QuoteError> {
        quote_premium(q, demanded, self.volume())
    }

    /// Offer `invoice` to the pool on its arrival day.
    ///
    /// The invoice is funded only if its demanded collateral fits in the
    /// current volume. The premium is booked first, then the payout is drawn
    /// from liquidity before the premium reserve.
    pub fn accept_invoice(&mut self, invoice: &mut Invoice) -> Result<Decision, LedgerError> {
        if invoice.accepted {
            return Err(LedgerError::AlreadyAccepted(invoice.id));
        }
        if invoice.arrival_day != self.day {
            return Err(LedgerError::WrongArrivalDay {
                id: invoice.id,
                arrival: invoice.arrival_day,
                pool_day: self.day,
            });
        }
        let demanded = invoice.demanded_collateral;
        if demanded > self.volume() || self.volume().is_zero() {
            return Ok(Decision::Rejected(Rejection::InsufficientFunds));
        }
        let quote = match self.quote(invoice.q, demanded) {
            Ok(quote) => quote,
            Err(e) => return Ok(Decision::Rejected(Rejection::UnquotablePremium(e))),
        };

        self.premium_reserve += quote.premium;
        self.cumulative_premium_collected += quote.premium;
        let from_liquidity = demanded.min(self.liquidity);
        self.liquidity -= from_liquidity;
        self.premium_reserve -= demanded - from_liquidity;
        self.outstanding_lent += demanded;

        invoice.accepted = true;
        invoice.acceptance_day = Some(self.day);
        invoice.premium_paid = quote.premium;
        Ok(Decision::Accepted(quote))
    }

    /// Credit a due repayment back to the liquidity reserve.
    pub fn repay_invoice(&mut self, invoice: &mut Invoice) -> Result<(), LedgerError> {
        if !invoice.accepted {
            return Err(LedgerError::NotAccepted(invoice.id));
        }
        if invoice.repaid {
            return Err(LedgerError::AlreadyRepaid(invoice.id));
        }
        if invoice.bogus {
            return Err(LedgerError::BogusRepayment(invoice.id));
        }
        let due = invoice.due_day();
        if due != Some(self.day) {
            return Err(LedgerError::NotDue {
                id: invoice.id,
                due,
                pool_day: self.day,
            });
        }
        self.liquidity += invoice.demanded_collateral;
        self.outstanding_lent -= invoice.demanded_collateral;
        invoice.repaid = true;
        Ok(())
    }

    pub fn lp_deposit(&mut self, amount: MoneyAmount) -> Result<(), LedgerError> {
        if amount.is_negative() {
            return Err(LedgerError::NegativeAmount(amount));
        }
        self.liquidity += amount;
        self.cumulative_lp_deposits += amount;
        Ok(())
    }

    /// Remove `fraction` of the premium reserve; returns the amount removed.
    pub fn withdraw_premium(&mut self, fraction: Fraction) -> MoneyAmount {
        let withdrawn = self
            .premium_reserve
            .scale(fraction)
            .min(self.premium_reserve);
        self.premium_reserve -= withdrawn;
        self.cumulative_withdrawn += withdrawn;
        withdrawn
    }

    /// Book as lost the collateral of every accepted invoice never repaid.
    pub fn finalize_losses<'a, I>(&mut self, invoices: I)
    where
        I: IntoIterator<Item = &'a Invoice>,
    {
        self.loss_total = invoices
            .into_iter()
            .filter(|inv| inv.accepted && !inv.repaid)
            .map(|inv| inv.demanded_collateral)
            .sum();
    }

    pub fn advance_day(&mut self) {
        self.day += 1;
    }
}
