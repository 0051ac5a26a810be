use serde::{Deserialize, Serialize};

use crate::money::MoneyAmount;

/// Payment delay marking an invoice that never repays within any horizon.
pub const NEVER_PAID_DELAY: u32 = 100_000;

/// One funding request against the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invoice {
    pub id: u64,
    /// Non-collateralized share of the invoice, `0 < q < 1`.
    pub q: f64,
    /// Euro amount the pool is asked to lend (`q × invoice total`).
    pub demanded_collateral: MoneyAmount,
    pub arrival_day: u32,
    pub accepted: bool,
    pub acceptance_day: Option<u32>,
    pub premium_paid: MoneyAmount,
    pub payment_delay_days: u32,
    pub repaid: bool,
    /// Fraudulent invoice; never repays.
    pub bogus: bool,
}

impl Invoice {
    pub fn new(id: u64, q: f64, demanded_collateral: MoneyAmount, arrival_day: u32) -> Self {
        Invoice {
            id,
            q,
            demanded_collateral,
            arrival_day,
            accepted: false,
            acceptance_day: None,
            premium_paid: MoneyAmount::ZERO,
            payment_delay_days: 0,
            repaid: false,
            bogus: false,
        }
    }

    pub fn with_delay(mut self, days: u32) -> Self {
        self.payment_delay_days = days;
        self
    }

    pub fn never_paid(mut self) -> Self {
        self.payment_delay_days = NEVER_PAID_DELAY;
        self
    }

    pub fn bogus(mut self) -> Self {
        self.bogus = true;
        self.payment_delay_days = NEVER_PAID_DELAY;
        self
    }

    pub fn will_repay(&self) -> bool {
        !self.bogus && self.payment_delay_days < NEVER_PAID_DELAY
    }

    /// Day the collateral comes back, for accepted invoices that repay.
    pub fn due_day(&self) -> Option<u32> {
        match self.acceptance_day {
            Some(day) if self.will_repay() => Some(day + self.payment_delay_days),
            _ => None,
        }
    }
}
