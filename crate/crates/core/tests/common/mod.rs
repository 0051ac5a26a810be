//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use rand::Rng;
use rkamm_core::{Fraction, Invoice, MoneyAmount, PoolState};

/// One ledger operation, with its random parameters already drawn.
#[derive(Debug, Clone)]
pub enum Op {
    Offer {
        q: f64,
        share_of_volume: f64,
        delay: Option<u32>,
        bogus: bool,
    },
    Deposit(f64),
    Withdraw(f64),
    NextDay,
}

pub fn random_op<R: Rng>(rng: &mut R) -> Op {
    match rng.gen_range(0..4) {
        0 => Op::Offer {
            q: rng.gen_range(0.01..0.99),
            share_of_volume: rng.gen_range(0.0..1.5),
            delay: rng.gen_bool(0.8).then(|| rng.gen_range(0..5)),
            bogus: rng.gen_bool(0.1),
        },
        1 => Op::Deposit(rng.gen_range(0.0..5_000.0)),
        2 => Op::Withdraw(rng.gen_range(0.0..=1.0)),
        _ => Op::NextDay,
    }
}

/// Replays `ops` on a fresh pool, repaying due invoices at the start of each
/// day, and checks the ledger after every single operation.
pub fn check_ledger(liquidity: f64, premium: f64, ops: &[Op]) -> Result<(), String> {
    let mut pool = PoolState::from_euros(liquidity, premium);
    let mut book: Vec<Invoice> = Vec::new();
    let check = |pool: &PoolState, step: usize, what: &str| -> Result<(), String> {
        let residual = pool.conservation_residual();
        if !residual.is_zero() || residual.to_euros().abs() > 1e-9 {
            return Err(format!("step {step} ({what}): residual {residual:?}"));
        }
        if pool.liquidity.is_negative() || pool.premium_reserve.is_negative() {
            return Err(format!("step {step} ({what}): negative reserve {pool:?}"));
        }
        Ok(())
    };
    for (step, op) in ops.iter().enumerate() {
        match *op {
            Op::Offer {
                q,
                share_of_volume,
                delay,
                bogus,
            } => {
                let amount = MoneyAmount::from_euros(pool.volume().to_euros() * share_of_volume);
                let mut inv = Invoice::new(book.len() as u64, q, amount, pool.day);
                inv = match (bogus, delay) {
                    (true, _) => inv.bogus(),
                    (false, Some(d)) => inv.with_delay(d),
                    (false, None) => inv.never_paid(),
                };
                pool.accept_invoice(&mut inv)
                    .map_err(|e| format!("step {step}: {e}"))?;
                book.push(inv);
                check(&pool, step, "offer")?;
                // A zero-day delay falls due immediately.
                repay_due(&mut pool, &mut book, step)?;
                check(&pool, step, "same-day repayment")?;
            }
            Op::Deposit(euros) => {
                pool.lp_deposit(MoneyAmount::from_euros(euros))
                    .map_err(|e| e.to_string())?;
                check(&pool, step, "deposit")?;
            }
            Op::Withdraw(fraction) => {
                let before = pool.premium_reserve;
                let taken = pool.withdraw_premium(Fraction::new(fraction).unwrap());
                if taken > before {
                    return Err(format!("step {step}: withdrew {taken} of {before}"));
                }
                check(&pool, step, "withdraw")?;
            }
            Op::NextDay => {
                pool.advance_day();
                repay_due(&mut pool, &mut book, step)?;
                check(&pool, step, "repayments")?;
            }
        }
    }
    pool.finalize_losses(&book);
    let unreturned: MoneyAmount = book
        .iter()
        .filter(|i| i.accepted && !i.repaid)
        .map(|i| i.demanded_collateral)
        .sum();
    if pool.loss_total != unreturned || unreturned != pool.outstanding_lent {
        return Err(format!(
            "losses {} vs outstanding {}",
            pool.loss_total, pool.outstanding_lent
        ));
    }
    Ok(())
}

fn repay_due(pool: &mut PoolState, book: &mut [Invoice], step: usize) -> Result<(), String> {
    let today = pool.day;
    for inv in book
        .iter_mut()
        .filter(|i| !i.repaid && i.due_day() == Some(today))
    {
        pool.repay_invoice(inv)
            .map_err(|e| format!("step {step}: {e}"))?;
    }
    Ok(())
}
