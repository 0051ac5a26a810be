//! Daily event loop, single runs, batches and paired withdrawal comparisons.
//!
//! Within a day events apply in a fixed order:
//!
//! 1. repayments falling due today, credited to liquidity;
//! 2. the liquidity-provider deposit, if one is drawn;
//! 3. today's invoice, quoted and accepted or discarded;
//! 4. the periodic premium withdrawal (days `d > 0` with `d % period == 0`).

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invoice::Invoice;
use crate::money::MoneyAmount;
use crate::pool::{Decision, LedgerError, PoolState};
use crate::scenario::{
    draw_lp_deposit, generate_stream, stream_rng, ConfigError, ScenarioConfig, Stream,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("ledger inconsistency on day {day}: {source}")]
    Ledger { day: u32, source: LedgerError },
    #[error("conservation violated on day {day}: residual {residual}")]
    Conservation { day: u32, residual: MoneyAmount },
    #[error("simulation already reached its horizon of {0} days")]
    HorizonReached(u32),
}

/// Pool state at the start of a day, in euros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    pub day: u32,
    pub liquidity: f64,
    pub premium_reserve: f64,
    pub volume: f64,
    pub cumulative_withdrawn: f64,
    pub cumulative_collected: f64,
    pub cumulative_deposits: f64,
    pub outstanding_lent: f64,
}

impl TimeSeriesPoint {
    fn of(pool: &PoolState) -> Self {
        TimeSeriesPoint {
            day: pool.day,
            liquidity: pool.liquidity.to_euros(),
            premium_reserve: pool.premium_reserve.to_euros(),
            volume: pool.volume().to_euros(),
            cumulative_withdrawn: pool.cumulative_withdrawn.to_euros(),
            cumulative_collected: pool.cumulative_premium_collected.to_euros(),
            cumulative_deposits: pool.cumulative_lp_deposits.to_euros(),
            outstanding_lent: pool.outstanding_lent.to_euros(),
        }
    }
}

/// End-of-run metrics; for a batch every field is the mean over runs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimulationMetrics {
    pub n_simulations: f64,
    pub horizon_days: f64,
    pub total_invoices: f64,
    pub avg_accepted: f64,
    pub pct_accepted: f64,
    pub avg_paid: f64,
    pub pct_paid_of_accepted: f64,
    pub avg_unpaid: f64,
    pub pct_unpaid_of_accepted: f64,
    pub avg_loss: f64,
    pub total_collateral_covered: f64,
    pub collateral_covered_x_ic: f64,
    pub total_premium_collected: f64,
    pub total_lp_deposits: f64,
    pub total_premium_withdrawn: f64,
    pub total_premium_withdrawn_x_ic: f64,
    pub remaining_premium: f64,
    pub remaining_premium_x_ic: f64,
    pub final_volume: f64,
    pub amm_profit: f64,
    pub amm_profit_pct: f64,
}

/// Reporting precision class of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Count,
    Percent,
    Money,
    /// Multiple of the initial collateral.
    Ratio,
}

macro_rules! metric_fields {
    ($($name:ident : $kind:ident),* $(,)?) => {
        impl SimulationMetrics {
            /// Field names, in report order.
            pub const FIELDS: &'static [(&'static str, MetricKind)] =
                &[$((stringify!($name), MetricKind::$kind)),*];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$name),*]
            }

            pub fn from_values(values: &[f64]) -> Option<Self> {
                let mut it = values.iter().copied();
                let m = SimulationMetrics { $($name: it.next()?),* };
                it.next().is_none().then_some(m)
            }
        }
    };
}

metric_fields! {
    n_simulations: Count,
    horizon_days: Count,
    total_invoices: Count,
    avg_accepted: Count,
    pct_accepted: Percent,
    avg_paid: Count,
    pct_paid_of_accepted: Percent,
    avg_unpaid: Count,
    pct_unpaid_of_accepted: Percent,
    avg_loss: Money,
    total_collateral_covered: Money,
    collateral_covered_x_ic: Ratio,
    total_premium_collected: Money,
    total_lp_deposits: Money,
    total_premium_withdrawn: Money,
    total_premium_withdrawn_x_ic: Ratio,
    remaining_premium: Money,
    remaining_premium_x_ic: Ratio,
    final_volume: Money,
    amm_profit: Money,
    amm_profit_pct: Percent,
}

fn pct(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        100.0 * part / whole
    } else {
        0.0
    }
}

impl SimulationMetrics {
    fn from_run(config: &ScenarioConfig, pool: &PoolState, invoices: &[Invoice]) -> Self {
        let q0 = config.q0().to_euros();
        let accepted = invoices.iter().filter(|i| i.accepted).count() as f64;
        let paid = invoices.iter().filter(|i| i.repaid).count() as f64;
        let unpaid = accepted - paid;
        let covered: MoneyAmount = invoices
            .iter()
            .filter(|i| i.accepted)
            .map(|i| i.demanded_collateral)
            .sum();
        let withdrawn = pool.cumulative_withdrawn.to_euros();
        let final_volume = pool.volume().to_euros();
        let profit = (pool.volume() + pool.cumulative_withdrawn - config.q0()).to_euros();
        let total = config.n_invoices as f64;
        SimulationMetrics {
            n_simulations: 1.0,
            horizon_days: config.horizon_days() as f64,
            total_invoices: total,
            avg_accepted: accepted,
            pct_accepted: pct(accepted, total),
            avg_paid: paid,
            pct_paid_of_accepted: pct(paid, accepted),
            avg_unpaid: unpaid,
            pct_unpaid_of_accepted: pct(unpaid, accepted),
            avg_loss: pool.loss_total.to_euros(),
            total_collateral_covered: covered.to_euros(),
            collateral_covered_x_ic: covered.to_euros() / q0,
            total_premium_collected: pool.cumulative_premium_collected.to_euros(),
            total_lp_deposits: pool.cumulative_lp_deposits.to_euros(),
            total_premium_withdrawn: withdrawn,
            total_premium_withdrawn_x_ic: withdrawn / q0,
            remaining_premium: pool.premium_reserve.to_euros(),
            remaining_premium_x_ic: pool.premium_reserve.to_euros() / q0,
            final_volume,
            amm_profit: profit,
            amm_profit_pct: 100.0 * profit / q0,
        }
    }

    /// Field-wise arithmetic mean, summed in slice order.
    pub fn mean(runs: &[SimulationMetrics]) -> Option<Self> {
        let n = runs.len();
        if n == 0 {
            return None;
        }
        let mut sums = vec![0.0; Self::FIELDS.len()];
        for run in runs {
            for (s, v) in sums.iter_mut().zip(run.values()) {
                *s += v;
            }
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let mut m = Self::from_values(&means)?;
        m.n_simulations = n as f64;
        Some(m)
    }
}

/// What happened on one simulated day.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DayEvents {
    pub day: u32,
    pub repaid: Vec<u64>,
    pub deposit: Option<MoneyAmount>,
    pub offer: Option<(u64, Decision)>,
    pub withdrawn: Option<MoneyAmount>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: SimulationMetrics,
    pub series: Vec<TimeSeriesPoint>,
    pub invoices: Vec<Invoice>,
    pub pool: PoolState,
}

/// One simulation: a pool, its invoice stream and its deposit stream.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: ScenarioConfig,
    pool: PoolState,
    invoices: Vec<Invoice>,
    /// Invoice indices by arrival day.
    arrivals: BTreeMap<u32, Vec<usize>>,
    /// Invoice indices by repayment day.
    due: BTreeMap<u32, Vec<usize>>,
    deposit_rng: ChaCha8Rng,
    series: Vec<TimeSeriesPoint>,
}

impl Simulation {
    /// Simulation `sim_index` of a batch; its random streams derive from
    /// `(config.seed, sim_index)`.
    pub fn new(config: &ScenarioConfig, sim_index: u32) -> Result<Self, SimError> {
        config.validate()?;
        let mut invoice_rng = stream_rng(config.seed, sim_index, Stream::Invoices);
        let invoices = generate_stream(config, &mut invoice_rng);
        let deposit_rng = stream_rng(config.seed, sim_index, Stream::Deposits);
        Ok(Self::with_invoices(config, invoices, deposit_rng))
    }

    /// A simulation over a caller-supplied invoice stream.
    pub fn with_invoices(
        config: &ScenarioConfig,
        invoices: Vec<Invoice>,
        deposit_rng: ChaCha8Rng,
    ) -> Self {
        let mut arrivals: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (idx, inv) in invoices.iter().enumerate() {
            if inv.arrival_day < config.max_entry_days {
                arrivals.entry(inv.arrival_day).or_default().push(idx);
            }
        }
        Simulation {
            config: config.clone(),
            pool: PoolState::new(config.initial_collateral_q0, config.initial_premium),
            invoices,
            arrivals,
            due: BTreeMap::new(),
            deposit_rng,
            series: Vec::with_capacity(config.horizon_days() as usize),
        }
    }

    pub fn pool(&self) -> &PoolState {
        &self.pool
    }

    pub fn invoices(&self) -> &[Invoice] {
        &self.invoices
    }

    pub fn series(&self) -> &[TimeSeriesPoint] {
        &self.series
    }

    pub fn day(&self) -> u32 {
        self.pool.day
    }

    fn ledger(&self, source: LedgerError) -> SimError {
        SimError::Ledger {
            day: self.pool.day,
            source,
        }
    }

    /// Apply one day of events and advance the day counter.
    pub fn run_day(&mut self) -> Result<DayEvents, SimError> {
        let day = self.pool.day;
        if day >= self.config.horizon_days() {
            return Err(SimError::HorizonReached(self.config.horizon_days()));
        }
        self.series.push(TimeSeriesPoint::of(&self.pool));
        let mut events = DayEvents {
            day,
            ..Default::default()
        };

        for idx in self.due.remove(&day).unwrap_or_default() {
            let inv = &mut self.invoices[idx];
            self.pool
                .repay_invoice(inv)
                .map_err(|e| SimError::Ledger { day, source: e })?;
            events.repaid.push(inv.id);
        }

        if let Some(amount) = draw_lp_deposit(&self.config, &mut self.deposit_rng) {
            self.pool.lp_deposit(amount).map_err(|e| self.ledger(e))?;
            events.deposit = Some(amount);
        }

        for idx in self.arrivals.remove(&day).unwrap_or_default() {
            let inv = &mut self.invoices[idx];
            let decision = self
                .pool
                .accept_invoice(inv)
                .map_err(|e| SimError::Ledger { day, source: e })?;
            if let Some(due) = inv.due_day() {
                self.due.entry(due).or_default().push(idx);
            }
            events.offer = Some((inv.id, decision));
        }

        let period = self.config.withdrawal_period_days;
        if self.config.withdrawal_enabled && day > 0 && day % period == 0 {
            events.withdrawn = Some(self.pool.withdraw_premium(self.config.withdrawal_fraction));
        }

        let residual = self.pool.conservation_residual();
        if !residual.is_zero() {
            return Err(SimError::Conservation { day, residual });
        }
        self.pool.advance_day();
        Ok(events)
    }

    /// Run every remaining day and settle losses.
    pub fn run(mut self) -> Result<RunOutcome, SimError> {
        while self.pool.day < self.config.horizon_days() {
            self.run_day()?;
        }
        self.pool.finalize_losses(&self.invoices);
        Ok(RunOutcome {
            metrics: SimulationMetrics::from_run(&self.config, &self.pool, &self.invoices),
            series: self.series,
            invoices: self.invoices,
            pool: self.pool,
        })
    }
}

pub fn run_simulation(config: &ScenarioConfig, sim_index: u32) -> Result<RunOutcome, SimError> {
    Simulation::new(config, sim_index)?.run()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResult {
    pub metrics: SimulationMetrics,
    pub mean_series: Vec<TimeSeriesPoint>,
    pub runs: Vec<SimulationMetrics>,
}

/// Run `n_simulations` independent simulations (in parallel on the current
/// rayon pool) and average them in index order.
pub fn run_batch(config: &ScenarioConfig) -> Result<BatchResult, SimError> {
    config.validate()?;
    let outcomes: Vec<(SimulationMetrics, Vec<TimeSeriesPoint>)> = (0..config.n_simulations)
        .into_par_iter()
        .map(|i| run_simulation(config, i).map(|o| (o.metrics, o.series)))
        .collect::<Result<_, _>>()?;

    let n = outcomes.len() as f64;
    let days = config.horizon_days() as usize;
    let mut mean_series: Vec<TimeSeriesPoint> = (0..days)
        .map(|d| TimeSeriesPoint {
            day: d as u32,
            liquidity: 0.0,
            premium_reserve: 0.0,
            volume: 0.0,
            cumulative_withdrawn: 0.0,
            cumulative_collected: 0.0,
            cumulative_deposits: 0.0,
            outstanding_lent: 0.0,
        })
        .collect();
    for (_, series) in &outcomes {
        for (acc, p) in mean_series.iter_mut().zip(series) {
            acc.liquidity += p.liquidity;
            acc.premium_reserve += p.premium_reserve;
            acc.volume += p.volume;
            acc.cumulative_withdrawn += p.cumulative_withdrawn;
            acc.cumulative_collected += p.cumulative_collected;
            acc.cumulative_deposits += p.cumulative_deposits;
            acc.outstanding_lent += p.outstanding_lent;
        }
    }
    for acc in &mut mean_series {
        acc.liquidity /= n;
        acc.premium_reserve /= n;
        acc.volume /= n;
        acc.cumulative_withdrawn /= n;
        acc.cumulative_collected /= n;
        acc.cumulative_deposits /= n;
        acc.outstanding_lent /= n;
    }

    let runs: Vec<SimulationMetrics> = outcomes.into_iter().map(|(m, _)| m).collect();
    let metrics = SimulationMetrics::mean(&runs).expect("n_simulations >= 1");
    Ok(BatchResult {
        metrics,
        mean_series,
        runs,
    })
}

/// `100 × (with − without) / |without|`; `None` when undefined.
///
/// Equal values compare as 0% even when both are zero.
pub fn percent_difference(without: f64, with: f64) -> Option<f64> {
    if with == without {
        Some(0.0)
    } else if without == 0.0 {
        None
    } else {
        Some(100.0 * (with - without) / without.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReport {
    pub without: BatchResult,
    pub with: BatchResult,
    /// AMM profit difference, `None` when the no-withdrawal profit is zero.
    pub profit_difference_pct: Option<f64>,
}

pub fn without_withdrawal(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        withdrawal_enabled: false,
        ..config.clone()
    }
}

pub fn with_withdrawal(config: &ScenarioConfig) -> ScenarioConfig {
    ScenarioConfig {
        withdrawal_enabled: true,
        ..config.clone()
    }
}

/// Run the same batch (same seed) with withdrawals disabled and enabled.
pub fn compare_withdrawal(config: &ScenarioConfig) -> Result<PairedReport, SimError> {
    let without = run_batch(&without_withdrawal(config))?;
    let with = run_batch(&with_withdrawal(config))?;
    Ok(pair(without, with))
}

pub fn pair(without: BatchResult, with: BatchResult) -> PairedReport {
    let profit_difference_pct = if without.metrics.amm_profit == 0.0 {
        None
    } else {
        percent_difference(without.metrics.amm_profit, with.metrics.amm_profit)
    };
    PairedReport {
        without,
        with,
        profit_difference_pct,
    }
}
