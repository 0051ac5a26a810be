//! Reverse-Kelly automated market maker (rkAMM) for invoice collateral.
//!
//! A pool lends the missing collateral `Q` of partly-collateralized invoices
//! and charges a premium priced by Kelly's criterion solved for the odds
//! term. This crate holds the exact pool ledger, the pricing math, the
//! scenario catalog and a deterministic Monte-Carlo engine with report
//! writers.

pub mod invoice;
pub mod money;
pub mod pool;
pub mod quote;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sweep;

pub use invoice::{Invoice, NEVER_PAID_DELAY};
pub use money::{round_half_up, Fraction, MoneyAmount};
pub use pool::{Decision, LedgerError, PoolState, Rejection};
pub use quote::{compute_b, compute_f, quote_premium, PremiumQuote, QuoteError};
pub use report::{
    write_bundle, BundleOptions, DiffReport, MetricsFile, OutputFormat, ReportBundle, ReportError,
};
pub use scenario::{scenario_preset, ConfigError, ScenarioConfig};
pub use sim::{
    compare_withdrawal, run_batch, run_simulation, BatchResult, PairedReport, SimError, Simulation,
    SimulationMetrics, TimeSeriesPoint,
};
pub use sweep::{run_sweep, SweepError, SweepOptions, SweepSummary};
