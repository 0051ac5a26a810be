//! Scenario configuration, the preset catalog and stochastic invoice streams.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::invoice::{Invoice, NEVER_PAID_DELAY};
use crate::money::{Fraction, MoneyAmount};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario '{0}' (run `rkamm presets` for the list)")]
    UnknownScenario(String),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("cannot read config file {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// How the demanded collateral of each invoice is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AmountMode {
    /// Uniform in `[min, max]`.
    Range { min: MoneyAmount, max: MoneyAmount },
    /// Every invoice demands exactly `fraction × Q0`.
    FractionOfQ0 { fraction: Fraction },
}

/// Size of a liquidity-provider deposit on a contributing day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContributionMode {
    /// Uniform in `[0, cap × Q0]`.
    #[default]
    Uniform,
    /// Exactly `cap × Q0`.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub n_simulations: u32,
    pub initial_collateral_q0: MoneyAmount,
    pub initial_premium: MoneyAmount,
    pub n_invoices: u32,
    pub q_range: [f64; 2],
    pub amount_mode: AmountMode,
    pub delay_range_days: [u32; 2],
    pub lp_contribution_probability: Fraction,
    pub lp_contribution_cap_fraction_of_q0: Fraction,
    pub lp_contribution_mode: ContributionMode,
    pub nonpayment_probability: Fraction,
    pub hack_probability: Fraction,
    /// Fixed non-collateralized share for every invoice; overrides `q_range`.
    pub hack_q: Option<f64>,
    pub max_entry_days: u32,
    pub additional_days: u32,
    pub withdrawal_enabled: bool,
    pub withdrawal_period_days: u32,
    pub withdrawal_fraction: Fraction,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario_id: "baseline".into(),
            n_simulations: 100,
            initial_collateral_q0: MoneyAmount::from_euros(10_000.0),
            initial_premium: MoneyAmount::ZERO,
            n_invoices: 500,
            q_range: [0.05, 0.49],
            amount_mode: AmountMode::Range {
                min: MoneyAmount::from_euros(100.0),
                max: MoneyAmount::from_euros(2000.0),
            },
            delay_range_days: [30, 120],
            lp_contribution_probability: Fraction::ZERO,
            lp_contribution_cap_fraction_of_q0: Fraction::ZERO,
            lp_contribution_mode: ContributionMode::Uniform,
            nonpayment_probability: Fraction::ZERO,
            hack_probability: Fraction::ZERO,
            hack_q: None,
            max_entry_days: 500,
            additional_days: 30,
            withdrawal_enabled: false,
            withdrawal_period_days: 30,
            withdrawal_fraction: frac(0.5),
            seed: 42,
        }
    }
}

impl ScenarioConfig {
    /// Entry window plus longest payment delay plus cool-down days.
    pub fn horizon_days(&self) -> u32 {
        self.max_entry_days + self.delay_range_days[1] + self.additional_days
    }

    pub fn q0(&self) -> MoneyAmount {
        self.initial_collateral_q0
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_simulations == 0 {
            return Err(invalid("n_simulations", "must be at least 1"));
        }
        if !self.initial_collateral_q0.is_positive() {
            return Err(invalid("initial_collateral_q0", "must be positive"));
        }
        if self.initial_premium.is_negative() {
            return Err(invalid("initial_premium", "must be non-negative"));
        }
        let [qlo, qhi] = self.q_range;
        if !(qlo > 0.0 && qlo <= qhi && qhi < 1.0) {
            return Err(invalid(
                "q_range",
                format!("[{qlo}, {qhi}] must satisfy 0 < lo <= hi < 1"),
            ));
        }
        if let Some(q) = self.hack_q {
            if !(q > 0.0 && q < 1.0) {
                return Err(invalid(
                    "hack_q",
                    format!("{q} must lie strictly between 0 and 1"),
                ));
            }
        }
        match self.amount_mode {
            AmountMode::Range { min, max } => {
                if !min.is_positive() || min > max {
                    return Err(invalid("amount_mode", "range must satisfy 0 < min <= max"));
                }
            }
            AmountMode::FractionOfQ0 { fraction } => {
                if fraction.get() <= 0.0 {
                    return Err(invalid("amount_mode", "fraction of Q0 must be positive"));
                }
            }
        }
        let [dlo, dhi] = self.delay_range_days;
        if !(dlo >= 1 && dlo <= dhi && dhi < NEVER_PAID_DELAY) {
            return Err(invalid(
                "delay_range_days",
                format!("[{dlo}, {dhi}] must satisfy 1 <= lo <= hi < {NEVER_PAID_DELAY}"),
            ));
        }
        if self.withdrawal_period_days == 0 {
            return Err(invalid("withdrawal_period_days", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }
}

fn frac(v: f64) -> Fraction {
    Fraction::new(v).expect("preset fraction in [0, 1]")
}

/// Every preset id with a one-line description, in catalog order.
pub const PRESETS: &[(&str, &str)] = &[
    (
        "baseline",
        "defaults: q 5-49%, amount 100-2000, delay 30-120 days, no LPs, no defaults",
    ),
    (
        "1.1",
        "LP deposits with 50% daily probability, up to 1% of Q0",
    ),
    (
        "1.2",
        "LP deposits with 50% daily probability, up to 5% of Q0",
    ),
    (
        "1.3",
        "LP deposits with 50% daily probability, up to 10% of Q0",
    ),
    (
        "1.4",
        "LP deposits with 50% daily probability, up to 25% of Q0",
    ),
    ("2.1", "non-payment probability 2%"),
    ("2.2", "non-payment probability 5%"),
    ("2.3", "non-payment probability 20%"),
    ("3.1", "payment delay 30-60 days"),
    ("3.2", "payment delay 60-90 days"),
    ("3.3", "payment delay 90-120 days"),
    ("4.1", "every invoice demands 1% of Q0"),
    ("4.2", "every invoice demands 10% of Q0"),
    ("4.3", "every invoice demands 25% of Q0"),
    ("5.1", "q fixed at 45% (55% collateralized)"),
    ("5.2", "q fixed at 25% (75% collateralized)"),
    ("5.3", "q fixed at 10% (90% collateralized)"),
    ("hack-q49-h10", "bogus invoices 10%, q fixed at 49%"),
    ("hack-q49-h50", "bogus invoices 50%, q fixed at 49%"),
    ("hack-q49-h100", "bogus invoices 100%, q fixed at 49%"),
    ("hack-q30-h10", "bogus invoices 10%, q fixed at 30%"),
    ("hack-q30-h50", "bogus invoices 50%, q fixed at 30%"),
    ("hack-q30-h100", "bogus invoices 100%, q fixed at 30%"),
    ("hack-q10-h10", "bogus invoices 10%, q fixed at 10%"),
    ("hack-q10-h50", "bogus invoices 50%, q fixed at 10%"),
    ("hack-q10-h100", "bogus invoices 100%, q fixed at 10%"),
];

/// Preset ids swept by the full reproduction grid (everything but the baseline).
pub fn sweep_scenario_ids() -> impl Iterator<Item = &'static str> {
    PRESETS
        .iter()
        .map(|(id, _)| *id)
        .filter(|id| *id != "baseline")
}

pub fn preset_ids() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(id, _)| *id)
}

/// Defaults with exactly the named scenario's deltas applied.
pub fn scenario_preset(id: &str) -> Result<ScenarioConfig, ConfigError> {
    if !PRESETS.iter().any(|(known, _)| *known == id) {
        return Err(ConfigError::UnknownScenario(id.to_string()));
    }
    let mut c = ScenarioConfig {
        scenario_id: id.to_string(),
        ..ScenarioConfig::default()
    };
    match id {
        "baseline" => {}
        "1.1" | "1.2" | "1.3" | "1.4" => {
            c.lp_contribution_probability = frac(0.5);
            c.lp_contribution_cap_fraction_of_q0 = frac(match id {
                "1.1" => 0.01,
                "1.2" => 0.05,
                "1.3" => 0.10,
                _ => 0.25,
            });
        }
        "2.1" => c.nonpayment_probability = frac(0.02),
        "2.2" => c.nonpayment_probability = frac(0.05),
        "2.3" => c.nonpayment_probability = frac(0.20),
        "3.1" => c.delay_range_days = [30, 60],
        "3.2" => c.delay_range_days = [60, 90],
        "3.3" => c.delay_range_days = [90, 120],
        "4.1" | "4.2" | "4.3" => {
            let fraction = frac(match id {
                "4.1" => 0.01,
                "4.2" => 0.10,
                _ => 0.25,
            });
            c.amount_mode = AmountMode::FractionOfQ0 { fraction };
        }
        "5.1" => c.q_range = [0.45, 0.45],
        "5.2" => c.q_range = [0.25, 0.25],
        "5.3" => c.q_range = [0.10, 0.10],
        hack => {
            // hack-q{QQ}-h{HH}
            let (q, h) =
                parse_hack_id(hack).ok_or_else(|| ConfigError::UnknownScenario(id.into()))?;
            c.hack_q = Some(q);
            c.hack_probability = frac(h);
        }
    }
    Ok(c)
}

fn parse_hack_id(id: &str) -> Option<(f64, f64)> {
    let rest = id.strip_prefix("hack-q")?;
    let (q, h) = rest.split_once("-h")?;
    Some((
        q.parse::<f64>().ok()? / 100.0,
        h.parse::<f64>().ok()? / 100.0,
    ))
}

/// Independent random streams of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Invoices = 0,
    Deposits = 1,
}

/// ChaCha8 seeded from `seed`, on stream `2 · sim_index + stream`.
///
/// Streams never overlap, so runs are reproducible independently of batch
/// size, ordering or thread count, and on every platform.
pub fn stream_rng(seed: u64, sim_index: u32, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * u64::from(sim_index) + stream as u64);
    rng
}

/// Draw one invoice arriving on `day`.
///
/// Every invoice consumes the same five draws (q, amount, bogus, unpaid,
/// delay) whatever the configuration, so presets that differ only in a
/// probability see the same underlying uniforms.
pub fn generate_invoice<R: Rng + ?Sized>(
    id: u64,
    day: u32,
    config: &ScenarioConfig,
    rng: &mut R,
) -> Invoice {
    let [qlo, qhi] = config.q_range;
    let u: f64 = rng.gen();
    let q = config.hack_q.unwrap_or(qlo + u * (qhi - qlo));

    let amount = match config.amount_mode {
        AmountMode::Range { min, max } => {
            let u: f64 = rng.gen();
            MoneyAmount::from_euros(min.to_euros() + u * (max.to_euros() - min.to_euros()))
        }
        AmountMode::FractionOfQ0 { fraction } => {
            let _: f64 = rng.gen();
            config.initial_collateral_q0.scale(fraction)
        }
    };

    let bogus = rng.gen::<f64>() < config.hack_probability.get();
    let unpaid = rng.gen::<f64>() < config.nonpayment_probability.get();
    let [dlo, dhi] = config.delay_range_days;
    let delay = rng.gen_range(dlo..=dhi);

    let invoice = Invoice::new(id, q, amount, day);
    if bogus {
        invoice.bogus()
    } else if unpaid {
        invoice.never_paid()
    } else {
        invoice.with_delay(delay)
    }
}

/// `n_invoices` invoices, one per day starting at day 0.
pub fn generate_stream<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<Invoice> {
    (0..config.n_invoices)
        .map(|i| generate_invoice(u64::from(i), i, config, rng))
        .collect()
}

/// Today's liquidity-provider deposit, if any.
pub fn draw_lp_deposit<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Option<MoneyAmount> {
    let p = config.lp_contribution_probability.get();
    if p == 0.0 {
        return None;
    }
    let contributes = rng.gen::<f64>() < p;
    let u: f64 = rng.gen();
    if !contributes {
        return None;
    }
    let cap = config
        .initial_collateral_q0
        .scale(config.lp_contribution_cap_fraction_of_q0);
    Some(match config.lp_contribution_mode {
        ContributionMode::Uniform => MoneyAmount::from_euros(u * cap.to_euros()),
        ContributionMode::Fixed => cap,
    })
}
