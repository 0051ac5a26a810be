//! The scenario × withdrawal-period grid.
//!
//! Each scenario's no-withdrawal batch does not depend on the period, so it
//! is run once and paired with one withdrawal batch per period. Every cell is
//! written as its own bundle (`{scenario}_p{period}`); with `resume` set, a
//! cell whose directory already holds a matching config snapshot and metrics
//! file is kept as is.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::money::Fraction;
use crate::report::{
    read_config_snapshot, read_metrics, write_bundle, BundleOptions, DiffReport, DiffRow,
    MetricsFile, ReportBundle, ReportError, METRICS_JSON,
};
use crate::scenario::{scenario_preset, sweep_scenario_ids, ConfigError, ScenarioConfig};
use crate::sim::{pair, run_batch, with_withdrawal, without_withdrawal, BatchResult, SimError};

pub const SWEEP_PERIODS: [u32; 3] = [1, 30, 90];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("scenario {scenario}: {source}")]
    Sim { scenario: String, source: SimError },
    #[error(transparent)]
    Report(#[from] ReportError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub scenarios: Vec<String>,
    pub periods: Vec<u32>,
    pub n_simulations: Option<u32>,
    pub seed: Option<u64>,
    pub withdrawal_fraction: Option<Fraction>,
    pub resume: bool,
    pub bundle: BundleOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            scenarios: sweep_scenario_ids().map(String::from).collect(),
            periods: SWEEP_PERIODS.to_vec(),
            n_simulations: None,
            seed: None,
            withdrawal_fraction: None,
            resume: false,
            bundle: BundleOptions::default(),
        }
    }
}

impl SweepOptions {
    /// Withdrawal-enabled config for one cell, overrides applied.
    pub fn cell_config(&self, scenario: &str, period: u32) -> Result<ScenarioConfig, ConfigError> {
        let mut config = scenario_preset(scenario)?;
        if let Some(n) = self.n_simulations {
            config.n_simulations = n;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(fraction) = self.withdrawal_fraction {
            config.withdrawal_fraction = fraction;
        }
        config.withdrawal_enabled = true;
        config.withdrawal_period_days = period;
        config.validate()?;
        Ok(config)
    }
}

pub fn cell_dir(out: &Path, scenario: &str, period: u32) -> PathBuf {
    out.join(format!("{scenario}_p{period}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub scenario_id: String,
    pub period: u32,
    pub dir: PathBuf,
    /// Kept from an earlier run instead of recomputed.
    pub resumed: bool,
    pub metrics: MetricsFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub diff: DiffReport,
}

impl SweepSummary {
    pub fn cell(&self, scenario: &str, period: u32) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.scenario_id == scenario && c.period == period)
    }
}

fn completed_cell(dir: &Path, config: &ScenarioConfig) -> Option<MetricsFile> {
    let snapshot = read_config_snapshot(dir).ok()?;
    if &snapshot != config {
        return None;
    }
    read_metrics(&dir.join(METRICS_JSON)).ok()
}

/// Run the grid into `out`, calling `progress` after each cell.
///
/// The diff report covers every cell and is written to `out` last.
pub fn run_sweep(
    out: &Path,
    options: &SweepOptions,
    mut progress: impl FnMut(&SweepCell),
) -> Result<SweepSummary, SweepError> {
    // Validate the whole grid before spending time on any batch.
    let mut grid = Vec::with_capacity(options.scenarios.len());
    for scenario in &options.scenarios {
        let configs = options
            .periods
            .iter()
            .map(|&p| options.cell_config(scenario, p))
            .collect::<Result<Vec<_>, _>>()?;
        grid.push((scenario, configs));
    }

    let mut cells = Vec::new();
    for (scenario, configs) in grid {
        let mut without: Option<BatchResult> = None;
        for config in configs {
            let period = config.withdrawal_period_days;
            let dir = cell_dir(out, scenario, period);
            if options.resume {
                if let Some(metrics) = completed_cell(&dir, &config) {
                    let cell = SweepCell {
                        scenario_id: scenario.clone(),
                        period,
                        dir,
                        resumed: true,
                        metrics,
                    };
                    progress(&cell);
                    cells.push(cell);
                    continue;
                }
            }
            let sim_err = |source| SweepError::Sim {
                scenario: scenario.clone(),
                source,
            };
            let base = match &without {
                Some(b) => b.clone(),
                None => {
                    let b = run_batch(&without_withdrawal(&config)).map_err(sim_err)?;
                    without = Some(b.clone());
                    b
                }
            };
            let with = run_batch(&with_withdrawal(&config)).map_err(sim_err)?;
            let bundle = ReportBundle::paired(&config, pair(base, with));
            write_bundle(&bundle, &dir, options.bundle)?;
            let cell = SweepCell {
                scenario_id: scenario.clone(),
                period,
                dir,
                resumed: false,
                metrics: MetricsFile::from_bundle(&bundle),
            };
            progress(&cell);
            cells.push(cell);
        }
    }

    let diff = DiffReport::new(
        cells
            .iter()
            .filter_map(|c| DiffRow::from_metrics(&c.metrics))
            .collect(),
    );
    diff.write(out)?;
    Ok(SweepSummary { cells, diff })
}
