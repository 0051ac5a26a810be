//! Report bundles: batch metrics, mean time series, per-run tables and the
//! cross-scenario withdrawal comparison.
//!
//! Every reported number is rounded half-up at the boundary: money, counts
//! and percentages to 2 decimals, multiples of the initial collateral to 4.
//! Bundles are staged in a sibling `.partial` directory and renamed into
//! place, so a reader never observes a half-written bundle.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::money::round_half_up;
use crate::scenario::ScenarioConfig;
use crate::sim::{
    percent_difference, BatchResult, MetricKind, PairedReport, SimulationMetrics, TimeSeriesPoint,
};

/// Written into every metrics and comparison file.
pub const DIFFERENCE_CONVENTION: &str = "difference_pct = 100 * (withdrawal - no_withdrawal) / \
     |no_withdrawal|, computed from the rounded columns; 0 when both are equal, empty/null when \
     no_withdrawal is 0";

pub const CONFIG_FILE: &str = "config.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const DIFF_CSV: &str = "diff_report.csv";
pub const DIFF_JSON: &str = "diff_report.json";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Which side of the withdrawal comparison a column describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    NoWithdrawal,
    Withdrawal,
}

impl Policy {
    pub fn of(config: &ScenarioConfig) -> Self {
        if config.withdrawal_enabled {
            Policy::Withdrawal
        } else {
            Policy::NoWithdrawal
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Policy::NoWithdrawal => "no_withdrawal",
            Policy::Withdrawal => "withdrawal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BundleOptions {
    pub format: OutputFormat,
    /// Add a cumulative premium-collected column to the time series.
    pub include_collected: bool,
}

/// Everything needed to report, and re-run, one scenario cell.
///
/// For a paired bundle the config snapshot has withdrawals enabled; the
/// no-withdrawal column is the same config with the flag cleared.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub scenario_id: String,
    pub config: ScenarioConfig,
    pub without: Option<BatchResult>,
    pub with: Option<BatchResult>,
}

impl ReportBundle {
    pub fn paired(config: &ScenarioConfig, report: PairedReport) -> Self {
        ReportBundle {
            scenario_id: config.scenario_id.clone(),
            config: ScenarioConfig {
                withdrawal_enabled: true,
                ..config.clone()
            },
            without: Some(report.without),
            with: Some(report.with),
        }
    }

    /// A one-column bundle; the column follows `config.withdrawal_enabled`.
    pub fn single(config: &ScenarioConfig, batch: BatchResult) -> Self {
        let (without, with) = match Policy::of(config) {
            Policy::NoWithdrawal => (Some(batch), None),
            Policy::Withdrawal => (None, Some(batch)),
        };
        ReportBundle {
            scenario_id: config.scenario_id.clone(),
            config: config.clone(),
            without,
            with,
        }
    }

    pub fn is_paired(&self) -> bool {
        self.without.is_some() && self.with.is_some()
    }

    pub fn columns(&self) -> Vec<(Policy, &BatchResult)> {
        let mut cols = Vec::with_capacity(2);
        if let Some(b) = &self.without {
            cols.push((Policy::NoWithdrawal, b));
        }
        if let Some(b) = &self.with {
            cols.push((Policy::Withdrawal, b));
        }
        cols
    }
}

/// Decimal places used when reporting a metric of this kind.
pub fn decimals(kind: MetricKind) -> u32 {
    match kind {
        MetricKind::Ratio => 4,
        MetricKind::Count | MetricKind::Percent | MetricKind::Money => 2,
    }
}

/// Metrics as they appear in report files.
pub fn reported(metrics: &SimulationMetrics) -> SimulationMetrics {
    let values: Vec<f64> = SimulationMetrics::FIELDS
        .iter()
        .zip(metrics.values())
        .map(|((_, kind), v)| round_half_up(v, decimals(*kind)))
        .collect();
    SimulationMetrics::from_values(&values).expect("one value per field")
}

fn reported_difference(without: f64, with: f64) -> Option<f64> {
    percent_difference(without, with).map(|d| round_half_up(d, 2))
}

fn fmt_fixed(value: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_up(value, decimals))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyColumn {
    pub policy: Policy,
    /// AMM profit is negative.
    pub loss: bool,
    pub metrics: SimulationMetrics,
}

/// Canonical metrics document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub scenario_id: String,
    pub difference_convention: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub withdrawal_period_days: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub withdrawal_fraction: Option<f64>,
    pub columns: Vec<PolicyColumn>,
    /// Per-metric difference; present only for paired bundles.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difference_pct: Option<Map<String, Value>>,
}

impl MetricsFile {
    pub fn from_bundle(bundle: &ReportBundle) -> Self {
        let columns: Vec<PolicyColumn> = bundle
            .columns()
            .into_iter()
            .map(|(policy, batch)| {
                let metrics = reported(&batch.metrics);
                PolicyColumn {
                    policy,
                    loss: metrics.amm_profit < 0.0,
                    metrics,
                }
            })
            .collect();
        let difference_pct = match columns.as_slice() {
            [without, with] => Some(
                SimulationMetrics::FIELDS
                    .iter()
                    .zip(
                        without
                            .metrics
                            .values()
                            .into_iter()
                            .zip(with.metrics.values()),
                    )
                    .map(|((name, _), (a, b))| {
                        let value = reported_difference(a, b).map_or(Value::Null, Value::from);
                        (name.to_string(), value)
                    })
                    .collect(),
            ),
            _ => None,
        };
        let has_withdrawal = bundle.with.is_some();
        MetricsFile {
            scenario_id: bundle.scenario_id.clone(),
            difference_convention: DIFFERENCE_CONVENTION.to_string(),
            withdrawal_period_days: has_withdrawal.then_some(bundle.config.withdrawal_period_days),
            withdrawal_fraction: has_withdrawal.then_some(bundle.config.withdrawal_fraction.get()),
            columns,
            difference_pct,
        }
    }

    pub fn column(&self, policy: Policy) -> Option<&PolicyColumn> {
        self.columns.iter().find(|c| c.policy == policy)
    }

    /// Stored difference for `metric`; `None` when absent or undefined.
    pub fn difference(&self, metric: &str) -> Option<f64> {
        self.difference_pct.as_ref()?.get(metric)?.as_f64()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    /// Flat CSV: one row per metric, one column per policy, then the
    /// difference column when paired. A `#` line carries the convention.
    pub fn to_csv(&self) -> String {
        let paired = self.difference_pct.is_some();
        let mut out = format!("# {DIFFERENCE_CONVENTION}\n");
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["metric"];
        header.extend(self.columns.iter().map(|c| c.policy.label()));
        if paired {
            header.push("difference_pct");
        }
        wtr.write_record(&header).expect("in-memory write");
        for (i, (name, kind)) in SimulationMetrics::FIELDS.iter().enumerate() {
            let mut row = vec![name.to_string()];
            for col in &self.columns {
                row.push(fmt_fixed(col.metrics.values()[i], decimals(*kind)));
            }
            if paired {
                row.push(
                    self.difference(name)
                        .map(|d| fmt_fixed(d, 2))
                        .unwrap_or_default(),
                );
            }
            wtr.write_record(&row).expect("in-memory write");
        }
        let mut row = vec!["loss".to_string()];
        row.extend(self.columns.iter().map(|c| c.loss.to_string()));
        if paired {
            row.push(String::new());
        }
        wtr.write_record(&row).expect("in-memory write");
        out.push_str(
            &String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8"),
        );
        out
    }
}

pub fn read_metrics(path: &Path) -> Result<MetricsFile, ReportError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_config_snapshot(dir: &Path) -> Result<ScenarioConfig, ReportError> {
    let path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json { path, source })
}

/// One row per day; money columns rounded to cents.
pub fn timeseries_csv(series: &[TimeSeriesPoint], include_collected: bool) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["day", "liquidity", "premium", "volume", "withdrawn"];
    if include_collected {
        header.push("collected");
    }
    wtr.write_record(&header).expect("in-memory write");
    for p in series {
        let mut row = vec![
            p.day.to_string(),
            fmt_fixed(p.liquidity, 2),
            fmt_fixed(p.premium_reserve, 2),
            fmt_fixed(p.volume, 2),
            fmt_fixed(p.cumulative_withdrawn, 2),
        ];
        if include_collected {
            row.push(fmt_fixed(p.cumulative_collected, 2));
        }
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Per-run metrics, one row per simulation index.
pub fn runs_csv(runs: &[SimulationMetrics]) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["sim_index"];
    header.extend(SimulationMetrics::FIELDS.iter().map(|(name, _)| *name));
    wtr.write_record(&header).expect("in-memory write");
    for (i, run) in runs.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(
            SimulationMetrics::FIELDS
                .iter()
                .zip(run.values())
                .map(|((_, kind), v)| fmt_fixed(v, decimals(*kind))),
        );
        wtr.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Write `contents` to a temporary sibling, then rename it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path)(e)
    })
}

fn staging_dir(dir: &Path) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    dir.with_file_name(format!("{name}.partial"))
}

/// Write a bundle into `dir`, replacing any previous bundle there.
///
/// Returns the paths of the files written, relative to `dir`'s final
/// location.
pub fn write_bundle(
    bundle: &ReportBundle,
    dir: &Path,
    options: BundleOptions,
) -> Result<Vec<PathBuf>, ReportError> {
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let staging = staging_dir(dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir(&staging).map_err(io_err(&staging))?;

    let mut files: Vec<(String, String)> = Vec::new();
    let mut config = serde_json::to_string_pretty(&bundle.config).expect("config serializes");
    config.push('\n');
    files.push((CONFIG_FILE.into(), config));
    let metrics = MetricsFile::from_bundle(bundle);
    if matches!(options.format, OutputFormat::Json | OutputFormat::Both) {
        files.push((METRICS_JSON.into(), metrics.to_json()));
    }
    if matches!(options.format, OutputFormat::Csv | OutputFormat::Both) {
        files.push((METRICS_CSV.into(), metrics.to_csv()));
    }
    for (policy, batch) in bundle.columns() {
        files.push((
            format!("timeseries_{}.csv", policy.label()),
            timeseries_csv(&batch.mean_series, options.include_collected),
        ));
        files.push((
            format!("runs_{}.csv", policy.label()),
            runs_csv(&batch.runs),
        ));
    }

    for (name, contents) in &files {
        let path = staging.join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
    }
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::rename(&staging, dir).map_err(io_err(dir))?;
    Ok(files.into_iter().map(|(name, _)| dir.join(name)).collect())
}

/// One scenario × withdrawal-period cell of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub scenario_id: String,
    pub withdrawal_period_days: u32,
    pub profit_no_withdrawal: f64,
    pub profit_withdrawal: f64,
    pub profit_pct_no_withdrawal: f64,
    pub profit_pct_withdrawal: f64,
    pub difference_pct: Option<f64>,
    pub loss_no_withdrawal: bool,
    pub loss_withdrawal: bool,
    /// Withdrawal moves the profit across zero.
    pub sign_flip: bool,
}

impl DiffRow {
    pub fn from_bundle(bundle: &ReportBundle) -> Option<Self> {
        Self::from_metrics(&MetricsFile::from_bundle(bundle))
    }

    /// Row for a paired metrics file; `None` for a single-policy one.
    pub fn from_metrics(file: &MetricsFile) -> Option<Self> {
        let without = &file.column(Policy::NoWithdrawal)?.metrics;
        let with = &file.column(Policy::Withdrawal)?.metrics;
        let (a, b) = (without.amm_profit, with.amm_profit);
        Some(DiffRow {
            scenario_id: file.scenario_id.clone(),
            withdrawal_period_days: file.withdrawal_period_days?,
            profit_no_withdrawal: a,
            profit_withdrawal: b,
            profit_pct_no_withdrawal: without.amm_profit_pct,
            profit_pct_withdrawal: with.amm_profit_pct,
            difference_pct: reported_difference(a, b),
            loss_no_withdrawal: a < 0.0,
            loss_withdrawal: b < 0.0,
            sign_flip: (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0),
        })
    }
}

/// Comparison rows for every paired bundle, in input order.
pub fn diff_rows<'a>(bundles: impl IntoIterator<Item = &'a ReportBundle>) -> Vec<DiffRow> {
    bundles
        .into_iter()
        .filter_map(DiffRow::from_bundle)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub difference_convention: String,
    pub rows: Vec<DiffRow>,
}

impl DiffReport {
    pub fn new(rows: Vec<DiffRow>) -> Self {
        DiffReport {
            difference_convention: DIFFERENCE_CONVENTION.to_string(),
            rows,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("diff report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# {DIFFERENCE_CONVENTION}\n");
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record([
            "scenario_id",
            "withdrawal_period_days",
            "profit_no_withdrawal",
            "profit_withdrawal",
            "profit_pct_no_withdrawal",
            "profit_pct_withdrawal",
            "difference_pct",
            "loss_no_withdrawal",
            "loss_withdrawal",
            "sign_flip",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            wtr.write_record([
                r.scenario_id.clone(),
                r.withdrawal_period_days.to_string(),
                fmt_fixed(r.profit_no_withdrawal, 2),
                fmt_fixed(r.profit_withdrawal, 2),
                fmt_fixed(r.profit_pct_no_withdrawal, 2),
                fmt_fixed(r.profit_pct_withdrawal, 2),
                r.difference_pct
                    .map(|d| fmt_fixed(d, 2))
                    .unwrap_or_default(),
                r.loss_no_withdrawal.to_string(),
                r.loss_withdrawal.to_string(),
                r.sign_flip.to_string(),
            ])
            .expect("in-memory write");
        }
        out.push_str(
            &String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8"),
        );
        out
    }

    /// Write `diff_report.csv` and `diff_report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let csv_path = dir.join(DIFF_CSV);
        let json_path = dir.join(DIFF_JSON);
        write_atomic(&csv_path, self.to_csv().as_bytes())?;
        write_atomic(&json_path, self.to_json().as_bytes())?;
        Ok(vec![csv_path, json_path])
    }
}

fn metric_label(name: &str) -> &'static str {
    match name {
        "n_simulations" => "Simulations",
        "horizon_days" => "Days simulated",
        "total_invoices" => "Invoices offered",
        "avg_accepted" => "Invoices accepted",
        "pct_accepted" => "% accepted",
        "avg_paid" => "Invoices paid",
        "pct_paid_of_accepted" => "% paid of accepted",
        "avg_unpaid" => "Invoices unpaid",
        "pct_unpaid_of_accepted" => "% unpaid of accepted",
        "avg_loss" => "Loss from unpaid collateral",
        "total_collateral_covered" => "Collateral covered",
        "collateral_covered_x_ic" => "Collateral covered (x Q0)",
        "total_premium_collected" => "Premium collected",
        "total_lp_deposits" => "LP deposits",
        "total_premium_withdrawn" => "Premium withdrawn",
        "total_premium_withdrawn_x_ic" => "Premium withdrawn (x Q0)",
        "remaining_premium" => "Remaining premium",
        "remaining_premium_x_ic" => "Remaining premium (x Q0)",
        "final_volume" => "Final volume",
        "amm_profit" => "AMM profit",
        "amm_profit_pct" => "AMM profit %",
        _ => "",
    }
}

/// Human-readable metrics table, one column per policy plus the difference.
pub fn render_summary(bundle: &ReportBundle) -> String {
    let file = MetricsFile::from_bundle(bundle);
    let paired = file.difference_pct.is_some();
    let mut out = format!("Scenario {}", file.scenario_id);
    if let (Some(period), Some(fraction)) = (file.withdrawal_period_days, file.withdrawal_fraction)
    {
        let _ = write!(out, " (withdraw {}% every {period} days)", fraction * 100.0);
    }
    out.push('\n');
    let _ = write!(out, "{:<30}", "Metric");
    for col in &file.columns {
        let _ = write!(out, "{:>18}", col.policy.label());
    }
    if paired {
        let _ = write!(out, "{:>16}", "difference %");
    }
    out.push('\n');
    for (i, (name, kind)) in SimulationMetrics::FIELDS.iter().enumerate() {
        let _ = write!(out, "{:<30}", metric_label(name));
        for col in &file.columns {
            let _ = write!(
                out,
                "{:>18}",
                fmt_fixed(col.metrics.values()[i], decimals(*kind))
            );
        }
        if paired {
            let cell = file
                .difference(name)
                .map(|d| fmt_fixed(d, 2))
                .unwrap_or_else(|| "n/a".into());
            let _ = write!(out, "{cell:>16}");
        }
        out.push('\n');
    }
    let _ = write!(out, "{:<30}", "Loss");
    for col in &file.columns {
        let _ = write!(out, "{:>18}", if col.loss { "yes" } else { "no" });
    }
    out.push('\n');
    out
}
