//! `rkamm`: run rkAMM scenarios, sweep the scenario grid, or price one invoice.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use rkamm_core::report::{render_summary, write_bundle, BundleOptions, OutputFormat, ReportBundle};
use rkamm_core::scenario::{scenario_preset, ConfigError, ScenarioConfig, PRESETS};
use rkamm_core::sim::{compare_withdrawal, run_batch, with_withdrawal, without_withdrawal};
use rkamm_core::sweep::{run_sweep, SweepError, SweepOptions};
use rkamm_core::{Fraction, MoneyAmount, PoolState, ReportError, SimError};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_INTERNAL: u8 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "rkamm",
    version,
    about = "Reverse-Kelly invoice collateral AMM simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario as a batch, with and without premium withdrawal.
    Simulate(SimulateArgs),
    /// Run every scenario under each withdrawal period and write a diff report.
    Sweep(SweepArgs),
    /// Price a single invoice against a described pool.
    Quote(QuoteArgs),
    /// List the scenario presets.
    Presets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    Both,
    With,
    Without,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Both,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
            Format::Both => OutputFormat::Both,
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Number of simulations per batch.
    #[arg(long)]
    sims: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Share of the premium reserve taken at each withdrawal, in [0, 1].
    #[arg(long)]
    withdraw_fraction: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads for batch runs (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    /// Add cumulative premium collected to the time-series files.
    #[arg(long)]
    collected: bool,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Preset id (see `rkamm presets`).
    #[arg(long, required_unless_present = "config", conflicts_with = "config")]
    scenario: Option<String>,
    /// JSON scenario file; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = period_parser())]
    withdraw_period: Option<u32>,
    #[arg(long, value_enum, default_value_t = Policy::Both)]
    policy: Policy,
    /// Override any config field, e.g. `--set nonpayment_probability=0.1`.
    #[arg(long = "set", value_name = "FIELD=VALUE")]
    overrides: Vec<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Restrict to these presets (comma separated).
    #[arg(long, value_delimiter = ',')]
    scenarios: Vec<String>,
    /// Withdrawal periods to sweep.
    #[arg(long, value_delimiter = ',', value_parser = period_parser())]
    periods: Vec<u32>,
    /// Keep cells already written by an identical earlier run.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct QuoteArgs {
    /// Non-collateralized share of the invoice.
    #[arg(long)]
    q: f64,
    /// Demanded collateral in euros.
    #[arg(long)]
    amount: f64,
    #[arg(long)]
    liquidity: f64,
    #[arg(long, default_value_t = 0.0)]
    premium: f64,
}

fn period_parser() -> impl clap::builder::TypedValueParser<Value = u32> {
    use clap::builder::TypedValueParser;
    PossibleValuesParser::new(["1", "30", "90"]).map(|s| s.parse::<u32>().expect("listed period"))
}

fn preset_list() -> String {
    let mut s = String::from("Scenario presets:\n");
    for (id, about) in PRESETS {
        s.push_str(&format!("  {id:<15} {about}\n"));
    }
    s
}

/// Failure classified by exit code.
enum Failure {
    Config(String),
    Io(String),
    Internal(String),
}

impl Failure {
    fn exit(self) -> ExitCode {
        let (code, msg) = match self {
            Failure::Config(m) => (EXIT_CONFIG, m),
            Failure::Io(m) => (EXIT_IO, m),
            Failure::Internal(m) => (EXIT_INTERNAL, m),
        };
        eprintln!("error: {msg}");
        ExitCode::from(code)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(c) => c.into(),
            other => Failure::Internal(other.to_string()),
        }
    }
}

impl From<SweepError> for Failure {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::Config(c) => c.into(),
            SweepError::Report(r) => r.into(),
            SweepError::Sim { scenario, source } => match Failure::from(source) {
                Failure::Config(m) => Failure::Config(format!("scenario {scenario}: {m}")),
                Failure::Internal(m) => Failure::Internal(format!("scenario {scenario}: {m}")),
                io => io,
            },
        }
    }
}

fn fraction(value: f64) -> Result<Fraction, Failure> {
    Fraction::new(value).map_err(|e| Failure::Config(format!("--withdraw-fraction: {e}")))
}

fn init_threads(jobs: usize) -> Result<(), Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Failure::Internal(format!("cannot start worker pool: {e}")))
}

/// Apply `FIELD=VALUE` overrides through the config's JSON form, so that
/// field names and validation match config files exactly.
fn apply_overrides(
    config: ScenarioConfig,
    overrides: &[String],
) -> Result<ScenarioConfig, Failure> {
    if overrides.is_empty() {
        return Ok(config);
    }
    let mut json = serde_json::to_value(&config).expect("config serializes");
    for item in overrides {
        let Some((field, raw)) = item.split_once('=') else {
            return Err(Failure::Config(format!(
                "--set expects FIELD=VALUE, got '{item}'"
            )));
        };
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        json[field.trim()] = value;
    }
    serde_json::from_value(json).map_err(|e| Failure::Config(format!("--set: {e}")))
}

fn dir_name(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let common = &args.common;
    let mut config = match (&args.scenario, &args.config) {
        (Some(id), None) => scenario_preset(id)?,
        (None, Some(path)) => ScenarioConfig::from_json_file(path)?,
        _ => {
            return Err(Failure::Config(
                "give exactly one of --scenario or --config".into(),
            ))
        }
    };
    config = apply_overrides(config, &args.overrides)?;
    if let Some(n) = common.sims {
        config.n_simulations = n;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(f) = common.withdraw_fraction {
        config.withdrawal_fraction = fraction(f)?;
    }
    if let Some(p) = args.withdraw_period {
        config.withdrawal_period_days = p;
    }
    config.validate()?;
    init_threads(common.jobs)?;

    if common.verbose {
        eprintln!(
            "running {} x {} simulations over {} days",
            config.scenario_id,
            config.n_simulations,
            config.horizon_days()
        );
    }
    let bundle = match args.policy {
        Policy::Both => ReportBundle::paired(&config, compare_withdrawal(&config)?),
        Policy::With => {
            let c = with_withdrawal(&config);
            ReportBundle::single(&c, run_batch(&c)?)
        }
        Policy::Without => {
            let c = without_withdrawal(&config);
            ReportBundle::single(&c, run_batch(&c)?)
        }
    };
    let name = match args.policy {
        Policy::Without => format!("{}_nowd", dir_name(&config.scenario_id)),
        _ => format!(
            "{}_p{}",
            dir_name(&config.scenario_id),
            config.withdrawal_period_days
        ),
    };
    let dir = common.out.join(name);
    let options = BundleOptions {
        format: common.format.into(),
        include_collected: common.collected,
    };
    let files = write_bundle(&bundle, &dir, options)?;

    print!("{}", render_summary(&bundle));
    println!("Bundle written to {}", dir.display());
    if common.verbose {
        for f in files {
            eprintln!("  {}", f.display());
        }
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Failure> {
    let common = &args.common;
    let mut options = SweepOptions {
        n_simulations: common.sims,
        seed: common.seed,
        withdrawal_fraction: common.withdraw_fraction.map(fraction).transpose()?,
        resume: args.resume,
        bundle: BundleOptions {
            format: common.format.into(),
            include_collected: common.collected,
        },
        ..SweepOptions::default()
    };
    if !args.scenarios.is_empty() {
        options.scenarios = args.scenarios.clone();
    }
    if !args.periods.is_empty() {
        options.periods = args.periods.clone();
    }
    init_threads(common.jobs)?;

    let total = options.scenarios.len() * options.periods.len();
    let mut done = 0;
    let verbose = common.verbose;
    let summary = run_sweep(&common.out, &options, |cell| {
        done += 1;
        if verbose {
            let how = if cell.resumed { "kept" } else { "done" };
            eprintln!(
                "[{done}/{total}] {} period {} {how}",
                cell.scenario_id, cell.period
            );
        }
    })?;

    println!(
        "{:<15} {:>6} {:>14} {:>14} {:>12}  flags",
        "scenario", "period", "no_withdrawal", "withdrawal", "diff %"
    );
    for row in &summary.diff.rows {
        let diff = row
            .difference_pct
            .map_or_else(|| "n/a".to_string(), |d| format!("{d:.2}"));
        let mut flags = Vec::new();
        if row.loss_no_withdrawal || row.loss_withdrawal {
            flags.push("loss");
        }
        if row.sign_flip {
            flags.push("sign-flip");
        }
        println!(
            "{:<15} {:>6} {:>14.2} {:>14.2} {:>12}  {}",
            row.scenario_id,
            row.withdrawal_period_days,
            row.profit_pct_no_withdrawal,
            row.profit_pct_withdrawal,
            diff,
            flags.join(",")
        );
    }
    println!(
        "{} cells written to {}",
        summary.cells.len(),
        common.out.display()
    );
    Ok(())
}

fn quote(args: QuoteArgs) -> Result<(), Failure> {
    for (name, v) in [
        ("amount", args.amount),
        ("liquidity", args.liquidity),
        ("premium", args.premium),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(Failure::Config(format!(
                "--{name} must be a non-negative number"
            )));
        }
    }
    let pool = PoolState::from_euros(args.liquidity, args.premium);
    let demanded = MoneyAmount::from_euros(args.amount);
    let quote = pool
        .quote(args.q, demanded)
        .map_err(|e| Failure::Config(e.to_string()))?;
    println!("f        {:.4}", quote.f);
    println!("b        {:.4}", quote.b);
    println!("premium  {}", quote.premium);
    if demanded > pool.volume() {
        println!(
            "note: the pool would reject this invoice (demanded collateral exceeds its volume)"
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Quote(args) => quote(args),
        Command::Presets => {
            print!("{}", preset_list());
            Ok(())
        }
    }
}

fn command() -> clap::Command {
    let presets = preset_list();
    Cli::command()
        .after_help(presets.clone())
        .mut_subcommand("simulate", |c| c.after_help(presets.clone()))
        .mut_subcommand("sweep", |c| c.after_help(presets))
}

fn main() -> ExitCode {
    let matches = command().get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.exit(),
    }
}
