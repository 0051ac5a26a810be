//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rkamm_core::report::{write_bundle, BundleOptions, Policy, ReportBundle};
use rkamm_core::scenario::scenario_preset;
use rkamm_core::sim::{compare_withdrawal, run_batch, without_withdrawal, PairedReport};
use rkamm_core::sweep::{run_sweep, SweepOptions, SweepSummary};
use rkamm_core::{compute_b, Invoice, MoneyAmount, PoolState, ScenarioConfig, SimulationMetrics};

const SIMS: u32 = 100;

struct Outcome {
    pass: bool,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            pass: true,
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.pass &= ok;
        self.details
            .push(format!("[{}] {detail}", if ok { "ok" } else { "FAIL" }));
    }

    fn note(&mut self, detail: String) {
        self.details.push(format!("[info] {detail}"));
    }

    fn absorb(&mut self, label: &str, other: Outcome) {
        self.pass &= other.pass;
        self.details
            .extend(other.details.into_iter().map(|d| format!("{label}: {d}")));
    }
}

fn eur(v: f64) -> MoneyAmount {
    MoneyAmount::from_euros(v)
}

fn preset(id: &str, period: u32) -> ScenarioConfig {
    ScenarioConfig {
        n_simulations: SIMS,
        withdrawal_period_days: period,
        ..scenario_preset(id).expect("catalog preset")
    }
}

/// No-withdrawal and withdrawal batch means for one scenario cell.
type Cell = (SimulationMetrics, SimulationMetrics);

fn paired(id: &str, period: u32) -> Cell {
    let PairedReport { without, with, .. } =
        compare_withdrawal(&preset(id, period)).expect("batch runs");
    (without.metrics, with.metrics)
}

fn sweep_cell(summary: &SweepSummary, id: &str, period: u32) -> Cell {
    let file = &summary.cell(id, period).expect("cell swept").metrics;
    (
        file.column(Policy::NoWithdrawal).expect("paired").metrics,
        file.column(Policy::Withdrawal).expect("paired").metrics,
    )
}

fn state_is(pool: &PoolState, liquidity: f64, premium: f64, volume: f64) -> bool {
    pool.liquidity.cents() == liquidity
        && pool.premium_reserve.cents() == premium
        && pool.volume().cents() == volume
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let mut pool = PoolState::from_euros(1800.0, 0.0);
    let quote = pool.quote(0.4, eur(800.0)).expect("quotable");
    o.check(
        (quote.b - 0.3789).abs() <= 0.0005,
        format!("b = {:.6} (0.3789 +/- 0.0005)", quote.b),
    );
    o.check(
        (quote.premium.to_euros() - 303.16).abs() <= 0.01,
        format!(
            "premium = {:.6} (303.16 +/- 0.01)",
            quote.premium.to_euros()
        ),
    );

    o.check(
        state_is(&pool, 1800.0, 0.0, 1800.0),
        "initial pool 1800 / 0 / 1800".into(),
    );
    let total = eur(2000.0);
    let demanded = total.scale(rkamm_core::Fraction::new(0.4).unwrap());
    o.check(
        demanded.cents() == 800.0 && (total - demanded).cents() == 1200.0,
        format!("invoice split p = {}, q = {}", total - demanded, demanded),
    );
    let mut inv = Invoice::new(1, 0.4, demanded, 0).with_delay(30);
    let accepted = pool
        .accept_invoice(&mut inv)
        .map(|d| d.is_accepted())
        .unwrap_or(false);
    o.check(
        accepted && state_is(&pool, 1000.0, 303.16, 1303.16),
        format!(
            "after acceptance {} / {} / {}",
            pool.liquidity,
            pool.premium_reserve,
            pool.volume()
        ),
    );
    pool.day = 30;
    let repaid = pool.repay_invoice(&mut inv).is_ok();
    o.check(
        repaid && state_is(&pool, 1800.0, 303.16, 2103.16),
        format!(
            "after repayment {} / {} / {}",
            pool.liquidity,
            pool.premium_reserve,
            pool.volume()
        ),
    );
    o
}

fn profit_identity(label: &str, m: &SimulationMetrics, q0: f64, o: &mut Outcome) {
    let profit = m.final_volume + m.total_premium_withdrawn - q0;
    let pct = 100.0 * m.amm_profit / q0;
    o.check(
        (m.amm_profit - profit).abs() <= 0.01 && (m.amm_profit_pct - pct).abs() <= 0.01,
        format!(
            "{label}: {:.2} + {:.2} - {q0} = {:.2}, {:.2}%",
            m.final_volume, m.total_premium_withdrawn, m.amm_profit, m.amm_profit_pct
        ),
    );
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    // The published table, in integer cents.
    let (volume, withdrawn, q0, profit) = (2_904_941i64, 3_316_186i64, 1_000_000i64, 5_221_127i64);
    o.check(
        volume + withdrawn - q0 == profit && (10_000 * profit + q0 / 2) / q0 == 52211,
        "published: 29,049.41 + 33,161.86 - 10,000 = 52,211.27 (522.11%)".into(),
    );
    let (volume, q0, profit) = (9_841_665i64, 1_000_000i64, 8_841_665i64);
    o.check(
        volume - q0 == profit && (10_000 * profit + q0 / 2) / q0 == 88417,
        "published: 98,416.65 + 0 - 10,000 = 88,416.65 (884.17%)".into(),
    );
    for (id, period) in [
        ("baseline", 30),
        ("1.1", 1),
        ("2.3", 90),
        ("hack-q49-h100", 30),
    ] {
        let report = compare_withdrawal(&preset(id, period)).expect("batch runs");
        let q0 = preset(id, period).q0().to_euros();
        let mut runs_ok = Outcome::new();
        for (policy, batch) in [
            ("no_withdrawal", &report.without),
            ("withdrawal", &report.with),
        ] {
            profit_identity(
                &format!("{id} p{period} {policy}"),
                &batch.metrics,
                q0,
                &mut o,
            );
            for run in &batch.runs {
                let profit = run.final_volume + run.total_premium_withdrawn - q0;
                runs_ok.pass &= (run.amm_profit - profit).abs() <= 0.01;
            }
        }
        o.check(
            runs_ok.pass,
            format!("{id} p{period}: identity holds for every individual run"),
        );
    }
    o
}

/// Criterion 3 over any source of cells. The published baseline columns are
/// the scenario 1.1 batch (see the README).
fn eval_3(no_withdrawal: &SimulationMetrics, with_30: &SimulationMetrics) -> Outcome {
    let mut o = Outcome::new();
    let acc = no_withdrawal.pct_accepted;
    o.check(
        (acc - 70.19).abs() <= 7.0,
        format!("no withdrawal: pct_accepted {acc:.2} (70.19 +/- 7)"),
    );
    let profit = no_withdrawal.amm_profit_pct;
    o.check(
        (profit - 884.0).abs() <= 0.2 * 884.0,
        format!("no withdrawal: profit_pct {profit:.2} (884 +/- 20%)"),
    );
    let acc = with_30.pct_accepted;
    o.check(
        (acc - 35.87).abs() <= 7.0,
        format!("30-day/50% withdrawal: pct_accepted {acc:.2} (35.87 +/- 7)"),
    );
    o
}

fn criterion_3() -> Outcome {
    let config = preset("1.1", 30);
    let started = Instant::now();
    let without = run_batch(&without_withdrawal(&config)).expect("batch runs");
    let batch_time = started.elapsed();
    let with = run_batch(&ScenarioConfig {
        withdrawal_enabled: true,
        ..config.clone()
    })
    .expect("batch runs");
    let mut o = eval_3(&without.metrics, &with.metrics);
    o.check(
        batch_time < Duration::from_secs(10),
        format!("one 100-simulation batch took {:.2?} (< 10 s)", batch_time),
    );

    let (_, with_1) = paired("1.1", 1);
    o.note(format!(
        "same scenario with a 1-day period: pct_accepted {:.2}, profit_pct {:.2} (published column: 35.87, 522.11)",
        with_1.pct_accepted, with_1.amm_profit_pct
    ));
    let (base, base_30) = paired("baseline", 30);
    o.note(format!(
        "baseline preset without LP deposits: pct_accepted {:.2} / {:.2}, profit_pct {:.2}",
        base.pct_accepted, base_30.pct_accepted, base.amm_profit_pct
    ));
    o
}

fn strictly(values: &[(&str, f64)], increasing: bool) -> bool {
    values.windows(2).all(|w| {
        if increasing {
            w[0].1 < w[1].1
        } else {
            w[0].1 > w[1].1
        }
    })
}

fn eval_4(cell: &dyn Fn(&str) -> SimulationMetrics) -> Outcome {
    let mut o = Outcome::new();
    let series =
        |ids: &[&'static str], f: fn(&SimulationMetrics) -> f64| -> Vec<(&'static str, f64)> {
            ids.iter().map(|id| (*id, f(&cell(id)))).collect()
        };
    let fmt = |v: &[(&str, f64)]| {
        v.iter()
            .map(|(id, x)| format!("{id}={x:.2}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let profit = |m: &SimulationMetrics| m.amm_profit_pct;
    let accepted = |m: &SimulationMetrics| m.pct_accepted;
    for (ids, metric, name, increasing) in [
        (
            &["1.1", "1.2", "1.3", "1.4"][..],
            profit as fn(&SimulationMetrics) -> f64,
            "profit_pct",
            true,
        ),
        (&["2.1", "2.2", "2.3"][..], profit, "profit_pct", false),
        (&["3.1", "3.2", "3.3"][..], accepted, "pct_accepted", false),
        (&["5.1", "5.2", "5.3"][..], profit, "profit_pct", false),
    ] {
        let v = series(ids, metric);
        let arrow = if increasing {
            "increasing"
        } else {
            "decreasing"
        };
        o.check(
            strictly(&v, increasing),
            format!("{name} {arrow}: {}", fmt(&v)),
        );
    }
    o
}

fn criterion_4() -> Outcome {
    eval_4(&|id| paired(id, 30).0)
}

fn eval_5(cell: &dyn Fn(&str) -> Cell) -> Outcome {
    let mut o = Outcome::new();
    let (worst, _) = cell("hack-q10-h100");
    o.check(
        worst.amm_profit_pct <= -95.0,
        format!(
            "q=0.10 h=1.00: profit_pct {:.2} (<= -95)",
            worst.amm_profit_pct
        ),
    );
    let (mild, _) = cell("hack-q49-h10");
    let p = mild.amm_profit_pct;
    o.check(
        p > 0.0 && (p - 2300.0).abs() <= 0.25 * 2300.0,
        format!("q=0.49 h=0.10 no withdrawal: profit_pct {p:.2} (positive, 2300 +/- 25%)"),
    );
    let (without, with) = cell("hack-q49-h100");
    o.check(
        without.amm_profit_pct < 0.0 && with.amm_profit_pct > 0.0,
        format!(
            "q=0.49 h=1.00 period 30: {:.2} without, {:.2} with (negative, then positive)",
            without.amm_profit_pct, with.amm_profit_pct
        ),
    );
    o
}

fn criterion_5() -> Outcome {
    eval_5(&|id| paired(id, 30))
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();

    let n = 100;
    let qs: Vec<f64> = (0..n)
        .map(|i| 0.05 + 0.44 * i as f64 / (n - 1) as f64)
        .collect();
    let fs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let grid: Vec<Vec<Option<f64>>> = qs
        .iter()
        .map(|&q| fs.iter().map(|&f| compute_b(q, f).ok()).collect())
        .collect();
    let positive = grid
        .iter()
        .flatten()
        .all(|b| matches!(b, Some(b) if *b > 0.0 && b.is_finite()));
    let in_f = grid.iter().all(|row| row.windows(2).all(|w| w[0] < w[1]));
    let in_q = (0..n).all(|j| (1..n).all(|i| grid[i - 1][j] < grid[i][j]));
    o.check(
        positive && in_f && in_q,
        format!("b over a {n}x{n} grid: positive {positive}, increasing in f {in_f}, increasing in q {in_q}"),
    );

    let sequences = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut failure = None;
    let mut ops_run = 0usize;
    for _ in 0..sequences {
        let len = rng.gen_range(1..=40);
        let ops: Vec<common::Op> = (0..len).map(|_| common::random_op(&mut rng)).collect();
        ops_run += len;
        let liquidity = rng.gen_range(0.0..20_000.0);
        let premium = rng.gen_range(0.0..5_000.0);
        if let Err(e) = common::check_ledger(liquidity, premium, &ops) {
            failure = Some(e);
            break;
        }
    }
    o.check(
        failure.is_none(),
        match failure {
            None => format!("conservation over {sequences} random sequences ({ops_run} operations), |residual| <= 1e-9"),
            Some(e) => format!("conservation broken: {e}"),
        },
    );

    let tmp = tempfile::tempdir().expect("temp dir");
    let mut identical = true;
    let cases = [
        ("baseline", 7u64),
        ("2.3", 42),
        ("4.3", 1),
        ("hack-q30-h50", u64::MAX),
    ];
    for (id, seed) in cases {
        let config = ScenarioConfig {
            seed,
            n_simulations: 20,
            ..preset(id, 30)
        };
        let dirs: Vec<_> = ["a", "b"]
            .iter()
            .map(|run| {
                let dir = tmp.path().join(format!("{id}-{run}"));
                let bundle =
                    ReportBundle::paired(&config, compare_withdrawal(&config).expect("batch runs"));
                write_bundle(
                    &bundle,
                    &dir,
                    BundleOptions {
                        include_collected: true,
                        ..Default::default()
                    },
                )
                .expect("bundle written");
                dir
            })
            .collect();
        identical &= same_files(&dirs[0], &dirs[1]);
    }
    o.check(
        identical,
        format!(
            "{} (config, seed) pairs give byte-identical bundles",
            cases.len()
        ),
    );
    o
}

fn same_files(a: &Path, b: &Path) -> bool {
    let mut names: Vec<_> = fs::read_dir(a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    !names.is_empty()
        && names
            .iter()
            .all(|n| fs::read(a.join(n)).ok() == fs::read(b.join(n)).ok())
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let tmp = tempfile::tempdir().expect("temp dir");
    let options = SweepOptions {
        n_simulations: Some(SIMS),
        ..SweepOptions::default()
    };
    let started = Instant::now();
    let summary = run_sweep(tmp.path(), &options, |_| {}).expect("sweep runs");
    let elapsed = started.elapsed();
    let written = summary
        .cells
        .iter()
        .filter(|c| c.dir.join("metrics.json").exists())
        .count();
    o.check(
        summary.cells.len() == 75 && written == 75 && summary.diff.rows.len() == 75,
        format!(
            "{} cells, {written} bundles, {} comparison rows (75 each)",
            summary.cells.len(),
            summary.diff.rows.len()
        ),
    );
    o.check(
        elapsed < Duration::from_secs(300),
        format!("full sweep took {elapsed:.2?} (< 5 min)"),
    );

    let (without, _) = sweep_cell(&summary, "1.1", 30);
    let (_, with) = sweep_cell(&summary, "1.1", 30);
    o.absorb("criterion 3", eval_3(&without, &with));
    o.absorb("criterion 4", eval_4(&|id| sweep_cell(&summary, id, 30).0));
    o.absorb("criterion 5", eval_5(&|id| sweep_cell(&summary, id, 30)));
    o
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("worked-example exactness", criterion_1),
        ("profit identity", criterion_2),
        ("baseline statistical reproduction", criterion_3),
        ("scenario orderings", criterion_4),
        ("hack resilience boundary", criterion_5),
        ("property suites", criterion_6),
        ("full-sweep reproduction", criterion_7),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = run();
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {} ({name}): {verdict} [{:.2?}]",
            i + 1,
            started.elapsed()
        );
        for d in &outcome.details {
            println!("    {d}");
        }
        failed += usize::from(!outcome.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
