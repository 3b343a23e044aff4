use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use profilr_core::bench::{self, BenchReport};
use profilr_core::sim::{RunOutcome, Scenario, Simulation};
use profilr_core::suite;

#[derive(Parser)]
#[command(name = "profilr", version, about = "Private location-centric profiles: simulate, check and measure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and print its publications.
    Run {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON-lines event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Print a JSON summary instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Run the acceptance checks (all of them unless `--only` is given).
    TestSuite {
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Run one benchmark suite.
    Bench {
        suite: BenchSuite,
        /// Modulus sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        sweep: Vec<u64>,
        /// Proof rounds for the zkctr rounds sweep, comma separated.
        #[arg(long, value_delimiter = ',')]
        rounds: Vec<u32>,
        #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
        runs: usize,
        /// Measure setup sweep points on separate threads (setup suite only).
        #[arg(long)]
        parallel: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accounting plus every timing suite in one report.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long, default_value_t = bench::DEFAULT_RUNS)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchSuite {
    Setup,
    Zkctr,
    End2end,
    Accounting,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn emit(report: &BenchReport, format: Format, out: Option<&PathBuf>) -> Result<(), String> {
    let text = match format {
        Format::Text => report.to_text(),
        Format::Csv => report.to_csv(),
    };
    match out {
        Some(path) => fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summary_json(outcome: &RunOutcome) -> serde_json::Value {
    serde_json::json!({
        "scenario": outcome.scenario,
        "seed": outcome.seed,
        "end_time_us": outcome.end_time_us,
        "publications": outcome.publication_lines(),
        "accepted_check_ins": outcome.accepted_check_ins(),
        "oracle_mismatches": outcome.oracle_mismatches(),
        "violations": outcome.violations,
        "diagnostics": outcome.diagnostics,
        "rejections": outcome.users.iter().flat_map(|(id, outcomes)| {
            outcomes.iter().filter_map(move |o| o.rejection.as_ref().map(|r| format!("{id}: {}", r.kind())))
        }).collect::<Vec<_>>(),
    })
}

fn run(path: &PathBuf, seed: u64, trace: Option<&PathBuf>, json: bool) -> Result<bool, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let scenario = Scenario::from_json(&text).map_err(|e| e.to_string())?;
    let outcome = Simulation::new(&scenario, seed).and_then(|mut s| s.run()).map_err(|e| e.to_string())?;
    if let Some(trace) = trace {
        fs::write(trace, outcome.trace.to_jsonl()).map_err(|e| format!("cannot write {}: {e}", trace.display()))?;
    }
    let mismatches = outcome.oracle_mismatches();
    if json {
        println!("{}", serde_json::to_string_pretty(&summary_json(&outcome)).expect("json"));
    } else {
        println!("scenario {} seed {} finished at {:.3} ms", outcome.scenario, seed, outcome.end_time_us as f64 / 1e3);
        for line in outcome.publication_lines() {
            println!("{line}");
        }
        for (id, outcomes) in &outcome.users {
            for o in outcomes {
                match &o.rejection {
                    Some(r) => println!("user={id} venue={} rejected={}", o.venue_id, r.kind()),
                    None if o.accepted => println!(
                        "user={id} venue={} accepted cycle={} position={}",
                        o.venue_id,
                        o.cycle.unwrap_or_default(),
                        o.chain_position.unwrap_or_default()
                    ),
                    None => println!("user={id} venue={} not accepted", o.venue_id),
                }
            }
        }
        for problem in mismatches.iter().chain(&outcome.violations).chain(&outcome.diagnostics) {
            eprintln!("problem: {problem}");
        }
    }
    Ok(outcome.is_consistent())
}

fn bench_suite(
    suite: BenchSuite,
    sweep: &[u64],
    rounds: &[u32],
    runs: usize,
    parallel: bool,
) -> BenchReport {
    let sizes: Vec<u64> = if sweep.is_empty() { bench::MODULUS_SWEEP.to_vec() } else { sweep.to_vec() };
    let rounds: Vec<u32> = if rounds.is_empty() { bench::ROUNDS_SWEEP.to_vec() } else { rounds.to_vec() };
    match suite {
        BenchSuite::Setup if parallel => {
            let parts: Vec<BenchReport> = std::thread::scope(|scope| {
                let handles: Vec<_> = sizes.iter().map(|&n| scope.spawn(move || bench::bench_setup(&[n], runs))).collect();
                handles.into_iter().map(|h| h.join().expect("bench thread")).collect()
            });
            let mut report = BenchReport::new();
            for mut part in parts {
                part.notes.clear();
                report.merge(part);
            }
            let medians = report.values("setup", "median_ms");
            report.notes.push(format!("setup median strictly increasing in N: {}", bench::strictly_increasing(&medians)));
            report
        }
        BenchSuite::Setup => bench::bench_setup(&sizes, runs),
        BenchSuite::Zkctr => bench::bench_zkctr(&sizes, &rounds, runs),
        BenchSuite::End2end => {
            let mut report = BenchReport::new();
            for &n in &sizes {
                report.merge(bench::bench_end2end(5, 30, n.max(128), runs));
            }
            report
        }
        BenchSuite::Accounting => {
            let points: Vec<(usize, u64)> =
                [1usize, 5, 20].iter().flat_map(|&b| sizes.iter().map(move |&n| (b, n.max(64)))).collect();
            bench::bench_accounting(&points)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, seed, trace, json } => run(&scenario, seed, trace.as_ref(), json),
        Command::TestSuite { only } => {
            let ids: Vec<u8> = if only.is_empty() { suite::CRITERIA.iter().map(|(id, _)| *id).collect() } else { only };
            let mut all = true;
            for id in ids {
                match suite::run_criterion(id) {
                    Some(result) => {
                        println!("{}", result.line());
                        all &= result.passed;
                    }
                    None => {
                        eprintln!("no criterion {id}");
                        all = false;
                    }
                }
            }
            Ok(all)
        }
        Command::Bench { suite, sweep, rounds, runs, parallel, format, out } => {
            let report = bench_suite(suite, &sweep, &rounds, runs.max(1), parallel);
            emit(&report, format, out.as_ref()).map(|_| true)
        }
        Command::Report { format, runs, out } => {
            let runs = runs.max(1);
            let mut report = bench::bench_accounting(&[(1, 256), (5, 256), (20, 256), (1, 1024), (5, 1024), (20, 1024)]);
            report.merge(bench::bench_setup(&bench::MODULUS_SWEEP, runs));
            report.merge(bench::bench_zkctr(&bench::MODULUS_SWEEP, &bench::ROUNDS_SWEEP, runs));
            report.merge(bench::bench_end2end(5, 30, 512, runs.min(3)));
            emit(&report, format, out.as_ref()).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
