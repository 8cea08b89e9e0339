//! Command-line front end for the protocol simulator.
//!
//! Exit codes: 0 on success, 1 when a run's assertions or the acceptance
//! gate fail, 2 on usage or parse errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skyshare_core::acceptance;
use skyshare_core::metering::{self, MeteredRun};
use skyshare_core::netsim::Scenario;

#[derive(Parser)]
#[command(
    name = "skyshare",
    about = "Deterministic simulator for certificateless UAV data-sharing protocols",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script and evaluate its assertions.
    Run {
        /// Path to the scenario file.
        file: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Writes the transcript and assertion results here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure honest-run costs over several trials.
    Bench {
        /// Protocol to measure.
        #[arg(long, value_parser = ["sedds", "segds"])]
        protocol: String,
        /// Number of downloaders for the group protocol (ignored for the
        /// direct exchange).
        #[arg(long, default_value_t = 5)]
        n: usize,
        /// Trials to run, each with a distinct seed.
        #[arg(long, default_value_t = 3)]
        trials: u64,
        /// File size in bytes.
        #[arg(long, default_value_t = 65536)]
        size: u64,
        /// Base seed; trial i uses seed + i.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Writes the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full acceptance gate.
    Accept,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version as "errors" with success status
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run { file, seed, out } => cmd_run(&file, seed, out.as_deref()),
        Command::Bench { protocol, n, trials, size, seed, out } => {
            cmd_bench(&protocol, n, trials, size, seed, out.as_deref())
        }
        Command::Accept => cmd_accept(),
    }
}

fn emit(out: Option<&std::path::Path>, text: &str) -> ExitCode {
    match out {
        None => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Some(path) => match fs::write(path, text) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: cannot write {}: {e}", path.display());
                ExitCode::from(2)
            }
        },
    }
}

fn cmd_run(file: &std::path::Path, seed: Option<u64>, out: Option<&std::path::Path>) -> ExitCode {
    let text = match fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let mut scenario = match Scenario::parse(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let outcome = match scenario.run() {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };

    let (report, failed) = outcome.report_text();
    let wrote = emit(out, &report);
    if wrote != ExitCode::SUCCESS {
        return wrote;
    }
    if failed > 0 {
        eprintln!("{failed} assertion(s) failed");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn cmd_bench(
    protocol: &str,
    n: usize,
    trials: u64,
    size: u64,
    seed: u64,
    out: Option<&std::path::Path>,
) -> ExitCode {
    if trials == 0 {
        eprintln!("error: --trials must be at least 1");
        return ExitCode::from(2);
    }
    if protocol == "segds" && n < 2 {
        eprintln!("error: --n must be at least 2 (coordinator plus one member)");
        return ExitCode::from(2);
    }
    let runs: Vec<MeteredRun> = (0..trials)
        .map(|i| match protocol {
            "segds" => metering::measure_segds(n, size, seed + i),
            _ => metering::measure_sedds(size, seed + i),
        })
        .collect();
    emit(out, &metering::report_text(protocol, &runs))
}

fn cmd_accept() -> ExitCode {
    let results = acceptance::run_all();
    print!("{}", acceptance::render(&results));
    if acceptance::all_pass(&results) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
