use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ppsync::batch::run_batch;
use ppsync::controller::{GainBounds, GainReport};
use ppsync::scenario::{load_scenario, Scenario, BUILTINS};
use ppsync::sim::RunOutcome;
use ppsync::Error;

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_GAINS: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ppsync",
    version,
    about = "Prescribed-performance leader tracking simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one or more scenarios and write trace.csv + summary.json.
    Run {
        /// Scenario file or builtin name; repeat to run several concurrently.
        #[arg(long, required = true)]
        scenario: Vec<String>,
        /// Output directory; with several scenarios each gets a subdirectory.
        #[arg(long, env = "PPSYNC_OUT_DIR", default_value = "ppsync-out")]
        out: PathBuf,
        /// `dotted.path=value`, applied before validation.
        #[arg(long = "override", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Evaluate the stability gain condition for a scenario.
    CheckGains {
        #[arg(long)]
        scenario: String,
        /// JSON bounds block; defaults to the scenario's own `bounds`.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long = "override", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the names of the builtin scenarios.
    ListBuiltins,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            out,
            overrides,
        } => cmd_run(&scenario, &out, &overrides),
        Command::CheckGains {
            scenario,
            bounds,
            overrides,
            format,
        } => cmd_check_gains(&scenario, bounds.as_deref(), &overrides, format),
        Command::ListBuiltins => {
            for name in BUILTINS {
                println!("{name}");
            }
            EXIT_OK
        }
    };
    ExitCode::from(code)
}

fn report_error(context: &str, err: &Error) -> u8 {
    eprintln!("error: {context}: {err}");
    match err {
        Error::Validation(_) | Error::Parse(_) | Error::MissingBounds(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn cmd_run(names: &[String], out: &Path, overrides: &[String]) -> u8 {
    let mut scenarios = Vec::new();
    for name in names {
        match load_scenario(name, overrides) {
            Ok(s) => scenarios.push(s),
            Err(e) => return report_error(name, &e),
        }
    }
    let dirs: Vec<PathBuf> = if scenarios.len() == 1 {
        vec![out.to_path_buf()]
    } else {
        scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| out.join(format!("{:02}-{}", i, dir_name(s))))
            .collect()
    };

    let mut worst = EXIT_OK;
    for ((name, scenario), (outcome, dir)) in names
        .iter()
        .zip(&scenarios)
        .zip(run_batch(&scenarios).into_iter().zip(&dirs))
    {
        let code = match outcome {
            Ok(o) => match write_outputs(scenario, &o, dir) {
                Ok(()) => {
                    report_run(name, &o, dir);
                    if o.passed() {
                        EXIT_OK
                    } else {
                        EXIT_RUNTIME
                    }
                }
                Err(e) => {
                    eprintln!("error: {name}: writing {}: {e}", dir.display());
                    EXIT_RUNTIME
                }
            },
            Err(e) => report_error(name, &e),
        };
        worst = worst.max(code);
    }
    worst
}

fn dir_name(s: &Scenario) -> String {
    let name: String = s
        .name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if name.is_empty() {
        "scenario".into()
    } else {
        name
    }
}

fn write_outputs(scenario: &Scenario, outcome: &RunOutcome, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let csv = fs::File::create(dir.join("trace.csv"))?;
    outcome.trace.write_csv(std::io::BufWriter::new(csv))?;
    let record = serde_json::json!({
        "scenario": scenario.name,
        "passed": outcome.passed(),
        "summary": outcome.summary,
        "failure": outcome.failure,
    });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&record)? + "\n")
}

fn report_run(name: &str, o: &RunOutcome, dir: &Path) {
    let s = &o.summary;
    println!(
        "{name}: {} | violations {} | max|e| after {}s = {} | weight norm max {:.3e} | {}",
        if o.passed() { "ok" } else { "FAILED" },
        s.envelope_violations,
        s.settle_after,
        s.max_abs_e_after_overall
            .map_or("n/a".to_string(), |v| format!("{v:.3e}")),
        s.weight_norm_max,
        dir.display()
    );
    if let Some(f) = &o.failure {
        let json = serde_json::to_string(f).expect("failure serializes");
        eprintln!("failure: {json}");
    }
}

fn cmd_check_gains(name: &str, bounds: Option<&Path>, overrides: &[String], format: Format) -> u8 {
    let scenario = match load_scenario(name, overrides) {
        Ok(s) => s,
        Err(e) => return report_error(name, &e),
    };
    let bounds: Option<GainBounds> = match bounds {
        Some(path) => {
            let parsed = fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(b) => Some(b),
                Err(e) => return report_error(&path.display().to_string(), &Error::Parse(e)),
            }
        }
        None => None,
    };
    let report = match scenario.check_gains(bounds.as_ref()) {
        Ok(r) => r,
        Err(e) => return report_error(name, &e),
    };
    match format {
        Format::Text => print_report(&report),
        Format::Csv => println!("{}\n{}", GainReport::CSV_HEADER, report.csv_row()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    if report.passed() {
        EXIT_OK
    } else {
        EXIT_GAINS
    }
}

fn print_report(r: &GainReport) {
    let mark = |b: bool| if b { "ok" } else { "FAIL" };
    println!(
        "c = {} (lower bound {:.6e}): {}",
        r.c,
        r.c_lower_bound,
        mark(r.gain_condition_ok)
    );
    println!(
        "gamma = {:.6e}  g = {:.6e}  nu = {:.6e}  mu = {:.6e}",
        r.gamma, r.g, r.nu, r.mu
    );
    println!("H = {:?}", r.h_matrix);
    let labels = ["beta > 0", "beta k > 0", "k(beta mu - 2g^2) - beta gamma^2 > 0"];
    for (label, ok) in labels.iter().zip(r.sylvester_conditions) {
        println!("  {label}: {}", mark(ok));
    }
    println!(
        "sigma_min(Q) = {:.6e}  R in [{:.6e}, {:.6e}]  sigma_max(M) = {:.6e}",
        r.sigma_min_q, r.sigma_min_r, r.sigma_max_r, r.sigma_max_lyapunov
    );
    println!("result: {}", mark(r.passed()));
}
