use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shapeopt::analyze::ClassifyConfig;

use shapeopt_cli::classify_cmd::{classify_gauge, ClassifyOptions};
use shapeopt_cli::gauge_io::read_gauge_csv;
use shapeopt_cli::sweep::sweep;
use shapeopt_cli::verify::verify_problem;
use shapeopt_cli::{load_problem, preset, problem_schema, run_problem, write_outputs, CliError, CliResult, ProblemDocument, RunReport};

/// Shape optimization over planar convex bodies.
///
/// Exit codes: 0 success, 2 schema error, 3 solver did not converge,
/// 4 infeasible problem, 1 other i/o failures.
#[derive(Debug, Parser)]
#[command(name = "shapeopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a problem file and write its report, history, gauge and plot.
    Run {
        file: PathBuf,
        /// Output directory, overriding `outputs.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in preset, or print it as a problem file with `--emit`.
    Preset {
        name: String,
        #[arg(long)]
        emit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Derivative checks at the starting shape of a problem file.
    Verify {
        file: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a gauge given as `theta,u` CSV.
    Classify {
        gauge: PathBuf,
        /// Exclude nodes touching this inner disk.
        #[arg(long)]
        inner_radius: Option<f64>,
        /// Exclude nodes touching this outer disk.
        #[arg(long)]
        outer_radius: Option<f64>,
        #[arg(long, default_value_t = ClassifyConfig::default().tau_abs)]
        tau_abs: f64,
        #[arg(long, default_value_t = ClassifyConfig::default().kappa)]
        kappa: f64,
    },
    /// Run a problem file once per value of one parameter, in parallel.
    Sweep {
        file: PathBuf,
        /// Dotted path, e.g. `objective.terms.1.coefficient`.
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., required = true, allow_negative_numbers = true)]
        values: Vec<String>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the JSON schema of problem files.
    Schema,
}

fn print_summary(report: &RunReport) {
    let p = &report.problem;
    if let Some(r) = report.result.value() {
        eprintln!(
            "{}: {:?} after {} steps, objective {:.10}, |c| = {:.2e}",
            p.name, r.status, r.iterations, r.objective, r.equality_residual
        );
    }
    if let Some(k) = report.kkt.value() {
        eprintln!(
            "  stationarity {:.2e}, complementarity {:.2e}, min eta {:.2e}, mu_eq {:.6}",
            k.multipliers.stationarity_residual, k.multipliers.complementarity_residual, k.min_eta, k.multipliers.mu_eq
        );
    }
    if let Some(v) = report.verdict() {
        eprintln!("  verdict {:?}: {}", v.kind, v.reason);
    }
    if let Some(m) = report.mu_sign.value() {
        let s = match m.sign {
            1 => "+",
            -1 => "-",
            _ => "0",
        };
        println!("sign(mu_eq) = {s} (mu_eq = {:.6})", m.mu_eq);
    }
    if let Some(e) = &report.error {
        eprintln!("  error: {e}");
    }
    if let Some(path) = report.outputs.get("report") {
        println!("{}", path.display());
    }
}

fn run_doc(mut doc: ProblemDocument, out: Option<PathBuf>) -> CliResult<i32> {
    if let Some(dir) = out {
        doc.outputs.dir = dir;
    }
    let mut outcome = run_problem(&doc)?;
    write_outputs(&mut outcome)?;
    print_summary(&outcome.report);
    Ok(outcome.report.exit_code)
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(value).expect("reports serialize");
    if let Some(path) = out {
        std::fs::write(path, &json).map_err(|e| CliError::io(path, e))?;
    }
    println!("{json}");
    Ok(())
}

fn dispatch(command: Command) -> CliResult<i32> {
    match command {
        Command::Run { file, out } => run_doc(load_problem(&file)?, out),
        Command::Preset { name, emit, out } => {
            let doc = preset(&name)?;
            if emit {
                match out {
                    Some(path) => std::fs::write(&path, doc.to_toml()).map_err(|e| CliError::io(&path, e))?,
                    None => print!("{}", doc.to_toml()),
                }
                Ok(0)
            } else {
                run_doc(doc, out)
            }
        }
        Command::Verify { file, out } => {
            let report = verify_problem(&load_problem(&file)?)?;
            write_json(&report, out.as_deref())?;
            Ok(0)
        }
        Command::Classify { gauge, inner_radius, outer_radius, tau_abs, kappa } => {
            let u = read_gauge_csv(&gauge)?;
            let config = ClassifyConfig { tau_abs, kappa, ..Default::default() };
            let report = classify_gauge(u, &ClassifyOptions { inner_radius, outer_radius, config })?;
            write_json(&report, None)?;
            Ok(0)
        }
        Command::Sweep { file, param, values, jobs } => {
            let report = sweep(&file, &param, &values, jobs)?;
            for e in &report.entries {
                eprintln!(
                    "{} = {}: exit {}, {:?}, verdict {:?}",
                    param, e.value, e.exit_code, e.status, e.verdict
                );
            }
            write_json(&report, None)?;
            Ok(report.exit_code())
        }
        Command::Schema => {
            print!("{}", problem_schema());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
