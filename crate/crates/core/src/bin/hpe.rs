//! Command-line front end: `hpe run` and `hpe audit`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand};

use hpe_core::harness::{audit_trace_csv, run_experiment, ExperimentConfig};
use hpe_core::Error;

#[derive(Parser)]
#[command(name = "hpe", version, about = "Inexact HPE splitting experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment (cp1-run1, cp1-run2, cp2, dy-run1..3) or a config file.
    Run {
        target: String,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
        /// Output directory (default: $HPE_OUT_DIR/<name> or hpe-out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the relative-error criterion recorded in a trace CSV.
    Audit {
        trace: PathBuf,
        #[arg(long)]
        sigma: f64,
    },
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            target,
            m,
            n,
            seed,
            iters,
            sigma,
            kappa,
            out,
        } => {
            let mut cfg = ExperimentConfig::resolve(&target)?;
            if let Some(v) = m {
                cfg.m = v;
            }
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(v) = iters {
                cfg.iters = v;
            }
            if let Some(v) = sigma {
                cfg.sigma = v;
            }
            if let Some(v) = kappa {
                cfg.kappa = v;
            }
            if out.is_some() {
                cfg.out_dir = out;
            }
            let report = run_experiment(&cfg)?;
            println!("{} -> {}", cfg.name, report.out_dir.display());
            println!("reference optimum {:.10e}", report.optimum);
            for o in &report.outcomes {
                match &o.result {
                    Ok(r) => {
                        let gap = r.trace.last().map(|l| l.objective - report.optimum);
                        let audit = match &o.audit {
                            None => "",
                            Some(Ok(_)) => " audit pass",
                            Some(Err(_)) => " audit FAIL",
                        };
                        println!(
                            "  {:<12} iters {:>6}  gap {:>12.4e}  h_apps {:>9}{audit}",
                            o.method.as_str(),
                            r.trace.len(),
                            gap.unwrap_or(f64::NAN),
                            r.trace.total_h_applications()
                        );
                    }
                    Err(e) => println!("  {:<12} FAILED: {e}", o.method.as_str()),
                }
            }
            Ok(if report.has_failures() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Audit { trace, sigma } => {
            let a = audit_trace_csv(&trace, sigma)?;
            println!(
                "{}: {} rows, {} with criterion data, max lhs/rhs {}",
                trace.display(),
                a.rows,
                a.criterion_rows,
                a.max_ratio
                    .map_or("n/a".to_string(), |r| format!("{r:.6e}"))
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::CertificationFailure { .. } | Error::AuditFailure(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
