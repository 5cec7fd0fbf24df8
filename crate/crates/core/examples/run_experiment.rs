//! Runs a named experiment at reduced size and prints the summary table.

use hpe_core::harness::{run_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "dy-run1".to_string());
    let mut cfg = ExperimentConfig::resolve(&name)?;
    cfg.m = 80;
    cfg.n = 80;
    cfg.iters = 200;
    cfg.out_dir = Some(std::env::temp_dir().join("hpe-example").join(&cfg.name));
    let report = run_experiment(&cfg)?;
    println!(
        "optimum {:.12e}; files in {}",
        report.optimum,
        report.out_dir.display()
    );
    print!(
        "{}",
        std::fs::read_to_string(report.out_dir.join("summary.csv"))?
    );
    Ok(())
}
