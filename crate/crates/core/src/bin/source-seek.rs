//! Command-line front end.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for runtime or
//! domain errors (including a failed `gradcheck`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use source_seek::harness::{self, BatchOptions, BatchReport, FieldConfig, FieldKind};
use source_seek::Error;

#[derive(Parser)]
#[command(name = "source-seek", version, about = "Source-seeking control simulations for unicycle robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured initial conditions once each.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Write one trajectory CSV per run into this directory.
        #[arg(long)]
        traj_out: Option<PathBuf>,
    },
    /// Seeded Monte-Carlo batch with settling-time statistics.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Compare the dithered loop against the averaged system.
    Avgcheck {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check analytic gradients against central differences.
    Gradcheck {
        /// quadratic, nonquad_a, nonquad_b or fan
        #[arg(long)]
        field: String,
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate { config, traj_out } => {
            let cfg = harness::load_config(&config)?;
            let opts = BatchOptions { batch: false, trajectory_dir: traj_out, overlay: true };
            let report = harness::run(&cfg, &opts)?;
            print_batch(&report, cfg.output_dir.display().to_string());
            Ok(ExitCode::SUCCESS)
        }
        Command::Montecarlo { config, trials, seed } => {
            let mut cfg = harness::load_config(&config)?;
            cfg.trials = Some(trials);
            cfg.seed = seed;
            cfg.validate()?;
            let opts = BatchOptions { batch: true, ..Default::default() };
            let report = harness::run(&cfg, &opts)?;
            print_batch(&report, cfg.output_dir.display().to_string());
            Ok(ExitCode::SUCCESS)
        }
        Command::Avgcheck { config } => {
            let cfg = harness::load_config(&config)?;
            let summary = harness::run_avgcheck(&cfg)?;
            for r in &summary.runs {
                println!(
                    "{:<16} sup_error={:.6} (z1 {:.6}, z2 {:.6})",
                    r.group, r.sup_error, r.sup_error_z1, r.sup_error_z2
                );
            }
            println!("sup_error={:.6}  outputs in {}", summary.sup_error, cfg.output_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { field, points, seed } => {
            let kind: FieldKind = field.parse()?;
            let spec = FieldConfig::of_kind(kind).build()?;
            let report = harness::gradcheck(&spec, points, seed)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
        }
    }
}

fn print_batch(report: &BatchReport, out_dir: String) {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    println!("{:<20} {:>6} {:>8} {:>9} {:>9} {:>9}", "group", "trials", "failures", "q1_ts", "median_ts", "q3_ts");
    for g in &report.summary.groups {
        println!(
            "{:<20} {:>6} {:>8} {:>9} {:>9} {:>9}",
            g.group, g.trials, g.failures, fmt(g.stats.q1_ts), fmt(g.stats.median_ts), fmt(g.stats.q3_ts)
        );
    }
    let worst = report.results.iter().map(|r| r.final_distance).fold(0.0, f64::max);
    let domain = report.results.iter().filter(|r| r.outcome.label() == "domain").count();
    let reverse = report.results.iter().filter(|r| r.reverse).count();
    println!("largest final distance {worst:.4}; {domain} run(s) stopped at the field boundary; {reverse} converged in reverse");
    println!("config_hash {}  outputs in {out_dir}", report.summary.config_hash);
}
