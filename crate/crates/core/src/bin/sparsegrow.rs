//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparsegrow::bench::{bench_csv, crossover_report, run_bench, BenchCase, MatrixFormat};
use sparsegrow::exp::{load_config, run_flops_report, run_gamma_sweep, run_training};
use sparsegrow::Real;

#[derive(Parser)]
#[command(name = "sparsegrow", about = "Always-sparse dynamic sparse training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from an experiment config.
    Train {
        /// Path to the experiment config file.
        config: PathBuf,
    },
    /// Train once per (gamma, seed) pair and aggregate accuracies.
    SweepGamma {
        config: PathBuf,
        /// Comma-separated subset factors, at least two.
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<Real>,
        /// Comma-separated seeds; defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Time sparse-times-dense matmul kernels across formats and sparsities.
    Bench(BenchArgs),
    /// Emit the analytic training-FLOPs report.
    Flops {
        config: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Square matrix sides.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1024usize, 2048, 4096, 8192])]
    sizes: Vec<usize>,
    /// Zero-weight fractions.
    #[arg(long, value_delimiter = ',',
          default_values_t = vec![0.5 as Real, 0.8, 0.9, 0.95, 0.98, 0.99])]
    sparsities: Vec<Real>,
    /// Storage formats to time.
    #[arg(long, value_delimiter = ',', default_values_t = vec!["dense".to_string(), "coo".to_string(), "csr".to_string()])]
    formats: Vec<String>,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use the row-parallel CSR kernel instead of the single-threaded one.
    #[arg(long, default_value_t = false)]
    parallel: bool,
    /// Output CSV path.
    #[arg(long, default_value = "bench.csv")]
    output: PathBuf,
}

fn run_bench_command(args: &BenchArgs) -> Result<(), String> {
    let mut formats = Vec::new();
    for tag in &args.formats {
        formats.push(MatrixFormat::parse(tag).ok_or_else(|| format!("unknown format `{tag}`"))?);
    }
    let mut cases = Vec::new();
    for &format in &formats {
        for &n_units in &args.sizes {
            for &sparsity in &args.sparsities {
                cases.push(BenchCase {
                    format,
                    n_units,
                    batch: args.batch,
                    sparsity,
                    repeats: args.repeats,
                });
            }
        }
    }
    let results = run_bench(&cases, args.seed, args.parallel).map_err(|e| e.to_string())?;
    std::fs::write(&args.output, bench_csv(&results))
        .map_err(|e| format!("cannot write {}: {e}", args.output.display()))?;
    for (n, crossover) in crossover_report(&results) {
        match crossover {
            Some(s) => println!("n={n}: csr beats dense from sparsity {s:.4}"),
            None => println!("n={n}: csr never beats dense in this sweep"),
        }
    }
    println!("wrote {} rows to {}", results.len(), args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome: Result<(), (String, i32)> = match &cli.command {
        Command::Train { config } => load_config(config)
            .and_then(|c| run_training(&c).map(|out| (c, out)))
            .map(|(c, out)| {
                println!(
                    "final test accuracy {:.4} after {} rounds; outputs in {}",
                    out.final_test_acc,
                    out.total_rounds,
                    c.output_dir.display()
                );
            })
            .map_err(|e| (e.to_string(), e.exit_code())),
        Command::SweepGamma { config, gammas, seeds } => load_config(config)
            .and_then(|c| {
                let seeds = if seeds.is_empty() { vec![c.seed] } else { seeds.clone() };
                run_gamma_sweep(&c, gammas, &seeds).map(|out| (c, out))
            })
            .map(|(c, out)| {
                for s in &out.summaries {
                    println!(
                        "gamma {}: mean {:.4}, p95 {:.4}",
                        s.gamma, s.mean_acc, s.p95_acc
                    );
                }
                println!("outputs in {}", c.output_dir.display());
            })
            .map_err(|e| (e.to_string(), e.exit_code())),
        Command::Bench(args) => run_bench_command(args).map_err(|m| (m, 1)),
        Command::Flops { config } => load_config(config)
            .and_then(|c| run_flops_report(&c).map(|rows| (c, rows)))
            .map(|(c, rows)| {
                for r in rows.iter().filter(|r| r.strategy.tag() == "gse_uniform") {
                    println!(
                        "{} at sparsity {}: ratio vs dense-gradient baseline {:.4}",
                        r.arch, r.sparsity, r.ratio_vs_rigl
                    );
                }
                println!("wrote {}", c.output_dir.join("flops.csv").display());
            })
            .map_err(|e| (e.to_string(), e.exit_code())),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((message, code)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
