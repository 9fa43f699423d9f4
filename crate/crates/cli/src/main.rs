use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use polyloom::codegen::WORKERS_ENV;
use polyloom_cli::commands::{self, ConvInputs};
use polyloom_cli::config::{BenchConfig, FileConfig, Overrides};
use polyloom_cli::suites::{exit_code, run_all, VerifyOptions};

#[derive(Parser)]
#[command(name = "polyloom", version, about = "Polyhedral tensor-kernel toolkit: schedules, sparse conv sweeps, LSTM wavefronts")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the eight schedule variants of the two-statement loop nest.
    Schedules,
    /// Time dense against sparse conv over a density list; writes sweep.csv and sweep.svg.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shape: ShapeArgs,
        /// Comma-separated densities in (0, 1].
        #[arg(long, value_delimiter = ',')]
        densities: Option<Vec<f64>>,
    },
    /// Run every cross-check suite; the exit code has one bit per failed suite.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        /// Break one CSR matrix before checking it (negative control).
        #[arg(long, hide = true)]
        corrupt_csr: bool,
    },
    /// Time the sequential against the wavefront LSTM; writes lstm.csv.
    Lstm {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        input_dim: Option<usize>,
        /// Keep this fraction of every gate matrix, stored compressed.
        #[arg(long)]
        density: Option<f64>,
    },
    /// Run one conv layer dense, sparse and fused; writes conv.csv and conv_output.pltn.
    Conv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        shape: ShapeArgs,
        /// Weight density when weights are generated.
        #[arg(long)]
        density: Option<f64>,
        /// Input tensor file (PLTN); generated from the seed when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Compressed weight file (PLCS); generated from the seed when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML file with default settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Timed repetitions; the median is reported.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (also read from POLYLOOM_WORKERS).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    in_features: Option<usize>,
    #[arg(long)]
    out_features: Option<usize>,
    /// Output height.
    #[arg(long)]
    height: Option<usize>,
    /// Output width.
    #[arg(long)]
    width: Option<usize>,
    /// Kernel size.
    #[arg(short, long)]
    k: Option<usize>,
}

fn resolve(common: &Common, mut o: Overrides) -> Result<BenchConfig> {
    let file = common.config.as_deref().map(FileConfig::load).transpose()?;
    o.seed = common.seed;
    o.trials = common.trials;
    o.workers = common.workers;
    o.out_dir = common.out.clone();
    BenchConfig::resolve(file.as_ref(), std::env::var(WORKERS_ENV).ok(), &o)
}

fn with_shape(s: &ShapeArgs) -> Overrides {
    Overrides {
        batch: s.batch,
        in_features: s.in_features,
        out_features: s.out_features,
        height: s.height,
        width: s.width,
        k: s.k,
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Schedules => print!("{}", commands::schedules_text()?),
        Cmd::Sweep { common, shape, densities } => {
            let cfg = resolve(&common, Overrides { densities, ..with_shape(&shape) })?;
            let out = commands::sweep(&cfg)?;
            println!("density  nnz      dense_ns    sparse_ns   ratio");
            for r in &out.rows {
                println!("{:<8.3} {:<8} {:<11} {:<11} {:.3}", r.density, r.nnz, r.dense_ns, r.sparse_ns, r.ratio);
            }
            match out.crossover {
                Some(c) => println!("crossover at {:.1}% density", c * 100.0),
                None => println!("no crossover: sparse faster at every density"),
            }
            println!("wrote {} and {}", out.csv.display(), out.svg.display());
        }
        Cmd::Verify { seed, workers, corrupt_csr } => {
            let workers = match workers {
                Some(w) => w,
                None => polyloom::codegen::workers_from_env(),
            };
            let reports = run_all(&VerifyOptions { seed: seed.unwrap_or(7), workers, corrupt_csr });
            for r in &reports {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                println!("suite {:<22} {verdict} ({} cases)", r.name, r.cases);
                for f in r.failures.iter().take(5) {
                    println!("  {f}");
                }
            }
            let code = exit_code(&reports);
            return Ok(ExitCode::from(code as u8));
        }
        Cmd::Lstm { common, layers, steps, hidden, input_dim, density } => {
            let o = Overrides { layers, steps, hidden, input_dim, lstm_density: density, ..Default::default() };
            let cfg = resolve(&common, o)?;
            let out = commands::lstm(&cfg)?;
            for r in &out.rows {
                println!("{:<16} {:>12} ns  speedup {:.2}  checksum {}  {}", r.experiment, r.median_ns, r.speedup, r.checksum, r.params);
            }
            println!("wrote {}", out.csv.display());
        }
        Cmd::Conv { common, shape, density, input, weights } => {
            let cfg = resolve(&common, Overrides { conv_density: density, ..with_shape(&shape) })?;
            let out = commands::conv(&cfg, &ConvInputs { input, weights })?;
            for r in &out.rows {
                println!("{:<24} {:>12} ns  speedup {:.2}  checksum {}", r.experiment, r.median_ns, r.speedup, r.checksum);
            }
            println!("wrote {} and {}", out.csv.display(), out.output.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(64)
        }
    }
}
