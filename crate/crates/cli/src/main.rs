use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wgfem::error_analysis::Sampling;
use wgfem::harness::{run_convergence, OutputFormat, RunConfig};
use wgfem::problems::builtin_problems;
use wgfem::properties::run_properties;
use wgfem::Error;

/// Weak Galerkin solver for 2D convection-diffusion problems.
#[derive(Parser)]
#[command(name = "wgfem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study over uniformly refined meshes.
    Converge(Box<ConvergeArgs>),
    /// Run the seeded property battery.
    Properties {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// List the built-in problems.
    ListProblems,
}

/// Flags override values read from `--config`.
#[derive(Args)]
struct ConvergeArgs {
    /// File of `key = value` lines (same keys as the flags, `max_iter` for
    /// `--max-iter`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Interior polynomial degree (0, 1 or 2).
    #[arg(long)]
    k: Option<usize>,
    /// Cells per side of the coarsest mesh.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    /// Relative residual tolerance of the linear solver.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// csv or table.
    #[arg(long)]
    format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Sample set for the L2 and Linf errors: centroid or quadrature.
    #[arg(long)]
    sampling: Option<String>,
}

impl ConvergeArgs {
    fn resolve(self) -> Result<RunConfig, Error> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.problem {
            config.problem = v;
        }
        if let Some(v) = self.k {
            config.k = v;
        }
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(v) = self.levels {
            config.levels = v;
        }
        if let Some(v) = self.tol {
            config.tol = v;
        }
        if let Some(v) = self.max_iter {
            config.max_iter = v;
        }
        if let Some(v) = self.format {
            config.format = v.parse::<OutputFormat>()?;
        }
        if let Some(v) = self.out {
            config.out = Some(v);
        }
        if let Some(v) = self.threads {
            config.threads = v;
        }
        if let Some(v) = self.sampling {
            config.sampling =
                Sampling::parse(&v).ok_or_else(|| Error::Config(format!("unknown sampling '{v}'")))?;
        }
        Ok(config)
    }
}

fn converge(args: ConvergeArgs) -> Result<(), Error> {
    let config = args.resolve()?;
    let report = run_convergence(&config)?;
    let text = match config.format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Table => report.to_table(),
    };
    match &config.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Converge(args) => match converge(*args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("wgfem: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Command::Properties { seed } => {
            let summary = run_properties(seed);
            print!("{}", summary.to_text());
            if summary.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::ListProblems => {
            for p in builtin_problems() {
                println!("{:<12} {}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
    }
}
