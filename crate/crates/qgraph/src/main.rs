use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qgraph::commands::{self, CliError, IntervalChoice};
use qgraph::report::{OutputFormat, RunReport};
use qgraph_core::oracle::Tolerance;

/// Spectra of Sturm-Liouville operators on equilateral metric graphs.
///
/// Exit codes: 0 success, 2 invalid input, 3 failed numerical check,
/// 4 hypothesis of the reduction not met.
#[derive(Debug, Parser)]
#[command(name = "qgraph", version)]
struct Cli {
    #[arg(long, value_enum, default_value_t = OutputFormat::Table, global = true)]
    format: OutputFormat,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct IntervalArgs {
    /// Gap index, 0 for the lowest gap.
    #[arg(long, conflicts_with = "interval")]
    gap: Option<usize>,
    /// Explicit interval `a b`.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    interval: Option<Vec<f64>>,
    /// Left end of the lowest gap.
    #[arg(long, allow_negative_numbers = true)]
    z_min: Option<f64>,
}

impl IntervalArgs {
    fn choice(&self) -> IntervalChoice {
        match &self.interval {
            Some(v) => IntervalChoice::Explicit(v[0], v[1]),
            None => IntervalChoice::Gap {
                k: self.gap.unwrap_or(0),
                z_min: self.z_min,
            },
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reference eigenvalues of a single edge and the gaps between them.
    Dirichlet {
        graph: PathBuf,
        #[arg(long, default_value_t = 5)]
        count: usize,
        /// Neumann ends instead of Dirichlet ends.
        #[arg(long)]
        neumann: bool,
    },
    /// Eigenvalues of the discrete operators of the graph.
    Discrete { graph: PathBuf },
    /// Spectrum in a gap by the reduction.
    Reduce {
        graph: PathBuf,
        #[command(flatten)]
        interval: IntervalArgs,
    },
    /// Spectrum in an interval from the secular matrix.
    Oracle {
        graph: PathBuf,
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, required = true)]
        interval: Vec<f64>,
    },
    /// Reduction against the secular matrix.
    Verify {
        graph: PathBuf,
        #[command(flatten)]
        interval: IntervalArgs,
        /// Absolute part of the tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Relative part of the tolerance.
        #[arg(long, default_value_t = 1e-8)]
        rel_tol: f64,
    },
    /// Stieltjes inversion against the assembled spectral measure.
    Measure {
        graph: PathBuf,
        #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, required = true)]
        interval: Vec<f64>,
        /// Decreasing list of eps values.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        /// Gap holding the interval; found automatically when absent.
        #[arg(long)]
        gap: Option<usize>,
    },
}

fn run(cli: &Cli) -> Result<RunReport, CliError> {
    match &cli.command {
        Command::Dirichlet {
            graph,
            count,
            neumann,
        } => commands::cmd_dirichlet(graph, *count, *neumann),
        Command::Discrete { graph } => commands::cmd_discrete(graph),
        Command::Reduce { graph, interval } => commands::cmd_reduce(graph, interval.choice()),
        Command::Oracle { graph, interval } => {
            commands::cmd_oracle(graph, (interval[0], interval[1]))
        }
        Command::Verify {
            graph,
            interval,
            tol,
            rel_tol,
        } => commands::cmd_verify(
            graph,
            interval.choice(),
            Tolerance {
                abs: *tol,
                rel: *rel_tol,
            },
        ),
        Command::Measure {
            graph,
            interval,
            eps,
            gap,
        } => commands::cmd_measure(
            graph,
            (interval[0], interval[1]),
            eps.clone(),
            gap.map(|k| IntervalChoice::Gap { k, z_min: None }),
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let text = report.render(cli.format);
            match &cli.output {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, text) {
                        eprintln!("error: cannot write {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
