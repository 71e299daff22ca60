//! `abreu`: solve and audit extremal toric potentials on convex polygons.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "abreu", version, about = "Solve S(u) = A on convex polygons and check the estimates")]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "ABREU_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a polygon file and print the compatible constant A.
    Check {
        polygon: PathBuf,
        /// Forcing to test against the affine kernel condition.
        #[arg(long = "A", value_name = "EXPR")]
        forcing: Option<String>,
    },
    /// Solve for the correction polynomial.
    Solve(SolveArgs),
    /// Run the estimate suite on a solution.
    Verify {
        solution: PathBuf,
        /// Comma-separated check ids (prefix match).
        #[arg(long, value_delimiter = ',')]
        checks: Option<Vec<String>>,
        /// JSON report path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate int(|F|^2 - S^2) for one or more solutions of the same polygon.
    Chi {
        #[arg(required = true)]
        solutions: Vec<PathBuf>,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Lower bound for the stability ratio over creased piecewise-linear functions.
    Lambda {
        polygon: PathBuf,
        /// Forcing in x and y; defaults to the compatible constant.
        #[arg(long = "A", value_name = "EXPR")]
        forcing: Option<String>,
        /// Crease directions over a half turn.
        #[arg(long, default_value_t = 180)]
        directions: usize,
        /// Crease offsets per direction.
        #[arg(long, default_value_t = 100)]
        offsets: usize,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Tabulate the conjugate function and its diagnostics.
    Conjugate {
        solution: PathBuf,
        /// Points per side of the table.
        #[arg(long, default_value_t = 20)]
        grid: usize,
        /// Centre of the radial field; defaults to the base point.
        #[arg(long, value_parser = output::parse_point)]
        origin: Option<[f64; 2]>,
        /// CSV of x, y, H, w1, w2.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sections of the potential about a point.
    Sections {
        solution: PathBuf,
        /// Centre as "x,y".
        #[arg(long, value_parser = output::parse_point)]
        point: [f64; 2],
        /// Comma-separated levels of the distance function.
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<f64>,
        /// Rays per section boundary.
        #[arg(long, default_value_t = abreu_core::sections::DEFAULT_RAYS)]
        rays: usize,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// CSV of boundary polylines: level, ray, x, y.
        #[arg(long)]
        polylines: Option<PathBuf>,
    },
    /// Field values on an N x N interior grid as CSV.
    Grid {
        solution: PathBuf,
        /// Points per side.
        #[arg(long)]
        n: usize,
        /// Boundary clip; defaults to 1e-3 times the diameter.
        #[arg(long)]
        d_min: Option<f64>,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct SolveArgs {
    polygon: PathBuf,
    /// Forcing in x and y; defaults to the compatible constant.
    #[arg(long = "A", value_name = "EXPR")]
    forcing: Option<String>,
    /// Bernstein degree of the correction [default: 6].
    #[arg(long)]
    degree: Option<usize>,
    /// Collocation grid size per side [default: 20].
    #[arg(long)]
    grid: Option<usize>,
    /// RMS residual target [default: 1e-8].
    #[arg(long)]
    tol: Option<f64>,
    /// Gauss-Newton iteration cap [default: 50].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Solution file to write.
    #[arg(long)]
    out: PathBuf,
}

/// How a command failed, which fixes the exit status.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
    Verification(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if let Err(e) = built {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::dispatch(cli.command) {
        Ok(summary) => {
            if output::stdout_has_data() {
                eprintln!("{summary}");
            } else {
                println!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                Failure::Input(e) | Failure::Solver(e) => eprintln!("error: {e:#}"),
                Failure::Verification(s) => eprintln!("verification failed: {s}"),
            }
            ExitCode::from(f.code())
        }
    }
}
