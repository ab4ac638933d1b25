use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod record;

/// Exit status for malformed invocations and unreadable inputs.
pub const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "affinv", version, about = "Affine-invariant property testing over F_p^n")]
struct Cli {
    /// Worker threads for data-parallel enumerations. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print the machine-readable JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Also write the JSON report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    report: Option<PathBuf>,

    /// Enumeration and search budget.
    #[arg(long, global = true, env = "AFFINV_BUDGET")]
    budget: Option<u128>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cauchy-Schwarz complexity of every member of a constraint file.
    Complexity {
        #[arg(long)]
        constraints: PathBuf,
    },
    /// Gowers U^k norm of a real table or of one label slice of a function.
    Gowers(GowersArgs),
    /// Dimension of the span of the d-th tensor powers of each member's forms.
    Dimension {
        #[arg(long)]
        constraints: PathBuf,
        #[arg(short, long, default_value_t = 1)]
        d: usize,
    },
    /// Whether an image pattern is consistent with each constraint.
    Consistency(ConsistencyArgs),
    /// Cell counts, degree index and bias certificate of a factor.
    FactorStats {
        #[arg(long)]
        factor: PathBuf,
        /// Nonzero combinations to check; the certificate is exhaustive when p^C - 1 fits.
        #[arg(long, default_value_t = 1 << 12)]
        bias_budget: u128,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write per-cell counts as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Strong or super decomposition of a function table.
    Decompose(DecomposeArgs),
    /// Sample a subcell id satisfying both subcell conditions.
    SelectSubcell {
        #[arg(long)]
        function: PathBuf,
        /// The `decomposition.json` written by `decompose`.
        #[arg(long)]
        decomposition: PathBuf,
        /// Defaults to the default delta schedule at the coarse factor size.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        max_attempts: usize,
    },
    /// Relabel a function on the chosen subcells.
    Cleanup {
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        decomposition: PathBuf,
        /// Subcell id as comma-separated field elements; empty when B' = B.
        #[arg(long, default_value = "", allow_hyphen_values = true)]
        subcell: String,
        #[arg(long, default_value_t = 0.1)]
        zeta: f64,
        /// Where to write the cleaned table (stdout report only when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-sided affine-subspace tester.
    Test {
        #[arg(long)]
        constraints: PathBuf,
        #[arg(long)]
        function: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: u64,
        /// Sampled points per trial; defaults to the largest l of the concise collection.
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact distance to an enumerable property.
    Distance {
        #[arg(long)]
        function: PathBuf,
        /// Polynomials of degree at most d (needs R = p).
        #[arg(long, conflicts_with = "tables")]
        degree: Option<u32>,
        /// Explicit member tables.
        #[arg(long, num_args = 1..)]
        tables: Vec<PathBuf>,
    },
    /// Run acceptance experiments and print a summary table.
    Experiment {
        /// Criteria to run; all when omitted.
        #[arg(long)]
        criterion: Vec<u32>,
        #[arg(long, default_value_t = affinv_harness::experiments::DEFAULT_SEED)]
        seed: u64,
        /// Write per-criterion statistics as CSV.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
    },
    /// Write a deterministic fixture file.
    Generate(GenerateArgs),
}

#[derive(Args, Debug)]
struct GowersArgs {
    #[arg(long, conflicts_with = "function", required_unless_present = "function")]
    table: Option<PathBuf>,
    #[arg(long)]
    function: Option<PathBuf>,
    /// Label whose indicator is measured, with `--function`.
    #[arg(long, default_value_t = 1)]
    label: u32,
    #[arg(short, long)]
    k: usize,
    /// Monte-Carlo samples; exact enumeration when absent.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ConsistencyArgs {
    #[arg(long)]
    constraints: PathBuf,
    /// Degrees of the factor polynomials, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "factor", required_unless_present = "factor")]
    degrees: Vec<usize>,
    /// Take the degrees from a factor file.
    #[arg(long)]
    factor: Option<PathBuf>,
    /// One cell per form, `;` between forms and `,` between coordinates, e.g. `0,1;1,1;0,0;1,0`.
    #[arg(long, allow_hyphen_values = true)]
    images: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DecomposeMode {
    Strong,
    Super,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[arg(long)]
    function: PathBuf,
    #[arg(short, long)]
    d: u32,
    #[arg(long, value_enum, default_value_t = DecomposeMode::Strong)]
    mode: DecomposeMode,
    /// Directory receiving `decomposition.json`, `trace.jsonl` and the tables.
    #[arg(long)]
    out_dir: PathBuf,
    /// Starting factor for strong mode.
    #[arg(long)]
    factor: Option<PathBuf>,
    #[arg(long)]
    zeta: Option<f64>,
    /// Constant delta instead of the default schedule.
    #[arg(long)]
    delta: Option<f64>,
    /// Constant eta instead of the default schedule.
    #[arg(long)]
    eta: Option<f64>,
    /// Scale the delta schedule for subcell selection over F_p.
    #[arg(long)]
    for_subcells: bool,
    #[arg(long)]
    coarse_gamma: Option<f64>,
    #[arg(long)]
    max_factor_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FixtureKind {
    RandomFunction,
    DegreeDTable,
    PlantedViolations,
    LinearFactor,
    RandomFactor,
    BlrConstraint,
    ApConstraint,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: FixtureKind,
    #[arg(short, long, default_value_t = 2)]
    p: u32,
    #[arg(short, long, default_value_t = 4)]
    n: usize,
    /// Range of labels.
    #[arg(short, long)]
    r: Option<u32>,
    /// Polynomial degree.
    #[arg(short, long, default_value_t = 1)]
    d: u32,
    /// Number of polynomials in a factor.
    #[arg(short, long, default_value_t = 2)]
    c: usize,
    /// Progression length.
    #[arg(short, long, default_value_t = 3)]
    k: usize,
    /// Points moved by planted_violations.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Constraint labels, comma separated.
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<u32>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(&cli) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).expect("report serializes"));
            } else {
                print!("{}", out.text);
            }
            if let Some(path) = &cli.report {
                let body = serde_json::to_string_pretty(&out.json).expect("report serializes") + "\n";
                if let Err(e) = std::fs::write(path, body) {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(EXIT_USAGE);
                }
            }
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
