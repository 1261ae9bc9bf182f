use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dhstab::bench::{
    emit_matrix, parse_problem, read_matrix, run_bench, write_fixtures, BenchMode, BenchOptions, BenchReport,
    ProblemFile, DATA_DIR_ENV,
};
use dhstab::matcore::{Matrix, NormKind};
use dhstab::stab::{sof_solve, sof_solve_best, ssf_solve, verify_feedback, FeedbackResult, FeedbackStatus, InitStrategy, StabOptions};

const EXIT_FEASIBILITY: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_NUMERICS: u8 = 4;

#[derive(Parser)]
#[command(name = "dhstab", version, about = "Minimal-norm static feedback via dissipative-Hamiltonian parametrizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static state feedback for a problem file.
    Ssf {
        file: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
    },
    /// Static output feedback for a problem file.
    Sof {
        file: PathBuf,
        #[command(flatten)]
        solve: SolveArgs,
        /// Keep the best result over the four initialization strategies.
        #[arg(long)]
        best: bool,
    },
    /// Closed-loop spectral abscissa of a given gain.
    Check {
        file: PathBuf,
        #[arg(long = "k", value_name = "KFILE")]
        k: PathBuf,
    },
    /// Run every problem file in a directory.
    Bench {
        /// Problem directory; defaults to $DHSTAB_DATA.
        dir: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
        /// Compare the Phase-1 gain, BCD and SSDP on state-feedback problems.
        #[arg(long)]
        compare: bool,
        /// Output feedback: keep the best of the four initialization strategies.
        #[arg(long)]
        best: bool,
        #[arg(long, value_enum, default_value = "table")]
        out: OutFormat,
    },
    /// Write the shipped fixtures as problem files.
    Fixtures {
        #[arg(default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_parser = parse_norm, default_value = "fro")]
    norm: NormKind,
    #[arg(long, default_value = "identity")]
    init: InitStrategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solve on A + rho*I so the closed-loop abscissa ends below -rho.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Lower bound on the eigenvalues of R and Q.
    #[arg(long, default_value_t = 0.0)]
    margin: f64,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "eps-min")]
    eps_min: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Attempts for the random initialization.
    #[arg(long)]
    restarts: Option<usize>,
    /// Write the gain to this file.
    #[arg(long = "k-out", value_name = "FILE")]
    k_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Table,
}

fn parse_norm(s: &str) -> Result<NormKind, String> {
    s.parse()
}

impl SolveArgs {
    fn options(&self) -> StabOptions {
        let d = StabOptions::default();
        StabOptions {
            norm: self.norm,
            init: self.init,
            seed: self.seed,
            rho: self.rho,
            margin: self.margin,
            delta: self.delta.unwrap_or(d.delta),
            eps_min: self.eps_min.unwrap_or(d.eps_min),
            max_outer: self.max_iters.unwrap_or(d.max_outer),
            random_restarts: self.restarts.unwrap_or(d.random_restarts),
            ..d
        }
    }
}

struct Failure {
    code: u8,
    msg: String,
}

fn usage(msg: impl ToString) -> Failure {
    Failure { code: EXIT_USAGE, msg: msg.to_string() }
}

fn load(path: &Path) -> Result<ProblemFile, Failure> {
    parse_problem(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn print_matrix(k: &Matrix) {
    for i in 0..k.nrows() {
        let row: Vec<String> = (0..k.ncols()).map(|j| format!("{:>12.6}", k[(i, j)])).collect();
        println!("  {}", row.join(" "));
    }
}

fn report_result(r: &FeedbackResult, k_out: Option<&Path>) -> Result<(), Failure> {
    println!("status: {}", r.status);
    if let Some(init) = r.init {
        println!("init: {init}");
    }
    if r.status != FeedbackStatus::FailedFeasibility {
        println!("norm ({}): {:.6e}", r.norm_kind.short_name(), r.norm_value);
        println!("abscissa: {:.6e}", r.abscissa);
        println!("iterations: {}", r.iterations);
        println!("time: {:.3} s", r.timings.total().as_secs_f64());
        println!("K =");
        print_matrix(&r.k);
        if let Some(path) = k_out {
            std::fs::write(path, emit_matrix(&r.k)).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
    }
    for d in &r.diagnostics {
        eprintln!("note: {d}");
    }
    match r.status {
        FeedbackStatus::Stabilized => Ok(()),
        FeedbackStatus::FailedFeasibility => {
            Err(Failure { code: EXIT_FEASIBILITY, msg: format!("feasibility residual {:.3e}", r.feasibility_value) })
        }
        FeedbackStatus::FailedNumerics => Err(Failure { code: EXIT_NUMERICS, msg: "no verified stabilizing gain".into() }),
    }
}

fn print_report(report: &BenchReport, out: OutFormat, compare: bool) {
    match out {
        OutFormat::Csv => print!("{}", report.to_csv()),
        OutFormat::Table if compare => print!("{}", report.comparison_table()),
        OutFormat::Table => print!("{}", report.to_table()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ssf { file, solve } => {
            let pf = load(&file)?;
            let r = ssf_solve(&pf.pair(), &solve.options());
            report_result(&r, solve.k_out.as_deref())
        }
        Command::Sof { file, solve, best } => {
            let pf = load(&file)?;
            let opts = solve.options();
            let r = if best { sof_solve_best(&pf.triplet(), &opts) } else { sof_solve(&pf.triplet(), &opts) };
            report_result(&r, solve.k_out.as_deref())
        }
        Command::Check { file, k } => {
            let pf = load(&file)?;
            let k = read_matrix(&k).map_err(|e| usage(format!("{}: {e}", k.display())))?;
            let (abscissa, stable) = verify_feedback(&pf.triplet(), &k, 0.0).map_err(usage)?;
            println!("abscissa: {abscissa:.6}");
            println!("stable: {stable}");
            Ok(())
        }
        Command::Bench { dir, solve, compare, best, out } => {
            let dir = match dir.or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)) {
                Some(d) => d,
                None => return Err(usage(format!("no directory given and {DATA_DIR_ENV} is not set"))),
            };
            let opts = BenchOptions {
                mode: if compare { BenchMode::CompareSsf } else { BenchMode::Solve },
                stab: solve.options(),
                best_init: best,
            };
            let report = run_bench(&dir, &opts).map_err(usage)?;
            print_report(&report, out, compare);
            Ok(())
        }
        Command::Fixtures { dir } => {
            for path in write_fixtures(&dir).map_err(usage)? {
                println!("{}", path.display());
            }
            Ok(())
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
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
