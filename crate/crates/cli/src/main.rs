//! `naedsim`: command-line harness for GHZ(N, Q) error-detection experiments.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use naed_core::circuits::{ghz_code, parse_dsl};
use naed_core::code::BitFlipCode;
use naed_core::experiment::{inject_study, plot_matrix, read_csv_rows, run_sweep, Metric, SiteSweep, SweepConfig, SweepResult};
use naed_core::logical::{lower, simplify};
use naed_core::noise::{InjectedError, PauliSet, StochasticModel};
use naed_core::verify;
use naed_core::NaedError;

const EXIT_CONFIG: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "naedsim", version, about = "No-ancilla error detection experiments on GHZ circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one (N, Q) cell.
    Run {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Simulate a grid of (N, Q) cells.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 3, 4, 5])]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
        q: Vec<usize>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Exact rejection rates of one error placed at every logical-gate boundary.
    Inject {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        /// X, Y, Z or PHASE.
        #[arg(long, default_value = "X")]
        error: String,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        /// Inject after every gate instead of only between logical gates.
        #[arg(long)]
        all_sites: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run the dense-oracle checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a logical circuit in canonical form.
    Parse {
        /// File path, or `-` for stdin.
        input: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the physical circuit for a logical program.
    Lower {
        input: String,
        #[arg(long)]
        q: usize,
        /// Comma-separated flipped qubits; `none` for the empty set.
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        no_simplify: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reshape sweep output (CSV or JSON) into an N x Q matrix.
    Plotdata {
        input: String,
        #[arg(long, default_value = "mu_full")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 8192)]
    shots: usize,
    #[arg(long, default_value_t = 225)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pauli probability per gate qubit. Omit both noise flags for exact output.
    #[arg(long)]
    p_gate: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Pauli set drawn from, e.g. XYZ or Z.
    #[arg(long)]
    paulis: Option<String>,
    #[arg(long)]
    no_simplify: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to the --out extension, else json.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl OutArgs {
    fn format(&self) -> Format {
        self.format.unwrap_or(match self.out.as_deref().and_then(Path::extension) {
            Some(ext) if ext == "csv" => Format::Csv,
            _ => Format::Json,
        })
    }
}

enum Failure {
    Config(String),
    Verify,
}

impl From<NaedError> for Failure {
    fn from(e: NaedError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

fn read_input(input: &str) -> Result<String, Failure> {
    if input == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(input).map_err(|e| Failure::Config(format!("{input}: {e}")))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn noise_model(sim: &SimArgs) -> Result<Option<StochasticModel>, Failure> {
    if sim.p_gate.is_none() && sim.gamma.is_none() && sim.paulis.is_none() {
        return Ok(None);
    }
    let mut model = StochasticModel::new(sim.p_gate.unwrap_or(0.0), sim.gamma.unwrap_or(0.0), sim.seed)?;
    if let Some(p) = &sim.paulis {
        model = model.with_paulis(p.parse::<PauliSet>()?);
    }
    Ok(Some(model))
}

fn simulate(n_list: Vec<usize>, q_list: Vec<usize>, sim: &SimArgs) -> Result<(), Failure> {
    let config = SweepConfig {
        n_list,
        q_list,
        shots: sim.shots,
        reps: sim.reps,
        noise: noise_model(sim)?,
        master_seed: sim.seed,
        simplify: !sim.no_simplify,
    };
    let result = run_sweep(&config)?;
    for a in &result.aggregates {
        let naed = a.mu_naed.map_or("-".to_string(), |v| format!("{v:.2}"));
        eprintln!("N={} Q={}  mu_full={:.2}  mu_naed={naed}  p_kept={:.2}", a.n, a.q, a.mu_full, a.p_kept);
    }
    let text = match sim.out.format() {
        Format::Json => result.to_json()? + "\n",
        Format::Csv => result.to_csv()?,
    };
    emit(sim.out.out.as_deref(), &text)
}

fn parse_set(s: &str) -> Result<Vec<usize>, Failure> {
    let s = s.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| Failure::Config(format!("bad qubit {t:?} in --s"))))
        .collect()
}

fn load_rows(text: &str) -> Result<Vec<naed_core::SweepRow>, Failure> {
    if text.trim_start().starts_with('{') {
        let r: SweepResult = serde_json::from_str(text).map_err(NaedError::from)?;
        Ok(r.aggregates)
    } else {
        Ok(read_csv_rows(text)?)
    }
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { n, q, sim } => simulate(vec![n], vec![q], &sim),
        Command::Sweep { n, q, sim } => simulate(n, q, &sim),
        Command::Inject { n, q, error, theta, phi, all_sites, out } => {
            let error = if error.eq_ignore_ascii_case("phase") {
                InjectedError::Phase { theta, phi }
            } else {
                error.parse()?
            };
            let sweep = if all_sites { SiteSweep::All } else { SiteSweep::Boundaries };
            let report = inject_study(n, q, error, sweep)?;
            eprintln!(
                "N={n} Q={q} error={}  rejection min={:.6} max={:.6}  baseline={:.6}",
                report.error,
                report.min_rejection(),
                report.max_rejection(),
                report.baseline_rejection
            );
            let text = match out.format() {
                Format::Json => serde_json::to_string_pretty(&report).map_err(NaedError::from)? + "\n",
                Format::Csv => report.to_csv()?,
            };
            emit(out.out.as_deref(), &text)
        }
        Command::Verify { seed } => {
            let reports = verify::run_all(seed)?;
            let width = reports.iter().map(|r| r.name.len()).max().unwrap_or(5);
            println!("{:<width$}  {:>12}  {:>9}  result", "check", "max residual", "tolerance");
            for r in &reports {
                let status = if r.passed { "pass" } else { "FAIL" };
                println!("{:<width$}  {:>12.3e}  {:>9.0e}  {status}", r.name, r.max_residual, r.tolerance);
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!("{} checks, {failed} failed", reports.len());
            if failed > 0 {
                Err(Failure::Verify)
            } else {
                Ok(())
            }
        }
        Command::Parse { input, out } => {
            let circuit = parse_dsl(&read_input(&input)?)?;
            emit(out.as_deref(), &circuit.to_string())
        }
        Command::Lower { input, q, s, no_simplify, out } => {
            let logical = parse_dsl(&read_input(&input)?)?;
            let code = match s {
                Some(s) => BitFlipCode::new(q, &parse_set(&s)?)?,
                None => ghz_code(q)?,
            };
            let mut physical = lower(&logical, &code)?;
            if !no_simplify {
                physical = simplify(&physical);
            }
            emit(out.as_deref(), &physical.to_string())
        }
        Command::Plotdata { input, metric, out } => {
            let metric: Metric = metric.parse()?;
            let rows = load_rows(&read_input(&input)?)?;
            emit(out.as_deref(), &plot_matrix(&rows, metric))
        }
    }
}

fn init_pool() -> Result<(), Failure> {
    let Ok(v) = std::env::var("NAEDSIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::Config(format!("NAEDSIM_THREADS={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Config(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_pool().and_then(|_| execute(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verify) => {
            eprintln!("error: verification failed");
            ExitCode::from(EXIT_VERIFY)
        }
    }
}
