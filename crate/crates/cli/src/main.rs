use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use larstream::bench::{run_bench, BenchSpec, Mode, Scenario};
use larstream::decomposition::Decomposition;
use larstream::lars_lang::{ground, parse, GroundOptions, ProgramSource};
use larstream::runtime::transport::TransportKind;
use larstream::runtime::wire::{parse_events, render_events};
use larstream::runtime::{Network, RunConfig};
use larstream::semantics::{enumerate_answer_streams, is_answer_stream, DEFAULT_BUDGET};
use larstream::solver::text::{render_answer, TextProgram};
use larstream::solver::{first_stable_model, SolverKind, DEFAULT_DECISION_BUDGET};
use larstream::IntervalStream;

#[derive(Parser)]
#[command(name = "larstream", version, about = "Distributed interval-based stream reasoning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program over an NDJSON event stream.
    Run(RunArgs),
    /// Print the component network of a program.
    Decompose(DecomposeArgs),
    /// Check whether a candidate stream is an answer stream.
    Check(CheckArgs),
    /// Measure latency and saturation of a scenario; writes CSV.
    Bench(BenchArgs),
    /// Solve a residual program in the text protocol read from stdin.
    #[command(hide = true)]
    Solve {
        #[arg(long, default_value_t = DEFAULT_DECISION_BUDGET)]
        budget: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    Inproc,
    Tcp,
}

impl From<Transport> for TransportKind {
    fn from(t: Transport) -> Self {
        match t {
            Transport::Inproc => TransportKind::InProc,
            Transport::Tcp => TransportKind::Tcp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverChoice {
    Search,
    Enumerate,
    External,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "search")]
    solver: SolverChoice,
    /// Decision budget of the built-in search.
    #[arg(long, default_value_t = DEFAULT_DECISION_BUDGET)]
    budget: u64,
    /// Command line of an external solver (with --solver external).
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    solver_cmd: Vec<String>,
}

impl SolverArgs {
    fn kind(&self) -> Result<SolverKind> {
        Ok(match self.solver {
            SolverChoice::Search => SolverKind::Search { budget: self.budget },
            SolverChoice::Enumerate => SolverKind::Enumerate,
            SolverChoice::External => {
                if self.solver_cmd.is_empty() {
                    bail!("--solver external needs --solver-cmd");
                }
                SolverKind::External { command: self.solver_cmd.clone() }
            }
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    program: PathBuf,
    /// Event file; `-` reads stdin.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "inproc")]
    transport: Transport,
    #[arg(long)]
    single_node: bool,
    /// Milliseconds per tick, for `sec`/`msec` windows.
    #[arg(long, default_value_t = 1000)]
    tick_ms: u64,
    /// Wall-clock milliseconds between ticks.
    #[arg(long)]
    pace_ms: Option<f64>,
    #[arg(long)]
    drain_limit: Option<u64>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    program: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 1000)]
    tick_ms: u64,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    program: PathBuf,
    /// Input interval stream (JSON).
    #[arg(long)]
    data: PathBuf,
    /// Candidate interval stream (JSON); not needed with --enumerate.
    #[arg(long)]
    candidate: Option<PathBuf>,
    /// Evaluation time.
    #[arg(long)]
    time: u64,
    /// Print every answer stream instead of checking a candidate.
    #[arg(long)]
    enumerate: bool,
    #[arg(long, default_value_t = 1000)]
    tick_ms: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "nqueens")]
    scenario: String,
    /// Window size in seconds (caching).
    #[arg(long, default_value_t = 18)]
    k: u64,
    #[arg(long, default_value_t = 6)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    stages: usize,
    /// Input ticks per run.
    #[arg(long, default_value_t = 100)]
    occurrences: u64,
    /// Tick intervals in milliseconds.
    #[arg(long, value_delimiter = ',', default_values_t = [8.0, 4.0, 2.0, 1.0, 0.5])]
    intervals: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = ["distributed".to_string(), "single-node".to_string()])]
    modes: Vec<String>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Per-run timeout; slower runs are marked DNF.
    #[arg(long, default_value_t = 120)]
    timeout_s: u64,
    #[arg(long, value_enum, default_value = "inproc")]
    transport: Transport,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading stdin")?;
        return Ok(s);
    }
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn load_program(path: &Path) -> Result<ProgramSource> {
    let text = read_text(path)?;
    parse(&text).with_context(|| format!("in {}", path.display()))
}

fn load_stream(path: &Path) -> Result<IntervalStream> {
    serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing stream {}", path.display()))
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let src = load_program(&args.program)?;
    let input = parse_events(&read_text(&args.input)?).with_context(|| format!("in {}", args.input.display()))?;
    let solver = args.solver.kind()?;
    let net = Network::new(&src, GroundOptions { tick_ms: args.tick_ms }, args.single_node, solver.clone())?;
    let config = RunConfig {
        transport: args.transport.into(),
        single_node: args.single_node,
        solver,
        pace: args.pace_ms.map(|ms| Duration::from_secs_f64(ms / 1e3)),
        drain_limit: args.drain_limit,
    };
    let report = net.run(&input, &config)?;
    write_text(args.output.as_deref(), &render_events(&report.output))?;
    if let Some((t, node)) = report.inconsistent.first() {
        eprintln!("inconsistent: node {node} has no answer at tick {t} ({} ticks in total)", report.inconsistent.len());
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn decompose(args: DecomposeArgs) -> Result<ExitCode> {
    let src = load_program(&args.program)?;
    let program = ground(&src, GroundOptions { tick_ms: args.tick_ms })?;
    let d = Decomposition::new(&program)?;
    let text = match args.format {
        Format::Json => serde_json::to_string_pretty(&d.to_json(&program))? + "\n",
        Format::Dot => d.to_dot(&program),
    };
    write_text(None, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn check(args: CheckArgs) -> Result<ExitCode> {
    let src = load_program(&args.program)?;
    let program = ground(&src, GroundOptions { tick_ms: args.tick_ms })?;
    let data = load_stream(&args.data)?;
    let plain = program.instantiate(args.time, data.timeline());
    if args.enumerate {
        let answers = enumerate_answer_streams(&data, &plain, args.time, DEFAULT_BUDGET)?;
        let mut out = String::new();
        for a in &answers {
            out.push_str(&serde_json::to_string(a)?);
            out.push('\n');
        }
        write_text(None, &out)?;
        return Ok(ExitCode::SUCCESS);
    }
    let Some(cand) = &args.candidate else { bail!("--candidate is required unless --enumerate is given") };
    let verdict = is_answer_stream(&data, &load_stream(cand)?, &plain, args.time)?;
    println!("{verdict}");
    Ok(ExitCode::SUCCESS)
}

fn bench(args: BenchArgs) -> Result<ExitCode> {
    let spec = BenchSpec {
        scenario: args.scenario.parse::<Scenario>()?,
        k: args.k,
        n: args.n,
        stages: args.stages,
        occurrences: args.occurrences,
        intervals_ms: args.intervals,
        modes: args.modes.iter().map(|m| m.parse::<Mode>()).collect::<Result<_, _>>()?,
        repeats: args.repeats,
        timeout: Duration::from_secs(args.timeout_s),
        transport: args.transport.into(),
        solver: SolverKind::default(),
    };
    let result = run_bench(&spec)?;
    write_text(args.output.as_deref(), &result.to_csv())?;
    for repeat in 0..spec.repeats {
        for &mode in &spec.modes {
            eprintln!(
                "repeat {repeat}: {} saturates at {} ms",
                mode.as_str(),
                result.saturation_interval(mode, repeat)
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn solve(budget: u64) -> Result<ExitCode> {
    let mut text = String::new();
    io::stdin().read_to_string(&mut text)?;
    let prog = TextProgram::parse(&text)?;
    let model = first_stable_model(prog.names.len(), &prog.rules, budget)?;
    print!("{}", render_answer(&prog.names, model.as_deref()));
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Decompose(a) => decompose(a),
        Command::Check(a) => check(a),
        Command::Bench(a) => bench(a),
        Command::Solve { budget } => solve(budget),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
