//! Latency benchmark: replays a scenario at a fixed tick interval and
//! checks whether latency keeps growing.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::lars_lang::{parse, GroundOptions, LangError};
use crate::runtime::transport::TransportKind;
use crate::runtime::wire::WireEvent;
use crate::runtime::{Network, RunConfig, RunReport, RuntimeError};
use crate::scenarios;
use crate::solver::SolverKind;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Caching,
    NQueens,
}

impl FromStr for Scenario {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "caching" => Ok(Scenario::Caching),
            "nqueens" => Ok(Scenario::NQueens),
            _ => Err(BenchError::Spec(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Mode {
    Distributed,
    SingleNode,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Distributed => "distributed",
            Mode::SingleNode => "single-node",
        }
    }
}

impl FromStr for Mode {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "distributed" => Ok(Mode::Distributed),
            "single-node" => Ok(Mode::SingleNode),
            _ => Err(BenchError::Spec(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchSpec {
    pub scenario: Scenario,
    /// Window size in seconds (caching).
    pub k: u64,
    /// Board size (nqueens).
    pub n: usize,
    pub stages: usize,
    /// Input ticks per run.
    pub occurrences: u64,
    /// Tick intervals to try, in milliseconds.
    pub intervals_ms: Vec<f64>,
    pub modes: Vec<Mode>,
    pub repeats: usize,
    /// A run taking longer than this is marked DNF.
    pub timeout: Duration,
    pub transport: TransportKind,
    pub solver: SolverKind,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            scenario: Scenario::NQueens,
            k: 18,
            n: 6,
            stages: 4,
            occurrences: 100,
            intervals_ms: vec![8.0, 4.0, 2.0, 1.0, 0.5],
            modes: vec![Mode::Distributed, Mode::SingleNode],
            repeats: 3,
            timeout: Duration::from_secs(120),
            transport: TransportKind::InProc,
            solver: SolverKind::default(),
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Spec(m.to_string()));
        match self.scenario {
            Scenario::NQueens if self.n < 4 => return bad("nqueens needs n >= 4"),
            Scenario::NQueens if self.stages < 1 => return bad("nqueens needs at least one stage"),
            Scenario::Caching if self.k < 1 => return bad("caching needs k >= 1"),
            _ => {}
        }
        if self.intervals_ms.iter().any(|i| !i.is_finite() || *i < 0.0) {
            return bad("tick intervals must be non-negative");
        }
        if self.repeats == 0 || self.modes.is_empty() {
            return bad("need at least one repeat and one mode");
        }
        Ok(())
    }

    /// Program text and input events of the scenario.
    pub fn workload(&self) -> (String, Vec<WireEvent>) {
        match self.scenario {
            Scenario::Caching => (scenarios::gen_caching(self.k), scenarios::gen_caching_input(self.k, self.occurrences)),
            Scenario::NQueens => {
                let cols: Vec<i64> = (1..=self.n as i64).collect();
                (scenarios::gen_nqueens(self.n, self.stages), scenarios::gen_queens_input(&cols, 0, self.occurrences))
            }
        }
    }

    pub fn stage_count(&self) -> usize {
        match self.scenario {
            Scenario::Caching => 1,
            Scenario::NQueens => self.stages,
        }
    }
}

/// One run at one interval in one mode.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub interval_ms: f64,
    pub mode: Mode,
    pub repeat: usize,
    /// Per input tick, in milliseconds.
    pub latencies_ms: Vec<f64>,
    /// Process CPU time (user + system) spent during the run.
    pub cpu_ms: f64,
    pub saturated: bool,
    pub dnf: bool,
    /// Output of the run, for validity checks; empty on DNF.
    pub output: Vec<WireEvent>,
}

#[derive(Clone, Debug, Default)]
pub struct BenchResult {
    pub stage_count: usize,
    pub runs: Vec<RunSummary>,
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Latency grows over the run: the median of the last fifth exceeds the
/// median of the first fifth by more than one tick interval (at least 2 ms).
pub fn is_saturated(latencies_ms: &[f64], interval_ms: f64) -> bool {
    let k = (latencies_ms.len() / 5).max(1);
    if latencies_ms.len() < 2 {
        return false;
    }
    let head = median(&latencies_ms[..k]);
    let tail = median(&latencies_ms[latencies_ms.len() - k..]);
    tail - head > interval_ms.max(2.0)
}

/// Process CPU time in milliseconds.
pub fn cpu_time_ms() -> f64 {
    let mut ru = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    // SAFETY: getrusage only writes into the provided struct.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_SELF, ru.as_mut_ptr()) };
    if rc != 0 {
        return 0.0;
    }
    // SAFETY: initialised by the successful call above.
    let ru = unsafe { ru.assume_init() };
    let tv = |t: libc::timeval| t.tv_sec as f64 * 1e3 + t.tv_usec as f64 / 1e3;
    tv(ru.ru_utime) + tv(ru.ru_stime)
}

fn run_once(
    spec: &BenchSpec,
    program: &str,
    input: &[WireEvent],
    mode: Mode,
    interval_ms: f64,
) -> Result<Option<(RunReport, f64)>, BenchError> {
    let src = parse(program)?;
    let net = Network::new(&src, GroundOptions::default(), mode == Mode::SingleNode, spec.solver.clone())?;
    let config = RunConfig {
        transport: spec.transport,
        single_node: mode == Mode::SingleNode,
        solver: spec.solver.clone(),
        pace: Some(Duration::from_secs_f64(interval_ms / 1e3)),
        drain_limit: Some(0),
    };
    let input = input.to_vec();
    let (tx, rx) = mpsc::channel();
    let cpu0 = cpu_time_ms();
    // Detached so a run past the timeout can be abandoned.
    thread::spawn(move || {
        let _ = tx.send(net.run(&input, &config));
    });
    match rx.recv_timeout(spec.timeout) {
        Ok(report) => Ok(Some((report?, cpu_time_ms() - cpu0))),
        Err(_) => Ok(None),
    }
}

/// Runs every (interval, mode, repeat) combination.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchResult, BenchError> {
    spec.validate()?;
    let (program, input) = spec.workload();
    let mut result = BenchResult { stage_count: spec.stage_count(), runs: Vec::new() };
    for repeat in 0..spec.repeats {
        for &interval_ms in &spec.intervals_ms {
            for &mode in &spec.modes {
                let run = match run_once(spec, &program, &input, mode, interval_ms)? {
                    Some((report, cpu_ms)) => {
                        let latencies_ms: Vec<f64> = report
                            .latencies
                            .iter()
                            .filter(|(t, _)| input_tick(&input, *t))
                            .map(|(_, d)| d.as_secs_f64() * 1e3)
                            .collect();
                        RunSummary {
                            interval_ms,
                            mode,
                            repeat,
                            saturated: is_saturated(&latencies_ms, interval_ms),
                            latencies_ms,
                            cpu_ms,
                            dnf: false,
                            output: report.output,
                        }
                    }
                    None => RunSummary {
                        interval_ms,
                        mode,
                        repeat,
                        latencies_ms: Vec::new(),
                        cpu_ms: 0.0,
                        saturated: true,
                        dnf: true,
                        output: Vec::new(),
                    },
                };
                log::info!(
                    "{} {}ms #{}: median {:.2}ms, saturated {}{}",
                    mode.as_str(),
                    interval_ms,
                    repeat,
                    median(&run.latencies_ms),
                    run.saturated,
                    if run.dnf { " (DNF)" } else { "" }
                );
                result.runs.push(run);
            }
        }
    }
    Ok(result)
}

fn input_tick(input: &[WireEvent], t: u64) -> bool {
    input.last().and_then(WireEvent::time).is_some_and(|last| t <= last)
}

impl BenchResult {
    /// Header plus one row per measured tick, runs in execution order; a
    /// DNF run gives one row with empty measurements and `DNF` in the
    /// last column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tick_interval_ms,stage_count,mode,latency_ms,cpu_ms,saturated\n");
        for r in &self.runs {
            if r.dnf {
                let _ = writeln!(out, "{},{},{},,,DNF", r.interval_ms, self.stage_count, r.mode.as_str());
            }
            for l in &r.latencies_ms {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.3},{:.3},{}",
                    r.interval_ms,
                    self.stage_count,
                    r.mode.as_str(),
                    l,
                    r.cpu_ms,
                    r.saturated
                );
            }
        }
        out
    }

    /// Saturation tick interval of `mode` in `repeat`: the largest interval
    /// at which the run saturated, or 0 if none did.
    pub fn saturation_interval(&self, mode: Mode, repeat: usize) -> f64 {
        self.runs
            .iter()
            .filter(|r| r.mode == mode && r.repeat == repeat && r.saturated)
            .map(|r| r.interval_ms)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_rule() {
        let flat = vec![1.0; 50];
        assert!(!is_saturated(&flat, 1.0));
        let growing: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(is_saturated(&growing, 1.0));
        assert!(!is_saturated(&growing, 100.0));
        assert!(!is_saturated(&[5.0], 1.0));
    }

    #[test]
    fn single_tick_is_not_saturated() {
        let spec = BenchSpec {
            scenario: Scenario::NQueens,
            n: 4,
            stages: 1,
            occurrences: 1,
            intervals_ms: vec![1.0],
            modes: vec![Mode::Distributed],
            repeats: 1,
            ..Default::default()
        };
        let r = run_bench(&spec).unwrap();
        assert_eq!(r.runs.len(), 1);
        assert_eq!(r.runs[0].latencies_ms.len(), 1);
        assert!(!r.runs[0].saturated);
        assert_eq!(r.to_csv().lines().count(), 2);
    }

    #[test]
    fn rejects_small_boards() {
        let spec = BenchSpec { n: 3, ..Default::default() };
        assert!(matches!(run_bench(&spec), Err(BenchError::Spec(_))));
    }
}
