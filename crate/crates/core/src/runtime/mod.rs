//! Runs a decomposed program as a network of reasoner nodes driven by a
//! master that feeds input, keeps the future-inference log and collects
//! output.
//!
//! All links run in lockstep per tick: a node handles tick `t` once it has the
//! master's clock message and the tick-`t` events of every predecessor. The
//! master may run ahead of the nodes, which lets stages work on consecutive
//! ticks in parallel, except when some rule derives atoms for later ticks:
//! then tick `t` is only released after every node has acknowledged `t - 1`.

pub mod future_log;
pub mod transport;
pub mod wire;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, warn};
use thiserror::Error;

use crate::decomposition::{Decomposition, DecompositionError, NodeId};
use crate::lars_lang::{ground, GroundOptions, GroundProgram, LangError, ProgramSource};
use crate::reasoner_node::{NodeConfig, NodeStats, ReasonerNode, StepInput};
use crate::solver::SolverKind;
use crate::stream_model::{Atom, Predicate, TimePoint};

use future_log::FutureLog;
use transport::{Inbox, Link, Msg, TransportKind};
use wire::WireEvent;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Decomposition(#[from] DecompositionError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("node {node}: {msg}")]
    Node { node: String, msg: String },
    #[error("node {0} disconnected")]
    Disconnected(String),
}

#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub transport: TransportKind,
    /// Evaluate everything in one node instead of one node per component.
    pub single_node: bool,
    pub solver: SolverKind,
    /// Wall-clock spacing of ticks; `None` runs as fast as possible.
    pub pace: Option<Duration>,
    /// Ticks to keep running after the last input while triggers are
    /// pending; defaults to the largest window plus the largest future
    /// offset plus one.
    pub drain_limit: Option<u64>,
}

#[derive(Clone, Debug, Default)]
pub struct RunReport {
    /// Output events, sorted, ending with `eos`.
    pub output: Vec<WireEvent>,
    /// (tick, node) pairs at which a node had no answer.
    pub inconsistent: Vec<(TimePoint, String)>,
    /// Per tick: time from release by the master until every node has
    /// acknowledged it and all output has arrived.
    pub latencies: Vec<(TimePoint, Duration)>,
    pub nodes: Vec<(String, NodeStats)>,
    pub first: Option<TimePoint>,
    pub last: Option<TimePoint>,
}

struct NodePlan {
    name: String,
    config: NodeConfig,
    preds: Vec<Option<usize>>,
    succs: Vec<(Option<usize>, BTreeSet<Predicate>)>,
}

/// A grounded, decomposed program ready to run.
pub struct Network {
    pub program: GroundProgram,
    pub decomposition: Decomposition,
    output: BTreeSet<Predicate>,
    plans: Vec<NodePlan>,
    /// Source nodes and what they listen to from the master.
    sources: Vec<(usize, BTreeSet<Predicate>)>,
    sinks: Vec<usize>,
    max_window: u64,
    horizon: u64,
}

fn slot(id: NodeId) -> Option<usize> {
    match id {
        NodeId::Master => None,
        NodeId::Comp(i) => Some(i),
    }
}

impl Network {
    pub fn new(src: &ProgramSource, options: GroundOptions, single_node: bool, solver: SolverKind) -> Result<Self, RuntimeError> {
        let program = ground(src, options)?;
        let decomposition = if single_node { Decomposition::fused(&program)? } else { Decomposition::new(&program)? };
        let graph = &decomposition.graph;
        let labels = &decomposition.labels;
        let mut plans = Vec::new();
        for (i, comp) in graph.components.iter().enumerate() {
            let id = NodeId::Comp(i);
            let rules = program.rules.iter().filter(|r| comp.rules.contains(&r.template)).cloned().collect();
            let config = NodeConfig {
                name: id.to_string(),
                rules,
                produces: labels.prod[&id].clone(),
                origin: 0,
                solver: solver.clone(),
            };
            plans.push(NodePlan {
                name: id.to_string(),
                config,
                preds: graph.predecessors(id).map(slot).collect(),
                succs: graph.successors(id).map(|v| (slot(v), labels.listening(id, v).clone())).collect(),
            });
        }
        let sources = graph
            .successors(NodeId::Master)
            .filter_map(|v| slot(v).map(|i| (i, labels.listening(NodeId::Master, v).clone())))
            .collect();
        let sinks = graph.predecessors(NodeId::Master).filter_map(slot).collect();
        let output = if src.show.is_empty() { src.intensional_predicates() } else { src.show.clone() };
        let mut max_window = 0;
        let mut horizon = 0;
        for r in &program.rules {
            for b in r.pos.iter().chain(&r.neg) {
                if let Some(w) = b.window() {
                    max_window = max_window.max(w.size);
                }
            }
            if let crate::lars_lang::GHead::At(t, _) = &r.head {
                match t {
                    crate::lars_lang::TimeRef::Now(k) | crate::lars_lang::TimeRef::Var(_, k) if *k > 0 => {
                        horizon = horizon.max(*k as u64)
                    }
                    _ => {}
                }
            }
        }
        Ok(Network { program, decomposition, output, plans, sources, sinks, max_window, horizon })
    }

    pub fn node_names(&self) -> Vec<String> {
        self.plans.iter().map(|p| p.name.clone()).collect()
    }

    pub fn output_predicates(&self) -> &BTreeSet<Predicate> {
        &self.output
    }

    /// Runs the network over an input event log.
    pub fn run(&self, input: &[WireEvent], config: &RunConfig) -> Result<RunReport, RuntimeError> {
        let (batches, last) = wire::batches(input);
        let (Some(first), Some(last)) = (batches.keys().next().copied(), last) else {
            return Ok(RunReport { output: vec![WireEvent::Eos], ..Default::default() });
        };
        let extensional = &self.program.extensional;
        for b in batches.values() {
            for a in b.begin.iter().chain(&b.end) {
                if self.program.is_intensional(a) {
                    warn!("ignoring input for derived atom {a}");
                } else if !extensional.contains(&a.predicate()) {
                    debug!("no rule reads {a}");
                }
            }
        }
        let drain_limit = config.drain_limit.unwrap_or(self.max_window + self.horizon + 1);
        Master::start(self, config, first)?.run(self, &batches, first, last, drain_limit, config.pace)
    }
}

/// Convenience wrapper: parse, ground, decompose and run.
pub fn run_program(src: &ProgramSource, input: &[WireEvent], config: &RunConfig) -> Result<RunReport, RuntimeError> {
    Network::new(src, GroundOptions::default(), config.single_node, config.solver.clone())?.run(input, config)
}

/// Per-predecessor queue of (tick, begin, end) messages.
type Pending = HashMap<Option<usize>, VecDeque<(TimePoint, Vec<Atom>, Vec<Atom>)>>;

struct NodeRunner {
    idx: usize,
    node: ReasonerNode,
    preds: Vec<Option<usize>>,
    succs: Vec<(BTreeSet<Predicate>, Link)>,
    master: Link,
    rx: Receiver<Msg>,
}

impl NodeRunner {
    fn run(mut self) -> NodeStats {
        let mut clocks: VecDeque<(TimePoint, Vec<Atom>)> = VecDeque::new();
        let mut data: Pending = self.preds.iter().map(|p| (*p, VecDeque::new())).collect();
        while let Ok(msg) = self.rx.recv() {
            match msg {
                Msg::Eos => break,
                Msg::Clock { t, released } => clocks.push_back((t, released)),
                Msg::Data { from, t, begin, end } => data.entry(from).or_default().push_back((t, begin, end)),
                Msg::Ack { .. } => {}
            }
            while let Some((t, _)) = clocks.front() {
                let t = *t;
                if !self.preds.iter().all(|p| data[p].front().is_some_and(|d| d.0 == t)) {
                    break;
                }
                let (_, released) = clocks.pop_front().expect("front exists");
                let mut input = StepInput { tick: t, released: released.into_iter().collect(), ..Default::default() };
                for p in &self.preds {
                    let (_, begin, end) = data.get_mut(p).and_then(VecDeque::pop_front).expect("checked above");
                    input.begin.extend(begin);
                    input.end.extend(end);
                }
                if !self.tick(&input) {
                    return self.node.stats();
                }
            }
        }
        self.node.stats()
    }

    fn tick(&mut self, input: &StepInput) -> bool {
        let t = input.tick;
        let result = self.node.step(input);
        let ack = match &result {
            Ok(out) => Msg::Ack {
                node: self.idx,
                t,
                future: out.future.iter().cloned().collect(),
                inconsistent: out.inconsistent,
                solved: out.solved,
                next_due: self.node.next_due(),
                error: None,
            },
            Err(e) => Msg::Ack {
                node: self.idx,
                t,
                future: Vec::new(),
                inconsistent: false,
                solved: false,
                next_due: None,
                error: Some(e.to_string()),
            },
        };
        if let Ok(out) = &result {
            for (filter, link) in &mut self.succs {
                let pick = |s: &BTreeSet<Atom>| s.iter().filter(|a| filter.contains(&a.predicate())).cloned().collect();
                let msg = Msg::Data { from: Some(self.idx), t, begin: pick(&out.begin), end: pick(&out.end) };
                if link.send(&msg).is_err() {
                    return false;
                }
            }
        }
        self.master.send(&ack).is_ok() && result.is_ok()
    }
}

#[derive(Default)]
struct TickState {
    sent_at: Option<Instant>,
    acks: usize,
    outputs: usize,
    begin: BTreeSet<Atom>,
    end: BTreeSet<Atom>,
}

struct Master {
    rx: Receiver<Msg>,
    links: Vec<Link>,
    handles: Vec<JoinHandle<NodeStats>>,
    names: Vec<String>,
    lockstep: bool,
    ticks: BTreeMap<TimePoint, TickState>,
    next_out: TimePoint,
    sent_through: Option<TimePoint>,
    future: FutureLog,
    next_due: Vec<Option<TimePoint>>,
    visible: BTreeSet<Atom>,
    report: RunReport,
}

impl Master {
    fn start(net: &Network, config: &RunConfig, origin: TimePoint) -> Result<Master, RuntimeError> {
        let n = net.plans.len();
        let kind = config.transport;
        let master_inbox = Inbox::new(kind, n + net.sinks.len())?;
        let inboxes: Vec<Inbox> = net
            .plans
            .iter()
            .map(|p| Inbox::new(kind, p.preds.len() + usize::from(!p.preds.contains(&None))))
            .collect::<Result<_, _>>()?;
        let mut links = Vec::new();
        let mut handles = Vec::new();
        let mut lockstep = false;
        // Links from the master, one per node (carrying both clock and data).
        for inbox in &inboxes {
            links.push(inbox.link()?);
        }
        let mut runners = Vec::new();
        for (i, plan) in net.plans.iter().enumerate() {
            let mut succs = Vec::new();
            for (to, filter) in &plan.succs {
                let link = match to {
                    Some(j) => inboxes[*j].link()?,
                    None => master_inbox.link()?,
                };
                succs.push((filter.clone(), link));
            }
            let mut config = plan.config.clone();
            config.origin = origin;
            let node = ReasonerNode::new(config);
            lockstep |= node.derives_future();
            runners.push((i, node, plan.preds.clone(), succs, master_inbox.link()?));
        }
        for ((i, node, preds, succs, master), inbox) in runners.into_iter().zip(inboxes) {
            let runner = NodeRunner { idx: i, node, preds, succs, master, rx: inbox.into_receiver() };
            handles.push(thread::Builder::new().name(net.plans[i].name.clone()).spawn(move || runner.run())?);
        }
        Ok(Master {
            rx: master_inbox.into_receiver(),
            links,
            handles,
            names: net.node_names(),
            lockstep,
            ticks: BTreeMap::new(),
            next_out: origin,
            sent_through: None,
            future: FutureLog::new(),
            next_due: vec![None; n],
            visible: BTreeSet::new(),
            report: RunReport::default(),
        })
    }

    fn complete(&self, t: TimePoint, sinks: usize) -> bool {
        self.ticks.get(&t).is_some_and(|s| s.acks == self.names.len() && s.outputs == sinks)
    }

    fn handle(&mut self, msg: Msg, net: &Network) -> Result<(), RuntimeError> {
        match msg {
            Msg::Data { t, begin, end, .. } => {
                let s = self.ticks.entry(t).or_default();
                s.outputs += 1;
                s.end.extend(end);
                s.begin.extend(begin);
            }
            Msg::Ack { node, t, future, inconsistent, next_due, error, .. } => {
                if let Some(msg) = error {
                    return Err(RuntimeError::Node { node: self.names[node].clone(), msg });
                }
                if inconsistent {
                    self.report.inconsistent.push((t, self.names[node].clone()));
                }
                for (a, at) in future {
                    if let Err(e) = self.future.record(node, a, at, self.sent_through) {
                        warn!("{}: dropping {e}", self.names[node]);
                    }
                }
                self.next_due[node] = next_due;
                self.ticks.entry(t).or_default().acks += 1;
            }
            Msg::Clock { .. } | Msg::Eos => {}
        }
        self.flush(net);
        Ok(())
    }

    /// Emits output for completed ticks, in order.
    fn flush(&mut self, net: &Network) {
        while self.complete(self.next_out, net.sinks.len()) {
            let t = self.next_out;
            let s = self.ticks.remove(&t).expect("complete tick exists");
            if let Some(at) = s.sent_at {
                self.report.latencies.push((t, at.elapsed()));
            }
            let mut cur = self.visible.clone();
            for a in &s.end {
                cur.remove(a);
            }
            for a in &s.begin {
                if net.output.contains(&a.predicate()) {
                    cur.insert(a.clone());
                }
            }
            for a in self.visible.difference(&cur) {
                self.report.output.push(WireEvent::End { t, atom: a.clone() });
            }
            for a in cur.difference(&self.visible) {
                self.report.output.push(WireEvent::Begin { t, atom: a.clone() });
            }
            self.visible = cur;
            self.next_out += 1;
        }
    }

    fn recv(&mut self, net: &Network, deadline: Option<Instant>) -> Result<bool, RuntimeError> {
        let msg = match deadline {
            None => match self.rx.recv() {
                Ok(m) => m,
                Err(_) => return Err(RuntimeError::Disconnected("all".into())),
            },
            Some(d) => match self.rx.recv_timeout(d.saturating_duration_since(Instant::now())) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => return Ok(false),
                Err(RecvTimeoutError::Disconnected) => return Err(RuntimeError::Disconnected("all".into())),
            },
        };
        self.handle(msg, net)?;
        Ok(true)
    }

    fn wait_through(&mut self, t: TimePoint, net: &Network) -> Result<(), RuntimeError> {
        while self.next_out <= t {
            self.recv(net, None)?;
        }
        Ok(())
    }

    fn send_all(&mut self, msgs: Vec<(usize, Msg)>) -> Result<(), RuntimeError> {
        for (i, m) in msgs {
            self.links[i].send(&m).map_err(|_| RuntimeError::Disconnected(self.names[i].clone()))?;
        }
        Ok(())
    }

    fn run(
        mut self,
        net: &Network,
        batches: &BTreeMap<TimePoint, crate::interval_db::OccurrenceBatch>,
        first: TimePoint,
        last: TimePoint,
        drain_limit: u64,
        pace: Option<Duration>,
    ) -> Result<RunReport, RuntimeError> {
        let n = self.names.len();
        let start = Instant::now();
        let mut t = first;
        let outcome = (|| -> Result<(), RuntimeError> {
            if n == 0 {
                return Ok(());
            }
            loop {
                if t > last {
                    self.wait_through(t - 1, net)?;
                    let pending_future = !self.future.is_empty();
                    let due = self.next_due.iter().flatten().min().is_some_and(|d| *d <= last + drain_limit);
                    if t > last + drain_limit || !(pending_future || due) {
                        break;
                    }
                } else if self.lockstep && t > first {
                    self.wait_through(t - 1, net)?;
                }
                if let Some(p) = pace {
                    let at = start + p * (t - first) as u32;
                    while Instant::now() < at {
                        self.recv(net, Some(at))?;
                    }
                }
                let released = self.future.release_due(t);
                let batch = batches.get(&t);
                let mut msgs = Vec::new();
                for i in 0..n {
                    let rel = released.get(&i).map(|s| s.iter().cloned().collect()).unwrap_or_default();
                    msgs.push((i, Msg::Clock { t, released: rel }));
                }
                for (i, filter) in &net.sources {
                    let pick = |s: Option<&BTreeSet<Atom>>| {
                        s.map(|s| s.iter().filter(|a| filter.contains(&a.predicate())).cloned().collect()).unwrap_or_default()
                    };
                    msgs.push((*i, Msg::Data { from: None, t, begin: pick(batch.map(|b| &b.begin)), end: pick(batch.map(|b| &b.end)) }));
                }
                self.ticks.entry(t).or_default().sent_at = Some(Instant::now());
                self.sent_through = Some(t);
                self.send_all(msgs)?;
                while let Ok(m) = self.rx.try_recv() {
                    self.handle(m, net)?;
                }
                t += 1;
            }
            self.wait_through(t - 1, net)
        })();
        for link in &mut self.links {
            let _ = link.send(&Msg::Eos);
        }
        let handles = std::mem::take(&mut self.handles);
        let mut stats = Vec::new();
        for (h, name) in handles.into_iter().zip(&self.names) {
            let s = h.join().map_err(|_| RuntimeError::Node { node: name.clone(), msg: "panicked".into() })?;
            stats.push((name.clone(), s));
        }
        outcome?;
        let mut report = self.report;
        report.nodes = stats;
        report.first = Some(first);
        report.last = Some(t.saturating_sub(1).max(first));
        wire::sort_events(&mut report.output);
        report.inconsistent.sort();
        report.output.push(WireEvent::Eos);
        Ok(report)
    }
}
