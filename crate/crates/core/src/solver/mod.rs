//! Solving the propositional residual a node is left with once every
//! streaming atom over stored data has been evaluated.

mod search;
pub mod text;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::process::{Command, Stdio};

use thiserror::Error;

pub use search::{first_stable_model, is_stable_model, Body, NormalRule, Search};

use crate::semantics::{self, Head, Program, Rule, StreamingAtom};
use crate::stream_model::{Atom, Interval, IntervalStream, TimePoint};

pub const DEFAULT_DECISION_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver gave up after {0} decisions")]
    Budget(u64),
    #[error("solver protocol error: {0}")]
    Protocol(String),
    #[error("external solver failed: {0}")]
    External(String),
    #[error(transparent)]
    Semantics(#[from] semantics::SemanticsError),
}

/// How residual programs are solved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverKind {
    /// Built-in backtracking search.
    Search { budget: u64 },
    /// Brute-force answer-stream enumeration; only for tiny residuals.
    Enumerate,
    /// A subprocess speaking the text protocol of [`text`].
    External { command: Vec<String> },
}

impl Default for SolverKind {
    fn default() -> Self {
        SolverKind::Search { budget: DEFAULT_DECISION_BUDGET }
    }
}

/// An (atom, time point) a residual program decides.
pub type Point = (Atom, TimePoint);

/// Normal program over (atom, time point) pairs, atoms numbered in sorted
/// order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Residual {
    pub atoms: Vec<Point>,
    pub rules: Vec<NormalRule>,
}

/// Collects a residual program. Atoms are interned once and keep their id
/// across [`ResidualBuilder::take`] calls, so a node can reuse one builder
/// tick after tick.
#[derive(Clone, Debug, Default)]
pub struct ResidualBuilder {
    names: Vec<Atom>,
    index: HashMap<Atom, u32>,
    /// Per interned atom, the variables allocated for it so far.
    slots: Vec<Vec<(TimePoint, usize)>>,
    points: Vec<(u32, TimePoint)>,
    rules: Vec<NormalRule>,
}

impl ResidualBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, a: &Atom) -> u32 {
        if let Some(&id) = self.index.get(a) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(a.clone());
        self.index.insert(a.clone(), id);
        self.slots.push(Vec::new());
        id
    }

    pub fn name(&self, id: u32) -> &Atom {
        &self.names[id as usize]
    }

    /// The variable of interned atom `id` at `t`.
    pub fn var(&mut self, id: u32, t: TimePoint) -> usize {
        let slot = &mut self.slots[id as usize];
        if let Some(&(_, v)) = slot.iter().find(|(s, _)| *s == t) {
            return v;
        }
        let v = self.points.len();
        slot.push((t, v));
        self.points.push((id, t));
        v
    }

    pub fn atom(&mut self, a: &Atom, t: TimePoint) -> usize {
        let id = self.intern(a);
        self.var(id, t)
    }

    pub fn rule(&mut self, head: Option<usize>, pos: &[usize], neg: &[usize]) {
        self.rules.push(NormalRule { head, pos: pos.into(), neg: neg.into() });
    }

    /// The residual collected since the last call; interned atoms are kept.
    pub fn take(&mut self) -> Residual {
        let names = &self.names;
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_unstable_by(|&x, &y| {
            let (a, s) = self.points[x];
            let (b, t) = self.points[y];
            (&names[a as usize], s).cmp(&(&names[b as usize], t))
        });
        let mut remap = vec![0; order.len()];
        let mut atoms = Vec::with_capacity(order.len());
        for (i, &old) in order.iter().enumerate() {
            remap[old] = i;
            let (id, t) = self.points[old];
            atoms.push((names[id as usize].clone(), t));
        }
        let mut rules = std::mem::take(&mut self.rules);
        for r in &mut rules {
            r.head = r.head.map(|h| remap[h]);
            r.pos.iter_mut().chain(r.neg.iter_mut()).for_each(|a| *a = remap[*a]);
        }
        rules.sort();
        rules.dedup();
        for &(id, _) in &self.points {
            self.slots[id as usize].clear();
        }
        self.points.clear();
        Residual { atoms, rules }
    }

    pub fn build(mut self) -> Residual {
        self.take()
    }
}

impl Residual {
    fn name(&self, i: usize, now: TimePoint) -> String {
        let (a, t) = &self.atoms[i];
        if *t == now {
            a.to_string()
        } else {
            format!("lars_at({t},{a})")
        }
    }

    /// The text-protocol rendering; atoms at `now` print bare, others as
    /// `lars_at(t,atom)`.
    pub fn to_text(&self, now: TimePoint) -> text::TextProgram {
        text::TextProgram {
            names: (0..self.atoms.len()).map(|i| self.name(i, now)).collect(),
            rules: self.rules.clone(),
        }
    }

    /// The least stable model in true-first order, as a set of points.
    pub fn solve(&self, kind: &SolverKind, now: TimePoint) -> Result<Option<BTreeSet<Point>>, SolveError> {
        let model = match kind {
            SolverKind::Search { budget } => first_stable_model(self.atoms.len(), &self.rules, *budget)?,
            SolverKind::Enumerate => self.enumerate(now)?,
            SolverKind::External { command } => self.external(command, now)?,
        };
        Ok(model.map(|m| self.atoms.iter().zip(m).filter(|(_, t)| *t).map(|(p, _)| p.clone()).collect()))
    }

    fn enumerate(&self, now: TimePoint) -> Result<Option<Vec<bool>>, SolveError> {
        let fail = Atom::prop("lars_constraint");
        let hi = self.atoms.iter().map(|(_, t)| *t).max().unwrap_or(now).max(now);
        let lo = self.atoms.iter().map(|(_, t)| *t).min().unwrap_or(now).min(now);
        let at = |i: usize| StreamingAtom::At(self.atoms[i].1, self.atoms[i].0.clone());
        let mut rules = Vec::new();
        for r in &self.rules {
            let pos = r.pos.iter().map(|&a| at(a)).collect();
            let mut neg: Vec<StreamingAtom> = r.neg.iter().map(|&a| at(a)).collect();
            let head = match r.head {
                Some(h) => Head::At(self.atoms[h].1, self.atoms[h].0.clone()),
                None => {
                    neg.push(StreamingAtom::At(now, fail.clone()));
                    Head::At(now, fail.clone())
                }
            };
            rules.push(Rule::new(head, pos, neg));
        }
        let preds = self.atoms.iter().map(|(a, _)| a.predicate()).chain([fail.predicate()]);
        let program = Program::with_intensional(rules, preds);
        let data = IntervalStream::new(Interval::new(lo, hi).expect("lo <= hi"));
        let answers = semantics::enumerate_answer_streams(&data, &program, now, semantics::DEFAULT_BUDGET)?;
        Ok(answers.first().map(|s| self.atoms.iter().map(|(a, t)| s.occurs_at(a, *t)).collect()))
    }

    fn external(&self, command: &[String], now: TimePoint) -> Result<Option<Vec<bool>>, SolveError> {
        let (prog, args) = command.split_first().ok_or_else(|| SolveError::External("empty command".into()))?;
        let text_prog = self.to_text(now);
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| SolveError::External(format!("{prog}: {e}")))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin
                .write_all(text_prog.render().as_bytes())
                .map_err(|e| SolveError::External(e.to_string()))?;
        }
        let out = child.wait_with_output().map_err(|e| SolveError::External(e.to_string()))?;
        let stdout = String::from_utf8_lossy(&out.stdout);
        let Some(atoms) = text::parse_answer(&stdout)? else { return Ok(None) };
        let index: BTreeMap<&str, usize> = text_prog.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut model = vec![false; self.atoms.len()];
        for a in &atoms {
            if let Some(&i) = index.get(a.as_str()) {
                model[i] = true;
            }
        }
        if !is_stable_model(self.atoms.len(), &self.rules, &model) {
            return Err(SolveError::Protocol("external solver returned a non-stable model".into()));
        }
        Ok(Some(model))
    }
}
