//! One reasoning node: the rules of a component evaluated tick by tick over
//! an [`IntervalDb`] of the atoms it listens to.
//!
//! A node only solves when something it depends on may have changed: new
//! relevant input, a released future inference, or a due entry of its
//! trigger schedule. Its output is the begin/end delta between consecutive
//! answers for its own atoms, plus the inbound events it relays.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};
use thiserror::Error;

use crate::interval_db::{DbError, IntervalDb, OccurrenceBatch, Watch};
use crate::lars_lang::{GAtom, GHead, GroundRule, TimeRef};
use crate::semantics::{Head, StreamingAtom, Window, WindowKind};
use crate::solver::{Point, ResidualBuilder, SolveError, SolverKind};
use crate::stream_model::{Atom, Interval, Predicate, TimePoint};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Db(#[from] DbError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("unsupported in {node}: {msg}")]
    Unsupported { node: String, msg: String },
}

#[derive(Clone, Debug)]
pub struct NodeConfig {
    pub name: String,
    pub rules: Vec<GroundRule>,
    /// Predicates whose atoms this node derives.
    pub produces: BTreeSet<Predicate>,
    pub origin: TimePoint,
    pub solver: SolverKind,
}

/// Everything that reaches a node for one tick.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepInput {
    pub tick: TimePoint,
    pub begin: BTreeSet<Atom>,
    pub end: BTreeSet<Atom>,
    /// Own future inferences due at this tick.
    pub released: BTreeSet<Atom>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub tick: TimePoint,
    /// Own delta plus relayed inbound events.
    pub begin: BTreeSet<Atom>,
    pub end: BTreeSet<Atom>,
    /// Own atoms derived for later ticks.
    pub future: BTreeSet<Point>,
    pub inconsistent: bool,
    pub solved: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NodeStats {
    pub ticks: u64,
    pub solves: u64,
}

enum Lit {
    Const(bool),
    Var(usize),
}

/// A body atom of the node's own, reduced to what evaluation needs.
#[derive(Clone, Copy)]
enum Shape {
    Plain,
    At(TimePoint, Option<Window>),
    Diamond(Window),
    Box(Window),
}

/// A rule without time variables, its own atoms interned up front. Body ids
/// are `None` for atoms read from the store.
struct Compiled {
    head: u32,
    pos: Vec<Option<u32>>,
    neg: Vec<Option<u32>>,
}

pub struct ReasonerNode {
    name: String,
    rules: Vec<GroundRule>,
    produces: BTreeSet<Predicate>,
    wants: BTreeSet<Predicate>,
    solver: SolverKind,
    db: IntervalDb,
    emitted: BTreeSet<Atom>,
    watches: BTreeSet<Watch>,
    /// Largest look-back of any body atom; `None` disables cleanup.
    lookback: Option<u64>,
    /// Constant time points that must never be forgotten.
    pinned: Option<TimePoint>,
    rel_horizon: u64,
    abs_horizon: TimePoint,
    next_due: Option<TimePoint>,
    started: bool,
    /// Re-solve at this tick to retire released points.
    resolve_at: Option<TimePoint>,
    stats: NodeStats,
    builder: ResidualBuilder,
    compiled: Vec<Option<Compiled>>,
}

fn body_atoms(r: &GroundRule) -> impl Iterator<Item = &GAtom> {
    r.pos.iter().chain(&r.neg)
}

fn var_count(r: &GroundRule, i: usize) -> usize {
    let head = matches!(r.head, GHead::At(TimeRef::Var(j, _), _) if j == i) as usize;
    head + body_atoms(r).filter(|b| matches!(b.time(), Some(TimeRef::Var(j, _)) if j == i)).count()
}

fn watches_of(rules: &[GroundRule]) -> BTreeSet<Watch> {
    let mut out = BTreeSet::new();
    for r in rules {
        if r.clock_dependent_head() {
            out.insert(Watch::EveryTick);
        }
        for b in body_atoms(r) {
            let w = match b {
                GAtom::Plain(_) => continue,
                GAtom::At(TimeRef::Abs(c), a) => Watch::At(*c, a.clone()),
                GAtom::At(..) => Watch::EveryTick,
                GAtom::WinAt(w, TimeRef::Abs(c), a) => Watch::WinAt(*w, *c, a.clone()),
                GAtom::WinAt(_, TimeRef::Now(_), _) => Watch::EveryTick,
                GAtom::WinAt(w, TimeRef::Var(i, _), a) => {
                    if var_count(r, *i) == 1 {
                        Watch::Diamond(*w, a.clone())
                    } else {
                        Watch::WinAtVar(*w, a.clone())
                    }
                }
                GAtom::WinDiamond(w, a) => Watch::Diamond(*w, a.clone()),
                GAtom::WinBox(w, a) => Watch::Box(*w, a.clone()),
            };
            out.insert(w);
        }
    }
    out
}

/// Replaces `⊞w @T a` by `⊞w ◇a` when `T` occurs nowhere else in the rule:
/// both hold iff `a` occurs somewhere in the window.
fn existential_to_diamond(mut r: GroundRule) -> GroundRule {
    let single: Vec<usize> = (0..r.time_vars.len()).filter(|i| var_count(&r, *i) == 1).collect();
    let mut dropped = BTreeSet::new();
    for b in r.pos.iter_mut() {
        if let GAtom::WinAt(w, TimeRef::Var(i, 0), a) = b {
            if w.kind == WindowKind::Time && single.contains(i) {
                dropped.insert(*i);
                *b = GAtom::WinDiamond(*w, a.clone());
            }
        }
    }
    if dropped.is_empty() {
        return r;
    }
    let mut remap = Vec::new();
    let mut kept = Vec::new();
    for (i, v) in r.time_vars.iter().enumerate() {
        remap.push(kept.len());
        if !dropped.contains(&i) {
            kept.push(v.clone());
        }
    }
    let fix = |t: &mut TimeRef| {
        if let TimeRef::Var(i, k) = *t {
            *t = TimeRef::Var(remap[i], k);
        }
    };
    if let GHead::At(t, _) = &mut r.head {
        fix(t);
    }
    for b in r.pos.iter_mut().chain(r.neg.iter_mut()) {
        if let GAtom::At(t, _) | GAtom::WinAt(_, t, _) = b {
            fix(t);
        }
    }
    r.time_vars = kept;
    r
}

/// (look-back, pinned time point) for cleanup.
fn retention(rules: &[GroundRule]) -> (Option<u64>, Option<TimePoint>) {
    let mut back = Some(0u64);
    let mut pinned: Option<TimePoint> = None;
    for b in rules.iter().flat_map(body_atoms) {
        if let Some(w) = b.window() {
            if w.kind == WindowKind::Tuple {
                back = None;
            } else {
                back = back.map(|x| x.max(w.size));
            }
        }
        match b {
            GAtom::At(TimeRef::Now(k), _) if *k < 0 => back = back.map(|x| x.max(k.unsigned_abs())),
            GAtom::At(TimeRef::Var(..), _) => back = None,
            GAtom::At(TimeRef::Abs(c), _) | GAtom::WinAt(_, TimeRef::Abs(c), _) => {
                pinned = Some(pinned.map_or(*c, |p| p.min(*c)));
            }
            _ => {}
        }
    }
    (back, pinned)
}

impl ReasonerNode {
    pub fn new(mut config: NodeConfig) -> Self {
        config.rules = config.rules.into_iter().map(existential_to_diamond).collect();
        let wants = config.rules.iter().flat_map(body_atoms).map(|b| b.atom().predicate()).collect();
        let watches = watches_of(&config.rules);
        let (lookback, pinned) = retention(&config.rules);
        let mut rel_horizon = 0;
        let mut abs_horizon = 0;
        for r in &config.rules {
            match r.head {
                GHead::At(TimeRef::Now(k) | TimeRef::Var(_, k), _) if k > 0 => rel_horizon = rel_horizon.max(k as u64),
                GHead::At(TimeRef::Abs(c), _) => abs_horizon = abs_horizon.max(c),
                _ => {}
            }
        }
        let mut builder = ResidualBuilder::new();
        let compiled = config
            .rules
            .iter()
            .map(|r| {
                r.time_vars.is_empty().then(|| {
                    let mut id = |g: &GAtom| {
                        config.produces.contains(&g.atom().predicate()).then(|| builder.intern(g.atom()))
                    };
                    Compiled {
                        pos: r.pos.iter().map(&mut id).collect(),
                        neg: r.neg.iter().map(&mut id).collect(),
                        head: builder.intern(r.head.atom()),
                    }
                })
            })
            .collect();
        ReasonerNode {
            name: config.name,
            rules: config.rules,
            produces: config.produces,
            wants,
            solver: config.solver,
            db: IntervalDb::new(config.origin),
            emitted: BTreeSet::new(),
            watches,
            lookback,
            pinned,
            rel_horizon,
            abs_horizon,
            next_due: None,
            started: false,
            resolve_at: None,
            stats: NodeStats::default(),
            builder,
            compiled,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stats(&self) -> NodeStats {
        self.stats
    }

    pub fn db(&self) -> &IntervalDb {
        &self.db
    }

    /// Current store contents and last emitted state, for debugging.
    pub fn debug_json(&self) -> serde_json::Value {
        let now = self.db.last_time().unwrap_or(self.db.origin());
        serde_json::json!({
            "node": self.name,
            "now": now,
            "watermark": self.db.watermark(),
            "db": self.db.materialize(now),
            "emitted": self.emitted.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "next_due": self.next_due(),
        })
    }

    /// Own atoms currently holding.
    pub fn emitted(&self) -> &BTreeSet<Atom> {
        &self.emitted
    }

    /// Earliest future tick at which the node wants to re-evaluate without
    /// new input.
    pub fn next_due(&self) -> Option<TimePoint> {
        match (self.resolve_at, self.next_due) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// True if some rule can derive atoms for later ticks.
    pub fn derives_future(&self) -> bool {
        self.rel_horizon > 0 || self.abs_horizon > 0
    }

    fn is_own(&self, a: &Atom) -> bool {
        self.produces.contains(&a.predicate())
    }

    pub fn step(&mut self, input: &StepInput) -> Result<StepOutput, NodeError> {
        let now = input.tick;
        self.stats.ticks += 1;
        let relevant = |a: &Atom| self.wants.contains(&a.predicate()) && !self.is_own(a);
        let batch = OccurrenceBatch {
            at: now,
            begin: input.begin.iter().filter(|a| relevant(a)).cloned().collect(),
            end: input.end.iter().filter(|a| relevant(a)).cloned().collect(),
        };
        self.db.apply(&batch)?;
        for a in &input.released {
            self.db.insert_closed(a, Interval::point(now), now)?;
        }
        let due = self.next_due().is_some_and(|t| t <= now);
        if due {
            self.resolve_at = None;
        }
        let triggered = !self.started || !batch.is_empty() || !input.released.is_empty() || due;
        self.started = true;

        let mut out = StepOutput { tick: now, ..Default::default() };
        for a in &input.begin {
            if !self.is_own(a) {
                out.begin.insert(a.clone());
            }
        }
        for a in &input.end {
            if !self.is_own(a) {
                out.end.insert(a.clone());
            }
        }
        if triggered {
            self.stats.solves += 1;
            out.solved = true;
            let model = self.solve(now, &input.released)?;
            let current: BTreeSet<Atom> = match &model {
                Some(m) => m.iter().filter(|(_, t)| *t == now).map(|(a, _)| a.clone()).collect(),
                None => {
                    warn!("{}: no answer at {now}", self.name);
                    out.inconsistent = true;
                    BTreeSet::new()
                }
            };
            if let Some(m) = &model {
                out.future = m.iter().filter(|(_, t)| *t > now).cloned().collect();
            }
            let begins: BTreeSet<Atom> = current.difference(&self.emitted).cloned().collect();
            let ends: BTreeSet<Atom> = self.emitted.difference(&current).cloned().collect();
            self.db.apply(&OccurrenceBatch { at: now, begin: begins.clone(), end: ends.clone() })?;
            debug!("{}@{now}: +{begins:?} -{ends:?}", self.name);
            out.begin.extend(begins);
            out.end.extend(ends);
            self.emitted = current;
            // A released point only holds at its own tick.
            self.resolve_at = (!input.released.is_empty()).then_some(now + 1);
        }
        self.next_due = self.db.next_trigger(now, &self.watches);
        if let Some(back) = self.lookback {
            let mut cut = now.saturating_sub(back);
            if let Some(p) = self.pinned {
                cut = cut.min(p);
            }
            self.db.cleanup(cut);
        }
        Ok(out)
    }

    fn tuple_check(&self, w: Option<Window>, a: &Atom) -> Result<(), NodeError> {
        if w.is_some_and(|w| w.kind == WindowKind::Tuple) {
            return Err(NodeError::Unsupported {
                node: self.name.clone(),
                msg: format!("tuple window over atoms derived by the same node: {a}"),
            });
        }
        Ok(())
    }

    fn eval(&self, now: TimePoint, phi: &StreamingAtom, b: &mut ResidualBuilder) -> Result<Lit, NodeError> {
        let a = phi.atom();
        if !self.is_own(a) {
            return Ok(Lit::Const(self.db.query(now, phi)?));
        }
        self.tuple_check(phi.window(), a)?;
        let shape = match phi {
            StreamingAtom::Plain(_) => Shape::Plain,
            StreamingAtom::At(t, _) => Shape::At(*t, None),
            StreamingAtom::WinAt(w, t, _) => Shape::At(*t, Some(*w)),
            StreamingAtom::WinDiamond(w, _) => Shape::Diamond(*w),
            StreamingAtom::WinBox(w, _) => Shape::Box(*w),
        };
        let id = b.intern(a);
        self.eval_own(now, shape, a, id, b)
    }

    /// Like [`Self::eval`] for a body atom of a rule without time variables;
    /// `id` is the interned atom if it is the node's own. `None` means the
    /// atom refers to a time before 0.
    fn eval_compiled(
        &self,
        now: TimePoint,
        g: &GAtom,
        id: Option<u32>,
        b: &mut ResidualBuilder,
    ) -> Result<Option<Lit>, NodeError> {
        let Some(id) = id else {
            return Ok(match g.resolve(now, &[]) {
                Some(phi) => Some(Lit::Const(self.db.query(now, &phi)?)),
                None => None,
            });
        };
        self.tuple_check(g.window(), g.atom())?;
        let shape = match g {
            GAtom::Plain(_) => Shape::Plain,
            GAtom::At(t, _) => match t.resolve(now, &[]) {
                Some(t) => Shape::At(t, None),
                None => return Ok(None),
            },
            GAtom::WinAt(w, t, _) => match t.resolve(now, &[]) {
                Some(t) => Shape::At(t, Some(*w)),
                None => return Ok(None),
            },
            GAtom::WinDiamond(w, _) => Shape::Diamond(*w),
            GAtom::WinBox(w, _) => Shape::Box(*w),
        };
        self.eval_own(now, shape, g.atom(), id, b).map(Some)
    }

    fn eval_own(&self, now: TimePoint, shape: Shape, a: &Atom, id: u32, b: &mut ResidualBuilder) -> Result<Lit, NodeError> {
        let past = |lo: TimePoint| (lo < now).then(|| Interval::new(lo, now - 1).expect("lo < now"));
        Ok(match shape {
            Shape::Plain => Lit::Var(b.var(id, now)),
            Shape::At(t, w) => {
                if let Some(w) = w {
                    if !self.db.window_bounds(now, w).contains(t) {
                        return Ok(Lit::Const(false));
                    }
                }
                if t >= now {
                    Lit::Var(b.var(id, t))
                } else if t < self.db.origin() {
                    Lit::Const(false)
                } else {
                    self.db.check_range(t, now)?;
                    Lit::Const(self.db.holds_at(a, t, now))
                }
            }
            Shape::Diamond(w) => {
                let win = self.db.window_bounds(now, w);
                self.db.check_range(win.lo(), now)?;
                match past(win.lo()) {
                    Some(p) if self.db.any_in(a, p) => Lit::Const(true),
                    _ => Lit::Var(b.var(id, now)),
                }
            }
            Shape::Box(w) => {
                let win = self.db.window_bounds(now, w);
                self.db.check_range(win.lo(), now)?;
                match past(win.lo()) {
                    Some(p) if !self.db.all_in(a, p) => Lit::Const(false),
                    _ => Lit::Var(b.var(id, now)),
                }
            }
        })
    }

    /// Head variable of a rule instance, or `None` if the rule is settled.
    /// A head in the past is either satisfied or forbids its body.
    fn head_point(&self, now: TimePoint, t: TimePoint, a: &Atom) -> Option<Option<TimePoint>> {
        if t >= now {
            Some(Some(t))
        } else if t < self.db.watermark() || self.db.holds_at(a, t, now) {
            None
        } else {
            Some(None)
        }
    }

    fn solve(&mut self, now: TimePoint, released: &BTreeSet<Atom>) -> Result<Option<BTreeSet<Point>>, NodeError> {
        let hi = (now + self.rel_horizon).max(self.abs_horizon).max(now);
        let timeline = Interval::new(self.db.origin().min(now), hi).expect("origin <= hi");
        let mut b = std::mem::take(&mut self.builder);
        let result = self.fill(now, timeline, released, &mut b);
        let residual = b.take();
        self.builder = b;
        result?;
        Ok(residual.solve(&self.solver, now)?)
    }

    fn fill(
        &self,
        now: TimePoint,
        timeline: Interval,
        released: &BTreeSet<Atom>,
        b: &mut ResidualBuilder,
    ) -> Result<(), NodeError> {
        let mut ground = Vec::new();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (gr, compiled) in self.rules.iter().zip(&self.compiled) {
            if let Some(c) = compiled {
                let head_t = match &gr.head {
                    GHead::Plain(_) => Some(now),
                    GHead::At(t, a) => match t.resolve(now, &[]) {
                        Some(t) => match self.head_point(now, t, a) {
                            Some(h) => h,
                            None => continue,
                        },
                        None => continue,
                    },
                };
                pos.clear();
                neg.clear();
                if !self.body_compiled(now, gr, c, b, &mut pos, &mut neg)? {
                    continue;
                }
                let head = head_t.map(|t| b.var(c.head, t));
                b.rule(head, &pos, &neg);
                continue;
            }
            ground.clear();
            gr.instantiate_into(now, timeline, &mut ground);
            'inst: for rule in &ground {
                let head = match &rule.head {
                    Head::Plain(a) => Some((a, now)),
                    Head::At(t, a) => match self.head_point(now, *t, a) {
                        Some(h) => h.map(|t| (a, t)),
                        None => continue,
                    },
                };
                pos.clear();
                neg.clear();
                for phi in &rule.pos {
                    match self.eval(now, phi, b)? {
                        Lit::Const(true) => {}
                        Lit::Const(false) => continue 'inst,
                        Lit::Var(v) => pos.push(v),
                    }
                }
                for phi in &rule.neg {
                    match self.eval(now, phi, b)? {
                        Lit::Const(false) => {}
                        Lit::Const(true) => continue 'inst,
                        Lit::Var(v) => neg.push(v),
                    }
                }
                let head = head.map(|(a, t)| b.atom(a, t));
                b.rule(head, &pos, &neg);
            }
        }
        for a in released {
            let v = b.atom(a, now);
            b.rule(Some(v), &[], &[]);
        }
        Ok(())
    }

    /// Evaluates the body of a compiled rule; false if it cannot hold.
    fn body_compiled(
        &self,
        now: TimePoint,
        gr: &GroundRule,
        c: &Compiled,
        b: &mut ResidualBuilder,
        pos: &mut Vec<usize>,
        neg: &mut Vec<usize>,
    ) -> Result<bool, NodeError> {
        for (g, id) in gr.pos.iter().zip(&c.pos) {
            match self.eval_compiled(now, g, *id, b)? {
                Some(Lit::Const(true)) => {}
                None | Some(Lit::Const(false)) => return Ok(false),
                Some(Lit::Var(v)) => pos.push(v),
            }
        }
        for (g, id) in gr.neg.iter().zip(&c.neg) {
            match self.eval_compiled(now, g, *id, b)? {
                None | Some(Lit::Const(false)) => {}
                Some(Lit::Const(true)) => return Ok(false),
                Some(Lit::Var(v)) => neg.push(v),
            }
        }
        Ok(true)
    }
}

/// Groups future inferences by the tick they are due.
pub fn group_future(points: &BTreeSet<Point>) -> BTreeMap<TimePoint, BTreeSet<Atom>> {
    let mut out: BTreeMap<TimePoint, BTreeSet<Atom>> = BTreeMap::new();
    for (a, t) in points {
        out.entry(*t).or_default().insert(a.clone());
    }
    out
}
