//! Eager Herbrand grounding.
//!
//! Data variables are instantiated over the constants of the program. Atoms
//! of intensional predicates are only matched against instances some rule can
//! derive (computed as a fixpoint); variables bound solely by extensional atoms
//! range over the whole universe. Time variables stay symbolic and are expanded
//! per evaluation time by [`GroundRule::instantiate`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use super::ast::*;
use super::transform::normalize;
use super::LangError;
use crate::semantics::{Head, Program, Rule, StreamingAtom, Window, WindowKind};
use crate::stream_model::{Atom, Const, Predicate, TimePoint, Timeline};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroundOptions {
    /// Length of one tick in milliseconds, used to map `[n sec]`/`[n msec]`
    /// window sizes onto ticks.
    pub tick_ms: u64,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions { tick_ms: 1000 }
    }
}

/// Time slot of a ground atom, resolved against the evaluation time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeRef {
    Abs(TimePoint),
    Now(i64),
    /// Rule-local time variable (index into `time_vars`) plus offset.
    Var(usize, i64),
}

impl TimeRef {
    pub(crate) fn resolve(self, now: TimePoint, vals: &[i64]) -> Option<TimePoint> {
        let t = match self {
            TimeRef::Abs(t) => return Some(t),
            TimeRef::Now(k) => now as i64 + k,
            TimeRef::Var(i, k) => vals[i] + k,
        };
        (t >= 0).then_some(t as TimePoint)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GAtom {
    Plain(Atom),
    At(TimeRef, Atom),
    WinAt(Window, TimeRef, Atom),
    WinDiamond(Window, Atom),
    WinBox(Window, Atom),
}

impl GAtom {
    pub fn atom(&self) -> &Atom {
        match self {
            GAtom::Plain(a) | GAtom::At(_, a) | GAtom::WinAt(_, _, a) | GAtom::WinDiamond(_, a) | GAtom::WinBox(_, a) => a,
        }
    }

    pub fn window(&self) -> Option<Window> {
        match self {
            GAtom::WinAt(w, _, _) | GAtom::WinDiamond(w, _) | GAtom::WinBox(w, _) => Some(*w),
            _ => None,
        }
    }

    pub fn time(&self) -> Option<TimeRef> {
        match self {
            GAtom::At(t, _) | GAtom::WinAt(_, t, _) => Some(*t),
            _ => None,
        }
    }

    pub(crate) fn resolve(&self, now: TimePoint, vals: &[i64]) -> Option<StreamingAtom> {
        Some(match self {
            GAtom::Plain(a) => StreamingAtom::Plain(a.clone()),
            GAtom::At(t, a) => StreamingAtom::At(t.resolve(now, vals)?, a.clone()),
            GAtom::WinAt(w, t, a) => StreamingAtom::WinAt(*w, t.resolve(now, vals)?, a.clone()),
            GAtom::WinDiamond(w, a) => StreamingAtom::WinDiamond(*w, a.clone()),
            GAtom::WinBox(w, a) => StreamingAtom::WinBox(*w, a.clone()),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GHead {
    Plain(Atom),
    At(TimeRef, Atom),
}

impl GHead {
    pub fn atom(&self) -> &Atom {
        match self {
            GHead::Plain(a) | GHead::At(_, a) => a,
        }
    }
}

/// A rule whose data variables are instantiated. Time slots may still refer
/// to the evaluation time or to rule-local time variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundRule {
    pub head: GHead,
    pub pos: Vec<GAtom>,
    pub neg: Vec<GAtom>,
    pub time_vars: Vec<Arc<str>>,
    /// Index of the (normalized) source rule this instance comes from.
    pub template: usize,
}

impl GroundRule {
    /// True if the head's time depends on the evaluation time.
    pub fn clock_dependent_head(&self) -> bool {
        matches!(self.head, GHead::At(TimeRef::Now(_) | TimeRef::Var(..), _))
    }

    fn var_range(&self, i: usize, now: TimePoint, timeline: Timeline) -> (i64, i64) {
        let (mut lo, mut hi) = (timeline.lo() as i64, timeline.hi() as i64);
        for b in &self.pos {
            let (win, k) = match b {
                GAtom::At(TimeRef::Var(j, k), _) if *j == i => (None, *k),
                GAtom::WinAt(w, TimeRef::Var(j, k), _) if *j == i => (Some(*w), *k),
                _ => continue,
            };
            let (mut l, mut h) = (timeline.lo() as i64, timeline.hi() as i64);
            if let Some(w) = win {
                if w.kind == WindowKind::Time {
                    l = l.max(now as i64 - w.size as i64);
                    h = h.min(now as i64);
                }
            }
            lo = lo.max(l - k);
            hi = hi.min(h - k);
        }
        (lo.max(0), hi)
    }

    /// Plain LARS rules obtained by substituting `now` and every admissible
    /// value of the time variables. Instances whose positive body refers to a
    /// negative time point are dropped, as are those with such a head.
    pub fn instantiate_into(&self, now: TimePoint, timeline: Timeline, out: &mut Vec<Rule>) {
        let ranges: Vec<(i64, i64)> =
            (0..self.time_vars.len()).map(|i| self.var_range(i, now, timeline)).collect();
        if ranges.iter().any(|(l, h)| l > h) {
            return;
        }
        let mut vals: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            if let Some(rule) = self.resolve(now, &vals) {
                out.push(rule);
            }
            // Odometer over the time-variable ranges.
            let mut i = 0;
            loop {
                if i == vals.len() {
                    return;
                }
                if vals[i] < ranges[i].1 {
                    vals[i] += 1;
                    break;
                }
                vals[i] = ranges[i].0;
                i += 1;
            }
        }
    }

    pub fn instantiate(&self, now: TimePoint, timeline: Timeline) -> Vec<Rule> {
        let mut out = Vec::new();
        self.instantiate_into(now, timeline, &mut out);
        out
    }

    fn resolve(&self, now: TimePoint, vals: &[i64]) -> Option<Rule> {
        let head = match &self.head {
            GHead::Plain(a) => Head::Plain(a.clone()),
            GHead::At(t, a) => Head::At(t.resolve(now, vals)?, a.clone()),
        };
        let pos = self.pos.iter().map(|b| b.resolve(now, vals)).collect::<Option<Vec<_>>>()?;
        let neg = self.neg.iter().filter_map(|b| b.resolve(now, vals)).collect();
        Some(Rule { head, pos, neg })
    }
}

/// Result of grounding: the ground rules plus the normalized source they were
/// instantiated from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundProgram {
    pub rules: Vec<GroundRule>,
    /// Normalized source rules; `GroundRule::template` indexes into this.
    pub templates: Vec<RuleTemplate>,
    pub intensional: BTreeSet<Predicate>,
    pub extensional: BTreeSet<Predicate>,
    pub options: GroundOptions,
}

impl GroundProgram {
    pub fn is_intensional(&self, a: &Atom) -> bool {
        self.intensional.contains(&a.predicate())
    }

    /// The plain LARS program at evaluation time `now`.
    pub fn instantiate(&self, now: TimePoint, timeline: Timeline) -> Program {
        let mut rules = Vec::new();
        for r in &self.rules {
            r.instantiate_into(now, timeline, &mut rules);
        }
        Program::with_intensional(rules, self.intensional.iter().cloned())
    }

    pub fn window(&self, w: WindowSize) -> Window {
        w.resolve(self.options.tick_ms)
    }
}

/// Compiled term with variables replaced by slot indices.
#[derive(Clone, Debug)]
enum CTerm {
    Var(usize),
    Const(Const),
    Bin(BinOp, Box<CTerm>, Box<CTerm>),
    Abs(Box<CTerm>),
}

#[derive(Clone, Debug)]
struct CAtom {
    pred: Arc<str>,
    args: Vec<CTerm>,
    intensional: bool,
}

#[derive(Clone, Debug)]
enum CLit {
    Pos(BodyAtom, CAtom),
    Neg(BodyAtom, CAtom),
    Cmp(CmpOp, CTerm, CTerm),
}

struct CRule {
    index: usize,
    line: usize,
    head: CAtom,
    head_pattern: HeadPattern,
    /// Body in evaluation order.
    body: Vec<CLit>,
    nvars: usize,
    time_vars: Vec<Arc<str>>,
}

type Subst = Vec<Option<Const>>;

fn eval(t: &CTerm, s: &Subst, line: usize) -> Result<Option<Const>, LangError> {
    let int = |t: &CTerm| -> Result<Option<i64>, LangError> {
        Ok(match eval(t, s, line)? {
            Some(Const::Int(i)) => Some(i),
            _ => None,
        })
    };
    Ok(match t {
        CTerm::Var(i) => s[*i].clone(),
        CTerm::Const(c) => Some(c.clone()),
        CTerm::Bin(op, l, r) => {
            let (Some(a), Some(b)) = (int(l)?, int(r)?) else { return Ok(None) };
            let v = match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
            };
            Some(Const::Int(v.ok_or(LangError::Overflow { line })?))
        }
        CTerm::Abs(x) => match int(x)? {
            Some(a) => Some(Const::Int(a.checked_abs().ok_or(LangError::Overflow { line })?)),
            None => None,
        },
    })
}

fn compare(op: CmpOp, a: &Const, b: &Const) -> bool {
    match op {
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
    }
}

struct Compiler<'a> {
    vars: HashMap<Arc<str>, usize>,
    intensional: &'a BTreeSet<Predicate>,
}

impl Compiler<'_> {
    fn term(&mut self, t: &Term) -> CTerm {
        match t {
            Term::Var(v) => {
                let n = self.vars.len();
                CTerm::Var(*self.vars.entry(v.clone()).or_insert(n))
            }
            Term::Sym(s) => CTerm::Const(Const::Sym(s.clone())),
            Term::Int(i) => CTerm::Const(Const::Int(*i)),
            Term::Bin(op, l, r) => CTerm::Bin(*op, Box::new(self.term(l)), Box::new(self.term(r))),
            Term::Abs(x) => CTerm::Abs(Box::new(self.term(x))),
            Term::Range(..) => unreachable!("ranges only occur in fact heads"),
        }
    }

    fn atom(&mut self, a: &AtomPattern) -> CAtom {
        CAtom {
            pred: a.pred.clone(),
            args: a.args.iter().map(|t| self.term(t)).collect(),
            intensional: self.intensional.contains(&a.predicate()),
        }
    }
}

fn term_vars(t: &CTerm, out: &mut Vec<usize>) {
    match t {
        CTerm::Var(i) => out.push(*i),
        CTerm::Const(_) => {}
        CTerm::Bin(_, l, r) => {
            term_vars(l, out);
            term_vars(r, out);
        }
        CTerm::Abs(x) => term_vars(x, out),
    }
}

/// Orders the body: comparisons as soon as their variables are bound,
/// positive atoms greedily (intensional and most-bound first, extensional
/// last), negative literals at the end.
fn order_body(lits: Vec<CLit>, nvars: usize) -> Vec<CLit> {
    let mut bound = vec![false; nvars];
    let mut rest = lits;
    let mut out = Vec::new();
    let ready = |t: &CTerm, bound: &[bool]| {
        let mut v = Vec::new();
        term_vars(t, &mut v);
        v.iter().all(|i| bound[*i])
    };
    while !rest.is_empty() {
        if let Some(i) = rest.iter().position(|l| matches!(l, CLit::Cmp(_, a, b) if ready(a, &bound) && ready(b, &bound))) {
            out.push(rest.remove(i));
            continue;
        }
        let best = rest
            .iter()
            .enumerate()
            .filter_map(|(i, l)| match l {
                CLit::Pos(_, a) => {
                    let complex_ready = a.args.iter().all(|t| matches!(t, CTerm::Var(_)) || ready(t, &bound));
                    if !complex_ready {
                        return None;
                    }
                    let nbound = a.args.iter().filter(|t| ready(t, &bound)).count();
                    let unbound = a.args.len() - nbound;
                    Some((i, (!a.intensional, unbound, std::cmp::Reverse(nbound))))
                }
                _ => None,
            })
            .min_by_key(|(_, key)| *key)
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                if let CLit::Pos(_, a) = &rest[i] {
                    for t in &a.args {
                        if let CTerm::Var(v) = t {
                            bound[*v] = true;
                        }
                    }
                }
                out.push(rest.remove(i));
            }
            None => {
                // Only negative literals and comparisons remain; safety makes
                // their variables bound.
                out.append(&mut rest);
            }
        }
    }
    out
}

struct Grounder {
    rules: Vec<CRule>,
    universe: Vec<Const>,
    possible: BTreeMap<Arc<str>, BTreeSet<Vec<Const>>>,
    tick_ms: u64,
}

struct Emit<'a> {
    out: &'a mut Vec<(Vec<Const>, GroundRule)>,
    build_rules: bool,
}

impl Grounder {
    fn is_possible(&self, pred: &Arc<str>, args: &[Const]) -> bool {
        self.possible.get(pred).is_some_and(|s| s.contains(args))
    }

    fn search(&self, r: &CRule, step: usize, s: &mut Subst, emit: &mut Emit<'_>) -> Result<(), LangError> {
        if step == r.body.len() {
            return self.finish(r, s, emit);
        }
        match &r.body[step] {
            CLit::Cmp(op, a, b) => {
                if let (Some(x), Some(y)) = (eval(a, s, r.line)?, eval(b, s, r.line)?) {
                    if compare(*op, &x, &y) {
                        self.search(r, step + 1, s, emit)?;
                    }
                }
                Ok(())
            }
            CLit::Neg(..) => self.search(r, step + 1, s, emit),
            CLit::Pos(_, a) if a.intensional => {
                let Some(set) = self.possible.get(&a.pred) else { return Ok(()) };
                for tuple in set.iter().filter(|t| t.len() == a.args.len()) {
                    let mut newly = Vec::new();
                    if self.unify(&a.args, tuple, s, &mut newly, r.line)? {
                        self.search(r, step + 1, s, emit)?;
                    }
                    for v in newly {
                        s[v] = None;
                    }
                }
                Ok(())
            }
            CLit::Pos(_, a) => {
                // Extensional: any instance may arrive, so unbound variables
                // range over the universe.
                let mut free: Vec<usize> = a
                    .args
                    .iter()
                    .filter_map(|t| match t {
                        CTerm::Var(v) if s[*v].is_none() => Some(*v),
                        _ => None,
                    })
                    .collect();
                free.sort_unstable();
                free.dedup();
                self.enumerate_free(r, step, &free, 0, s, emit)
            }
        }
    }

    fn enumerate_free(
        &self,
        r: &CRule,
        step: usize,
        free: &[usize],
        k: usize,
        s: &mut Subst,
        emit: &mut Emit<'_>,
    ) -> Result<(), LangError> {
        if k == free.len() {
            if let CLit::Pos(_, a) = &r.body[step] {
                for t in &a.args {
                    if eval(t, s, r.line)?.is_none() {
                        return Ok(());
                    }
                }
            }
            return self.search(r, step + 1, s, emit);
        }
        for c in &self.universe {
            s[free[k]] = Some(c.clone());
            self.enumerate_free(r, step, free, k + 1, s, emit)?;
        }
        s[free[k]] = None;
        Ok(())
    }

    fn unify(
        &self,
        args: &[CTerm],
        tuple: &[Const],
        s: &mut Subst,
        newly: &mut Vec<usize>,
        line: usize,
    ) -> Result<bool, LangError> {
        for (t, c) in args.iter().zip(tuple) {
            match t {
                CTerm::Var(v) if s[*v].is_none() => {
                    s[*v] = Some(c.clone());
                    newly.push(*v);
                }
                other => {
                    if eval(other, s, line)?.as_ref() != Some(c) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    fn ground_atom(a: &CAtom, s: &Subst, line: usize) -> Result<Option<Vec<Const>>, LangError> {
        let mut out = Vec::with_capacity(a.args.len());
        for t in &a.args {
            match eval(t, s, line)? {
                Some(c) => out.push(c),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }

    fn finish(&self, r: &CRule, s: &Subst, emit: &mut Emit<'_>) -> Result<(), LangError> {
        let Some(head_args) = Self::ground_atom(&r.head, s, r.line)? else { return Ok(()) };
        if !emit.build_rules {
            emit.out.push((head_args, placeholder_rule()));
            return Ok(());
        }
        let tv = |t: &TimeTerm| match t {
            TimeTerm::Const(c) => TimeRef::Abs(*c),
            TimeTerm::Now(k) => TimeRef::Now(*k),
            TimeTerm::Var(v, k) => {
                TimeRef::Var(r.time_vars.iter().position(|x| x == v).expect("time variable registered"), *k)
            }
        };
        let head_atom = Atom::from_parts(r.head.pred.clone(), head_args.clone());
        let head = match &r.head_pattern {
            HeadPattern::Plain(_) => GHead::Plain(head_atom),
            HeadPattern::At(t, _) => GHead::At(tv(t), head_atom),
        };
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for l in &r.body {
            let (b, a, positive) = match l {
                CLit::Pos(b, a) => (b, a, true),
                CLit::Neg(b, a) => (b, a, false),
                CLit::Cmp(..) => continue,
            };
            let Some(args) = Self::ground_atom(a, s, r.line)? else {
                if positive {
                    return Ok(());
                }
                continue;
            };
            if !positive && a.intensional && !self.is_possible(&a.pred, &args) {
                // `not p` over an underivable atom is always true.
                continue;
            }
            let atom = Atom::from_parts(a.pred.clone(), args);
            let w = |ws: &WindowSize| ws.resolve(self.tick_ms);
            let g = match b {
                BodyAtom::Plain(_) => GAtom::Plain(atom),
                BodyAtom::At(t, _) => GAtom::At(tv(t), atom),
                BodyAtom::WinAt(ws, t, _) => GAtom::WinAt(w(ws), tv(t), atom),
                BodyAtom::WinDiamond(ws, _) => GAtom::WinDiamond(w(ws), atom),
                BodyAtom::WinBox(ws, _) => GAtom::WinBox(w(ws), atom),
            };
            if positive {
                pos.push(g);
            } else {
                neg.push(g);
            }
        }
        emit.out.push((head_args, GroundRule { head, pos, neg, time_vars: r.time_vars.clone(), template: r.index }));
        Ok(())
    }

}

fn placeholder_rule() -> GroundRule {
    GroundRule { head: GHead::Plain(Atom::prop("_")), pos: Vec::new(), neg: Vec::new(), time_vars: Vec::new(), template: 0 }
}

fn expand_fact_args(args: &[Term], line: usize) -> Result<Vec<Vec<Const>>, LangError> {
    let mut out: Vec<Vec<Const>> = vec![Vec::new()];
    let empty = Subst::new();
    let mut comp = Compiler { vars: HashMap::new(), intensional: &BTreeSet::new() };
    for t in args {
        let values: Vec<Const> = match t {
            Term::Range(lo, hi) => {
                let lo = eval(&comp.term(lo), &empty, line)?;
                let hi = eval(&comp.term(hi), &empty, line)?;
                match (lo, hi) {
                    (Some(Const::Int(l)), Some(Const::Int(h))) => (l..=h).map(Const::Int).collect(),
                    _ => {
                        return Err(LangError::Declaration { line, msg: "range bounds must be integers".into() })
                    }
                }
            }
            other => match eval(&comp.term(other), &empty, line)? {
                Some(c) => vec![c],
                None => return Ok(Vec::new()),
            },
        };
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    Ok(out)
}

fn collect_consts(t: &Term, out: &mut BTreeSet<Const>, line: usize) -> Result<(), LangError> {
    let mut vars = BTreeSet::new();
    t.collect_vars(&mut vars);
    if !vars.is_empty() {
        if let Term::Bin(_, l, r) = t {
            collect_consts(l, out, line)?;
            collect_consts(r, out, line)?;
        }
        return Ok(());
    }
    if let Term::Range(..) = t {
        for v in expand_fact_args(std::slice::from_ref(t), line)? {
            out.extend(v);
        }
        return Ok(());
    }
    let mut comp = Compiler { vars: HashMap::new(), intensional: &BTreeSet::new() };
    if let Some(c) = eval(&comp.term(t), &Subst::new(), line)? {
        out.insert(c);
    }
    Ok(())
}

/// Normalizes and grounds a safe program.
pub fn ground(src: &ProgramSource, options: GroundOptions) -> Result<GroundProgram, LangError> {
    super::parser::check_program(src)?;
    let norm = normalize(src);
    let intensional = norm.intensional_predicates();
    let extensional = norm.extensional_predicates();

    let mut universe = BTreeSet::new();
    let mut facts: Vec<(usize, HeadPattern, Vec<Vec<Const>>)> = Vec::new();
    let mut rules = Vec::new();
    for (index, r) in norm.rules.iter().enumerate() {
        let head = r.head.as_ref().expect("constraints were rewritten");
        for t in &head.atom().args {
            collect_consts(t, &mut universe, r.line)?;
        }
        for l in &r.body {
            if let Literal::Pos(b) | Literal::Neg(b) = l {
                for t in &b.atom().args {
                    collect_consts(t, &mut universe, r.line)?;
                }
            }
        }
        if r.body.is_empty() {
            facts.push((index, head.clone(), expand_fact_args(&head.atom().args, r.line)?));
            continue;
        }
        let mut comp = Compiler { vars: HashMap::new(), intensional: &intensional };
        let head_c = comp.atom(head.atom());
        let mut time_vars: Vec<Arc<str>> = Vec::new();
        let mut note_time = |t: Option<&TimeTerm>| {
            if let Some(TimeTerm::Var(v, _)) = t {
                if !time_vars.contains(v) {
                    time_vars.push(v.clone());
                }
            }
        };
        let mut body = Vec::new();
        for l in &r.body {
            match l {
                Literal::Pos(b) => {
                    note_time(b.time());
                    body.push(CLit::Pos(b.clone(), comp.atom(b.atom())));
                }
                Literal::Neg(b) => {
                    note_time(b.time());
                    body.push(CLit::Neg(b.clone(), comp.atom(b.atom())));
                }
                Literal::Cmp(op, a, b) => body.push(CLit::Cmp(*op, comp.term(a), comp.term(b))),
                Literal::NotNot(_) => unreachable!("double negation was expanded"),
            }
        }
        if let HeadPattern::At(t, _) = head {
            note_time(Some(t));
        }
        let nvars = comp.vars.len();
        rules.push(CRule {
            index,
            line: r.line,
            head: head_c,
            head_pattern: head.clone(),
            body: order_body(body, nvars),
            nvars,
            time_vars,
        });
    }

    let mut g = Grounder { rules, universe: universe.into_iter().collect(), possible: BTreeMap::new(), tick_ms: options.tick_ms.max(1) };
    for (_, h, instances) in &facts {
        g.possible.entry(h.atom().pred.clone()).or_default().extend(instances.iter().cloned());
    }

    // Fixpoint over derivable intensional instances.
    loop {
        let mut changed = false;
        for i in 0..g.rules.len() {
            let mut out = Vec::new();
            let r = &g.rules[i];
            let mut s = vec![None; r.nvars];
            g.search(r, 0, &mut s, &mut Emit { out: &mut out, build_rules: false })?;
            let pred = r.head.pred.clone();
            let set = g.possible.entry(pred).or_default();
            for (args, _) in out {
                changed |= set.insert(args);
            }
        }
        if !changed {
            break;
        }
    }

    let mut ground_rules = Vec::new();
    let mut seen = HashSet::new();
    for (index, h, instances) in &facts {
        for args in instances {
            let atom = Atom::from_parts(h.atom().pred.clone(), args.clone());
            let head = match h {
                HeadPattern::Plain(_) => GHead::Plain(atom),
                HeadPattern::At(TimeTerm::Const(t), _) => GHead::At(TimeRef::Abs(*t), atom),
                HeadPattern::At(TimeTerm::Now(k), _) => GHead::At(TimeRef::Now(*k), atom),
                HeadPattern::At(TimeTerm::Var(..), _) => unreachable!("safety forbids unbound time variables"),
            };
            let rule = GroundRule { head, pos: Vec::new(), neg: Vec::new(), time_vars: Vec::new(), template: *index };
            if seen.insert(rule.clone()) {
                ground_rules.push(rule);
            }
        }
    }
    for r in &g.rules {
        let mut out = Vec::new();
        let mut s = vec![None; r.nvars];
        g.search(r, 0, &mut s, &mut Emit { out: &mut out, build_rules: true })?;
        for (_, rule) in out {
            if seen.insert(rule.clone()) {
                ground_rules.push(rule);
            }
        }
    }
    ground_rules.sort_by_key(|r| r.template);

    Ok(GroundProgram { rules: ground_rules, templates: norm.rules, intensional, extensional, options })
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use crate::stream_model::Interval;

    fn g(text: &str) -> GroundProgram {
        ground(&parse(text).unwrap(), GroundOptions::default()).unwrap()
    }

    fn heads(p: &GroundProgram, pred: &str) -> Vec<String> {
        p.rules.iter().filter(|r| r.head.atom().name() == pred).map(|r| r.head.atom().to_string()).collect()
    }

    #[test]
    fn range_facts_and_simple_join() {
        let p = g("d(1..2). p(X) :- d(X).");
        let rules: Vec<String> =
            p.instantiate(0, Interval::point(0)).rules().iter().map(ToString::to_string).collect();
        assert_eq!(rules, vec!["d(1).", "d(2).", "p(1) :- d(1).", "p(2) :- d(2)."]);
    }

    /// Counts substitutions satisfying the constraint body by direct enumeration.
    fn brute_force_column_pairs(n: i64) -> usize {
        let mut count = 0;
        for _y in 1..=n {
            for x1 in 1..=n {
                for x2 in 1..=n {
                    if x1 < x2 {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn queens_column_constraint_count() {
        let p = g("d(1..4). q(X,Y) :- d(X), d(Y), not not q(X,Y).\n:- q(X1,Y), q(X2,Y), X1 < X2.");
        let fails = p.rules.iter().filter(|r| r.head.atom().name() == "fail1").count();
        assert_eq!(fails, brute_force_column_pairs(4));
        assert_eq!(fails, 24);
    }

    #[test]
    fn builtin_filters_instances() {
        let p = g("value(5). value(15). value(25).\nhigh(V) :- value(V), alpha(V) at T [3 sec], 18 <= V.");
        assert_eq!(heads(&p, "high"), vec!["high(25)"]);
        let r = p.rules.iter().find(|r| r.head.atom().name() == "high").unwrap();
        assert_eq!(r.pos[1], GAtom::WinAt(Window::time(3), TimeRef::Var(0, 0), Atom::new("alpha", vec![Const::Int(25)])));
        assert!(p.extensional.contains(&Predicate::new("alpha", 1)));
    }

    #[test]
    fn extensional_variables_range_over_universe() {
        let p = g("d(1..3). q(1,Y) :- send(Y) in [1].");
        assert_eq!(heads(&p, "q"), vec!["q(1,1)", "q(1,2)", "q(1,3)"]);
    }

    #[test]
    fn underivable_negative_literals_are_dropped() {
        let p = g("a :- not b. b :- c, not d. c :- e.");
        // c and b are derivable only via extensional e; b's literal stays.
        let a = p.rules.iter().find(|r| r.head.atom().name() == "a").unwrap();
        assert_eq!(a.neg.len(), 1);
        let p = g("a :- not b. b :- x, b.");
        let a = p.rules.iter().find(|r| r.head.atom().name() == "a").unwrap();
        assert!(a.neg.is_empty());
    }

    #[test]
    fn heads_are_intensional() {
        let p = g("d(1..3). p(X) :- d(X), e(X). r :- p(2), not e(1).");
        assert!(p.rules.iter().all(|r| p.is_intensional(r.head.atom())));
    }

    #[test]
    fn arithmetic_overflow_is_reported() {
        let src = parse("d(9223372036854775807). p(X) :- d(X), d(Y), X + Y > 0.").unwrap();
        assert_eq!(ground(&src, GroundOptions::default()).unwrap_err(), LangError::Overflow { line: 1 });
    }

    #[test]
    fn time_variables_expand_within_window() {
        let p = g("x at T+1 :- y at T [2].");
        let rules = p.instantiate(10, Interval::new(0, 20).unwrap());
        let text: Vec<String> = rules.rules().iter().map(ToString::to_string).collect();
        assert_eq!(text, vec!["x at 9 :- y at 8 [2].", "x at 10 :- y at 9 [2].", "x at 11 :- y at 10 [2]."]);
    }

    #[test]
    fn now_relative_times() {
        let p = g("x at now+2 :- y. z :- w at now-1.");
        let rules = p.instantiate(0, Interval::new(0, 5).unwrap());
        let text: Vec<String> = rules.rules().iter().map(ToString::to_string).collect();
        assert_eq!(text, vec!["x at 2 :- y."]);
    }
}
