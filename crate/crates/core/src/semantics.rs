//! Window functions, streaming-atom satisfaction and answer streams over
//! interval streams.
//!
//! Everything here works directly on [`IntervalStream`] values and is meant
//! to be obviously correct rather than fast: the brute-force enumerator is
//! the reference the distributed runtime is checked against.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::stream_model::{Atom, Interval, IntervalStream, Predicate, TimePoint, Timeline};

/// Default number of candidate (atom, time point) pairs the enumerator accepts.
pub const DEFAULT_BUDGET: usize = 20;

/// Largest intensional point set `is_answer_stream` will check for minimality.
const MINIMALITY_LIMIT: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("evaluation time outside timeline: {t} not in {timeline}")]
    OutsideTimeline { t: TimePoint, timeline: Timeline },
    #[error("tuple window size must be at least 1")]
    EmptyTupleWindow,
    #[error("candidate is not an interpretation stream for the data: {0}")]
    NotInterpretation(String),
    #[error("instance too large for enumeration: {pairs} candidate pairs, budget {budget}")]
    TooLarge { pairs: usize, budget: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowKind {
    Time,
    Tuple,
}

/// A sliding window: `size` ticks for time windows, occurrences for tuple windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Window {
    pub kind: WindowKind,
    pub size: u64,
}

impl Window {
    pub fn time(size: u64) -> Self {
        Window { kind: WindowKind::Time, size }
    }

    pub fn tuple(size: u64) -> Self {
        Window { kind: WindowKind::Tuple, size }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            WindowKind::Time => write!(f, "[{}]", self.size),
            WindowKind::Tuple => write!(f, "[{} #]", self.size),
        }
    }
}

/// `a | @t a | ⊞w @t a | ⊞w ◇a | ⊞w □a`
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StreamingAtom {
    Plain(Atom),
    At(TimePoint, Atom),
    WinAt(Window, TimePoint, Atom),
    WinDiamond(Window, Atom),
    WinBox(Window, Atom),
}

impl StreamingAtom {
    pub fn atom(&self) -> &Atom {
        match self {
            StreamingAtom::Plain(a)
            | StreamingAtom::At(_, a)
            | StreamingAtom::WinAt(_, _, a)
            | StreamingAtom::WinDiamond(_, a)
            | StreamingAtom::WinBox(_, a) => a,
        }
    }

    pub fn window(&self) -> Option<Window> {
        match self {
            StreamingAtom::WinAt(w, _, _) | StreamingAtom::WinDiamond(w, _) | StreamingAtom::WinBox(w, _) => Some(*w),
            _ => None,
        }
    }
}

impl fmt::Display for StreamingAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamingAtom::Plain(a) => write!(f, "{a}"),
            StreamingAtom::At(t, a) => write!(f, "{a} at {t}"),
            StreamingAtom::WinAt(w, t, a) => write!(f, "{a} at {t} {w}"),
            StreamingAtom::WinDiamond(w, a) => write!(f, "{a} in {w}"),
            StreamingAtom::WinBox(w, a) => write!(f, "{a} always {w}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Head {
    Plain(Atom),
    At(TimePoint, Atom),
}

impl Head {
    pub fn atom(&self) -> &Atom {
        match self {
            Head::Plain(a) | Head::At(_, a) => a,
        }
    }

    /// The time point the head refers to when evaluated at `t`.
    pub fn time(&self, t: TimePoint) -> TimePoint {
        match self {
            Head::Plain(_) => t,
            Head::At(t2, _) => *t2,
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Head::Plain(a) => write!(f, "{a}"),
            Head::At(t, a) => write!(f, "{a} at {t}"),
        }
    }
}

/// A fully ground plain LARS rule `head ← pos, not neg`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rule {
    pub head: Head,
    pub pos: Vec<StreamingAtom>,
    pub neg: Vec<StreamingAtom>,
}

impl Rule {
    pub fn new(head: Head, pos: Vec<StreamingAtom>, neg: Vec<StreamingAtom>) -> Self {
        Rule { head, pos, neg }
    }

    pub fn fact(atom: Atom) -> Self {
        Rule { head: Head::Plain(atom), pos: Vec::new(), neg: Vec::new() }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        let body: Vec<String> = self
            .pos
            .iter()
            .map(ToString::to_string)
            .chain(self.neg.iter().map(|b| format!("not {b}")))
            .collect();
        if !body.is_empty() {
            write!(f, " :- {}", body.join(", "))?;
        }
        f.write_str(".")
    }
}

/// A ground program with its intensional predicates (every head predicate,
/// plus any declared ones).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    rules: Vec<Rule>,
    intensional: BTreeSet<Predicate>,
}

impl Program {
    pub fn new(rules: Vec<Rule>) -> Self {
        let intensional = rules.iter().map(|r| r.head.atom().predicate()).collect();
        Program { rules, intensional }
    }

    pub fn with_intensional(rules: Vec<Rule>, extra: impl IntoIterator<Item = Predicate>) -> Self {
        let mut p = Program::new(rules);
        p.intensional.extend(extra);
        p
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn intensional(&self) -> &BTreeSet<Predicate> {
        &self.intensional
    }

    pub fn is_intensional(&self, atom: &Atom) -> bool {
        self.intensional.contains(&atom.predicate())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn check_time(s: &IntervalStream, t: TimePoint) -> Result<(), SemanticsError> {
    if s.timeline().contains(t) {
        Ok(())
    } else {
        Err(SemanticsError::OutsideTimeline { t, timeline: s.timeline() })
    }
}

/// Timeline `[max(l, t−n), t]` of a time-based window.
pub fn time_window_bounds(timeline: Timeline, t: TimePoint, n: u64) -> Interval {
    let lo = timeline.lo().max(t.saturating_sub(n));
    Interval::new(lo, t).expect("window start never exceeds evaluation time")
}

/// Timeline of the shortest `[t', t]` holding at least `n` (atom, time point)
/// occurrences of the canonical stream; `[l, t]` when there are fewer.
pub fn tuple_window_bounds(s: &IntervalStream, t: TimePoint, n: u64) -> Interval {
    let canon = s.canonicalize();
    let lo_bound = s.timeline().lo();
    let mut count = 0u64;
    let mut start = t;
    loop {
        count += canon.iter().filter(|(_, v)| v.iter().any(|i| i.contains(start))).count() as u64;
        if count >= n || start == lo_bound {
            break;
        }
        start -= 1;
    }
    Interval::new(start, t).expect("window start never exceeds evaluation time")
}

pub fn time_window(s: &IntervalStream, t: TimePoint, n: u64) -> Result<IntervalStream, SemanticsError> {
    check_time(s, t)?;
    Ok(s.clip(time_window_bounds(s.timeline(), t, n)))
}

pub fn tuple_window(s: &IntervalStream, t: TimePoint, n: u64) -> Result<IntervalStream, SemanticsError> {
    check_time(s, t)?;
    if n == 0 {
        return Err(SemanticsError::EmptyTupleWindow);
    }
    Ok(s.clip(tuple_window_bounds(s, t, n)))
}

pub fn apply_window(s: &IntervalStream, t: TimePoint, w: Window) -> Result<IntervalStream, SemanticsError> {
    match w.kind {
        WindowKind::Time => time_window(s, t, w.size),
        WindowKind::Tuple => tuple_window(s, t, w.size),
    }
}

fn window_bounds(s: &IntervalStream, t: TimePoint, w: Window) -> Result<Interval, SemanticsError> {
    match w.kind {
        WindowKind::Time => Ok(time_window_bounds(s.timeline(), t, w.size)),
        WindowKind::Tuple if w.size == 0 => Err(SemanticsError::EmptyTupleWindow),
        WindowKind::Tuple => Ok(tuple_window_bounds(s, t, w.size)),
    }
}

/// `□a` over the stream's whole timeline: `⋃ eta(a) = T`.
pub fn everywhere(s: &IntervalStream, a: &Atom) -> bool {
    let canon = merge_points(s.intervals(a));
    canon.iter().any(|i| i.covers(&s.timeline()))
}

/// `◇a` over the stream's whole timeline: `⋃ eta(a) ∩ T ≠ ∅`.
pub fn somewhere(s: &IntervalStream, a: &Atom) -> bool {
    s.intervals(a).iter().any(|i| i.intersect(&s.timeline()).is_some())
}

fn merge_points(v: &[Interval]) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    let mut sorted = v.to_vec();
    sorted.sort();
    for i in sorted {
        match out.last_mut() {
            Some(last) if i.lo() <= last.hi() + 1 => {
                *last = Interval::new(last.lo(), last.hi().max(i.hi())).unwrap();
            }
            _ => out.push(i),
        }
    }
    out
}

fn covered(s: &IntervalStream, a: &Atom, range: Interval) -> bool {
    merge_points(s.intervals(a)).iter().any(|i| i.covers(&range))
}

fn overlaps(s: &IntervalStream, a: &Atom, range: Interval) -> bool {
    s.intervals(a).iter().any(|i| i.intersect(&range).is_some())
}

/// Whether `phi` holds in `s` at `t`.
pub fn holds(s: &IntervalStream, t: TimePoint, phi: &StreamingAtom) -> Result<bool, SemanticsError> {
    check_time(s, t)?;
    Ok(match phi {
        StreamingAtom::Plain(a) => s.occurs_at(a, t),
        StreamingAtom::At(t2, a) => s.timeline().contains(*t2) && s.occurs_at(a, *t2),
        StreamingAtom::WinAt(w, t2, a) => {
            let win = window_bounds(s, t, *w)?;
            win.contains(*t2) && s.occurs_at(a, *t2)
        }
        StreamingAtom::WinDiamond(w, a) => overlaps(s, a, window_bounds(s, t, *w)?),
        StreamingAtom::WinBox(w, a) => covered(s, a, window_bounds(s, t, *w)?),
    })
}

fn head_holds(s: &IntervalStream, t: TimePoint, head: &Head) -> bool {
    match head {
        Head::Plain(a) => s.occurs_at(a, t),
        Head::At(t2, a) => s.timeline().contains(*t2) && s.occurs_at(a, *t2),
    }
}

pub fn body_holds(s: &IntervalStream, t: TimePoint, rule: &Rule) -> Result<bool, SemanticsError> {
    for b in &rule.pos {
        if !holds(s, t, b)? {
            return Ok(false);
        }
    }
    for b in &rule.neg {
        if holds(s, t, b)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn rule_holds(s: &IntervalStream, t: TimePoint, rule: &Rule) -> Result<bool, SemanticsError> {
    Ok(!body_holds(s, t, rule)? || head_holds(s, t, &rule.head))
}

pub fn is_model(s: &IntervalStream, t: TimePoint, program: &Program) -> Result<bool, SemanticsError> {
    check_time(s, t)?;
    for r in &program.rules {
        if !rule_holds(s, t, r)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The rules of `program` whose bodies hold in `s` at `t`.
pub fn reduct(program: &Program, s: &IntervalStream, t: TimePoint) -> Result<Program, SemanticsError> {
    let mut rules = Vec::new();
    for r in &program.rules {
        if body_holds(s, t, r)? {
            rules.push(r.clone());
        }
    }
    Ok(Program { rules, intensional: program.intensional.clone() })
}

/// Intensional (atom, time point) pairs a rule head can make true at `t`,
/// sorted by atom then time.
pub fn candidate_pairs(program: &Program, timeline: Timeline, t: TimePoint) -> Vec<(Atom, TimePoint)> {
    let set: BTreeSet<(Atom, TimePoint)> = program
        .rules
        .iter()
        .map(|r| (r.head.atom().clone(), r.head.time(t)))
        .filter(|(_, tp)| timeline.contains(*tp))
        .collect();
    set.into_iter().collect()
}

/// Total order on answers given as sorted (atom, time) lists: at the first
/// pair on which the two sets disagree, the set containing it comes first.
pub fn answer_order(a: &[(Atom, TimePoint)], b: &[(Atom, TimePoint)]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    // The longer list holds the first disagreeing pair.
    b.len().cmp(&a.len())
}

/// Sorted intensional point occurrences of a stream.
pub fn intensional_points(s: &IntervalStream, program: &Program) -> Vec<(Atom, TimePoint)> {
    let set: BTreeSet<(Atom, TimePoint)> = s
        .iter()
        .filter(|(a, _)| program.is_intensional(a))
        .flat_map(|(a, v)| v.iter().flat_map(|i| i.points()).map(move |t| (a.clone(), t)))
        .collect();
    set.into_iter().collect()
}

fn with_points(base: &IntervalStream, points: &[(Atom, TimePoint)], mask: u64) -> IntervalStream {
    let mut s = base.clone();
    for (i, (a, t)) in points.iter().enumerate() {
        if mask & (1 << i) != 0 {
            s.insert(a.clone(), Interval::point(*t)).expect("candidate points lie in the timeline");
        }
    }
    s
}

fn extensional_part(s: &IntervalStream, program: &Program) -> IntervalStream {
    s.filter_atoms(|a| !program.is_intensional(a))
}

/// True iff some proper subset of `points` (on top of `base`) models `reduct`.
fn has_smaller_model(
    base: &IntervalStream,
    points: &[(Atom, TimePoint)],
    mask: u64,
    reduct: &Program,
    t: TimePoint,
) -> Result<bool, SemanticsError> {
    // Proper submasks of `mask`, descending.
    let mut sub = mask;
    while sub != 0 {
        sub = (sub - 1) & mask;
        if is_model(&with_points(base, points, sub), t, reduct)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Checks the answer-stream conditions: `candidate` models the program at `t`
/// and no strictly smaller interpretation substream models the reduct.
pub fn is_answer_stream(
    data: &IntervalStream,
    candidate: &IntervalStream,
    program: &Program,
    t: TimePoint,
) -> Result<bool, SemanticsError> {
    if data.timeline() != candidate.timeline() {
        return Err(SemanticsError::NotInterpretation(format!(
            "timeline {} differs from data timeline {}",
            candidate.timeline(),
            data.timeline()
        )));
    }
    let data_ext = extensional_part(data, program);
    if !data_ext.equivalent(&extensional_part(candidate, program)) {
        return Err(SemanticsError::NotInterpretation("extensional atoms differ from the data".into()));
    }
    check_time(candidate, t)?;
    if !is_model(candidate, t, program)? {
        return Ok(false);
    }
    let points = intensional_points(candidate, program);
    if points.len() > MINIMALITY_LIMIT {
        return Err(SemanticsError::TooLarge { pairs: points.len(), budget: MINIMALITY_LIMIT });
    }
    let reduct = reduct(program, candidate, t)?;
    let full = if points.is_empty() { 0 } else { (1u64 << points.len()) - 1 };
    Ok(!has_smaller_model(&data_ext, &points, full, &reduct, t)?)
}

/// All answer streams of `program` for `data` at `t`, in canonical form and
/// ordered by [`answer_order`].
pub fn enumerate_answer_streams(
    data: &IntervalStream,
    program: &Program,
    t: TimePoint,
    budget: usize,
) -> Result<Vec<IntervalStream>, SemanticsError> {
    check_time(data, t)?;
    let pairs = candidate_pairs(program, data.timeline(), t);
    if pairs.len() > budget || pairs.len() >= 63 {
        return Err(SemanticsError::TooLarge { pairs: pairs.len(), budget });
    }
    let base = extensional_part(data, program);
    let mut found: Vec<Vec<(Atom, TimePoint)>> = Vec::new();
    for mask in 0..(1u64 << pairs.len()) {
        let candidate = with_points(&base, &pairs, mask);
        if !is_model(&candidate, t, program)? {
            continue;
        }
        let reduct = reduct(program, &candidate, t)?;
        if has_smaller_model(&base, &pairs, mask, &reduct, t)? {
            continue;
        }
        found.push(pairs.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, p)| p.clone()).collect());
    }
    found.sort_by(|a, b| answer_order(a, b));
    Ok(found
        .iter()
        .map(|pts| {
            let mut s = base.clone();
            for (a, tp) in pts {
                s.insert(a.clone(), Interval::point(*tp)).expect("pairs lie in the timeline");
            }
            s.canonicalize()
        })
        .collect())
}
