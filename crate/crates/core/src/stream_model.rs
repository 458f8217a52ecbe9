//! Interval streams: a timeline plus, per ground atom, a set of closed
//! intervals recording occurrence observations.
//!
//! Streams are accepted in any shape (overlapping or adjacent intervals) and
//! brought into canonical form on demand. Two canonical streams are equivalent
//! exactly when they are structurally equal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Logical time, in ticks.
pub type TimePoint = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StreamError {
    #[error("interval [{0},{1}] is empty (lo > hi)")]
    EmptyInterval(TimePoint, TimePoint),
    #[error("interval {interval} is not within timeline {timeline}")]
    OutsideTimeline { interval: Interval, timeline: Interval },
    #[error("invalid atom `{0}`: {1}")]
    AtomSyntax(String, &'static str),
}

/// A nonempty closed interval `[lo, hi]` of time points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    lo: TimePoint,
    hi: TimePoint,
}

/// Timelines are plain closed intervals.
pub type Timeline = Interval;

impl Interval {
    pub fn new(lo: TimePoint, hi: TimePoint) -> Result<Self, StreamError> {
        if lo > hi {
            return Err(StreamError::EmptyInterval(lo, hi));
        }
        Ok(Interval { lo, hi })
    }

    pub fn point(t: TimePoint) -> Self {
        Interval { lo: t, hi: t }
    }

    pub fn lo(&self) -> TimePoint {
        self.lo
    }

    pub fn hi(&self) -> TimePoint {
        self.hi
    }

    /// Number of time points covered.
    pub fn span(&self) -> u64 {
        self.hi - self.lo + 1
    }

    pub fn contains(&self, t: TimePoint) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn covers(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn points(&self) -> impl Iterator<Item = TimePoint> {
        self.lo..=self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

/// A constant argument of a ground atom. Integers order before symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Int(i64),
    Sym(Arc<str>),
}

impl Const {
    pub fn sym(s: &str) -> Self {
        Const::Sym(Arc::from(s))
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Const::Int(i) => Some(*i),
            Const::Sym(_) => None,
        }
    }
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Int(i) => write!(f, "{i}"),
            Const::Sym(s) => f.write_str(s),
        }
    }
}

/// Predicate signature `name/arity`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: Arc<str>,
    pub arity: usize,
}

impl Predicate {
    pub fn new(name: &str, arity: usize) -> Self {
        Predicate { name: Arc::from(name), arity }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

/// A ground atom `pred(c1,...,cn)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pred: Arc<str>,
    args: Arc<[Const]>,
}

impl Atom {
    pub fn new(pred: &str, args: Vec<Const>) -> Self {
        Atom { pred: Arc::from(pred), args: args.into() }
    }

    pub fn from_parts(pred: Arc<str>, args: Vec<Const>) -> Self {
        Atom { pred, args: args.into() }
    }

    pub fn prop(pred: &str) -> Self {
        Atom::new(pred, Vec::new())
    }

    pub fn name(&self) -> &str {
        &self.pred
    }

    pub fn name_arc(&self) -> &Arc<str> {
        &self.pred
    }

    pub fn args(&self) -> &[Const] {
        &self.args
    }

    pub fn predicate(&self) -> Predicate {
        Predicate { name: self.pred.clone(), arity: self.args.len() }
    }

    pub fn has_predicate(&self, p: &Predicate) -> bool {
        self.args.len() == p.arity && *self.pred == *p.name
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.pred
            .cmp(&other.pred)
            .then_with(|| self.args.len().cmp(&other.args.len()))
            .then_with(|| self.args.cmp(&other.args))
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_lowercase() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl FromStr for Atom {
    type Err = StreamError;

    /// Parses the textual form produced by `Display`, e.g. `alpha(25)` or `high`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let err = |why| StreamError::AtomSyntax(text.to_string(), why);
        let s = text.trim();
        let (name, rest) = match s.find('(') {
            Some(i) => (&s[..i], Some(&s[i..])),
            None => (s, None),
        };
        let mut chars = name.chars();
        match chars.next() {
            Some(c) if is_ident_start(c) => {}
            _ => return Err(err("predicate must start with a lowercase letter")),
        }
        if !chars.all(is_ident_char) {
            return Err(err("invalid character in predicate name"));
        }
        let Some(rest) = rest else {
            return Ok(Atom::prop(name));
        };
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| err("unbalanced parentheses"))?;
        let mut args = Vec::new();
        for raw in inner.split(',') {
            let a = raw.trim();
            if a.is_empty() {
                return Err(err("empty argument"));
            }
            if let Ok(i) = a.parse::<i64>() {
                args.push(Const::Int(i));
            } else if a.chars().next().is_some_and(is_ident_start) && a.chars().all(is_ident_char) {
                args.push(Const::sym(a));
            } else {
                return Err(err("arguments must be integers or lowercase symbols"));
            }
        }
        Ok(Atom::new(name, args))
    }
}

/// An interval stream `(T, eta)`.
///
/// Intervals per atom are kept ordered by `lo`; they may overlap or touch
/// until [`IntervalStream::canonicalize`] is called.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalStream {
    timeline: Timeline,
    eta: BTreeMap<Atom, Vec<Interval>>,
}

impl IntervalStream {
    pub fn new(timeline: Timeline) -> Self {
        IntervalStream { timeline, eta: BTreeMap::new() }
    }

    pub fn timeline(&self) -> Timeline {
        self.timeline
    }

    /// Records an observation of `atom` over `interval`.
    pub fn insert(&mut self, atom: Atom, interval: Interval) -> Result<(), StreamError> {
        if !self.timeline.covers(&interval) {
            return Err(StreamError::OutsideTimeline { interval, timeline: self.timeline });
        }
        let list = self.eta.entry(atom).or_default();
        let pos = list.partition_point(|i| i <= &interval);
        list.insert(pos, interval);
        Ok(())
    }

    pub fn with(mut self, atom: Atom, lo: TimePoint, hi: TimePoint) -> Result<Self, StreamError> {
        self.insert(atom, Interval::new(lo, hi)?)?;
        Ok(self)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.eta.keys()
    }

    pub fn intervals(&self, atom: &Atom) -> &[Interval] {
        self.eta.get(atom).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, &[Interval])> {
        self.eta.iter().map(|(a, v)| (a, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.eta.values().all(Vec::is_empty)
    }

    /// `t ∈ ⋃ eta(atom)`.
    pub fn occurs_at(&self, atom: &Atom, t: TimePoint) -> bool {
        self.intervals(atom).iter().any(|i| i.contains(t))
    }

    /// The point set `⋃ eta(atom)`.
    pub fn points(&self, atom: &Atom) -> BTreeSet<TimePoint> {
        self.intervals(atom).iter().flat_map(Interval::points).collect()
    }

    /// Unique equivalent stream whose intervals per atom are pairwise disjoint
    /// and non-adjacent. Atoms without intervals are dropped.
    pub fn canonicalize(&self) -> IntervalStream {
        let eta = self
            .eta
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(a, v)| (a.clone(), merge_sorted(v)))
            .collect();
        IntervalStream { timeline: self.timeline, eta }
    }

    pub fn is_canonical(&self) -> bool {
        self.eta.values().all(|v| {
            !v.is_empty() && v.windows(2).all(|w| w[0].hi.saturating_add(1) < w[1].lo)
        })
    }

    /// Same timeline and, for every atom, the same covered point set.
    pub fn equivalent(&self, other: &IntervalStream) -> bool {
        self.timeline == other.timeline && self.canonicalize().eta == other.canonicalize().eta
    }

    /// Every interval of every atom in `self` lies within a single interval of
    /// that atom in `sup`, and the timeline of `self` is within `sup`'s.
    pub fn is_substream_of(&self, sup: &IntervalStream) -> bool {
        sup.timeline.covers(&self.timeline)
            && self.eta.iter().all(|(a, v)| {
                let outer = sup.intervals(a);
                v.iter().all(|i| outer.iter().any(|o| o.covers(i)))
            })
    }

    /// Restricts the stream to `timeline`, clipping intervals and dropping those
    /// that fall outside.
    pub fn clip(&self, timeline: Timeline) -> IntervalStream {
        let eta = self
            .eta
            .iter()
            .filter_map(|(a, v)| {
                let clipped: Vec<Interval> = v.iter().filter_map(|i| i.intersect(&timeline)).collect();
                (!clipped.is_empty()).then(|| (a.clone(), clipped))
            })
            .collect();
        IntervalStream { timeline, eta }
    }

    /// Keeps only atoms accepted by `keep`.
    pub fn filter_atoms(&self, mut keep: impl FnMut(&Atom) -> bool) -> IntervalStream {
        let eta = self.eta.iter().filter(|(a, _)| keep(a)).map(|(a, v)| (a.clone(), v.clone())).collect();
        IntervalStream { timeline: self.timeline, eta }
    }

    /// Adds all observations of `other`; timelines must agree.
    pub fn merge(&mut self, other: &IntervalStream) -> Result<(), StreamError> {
        for (a, v) in &other.eta {
            for i in v {
                self.insert(a.clone(), *i)?;
            }
        }
        Ok(())
    }

    /// The LARS stream with `nu(t) = { a | t ∈ ⋃ eta(a) }`.
    pub fn to_point_stream(&self) -> PointStream {
        let mut p = PointStream::new(self.timeline);
        for (a, v) in &self.eta {
            for t in v.iter().flat_map(Interval::points) {
                p.nu.entry(t).or_default().insert(a.clone());
            }
        }
        p
    }

    /// `I(p)`: one point interval per occurrence, not merged.
    pub fn from_point_stream(p: &PointStream) -> IntervalStream {
        let mut eta: BTreeMap<Atom, Vec<Interval>> = BTreeMap::new();
        for (t, atoms) in &p.nu {
            for a in atoms {
                eta.entry(a.clone()).or_default().push(Interval::point(*t));
            }
        }
        IntervalStream { timeline: p.timeline, eta }
    }
}

fn merge_sorted(v: &[Interval]) -> Vec<Interval> {
    let mut sorted = v.to_vec();
    sorted.sort();
    let mut out: Vec<Interval> = Vec::with_capacity(sorted.len());
    for i in sorted {
        match out.last_mut() {
            Some(last) if i.lo <= last.hi.saturating_add(1) => last.hi = last.hi.max(i.hi),
            _ => out.push(i),
        }
    }
    out
}

/// A LARS stream `(T, nu)`: the set of atoms holding at each time point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointStream {
    timeline: Timeline,
    nu: BTreeMap<TimePoint, BTreeSet<Atom>>,
}

impl PointStream {
    pub fn new(timeline: Timeline) -> Self {
        PointStream { timeline, nu: BTreeMap::new() }
    }

    pub fn timeline(&self) -> Timeline {
        self.timeline
    }

    pub fn insert(&mut self, t: TimePoint, atom: Atom) -> Result<(), StreamError> {
        if !self.timeline.contains(t) {
            return Err(StreamError::OutsideTimeline {
                interval: Interval::point(t),
                timeline: self.timeline,
            });
        }
        self.nu.entry(t).or_default().insert(atom);
        Ok(())
    }

    /// Atoms at `t`; empty outside the timeline.
    pub fn at(&self, t: TimePoint) -> BTreeSet<Atom> {
        self.nu.get(&t).cloned().unwrap_or_default()
    }

    pub fn contains(&self, t: TimePoint, atom: &Atom) -> bool {
        self.nu.get(&t).is_some_and(|s| s.contains(atom))
    }

    pub fn iter(&self) -> impl Iterator<Item = (TimePoint, &BTreeSet<Atom>)> {
        self.nu.iter().filter(|(_, s)| !s.is_empty()).map(|(t, s)| (*t, s))
    }
}

// JSON form: {"timeline":[i,j],"atoms":{"pred(a,b)":[[lo,hi],...]}}
impl Serialize for Atom {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Atom {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct StreamJson {
    timeline: (TimePoint, TimePoint),
    atoms: BTreeMap<String, Vec<(TimePoint, TimePoint)>>,
}

impl Serialize for IntervalStream {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        StreamJson {
            timeline: (self.timeline.lo, self.timeline.hi),
            atoms: self
                .eta
                .iter()
                .map(|(a, v)| (a.to_string(), v.iter().map(|i| (i.lo, i.hi)).collect()))
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntervalStream {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = StreamJson::deserialize(deserializer)?;
        let timeline = Interval::new(raw.timeline.0, raw.timeline.1).map_err(D::Error::custom)?;
        let mut s = IntervalStream::new(timeline);
        for (text, ivs) in raw.atoms {
            let atom: Atom = text.parse().map_err(D::Error::custom)?;
            for (lo, hi) in ivs {
                let iv = Interval::new(lo, hi).map_err(D::Error::custom)?;
                s.insert(atom.clone(), iv).map_err(D::Error::custom)?;
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(name: &str) -> Atom {
        Atom::prop(name)
    }

    fn iv(lo: u64, hi: u64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    /// Independent oracle: expand to point sets, then re-chunk maximal runs.
    fn oracle_canonical(s: &IntervalStream) -> BTreeMap<Atom, Vec<(u64, u64)>> {
        let mut out = BTreeMap::new();
        for atom in s.atoms() {
            let pts = s.points(atom);
            let mut runs: Vec<(u64, u64)> = Vec::new();
            for t in pts {
                match runs.last_mut() {
                    Some(r) if r.1 + 1 == t => r.1 = t,
                    _ => runs.push((t, t)),
                }
            }
            if !runs.is_empty() {
                out.insert(atom.clone(), runs);
            }
        }
        out
    }

    fn as_pairs(s: &IntervalStream) -> BTreeMap<Atom, Vec<(u64, u64)>> {
        s.iter().map(|(a, v)| (a.clone(), v.iter().map(|i| (i.lo(), i.hi())).collect())).collect()
    }

    #[test]
    fn canonicalize_merges_overlaps() {
        let s = IntervalStream::new(iv(0, 40))
            .with(a("v"), 15, 19)
            .unwrap()
            .with(a("v"), 17, 20)
            .unwrap()
            .with(a("v"), 24, 27)
            .unwrap();
        let c = s.canonicalize();
        assert_eq!(c.intervals(&a("v")), &[iv(15, 20), iv(24, 27)]);
        assert_eq!(as_pairs(&c), oracle_canonical(&s));
    }

    #[test]
    fn canonicalize_point_is_identity() {
        let s = IntervalStream::new(iv(0, 5)).with(a("a"), 3, 3).unwrap();
        assert_eq!(s.canonicalize(), s);
    }

    #[test]
    fn canonicalize_merges_adjacent() {
        let s = IntervalStream::new(iv(0, 5)).with(a("a"), 1, 2).unwrap().with(a("a"), 3, 4).unwrap();
        assert_eq!(s.canonicalize().intervals(&a("a")), &[iv(1, 4)]);
    }

    #[test]
    fn equivalence_examples() {
        let t = iv(0, 5);
        let s1 = IntervalStream::new(t).with(a("a"), 1, 3).unwrap();
        let s2 = IntervalStream::new(t).with(a("a"), 1, 2).unwrap().with(a("a"), 2, 3).unwrap();
        assert!(s1.equivalent(&s2));
        assert!(s1.equivalent(&s1));
        let s3 = IntervalStream::new(iv(0, 6)).with(a("a"), 1, 3).unwrap();
        assert!(!s1.equivalent(&s3));
    }

    #[test]
    fn substream_examples() {
        let t = iv(0, 10);
        let sup = IntervalStream::new(t).with(a("a"), 3, 7).unwrap();
        let sub = IntervalStream::new(t).with(a("a"), 4, 5).unwrap();
        assert!(sub.is_substream_of(&sup));

        let split = IntervalStream::new(t).with(a("a"), 2, 3).unwrap().with(a("a"), 4, 5).unwrap();
        let wide = IntervalStream::new(t).with(a("a"), 2, 5).unwrap();
        assert!(!wide.is_substream_of(&split));

        assert!(IntervalStream::new(iv(2, 4)).is_substream_of(&sup));
        assert!(!IntervalStream::new(iv(0, 11)).is_substream_of(&sup));
    }

    #[test]
    fn point_stream_unfolding() {
        let s = IntervalStream::new(iv(0, 3)).with(a("a"), 1, 2).unwrap();
        let p = s.to_point_stream();
        assert!(p.at(0).is_empty());
        assert_eq!(p.at(1), BTreeSet::from([a("a")]));
        assert_eq!(p.at(2), BTreeSet::from([a("a")]));
        assert!(p.at(3).is_empty());
        assert_eq!(IntervalStream::new(iv(0, 3)).to_point_stream().iter().count(), 0);
    }

    #[test]
    fn fig2_stream_unfolding() {
        let s = IntervalStream::new(iv(12, 31))
            .with(a("v"), 15, 20)
            .unwrap()
            .with(a("v"), 24, 27)
            .unwrap()
            .with(a("m"), 21, 29)
            .unwrap();
        let p = s.to_point_stream();
        assert_eq!(p.at(20), BTreeSet::from([a("v")]));
        assert_eq!(p.at(25), BTreeSet::from([a("v"), a("m")]));
    }

    #[test]
    fn from_point_stream_keeps_point_intervals() {
        let mut p = PointStream::new(iv(0, 5));
        p.insert(1, a("a")).unwrap();
        p.insert(2, a("a")).unwrap();
        let s = IntervalStream::from_point_stream(&p);
        assert_eq!(s.intervals(&a("a")), &[iv(1, 1), iv(2, 2)]);

        let mut q = PointStream::new(iv(0, 5));
        q.insert(3, a("a")).unwrap();
        assert_eq!(IntervalStream::from_point_stream(&q).intervals(&a("a")), &[iv(3, 3)]);
        assert!(IntervalStream::from_point_stream(&PointStream::new(iv(0, 5))).is_empty());
    }

    #[test]
    fn insert_rejects_outside_timeline() {
        let mut s = IntervalStream::new(iv(2, 5));
        assert!(matches!(s.insert(a("a"), iv(1, 3)), Err(StreamError::OutsideTimeline { .. })));
        assert!(Interval::new(4, 3).is_err());
    }

    #[test]
    fn atom_text_round_trip() {
        for text in ["high", "alpha(25)", "q1(3,-4)", "p(a,b_c,7)"] {
            let atom: Atom = text.parse().unwrap();
            assert_eq!(atom.to_string(), text);
        }
        assert!("Foo".parse::<Atom>().is_err());
        assert!("p(".parse::<Atom>().is_err());
        assert!("p(a,)".parse::<Atom>().is_err());
    }

    #[test]
    fn json_shape() {
        let s = IntervalStream::new(iv(0, 9)).with("p(a,1)".parse().unwrap(), 2, 4).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"timeline":[0,9],"atoms":{"p(a,1)":[[2,4]]}}"#);
        let back: IntervalStream = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<IntervalStream>(r#"{"timeline":[0,3],"atoms":{"a":[[2,9]]}}"#).is_err());
    }

    fn arb_stream() -> impl Strategy<Value = IntervalStream> {
        (1u64..32).prop_flat_map(|len| {
            let atoms = proptest::collection::vec((0usize..4, 0..len, 0..len), 0..12);
            atoms.prop_map(move |raw| {
                let mut s = IntervalStream::new(iv(0, len - 1));
                for (k, x, y) in raw {
                    let atom = Atom::prop(["a", "b", "c", "d"][k]);
                    s.insert(atom, iv(x.min(y), x.max(y))).unwrap();
                }
                s
            })
        })
    }

    proptest! {
        #[test]
        fn canonical_matches_point_oracle(s in arb_stream()) {
            let c = s.canonicalize();
            prop_assert!(c.is_canonical());
            prop_assert_eq!(as_pairs(&c), oracle_canonical(&s));
            prop_assert_eq!(c.canonicalize(), c.clone());
            prop_assert!(s.equivalent(&c));
        }

        #[test]
        fn point_round_trip(s in arb_stream()) {
            let p = s.to_point_stream();
            let back = IntervalStream::from_point_stream(&p);
            prop_assert_eq!(back.to_point_stream(), p);
            prop_assert!(back.equivalent(&s));
        }

        #[test]
        fn equivalence_iff_equal_canonical(s1 in arb_stream(), s2 in arb_stream()) {
            let by_points = s1.timeline() == s2.timeline()
                && s1.atoms().chain(s2.atoms()).all(|a| s1.points(a) == s2.points(a));
            prop_assert_eq!(s1.equivalent(&s2), by_points);
            prop_assert_eq!(s1.canonicalize() == s2.canonicalize(), by_points);
        }
    }
}
