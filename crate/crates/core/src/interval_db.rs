//! Per-node interval store.
//!
//! Observations arrive as begin/end events stamped with the current tick. An
//! atom that has begun and not yet ended has an open interval, read as
//! extending to the query time. `end(a)@t` means `a` was last observed at
//! `t - 1`.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::semantics::{self, StreamingAtom, Window, WindowKind};
use crate::stream_model::{Atom, Interval, IntervalStream, TimePoint};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DbError {
    #[error("non-monotone time: batch at {got} after {last}")]
    NonMonotone { last: TimePoint, got: TimePoint },
    #[error("forgotten data queried: {from} is below the watermark {watermark}")]
    Forgotten { from: TimePoint, watermark: TimePoint },
    #[error("atom {0} both begins and ends in one batch")]
    Conflict(Atom),
    #[error("query time {now} precedes the stream origin {origin}")]
    BeforeOrigin { now: TimePoint, origin: TimePoint },
}

/// Atoms beginning (`begin`) and ending (`end`) at time `at`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OccurrenceBatch {
    pub at: TimePoint,
    pub begin: BTreeSet<Atom>,
    pub end: BTreeSet<Atom>,
}

impl OccurrenceBatch {
    pub fn new(at: TimePoint) -> Self {
        OccurrenceBatch { at, ..Default::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.begin.is_empty() && self.end.is_empty()
    }
}

/// What a trigger schedule watches for changes in truth value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Watch {
    Box(Window, Atom),
    Diamond(Window, Atom),
    /// `@c a` with a constant time point.
    At(TimePoint, Atom),
    /// `⊞w @c a` with a constant time point.
    WinAt(Window, TimePoint, Atom),
    /// `⊞w @T a` with a time variable: truth may change whenever a point
    /// leaves the window or, for an ongoing observation, enters it.
    WinAtVar(Window, Atom),
    /// Anything whose truth may change with every tick.
    EveryTick,
}

/// Future tick → watched atoms to re-evaluate then.
pub type TriggerSchedule = BTreeMap<TimePoint, BTreeSet<Watch>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalDb {
    origin: TimePoint,
    watermark: TimePoint,
    last: Option<TimePoint>,
    /// Canonical closed intervals per atom.
    closed: BTreeMap<Atom, Vec<Interval>>,
    /// Start of the ongoing observation, if any. Never adjacent to the last
    /// closed interval of the same atom.
    open: BTreeMap<Atom, TimePoint>,
}

impl IntervalDb {
    /// Empty store whose timeline starts at `origin`.
    pub fn new(origin: TimePoint) -> Self {
        IntervalDb { origin, watermark: origin, last: None, closed: BTreeMap::new(), open: BTreeMap::new() }
    }

    pub fn origin(&self) -> TimePoint {
        self.origin
    }

    pub fn watermark(&self) -> TimePoint {
        self.watermark
    }

    pub fn last_time(&self) -> Option<TimePoint> {
        self.last
    }

    pub fn is_empty(&self) -> bool {
        self.closed.is_empty() && self.open.is_empty()
    }

    pub fn is_open(&self, a: &Atom) -> bool {
        self.open.contains_key(a)
    }

    pub fn open_since(&self, a: &Atom) -> Option<TimePoint> {
        self.open.get(a).copied()
    }

    pub fn closed_intervals(&self, a: &Atom) -> &[Interval] {
        self.closed.get(a).map(Vec::as_slice).unwrap_or(&[])
    }

    fn advance(&mut self, at: TimePoint) -> Result<(), DbError> {
        if let Some(last) = self.last {
            if at < last {
                return Err(DbError::NonMonotone { last, got: at });
            }
        }
        self.last = Some(at);
        Ok(())
    }

    /// Applies one batch of occurrences and disappearances.
    pub fn apply(&mut self, batch: &OccurrenceBatch) -> Result<(), DbError> {
        if let Some(a) = batch.begin.intersection(&batch.end).next() {
            return Err(DbError::Conflict(a.clone()));
        }
        self.advance(batch.at)?;
        for a in &batch.end {
            self.end(a, batch.at);
        }
        for a in &batch.begin {
            self.begin(a, batch.at);
        }
        Ok(())
    }

    fn begin(&mut self, a: &Atom, at: TimePoint) {
        if self.open.contains_key(a) {
            return;
        }
        let mut start = at;
        if let Some(list) = self.closed.get_mut(a) {
            // Reopen a closed interval that touches `at`.
            if let Some(last) = list.last() {
                if last.hi() + 1 >= at {
                    start = last.lo().min(at);
                    list.pop();
                }
            }
            if list.is_empty() {
                self.closed.remove(a);
            }
        }
        self.open.insert(a.clone(), start);
    }

    fn end(&mut self, a: &Atom, at: TimePoint) {
        let Some(start) = self.open.remove(a) else { return };
        if at > start {
            self.push_closed(a, Interval::new(start, at - 1).expect("start < at"));
        }
    }

    fn push_closed(&mut self, a: &Atom, iv: Interval) {
        let list = self.closed.entry(a.clone()).or_default();
        let pos = list.partition_point(|x| x.lo() < iv.lo());
        list.insert(pos, iv);
        // Re-merge around the insertion point.
        let mut merged: Vec<Interval> = Vec::with_capacity(list.len());
        for i in list.drain(..) {
            match merged.last_mut() {
                Some(m) if i.lo() <= m.hi() + 1 => *m = Interval::new(m.lo(), m.hi().max(i.hi())).expect("nonempty"),
                _ => merged.push(i),
            }
        }
        *list = merged;
    }

    /// Records a closed observation, e.g. a point occurrence released from
    /// the future-inference log. Advances the clock to `at`.
    pub fn insert_closed(&mut self, a: &Atom, iv: Interval, at: TimePoint) -> Result<(), DbError> {
        self.advance(at)?;
        let iv = match iv.intersect(&Interval::new(self.watermark, TimePoint::MAX).expect("nonempty")) {
            Some(iv) => iv,
            None => return Ok(()),
        };
        if let Some(&s) = self.open.get(a) {
            if iv.lo() >= s {
                return Ok(());
            }
            if iv.hi() + 1 >= s {
                self.open.insert(a.clone(), iv.lo());
                // Absorb closed intervals now touching the open one.
                let lo = iv.lo();
                if let Some(list) = self.closed.get_mut(a) {
                    while let Some(last) = list.last() {
                        if last.hi() + 1 >= lo {
                            let l = last.lo().min(lo);
                            list.pop();
                            self.open.insert(a.clone(), l);
                        } else {
                            break;
                        }
                    }
                    if list.is_empty() {
                        self.closed.remove(a);
                    }
                }
                return Ok(());
            }
        }
        self.push_closed(a, iv);
        Ok(())
    }

    /// Canonical intervals of `a` with the open one materialized up to `now`.
    pub fn intervals_at(&self, a: &Atom, now: TimePoint) -> Vec<Interval> {
        let mut out: Vec<Interval> = self.closed_intervals(a).iter().filter_map(|i| clamp(i, now)).collect();
        if let Some(&s) = self.open.get(a) {
            if s <= now {
                out.push(Interval::new(s, now).expect("s <= now"));
            }
        }
        out
    }

    /// The stored stream over timeline `[origin, now]`, open intervals
    /// closed at `now`.
    pub fn materialize(&self, now: TimePoint) -> IntervalStream {
        let mut s = IntervalStream::new(Interval::new(self.origin, now.max(self.origin)).expect("origin <= now"));
        for a in self.closed.keys().chain(self.open.keys()).collect::<BTreeSet<_>>() {
            for iv in self.intervals_at(a, now) {
                s.insert(a.clone(), iv).expect("within timeline");
            }
        }
        s
    }

    pub fn check_range(&self, from: TimePoint, now: TimePoint) -> Result<(), DbError> {
        if now < self.origin {
            return Err(DbError::BeforeOrigin { now, origin: self.origin });
        }
        if from < self.watermark {
            return Err(DbError::Forgotten { from, watermark: self.watermark });
        }
        Ok(())
    }

    /// Window timeline at `now`.
    pub fn window_bounds(&self, now: TimePoint, w: Window) -> Interval {
        match w.kind {
            WindowKind::Time => Interval::new(self.origin.max(now.saturating_sub(w.size)), now).expect("lo <= now"),
            WindowKind::Tuple => semantics::tuple_window_bounds(&self.materialize(now), now, w.size),
        }
    }

    /// `a` holds at `t` (with open intervals extending to `now`).
    pub fn holds_at(&self, a: &Atom, t: TimePoint, now: TimePoint) -> bool {
        if t > now {
            return false;
        }
        if self.open.get(a).is_some_and(|s| *s <= t) {
            return true;
        }
        let list = self.closed_intervals(a);
        let i = list.partition_point(|iv| iv.hi() < t);
        i < list.len() && list[i].lo() <= t
    }

    /// Some point of `a` lies in `range` (`range.hi() <= now`).
    pub fn any_in(&self, a: &Atom, range: Interval) -> bool {
        if self.open.get(a).is_some_and(|s| *s <= range.hi()) {
            return true;
        }
        let list = self.closed_intervals(a);
        let i = list.partition_point(|iv| iv.hi() < range.lo());
        i < list.len() && list[i].lo() <= range.hi()
    }

    /// Every point of `range` is covered by `a` (`range.hi() <= now`).
    pub fn all_in(&self, a: &Atom, range: Interval) -> bool {
        if self.open.get(a).is_some_and(|s| *s <= range.lo()) {
            return true;
        }
        let list = self.closed_intervals(a);
        let i = list.partition_point(|iv| iv.hi() < range.lo());
        i < list.len() && list[i].covers(&range)
    }

    /// Truth of a streaming atom at `now` over the stream `[origin, now]`.
    pub fn query(&self, now: TimePoint, phi: &StreamingAtom) -> Result<bool, DbError> {
        match phi {
            StreamingAtom::Plain(a) => {
                self.check_range(now, now)?;
                Ok(self.holds_at(a, now, now))
            }
            StreamingAtom::At(t, a) => {
                if *t < self.origin || *t > now {
                    self.check_range(now, now)?;
                    return Ok(false);
                }
                self.check_range(*t, now)?;
                Ok(self.holds_at(a, *t, now))
            }
            StreamingAtom::WinAt(w, t, a) => {
                let win = self.window_bounds(now, *w);
                self.check_range(win.lo(), now)?;
                Ok(win.contains(*t) && self.holds_at(a, *t, now))
            }
            StreamingAtom::WinDiamond(w, a) => {
                let win = self.window_bounds(now, *w);
                self.check_range(win.lo(), now)?;
                Ok(self.any_in(a, win))
            }
            StreamingAtom::WinBox(w, a) => {
                let win = self.window_bounds(now, *w);
                self.check_range(win.lo(), now)?;
                Ok(self.all_in(a, win))
            }
        }
    }

    /// Time points `T` in the window at which `a` holds, for `⊞w @T a`.
    pub fn query_times(&self, now: TimePoint, w: Window, a: &Atom) -> Result<Vec<TimePoint>, DbError> {
        let win = self.window_bounds(now, w);
        self.check_range(win.lo(), now)?;
        Ok(self.intervals_at(a, now).iter().filter_map(|i| i.intersect(&win)).flat_map(|i| i.points()).collect())
    }

    /// Forgets everything before `t`; idempotent.
    pub fn cleanup(&mut self, t: TimePoint) {
        if t <= self.watermark {
            return;
        }
        self.watermark = t;
        self.closed.retain(|_, list| {
            list.retain(|iv| iv.hi() >= t);
            if let Some(first) = list.first_mut() {
                if first.lo() < t {
                    *first = Interval::new(t, first.hi()).expect("hi >= t");
                }
            }
            !list.is_empty()
        });
        for s in self.open.values_mut() {
            if *s < t {
                *s = t;
            }
        }
    }

    /// Earliest times after `now` at which a watched atom may change truth
    /// value, assuming no further input arrives.
    pub fn schedule<'a>(&self, now: TimePoint, watches: impl IntoIterator<Item = &'a Watch>) -> TriggerSchedule {
        let mut out = TriggerSchedule::new();
        for w in watches {
            if let Some(t) = self.watch_due(now, w) {
                debug_assert!(t > now);
                out.entry(t).or_default().insert(w.clone());
            }
        }
        out
    }

    /// First entry of [`IntervalDb::schedule`].
    pub fn next_trigger<'a>(&self, now: TimePoint, watches: impl IntoIterator<Item = &'a Watch>) -> Option<TimePoint> {
        watches.into_iter().filter_map(|w| self.watch_due(now, w)).min()
    }

    fn last_point(&self, a: &Atom, now: TimePoint) -> Option<TimePoint> {
        self.closed_intervals(a).iter().rev().find_map(|i| clamp(i, now)).map(|i| i.hi())
    }

    fn watch_due(&self, now: TimePoint, w: &Watch) -> Option<TimePoint> {
        let next = now + 1;
        match w {
            Watch::EveryTick => Some(next),
            Watch::Box(win, _) | Watch::Diamond(win, _) | Watch::WinAt(win, _, _) | Watch::WinAtVar(win, _)
                if win.kind == WindowKind::Tuple =>
            {
                (!self.is_empty()).then_some(next)
            }
            Watch::Box(win, a) => {
                let range = self.window_bounds(now, *win);
                if self.all_in(a, range) {
                    // Backed by an ongoing observation: stays true.
                    if self.is_open(a) {
                        return None;
                    }
                    return self.last_point(a, now).map(|e| e + 1).filter(|t| *t > now);
                }
                let s = self.open_since(a)?;
                // First t with max(origin, t - n) >= s.
                Some(next.max(s + win.size))
            }
            Watch::Diamond(win, a) => {
                if self.is_open(a) {
                    return None;
                }
                let e = self.last_point(a, now)?;
                let exit = e + win.size + 1;
                (exit > now).then_some(exit)
            }
            Watch::WinAtVar(win, a) => {
                if self.is_open(a) {
                    return Some(next);
                }
                // Earliest point still inside the window leaves first.
                let range = self.window_bounds(now, *win);
                let first = self.closed_intervals(a).iter().find_map(|i| i.intersect(&range)).map(|i| i.lo())?;
                Some(first + win.size + 1)
            }
            Watch::WinAt(win, c, _) => {
                if *c > now {
                    Some(*c)
                } else {
                    let exit = c + win.size + 1;
                    (exit > now).then_some(exit)
                }
            }
            Watch::At(c, _) => (*c > now).then_some(*c),
        }
    }
}

fn clamp(i: &Interval, now: TimePoint) -> Option<Interval> {
    (i.lo() <= now).then(|| Interval::new(i.lo(), i.hi().min(now)).expect("lo <= now"))
}
