//! Newline-delimited JSON events, e.g. `{"op":"begin","t":29,"atom":"v"}`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval_db::OccurrenceBatch;
use crate::stream_model::{Atom, Interval, IntervalStream, TimePoint};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum WireEvent {
    /// `atom` is observed from `t` on.
    Begin { t: TimePoint, atom: Atom },
    /// `atom` was last observed at `t - 1`.
    End { t: TimePoint, atom: Atom },
    /// Time advances to `t` with no change.
    Tick { t: TimePoint },
    Eos,
}

impl WireEvent {
    pub fn time(&self) -> Option<TimePoint> {
        match self {
            WireEvent::Begin { t, .. } | WireEvent::End { t, .. } | WireEvent::Tick { t } => Some(*t),
            WireEvent::Eos => None,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: non-monotone time {t} after {last}")]
    NonMonotone { line: usize, t: TimePoint, last: TimePoint },
    #[error("line {line}: event after eos")]
    AfterEos { line: usize },
}

/// Parses an event log; blank lines are skipped.
pub fn parse_events(text: &str) -> Result<Vec<WireEvent>, WireError> {
    let mut out = Vec::new();
    let mut last: Option<TimePoint> = None;
    let mut eos = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if eos {
            return Err(WireError::AfterEos { line });
        }
        let ev: WireEvent =
            serde_json::from_str(raw).map_err(|e| WireError::Parse { line, msg: e.to_string() })?;
        if let Some(t) = ev.time() {
            if let Some(l) = last {
                if t < l {
                    return Err(WireError::NonMonotone { line, t, last: l });
                }
            }
            last = Some(t);
        } else {
            eos = true;
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn render_events(events: &[WireEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

/// Per-tick batches of an event log, plus the last time mentioned.
pub fn batches(events: &[WireEvent]) -> (BTreeMap<TimePoint, OccurrenceBatch>, Option<TimePoint>) {
    let mut out: BTreeMap<TimePoint, OccurrenceBatch> = BTreeMap::new();
    let mut last = None;
    for e in events {
        let Some(t) = e.time() else { continue };
        last = Some(t);
        let b = out.entry(t).or_insert_with(|| OccurrenceBatch::new(t));
        match e {
            WireEvent::Begin { atom, .. } => {
                b.end.remove(atom);
                b.begin.insert(atom.clone());
            }
            WireEvent::End { atom, .. } => {
                b.begin.remove(atom);
                b.end.insert(atom.clone());
            }
            _ => {}
        }
    }
    (out, last)
}

/// Events describing a stream: a begin at each interval start, an end right
/// after each interval, and a final tick at the end of the timeline.
pub fn events_from_stream(s: &IntervalStream) -> Vec<WireEvent> {
    let mut evs = Vec::new();
    for (a, list) in s.canonicalize().iter() {
        for iv in list {
            evs.push(WireEvent::Begin { t: iv.lo(), atom: a.clone() });
            if iv.hi() < s.timeline().hi() {
                evs.push(WireEvent::End { t: iv.hi() + 1, atom: a.clone() });
            }
        }
    }
    evs.push(WireEvent::Tick { t: s.timeline().lo() });
    evs.push(WireEvent::Tick { t: s.timeline().hi() });
    sort_events(&mut evs);
    evs
}

/// Replays events into a stream over `timeline`; ongoing atoms last to its
/// end.
pub fn stream_from_events(events: &[WireEvent], timeline: Interval) -> IntervalStream {
    let mut s = IntervalStream::new(timeline);
    let mut open: BTreeMap<Atom, TimePoint> = BTreeMap::new();
    let put = |s: &mut IntervalStream, a: &Atom, lo: TimePoint, hi: TimePoint| {
        let lo = lo.max(timeline.lo());
        let hi = hi.min(timeline.hi());
        if lo <= hi {
            s.insert(a.clone(), Interval::new(lo, hi).expect("lo <= hi")).expect("clamped to timeline");
        }
    };
    for e in events {
        match e {
            WireEvent::Begin { t, atom } => {
                open.entry(atom.clone()).or_insert(*t);
            }
            WireEvent::End { t, atom } => {
                if let Some(lo) = open.remove(atom) {
                    if *t > lo {
                        put(&mut s, atom, lo, t - 1);
                    }
                }
            }
            _ => {}
        }
    }
    for (a, lo) in open {
        put(&mut s, &a, lo, timeline.hi());
    }
    s.canonicalize()
}

/// Orders by time, ends before begins, then by atom; ticks first within a
/// time and eos last.
pub fn sort_events(evs: &mut [WireEvent]) {
    fn key(e: &WireEvent) -> (u8, TimePoint, u8, Option<&Atom>) {
        match e {
            WireEvent::Tick { t } => (0, *t, 0, None),
            WireEvent::End { t, atom } => (0, *t, 1, Some(atom)),
            WireEvent::Begin { t, atom } => (0, *t, 2, Some(atom)),
            WireEvent::Eos => (1, 0, 0, None),
        }
    }
    evs.sort_by(|a, b| key(a).cmp(&key(b)));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let e = WireEvent::Begin { t: 29, atom: "v".parse().unwrap() };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"op":"begin","t":29,"atom":"v"}"#);
        assert_eq!(serde_json::to_string(&WireEvent::Eos).unwrap(), r#"{"op":"eos"}"#);
        let back: WireEvent = serde_json::from_str(r#"{"op":"end","t":3,"atom":"p(a,1)"}"#).unwrap();
        assert_eq!(back, WireEvent::End { t: 3, atom: "p(a,1)".parse().unwrap() });
    }

    #[test]
    fn parse_errors_carry_lines() {
        let text = "{\"op\":\"tick\",\"t\":5}\n{\"op\":\"tick\",\"t\":4}\n";
        assert_eq!(parse_events(text), Err(WireError::NonMonotone { line: 2, t: 4, last: 5 }));
        assert!(matches!(parse_events("nonsense"), Err(WireError::Parse { line: 1, .. })));
        assert_eq!(parse_events("{\"op\":\"eos\"}\n{\"op\":\"tick\",\"t\":1}"), Err(WireError::AfterEos { line: 2 }));
    }

    #[test]
    fn stream_round_trip() {
        let s: IntervalStream =
            serde_json::from_str(r#"{"timeline":[12,30],"atoms":{"v":[[15,20],[24,27]],"m":[[21,30]]}}"#).unwrap();
        let evs = events_from_stream(&s);
        assert_eq!(stream_from_events(&evs, s.timeline()), s.canonicalize());
        let text = render_events(&evs);
        assert_eq!(parse_events(&text).unwrap(), evs);
    }
}
