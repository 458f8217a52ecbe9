//! Workload generators: a chained n-Queens pipeline and an adaptive caching
//! policy, each with a matching input stream.

use std::collections::BTreeSet;

use crate::runtime::wire::WireEvent;
use crate::stream_model::{Atom, Const, TimePoint};

/// Row that stage `i` (1-based) fixes from its predecessor's message.
pub fn queens_row(n: usize, i: usize) -> usize {
    (i - 1) % n + 1
}

/// `stages` chained n-Queens solvers. Stage `i` places a queen in row
/// `queens_row(n, i)` at the column received from stage `i - 1` (stage 1
/// reads the input `send0`), completes the board and passes that queen's
/// column on as `send<i>`.
pub fn gen_nqueens(n: usize, stages: usize) -> String {
    let mut p = format!("% {n}-queens, {stages} chained stages\n#ext send0/1.\n");
    for i in 1..=stages {
        let r = queens_row(n, i);
        let prev = i - 1;
        p.push_str(&format!(
            "\n% stage {i}\n\
             d{i}(1..{n}).\n\
             q{i}(X,Y) :- d{i}(X), d{i}(Y), not not q{i}(X,Y).\n\
             q{i}({r},Y) :- send{prev}(Y) in [0], d{i}(Y).\n\
             :- q{i}(X,Y), q{i}(X,Z), Y < Z.\n\
             :- q{i}(X,Y), q{i}(Z,Y), X < Z.\n\
             :- q{i}(X,Y), q{i}(Z,W), X < Z, Z - X = |W - Y|.\n\
             placed{i}(X) :- q{i}(X,Y).\n\
             :- d{i}(X), not placed{i}(X).\n\
             send{i}(Y) :- q{i}({r},Y).\n"
        ));
    }
    for i in 1..=stages {
        p.push_str(&format!("#show q{i}/2.\n"));
    }
    p.push_str(&format!("#show send{stages}/1.\n"));
    p
}

/// Input cycling `send0` through `columns`, one value per tick from `start`
/// for `ticks` ticks.
pub fn gen_queens_input(columns: &[i64], start: TimePoint, ticks: u64) -> Vec<WireEvent> {
    let mut evs = Vec::new();
    let mut prev: Option<Atom> = None;
    for k in 0..ticks {
        let t = start + k;
        let cur = Atom::new("send0", vec![Const::Int(columns[k as usize % columns.len()])]);
        if prev.as_ref() != Some(&cur) {
            if let Some(p) = prev.take() {
                evs.push(WireEvent::End { t, atom: p });
            }
            evs.push(WireEvent::Begin { t, atom: cur.clone() });
        }
        evs.push(WireEvent::Tick { t });
        prev = Some(cur);
    }
    crate::runtime::wire::sort_events(&mut evs);
    evs
}

/// True iff `queens` is a complete n-Queens placement: `n` queens, one per
/// row and column, no two on a diagonal. Coordinates are 1-based (row, col).
pub fn check_queens(n: usize, queens: &[(i64, i64)]) -> bool {
    if queens.len() != n {
        return false;
    }
    let in_range = |v: i64| v >= 1 && v <= n as i64;
    if !queens.iter().all(|(r, c)| in_range(*r) && in_range(*c)) {
        return false;
    }
    for (i, a) in queens.iter().enumerate() {
        for b in &queens[i + 1..] {
            if a.0 == b.0 || a.1 == b.1 || (a.0 - b.0).abs() == (a.1 - b.1).abs() {
                return false;
            }
        }
    }
    true
}

/// Queen coordinates of stage `stage` among `atoms`.
pub fn queens_of<'a>(atoms: impl IntoIterator<Item = &'a Atom>, stage: usize) -> Vec<(i64, i64)> {
    let pred = format!("q{stage}");
    atoms
        .into_iter()
        .filter(|a| a.name() == pred && a.args().len() == 2)
        .filter_map(|a| Some((a.args()[0].as_int()?, a.args()[1].as_int()?)))
        .collect()
}

/// Caching policy selection with windows of `k` seconds.
pub fn gen_caching(k: u64) -> String {
    format!(
        "% cache eviction policy from the recent alpha value\n\
         #ext alpha/1.\n\
         #ext rtm50/0.\n\
         value(5). value(15). value(25).\n\
         high :- value(V), alpha(V) at T [{k} sec], 18 <= V.\n\
         mid :- value(V), alpha(V) at T [{k} sec], 12 <= V, V < 18.\n\
         low :- value(V), alpha(V) at T [{k} sec], V <= 12.\n\
         lfu :- high always [{k} sec].\n\
         lru :- mid always [{k} sec].\n\
         fifo :- low always [{k} sec], rtm50 [{k} sec].\n\
         done :- lfu.\n\
         done :- lru.\n\
         done :- fifo.\n\
         random :- not done.\n"
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CachingPhase {
    High,
    Mid,
    Low,
    Cycling,
    Silent,
}

const PHASES: [CachingPhase; 5] =
    [CachingPhase::High, CachingPhase::Mid, CachingPhase::Low, CachingPhase::Cycling, CachingPhase::Silent];

/// Phase in force at tick `t` (from 0) for window `k`; every phase lasts
/// `2k + 2` ticks so box windows fill up.
pub fn caching_phase(k: u64, t: TimePoint) -> CachingPhase {
    PHASES[((t / (2 * k + 2)) % 5) as usize]
}

/// Atoms observed at tick `t` of the caching input.
pub fn caching_observations(k: u64, t: TimePoint) -> BTreeSet<Atom> {
    let alpha = |v: i64| Atom::new("alpha", vec![Const::Int(v)]);
    match caching_phase(k, t) {
        CachingPhase::High => [alpha(25)].into(),
        CachingPhase::Mid => [alpha(15)].into(),
        CachingPhase::Low => [alpha(5), Atom::prop("rtm50")].into(),
        CachingPhase::Cycling => [alpha([25, 15, 5][(t % 3) as usize])].into(),
        CachingPhase::Silent => BTreeSet::new(),
    }
}

/// Caching input for ticks `0..length` as begin/end events.
pub fn gen_caching_input(k: u64, length: u64) -> Vec<WireEvent> {
    let mut evs = Vec::new();
    let mut prev = BTreeSet::new();
    for t in 0..length {
        let cur = caching_observations(k, t);
        for a in prev.difference(&cur) {
            evs.push(WireEvent::End { t, atom: a.clone() });
        }
        for a in cur.difference(&prev) {
            evs.push(WireEvent::Begin { t, atom: a.clone() });
        }
        evs.push(WireEvent::Tick { t });
        prev = cur;
    }
    crate::runtime::wire::sort_events(&mut evs);
    evs
}
