//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p larstream --test acceptance`.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use larstream::bench::{run_bench, BenchResult, BenchSpec, Mode, Scenario};
use larstream::decomposition::{Decomposition, DecompositionError, NodeId};
use larstream::interval_db::{DbError, IntervalDb, OccurrenceBatch};
use larstream::lars_lang::{ground, parse, GroundOptions, GroundProgram};
use larstream::runtime::wire::{parse_events, stream_from_events, WireEvent};
use larstream::runtime::{run_program, RunConfig};
use larstream::scenarios::{check_queens, gen_caching, gen_caching_input, gen_nqueens, gen_queens_input, queens_of};
use larstream::semantics::{enumerate_answer_streams, everywhere, holds, Head, Program, Rule, StreamingAtom, Window};
use larstream::{Atom, Interval, IntervalStream, PointStream, Predicate, TimePoint};

const SEED: u64 = 0x1a25_5eed;

/// Tick intervals swept by the scaling criterion, in milliseconds.
const SCALING_INTERVALS_MS: [f64; 5] = [8.0, 4.0, 2.0, 1.0, 0.5];

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn iv(lo: TimePoint, hi: TimePoint) -> Interval {
    Interval::new(lo, hi).unwrap()
}

fn a(name: &str) -> Atom {
    Atom::prop(name)
}

// ---------------------------------------------------------------- 1

fn window_example_golden() -> Result<String, String> {
    let s = IntervalStream::new(iv(12, 31))
        .with(a("v"), 15, 19)
        .unwrap()
        .with(a("v"), 17, 20)
        .unwrap()
        .with(a("v"), 24, 27)
        .unwrap()
        .with(a("m"), 21, 29)
        .unwrap();
    let w6 = Window::time(6);
    let cases = [
        (StreamingAtom::WinBox(w6, a("m")), true),
        (StreamingAtom::WinDiamond(w6, a("v")), true),
        (StreamingAtom::At(26, a("v")), true),
        (StreamingAtom::WinAt(w6, 28, a("v")), false),
    ];
    for (phi, want) in &cases {
        let got = holds(&s, 29, phi).map_err(|e| e.to_string())?;
        ensure(got == *want, || format!("{phi} at 29: got {got}, want {want}"))?;
    }
    ensure(!everywhere(&s, &a("m")), || "box m holds over the whole timeline".into())?;
    Ok("5/5 streaming atoms at t=29".into())
}

// ---------------------------------------------------------------- 2

fn random_stream(rng: &mut ChaCha8Rng, atoms: usize, max_len: u64) -> IntervalStream {
    let lo = rng.gen_range(0..8);
    let hi = lo + rng.gen_range(0..max_len);
    let mut s = IntervalStream::new(iv(lo, hi));
    for k in 0..atoms {
        for _ in 0..rng.gen_range(0..5) {
            let x = rng.gen_range(lo..=hi);
            let y = (x + rng.gen_range(0..6)).min(hi);
            s.insert(a(&format!("a{k}")), iv(x, y)).unwrap();
        }
    }
    s
}

/// Maximal runs of a point set.
fn runs(points: &BTreeSet<TimePoint>) -> Vec<Interval> {
    let mut out: Vec<Interval> = Vec::new();
    for &p in points {
        match out.last_mut() {
            Some(last) if last.hi() + 1 == p => *last = iv(last.lo(), p),
            _ => out.push(iv(p, p)),
        }
    }
    out
}

fn point_sets(s: &IntervalStream) -> BTreeMap<Atom, BTreeSet<TimePoint>> {
    let mut out: BTreeMap<Atom, BTreeSet<TimePoint>> = BTreeMap::new();
    for (atom, list) in s.iter() {
        for i in list {
            out.entry(atom.clone()).or_default().extend(i.lo()..=i.hi());
        }
    }
    out.retain(|_, v| !v.is_empty());
    out
}

/// The same point sets, cut into randomly overlapping pieces.
fn reshuffle(rng: &mut ChaCha8Rng, s: &IntervalStream) -> IntervalStream {
    let mut out = IntervalStream::new(s.timeline());
    for (atom, points) in point_sets(s) {
        let mut pieces = Vec::new();
        for r in runs(&points) {
            let mut lo = r.lo();
            while lo <= r.hi() {
                let hi = (lo + rng.gen_range(0..4)).min(r.hi());
                pieces.push(iv(lo, hi));
                // Overlap the next piece with this one now and then.
                lo = if hi > lo && rng.gen_bool(0.3) { hi } else { hi + 1 };
            }
        }
        pieces.shuffle(rng);
        for p in pieces {
            out.insert(atom.clone(), p).unwrap();
        }
    }
    out
}

fn canonical_form_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    for case in 0..500 {
        let atoms = rng.gen_range(1..=4);
        let s = random_stream(&mut rng, atoms, 32);
        let c = s.canonicalize();
        let expected = point_sets(&s);
        for (atom, pts) in &expected {
            ensure(c.intervals(atom) == runs(pts).as_slice(), || format!("case {case}: {atom} canonicalized wrongly"))?;
        }
        ensure(c.atoms().count() == expected.len(), || format!("case {case}: atom set differs"))?;
        ensure(c.is_canonical() && c.canonicalize() == c, || format!("case {case}: not idempotent"))?;
        let other = reshuffle(&mut rng, &s);
        ensure(other.canonicalize() == c, || format!("case {case}: equivalent stream gives another canonical form"))?;
        ensure(s.equivalent(&other), || format!("case {case}: equivalence not detected"))?;
    }
    Ok("500 streams, timeline <= 32, <= 4 atoms".into())
}

// ---------------------------------------------------------------- 3

fn random_time_atom(rng: &mut ChaCha8Rng, s: &IntervalStream, atoms: usize) -> StreamingAtom {
    let atom = a(&format!("a{}", rng.gen_range(0..atoms)));
    let w = Window::time(rng.gen_range(0..8));
    let t = rng.gen_range(s.timeline().lo()..=s.timeline().hi());
    match rng.gen_range(0..5) {
        0 => StreamingAtom::Plain(atom),
        1 => StreamingAtom::At(t, atom),
        2 => StreamingAtom::WinAt(w, t, atom),
        3 => StreamingAtom::WinDiamond(w, atom),
        _ => StreamingAtom::WinBox(w, atom),
    }
}

fn equivalent_streams_agree() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 3);
    let mut evaluations = 0;
    for case in 0..200 {
        let atoms = rng.gen_range(1..=3);
        let s = random_stream(&mut rng, atoms, 24);
        let other = reshuffle(&mut rng, &s);
        for _ in 0..8 {
            let phi = random_time_atom(&mut rng, &s, atoms);
            for t in s.timeline().points() {
                let x = holds(&s, t, &phi).map_err(|e| e.to_string())?;
                let y = holds(&other, t, &phi).map_err(|e| e.to_string())?;
                ensure(x == y, || format!("case {case}: {phi} at {t} differs ({x} vs {y})"))?;
                evaluations += 1;
            }
        }
    }
    Ok(format!("200 pairs, {evaluations} evaluations"))
}

// ---------------------------------------------------------------- 4

/// Point-based satisfaction, written against `PointStream` only.
mod points {
    use super::*;

    fn window(ps: &PointStream, t: TimePoint, w: Window) -> (TimePoint, TimePoint) {
        (ps.timeline().lo().max(t.saturating_sub(w.size)), t)
    }

    pub fn sat(ps: &PointStream, t: TimePoint, phi: &StreamingAtom) -> bool {
        let tl = ps.timeline();
        match phi {
            StreamingAtom::Plain(x) => ps.contains(t, x),
            StreamingAtom::At(u, x) => tl.contains(*u) && ps.contains(*u, x),
            StreamingAtom::WinAt(w, u, x) => {
                let (lo, hi) = window(ps, t, *w);
                (lo..=hi).contains(u) && ps.contains(*u, x)
            }
            StreamingAtom::WinDiamond(w, x) => {
                let (lo, hi) = window(ps, t, *w);
                (lo..=hi).any(|u| ps.contains(u, x))
            }
            StreamingAtom::WinBox(w, x) => {
                let (lo, hi) = window(ps, t, *w);
                (lo..=hi).all(|u| ps.contains(u, x))
            }
        }
    }

    fn body(ps: &PointStream, t: TimePoint, r: &Rule) -> bool {
        r.pos.iter().all(|b| sat(ps, t, b)) && r.neg.iter().all(|b| !sat(ps, t, b))
    }

    fn head(ps: &PointStream, t: TimePoint, h: &Head) -> bool {
        match h {
            Head::Plain(x) => ps.contains(t, x),
            Head::At(u, x) => ps.timeline().contains(*u) && ps.contains(*u, x),
        }
    }

    fn model(ps: &PointStream, t: TimePoint, rules: &[&Rule]) -> bool {
        rules.iter().all(|r| !body(ps, t, r) || head(ps, t, &r.head))
    }

    fn build(data: &PointStream, pairs: &[(TimePoint, Atom)], mask: u32) -> PointStream {
        let mut ps = data.clone();
        for (i, (u, x)) in pairs.iter().enumerate() {
            if mask & (1 << i) != 0 {
                ps.insert(*u, x.clone()).unwrap();
            }
        }
        ps
    }

    /// Every answer stream, by brute force over all intensional points of
    /// the timeline.
    pub fn answers(data: &PointStream, rules: &[Rule], intensional: &[Atom], t: TimePoint) -> Vec<PointStream> {
        let pairs: Vec<(TimePoint, Atom)> =
            data.timeline().points().flat_map(|u| intensional.iter().map(move |x| (u, x.clone()))).collect();
        let all: Vec<&Rule> = rules.iter().collect();
        let mut out = Vec::new();
        for mask in 0..(1u32 << pairs.len()) {
            let ps = build(data, &pairs, mask);
            if !model(&ps, t, &all) {
                continue;
            }
            let reduct: Vec<&Rule> = rules.iter().filter(|r| body(&ps, t, r)).collect();
            let mut sub = mask;
            let mut minimal = true;
            while sub != 0 {
                sub = (sub - 1) & mask;
                if model(&build(data, &pairs, sub), t, &reduct) {
                    minimal = false;
                    break;
                }
            }
            if minimal {
                out.push(ps);
            }
        }
        out
    }
}

fn random_streaming_atom(rng: &mut ChaCha8Rng, atoms: &[Atom], tl: Interval) -> StreamingAtom {
    let x = atoms[rng.gen_range(0..atoms.len())].clone();
    let w = Window::time(rng.gen_range(0..=3));
    let u = rng.gen_range(tl.lo()..=tl.hi());
    match rng.gen_range(0..5) {
        0 => StreamingAtom::Plain(x),
        1 => StreamingAtom::At(u, x),
        2 => StreamingAtom::WinAt(w, u, x),
        3 => StreamingAtom::WinDiamond(w, x),
        _ => StreamingAtom::WinBox(w, x),
    }
}

fn point_interval_correspondence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut with_answers = 0;
    let mut total_answers = 0;
    let mut several = 0;
    let programs = 300;
    for case in 0..programs {
        let len = rng.gen_range(1..=6u64);
        let tl = iv(0, len - 1);
        // At most 12 intensional (atom, time) pairs.
        let n_int = (12 / len as usize).min(3);
        let intensional: Vec<Atom> = ["p", "q", "r"][..n_int].iter().map(|n| a(n)).collect();
        let mut all = intensional.clone();
        all.push(a("e"));
        let mut rules = Vec::new();
        let mut budget = rng.gen_range(2..=3);
        if n_int >= 2 && rng.gen_bool(0.3) {
            // An even loop through negation: two answer streams unless
            // other rules interfere.
            let (x, y) = (intensional[0].clone(), intensional[1].clone());
            rules.push(Rule::new(Head::Plain(x.clone()), vec![], vec![StreamingAtom::Plain(y.clone())]));
            rules.push(Rule::new(Head::Plain(y), vec![], vec![StreamingAtom::Plain(x)]));
            budget -= 2;
        }
        for _ in 0..budget {
            let h = intensional[rng.gen_range(0..n_int)].clone();
            let head = if rng.gen_bool(0.3) { Head::At(rng.gen_range(0..len), h) } else { Head::Plain(h) };
            let pos = (0..rng.gen_range(0..=2)).map(|_| random_streaming_atom(&mut rng, &all, tl)).collect();
            // Negated intensional atoms at `now` give programs with choices.
            let neg = (0..rng.gen_range(0..=2))
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        StreamingAtom::Plain(intensional[rng.gen_range(0..n_int)].clone())
                    } else {
                        random_streaming_atom(&mut rng, &all, tl)
                    }
                })
                .collect();
            rules.push(Rule::new(head, pos, neg));
        }
        let mut data = PointStream::new(tl);
        for u in tl.points() {
            if rng.gen_bool(0.5) {
                data.insert(u, a("e")).unwrap();
            }
        }
        let t = rng.gen_range(0..len);
        let program = Program::with_intensional(rules.clone(), intensional.iter().map(Atom::predicate));
        let interval_data = IntervalStream::from_point_stream(&data);
        let by_intervals: BTreeSet<String> = enumerate_answer_streams(&interval_data, &program, t, 20)
            .map_err(|e| format!("case {case}: {e}"))?
            .iter()
            .map(|s| serde_json::to_string(&s.canonicalize()).unwrap())
            .collect();
        let by_points: BTreeSet<String> = points::answers(&data, &rules, &intensional, t)
            .iter()
            .map(|ps| serde_json::to_string(&IntervalStream::from_point_stream(ps).canonicalize()).unwrap())
            .collect();
        ensure(by_points == by_intervals, || {
            format!("case {case} at t={t}: point answers {by_points:?} vs interval answers {by_intervals:?}")
        })?;
        with_answers += usize::from(!by_points.is_empty());
        several += usize::from(by_points.len() > 1);
        total_answers += by_points.len();
    }
    ensure(several > 0, || "no program with several answer streams was generated".into())?;
    Ok(format!("{programs} programs, {with_answers} consistent, {several} with several answers, {total_answers} answer streams matched"))
}

// ---------------------------------------------------------------- 5

fn decompose(text: &str) -> (GroundProgram, Result<Decomposition, DecompositionError>) {
    let g = ground(&parse(text).unwrap(), GroundOptions::default()).unwrap();
    let d = Decomposition::new(&g);
    (g, d)
}

fn owner(g: &GroundProgram, d: &Decomposition, pred: &str) -> Option<NodeId> {
    d.graph
        .components
        .iter()
        .position(|c| c.rules.iter().any(|r| g.templates[*r].head.as_ref().is_some_and(|h| &*h.atom().pred == pred)))
        .map(NodeId::Comp)
}

fn decomposition_goldens() -> Result<String, String> {
    let (g, d) = decompose(&gen_caching(18));
    let d = d.map_err(|e| e.to_string())?;
    ensure(d.graph.components.len() == 2, || format!("caching: {} components", d.graph.components.len()))?;
    let lower = owner(&g, &d, "high").ok_or("no component derives high")?;
    let upper = owner(&g, &d, "lfu").ok_or("no component derives lfu")?;
    let filter = d.labels.listening(lower, upper);
    for p in ["high", "mid", "low"] {
        ensure(filter.contains(&Predicate::new(p, 0)), || format!("edge filter misses {p}: {filter:?}"))?;
    }
    for k in 1..=4 {
        let (g, d) = decompose(&gen_nqueens(6, k));
        let d = d.map_err(|e| e.to_string())?;
        ensure(d.graph.components.len() == k, || format!("{k}-stage queens: {} components", d.graph.components.len()))?;
        let chain: Vec<NodeId> = (1..=k).filter_map(|i| owner(&g, &d, &format!("send{i}"))).collect();
        ensure(chain.len() == k, || format!("{k}-stage queens: stages share components"))?;
        let inner: BTreeSet<(NodeId, NodeId)> =
            d.graph.edges.iter().copied().filter(|(x, y)| *x != NodeId::Master && *y != NodeId::Master).collect();
        let expected: BTreeSet<(NodeId, NodeId)> = chain.windows(2).map(|w| (w[0], w[1])).collect();
        ensure(inner == expected, || format!("{k}-stage queens: edges {inner:?}"))?;
    }
    let (_, d) = decompose("a :- b in [2].\nb :- a in [2].\n");
    ensure(matches!(d, Err(DecompositionError::NotStratified(_))), || "window cycle accepted".into())?;
    Ok("caching 2 components, queens chains k=1..4, a<->b rejected".into())
}

// ---------------------------------------------------------------- 6

fn trigger_liveness() -> Result<String, String> {
    let input = parse_events("{\"op\":\"tick\",\"t\":0}\n{\"op\":\"begin\",\"t\":24,\"atom\":\"v\"}\n").unwrap();
    let last_input = input.iter().filter_map(WireEvent::time).max().unwrap();
    let report = run_program(&parse("#ext v/0.\nhigh :- v always [6].\n").unwrap(), &input, &RunConfig::default())
        .map_err(|e| e.to_string())?;
    let begin = report.output.iter().find_map(|e| match e {
        WireEvent::Begin { t, atom } if atom.name() == "high" => Some(*t),
        _ => None,
    });
    ensure(begin == Some(30), || format!("begin(high) at {begin:?}, want 30"))?;
    Ok(format!("begin(high)@30 with last input at {last_input}"))
}

// ---------------------------------------------------------------- 7

fn equivalence() -> Result<String, String> {
    let compare = |text: &str, input: &[WireEvent]| -> Result<usize, String> {
        let src = parse(text).map_err(|e| e.to_string())?;
        let d = run_program(&src, input, &RunConfig::default()).map_err(|e| e.to_string())?;
        let s = run_program(&src, input, &RunConfig { single_node: true, ..Default::default() }).map_err(|e| e.to_string())?;
        ensure(d.output == s.output, || {
            let at = d.output.iter().zip(&s.output).position(|(x, y)| x != y);
            format!("outputs differ at event {at:?}")
        })?;
        Ok(d.output.len())
    };
    let caching = compare(&gen_caching(18), &gen_caching_input(18, 1000))?;
    let queens = compare(&gen_nqueens(6, 2), &gen_queens_input(&[3, 4], 0, 100))?;
    Ok(format!("caching k=18 1000 ticks ({caching} events), 6-queens 2 stages 100 ticks ({queens} events)"))
}

// ---------------------------------------------------------------- 8

fn scaling_result() -> &'static Result<BenchResult, String> {
    static RESULT: OnceLock<Result<BenchResult, String>> = OnceLock::new();
    RESULT.get_or_init(|| {
        let spec = BenchSpec {
            scenario: Scenario::NQueens,
            n: 6,
            stages: 4,
            occurrences: 100,
            intervals_ms: SCALING_INTERVALS_MS.to_vec(),
            modes: vec![Mode::Distributed, Mode::SingleNode],
            repeats: 3,
            ..Default::default()
        };
        run_bench(&spec).map_err(|e| e.to_string())
    })
}

fn pipeline_scaling() -> Result<String, String> {
    let result = scaling_result().as_ref().map_err(Clone::clone)?;
    let mut wins = 0;
    let mut detail = Vec::new();
    for rep in 0..3 {
        let d = result.saturation_interval(Mode::Distributed, rep);
        let s = result.saturation_interval(Mode::SingleNode, rep);
        wins += usize::from(d <= s);
        detail.push(format!("{d}<={s}"));
    }
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = format!("saturation ms distributed vs single-node: {}; {cpus} cpu(s)", detail.join(", "));
    ensure(wins >= 2, || format!("{wins}/3 repetitions; {summary}"))?;
    Ok(format!("{wins}/3 repetitions; {summary}"))
}

// ---------------------------------------------------------------- 9

/// Checks every stage's placement at every tick of a queens output.
fn check_placements(n: usize, stages: usize, output: &[WireEvent]) -> Result<usize, String> {
    let Some(last) = output.iter().filter_map(WireEvent::time).max() else { return Ok(0) };
    let s = stream_from_events(output, iv(0, last));
    let mut valid = 0;
    for t in 0..=last {
        let now: Vec<Atom> = s.iter().filter(|(_, v)| v.iter().any(|i| i.contains(t))).map(|(x, _)| x.clone()).collect();
        for stage in 1..=stages {
            let q = queens_of(&now, stage);
            if q.is_empty() {
                continue;
            }
            ensure(check_queens(n, &q), || format!("invalid {n}-queens placement of stage {stage} at {t}: {q:?}"))?;
            valid += 1;
        }
    }
    Ok(valid)
}

fn queens_validity() -> Result<String, String> {
    let mut valid = 0;
    let mut runs = 0;
    if let Ok(result) = scaling_result() {
        for r in result.runs.iter().filter(|r| !r.dnf) {
            valid += check_placements(6, 4, &r.output)?;
            runs += 1;
        }
    }
    for (n, stages, cols) in [(4, 1, vec![2, 3]), (6, 2, vec![2, 3, 4, 5]), (8, 3, vec![1, 2, 3, 4, 5, 6, 7, 8])] {
        let report = run_program(&parse(&gen_nqueens(n, stages)).unwrap(), &gen_queens_input(&cols, 0, 16), &RunConfig::default())
            .map_err(|e| e.to_string())?;
        valid += check_placements(n, stages, &report.output)?;
        runs += 1;
    }
    ensure(valid > 0, || "no placement was emitted".into())?;
    Ok(format!("{valid} placements valid across {runs} runs"))
}

// ---------------------------------------------------------------- 10

/// Truth of `atom` at `u` from the raw batches: the latest event at or
/// before `u` decides.
fn replayed(batches: &[OccurrenceBatch], atom: &Atom, u: TimePoint) -> bool {
    let mut state = false;
    for b in batches.iter().filter(|b| b.at <= u) {
        if b.begin.contains(atom) {
            state = true;
        }
        if b.end.contains(atom) {
            state = false;
        }
    }
    state
}

fn db_replay_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 10);
    let atoms: Vec<Atom> = (0..3).map(|i| a(&format!("x{i}"))).collect();
    let mut queries = 0;
    for case in 0..300 {
        let origin = rng.gen_range(0..5);
        let mut db = IntervalDb::new(origin);
        let mut batches = Vec::new();
        let mut t = origin;
        for _ in 0..rng.gen_range(1..12) {
            t += rng.gen_range(0..4);
            let mut b = OccurrenceBatch::new(t);
            for x in &atoms {
                match rng.gen_range(0..4) {
                    0 => {
                        b.begin.insert(x.clone());
                    }
                    1 => {
                        b.end.insert(x.clone());
                    }
                    _ => {}
                }
            }
            db.apply(&b).map_err(|e| format!("case {case}: {e}"))?;
            batches.push(b);
            t += 1;
        }
        let now = t + rng.gen_range(0..3);
        let tl = iv(origin, now);
        let mut expected = IntervalStream::new(tl);
        for x in &atoms {
            for u in tl.points() {
                if replayed(&batches, x, u) {
                    expected.insert(x.clone(), iv(u, u)).unwrap();
                }
            }
        }
        let expected = expected.canonicalize();
        let state = db.materialize(now);
        ensure(state == expected, || format!("case {case}: state {state:?} vs replay {expected:?}"))?;
        let phis: Vec<StreamingAtom> = (0..10).map(|_| random_streaming_atom(&mut rng, &atoms, tl)).collect();
        for phi in &phis {
            let q = db.query(now, phi).map_err(|e| format!("case {case}: {e}"))?;
            let h = holds(&expected, now, phi).map_err(|e| e.to_string())?;
            ensure(q == h, || format!("case {case}: query {phi} at {now}: {q} vs {h}"))?;
            queries += 1;
        }
        // Forget a prefix: queries inside the retained part are unchanged,
        // queries reaching before it are refused.
        let cutoff = rng.gen_range(origin..=now);
        db.cleanup(cutoff);
        ensure(db.watermark() == cutoff, || format!("case {case}: watermark {} after cleanup({cutoff})", db.watermark()))?;
        for phi in &phis {
            let reach = match phi {
                StreamingAtom::Plain(_) => now,
                StreamingAtom::At(u, _) if *u >= origin && *u <= now => *u,
                StreamingAtom::At(..) => now,
                StreamingAtom::WinAt(w, _, _) | StreamingAtom::WinDiamond(w, _) | StreamingAtom::WinBox(w, _) => {
                    origin.max(now.saturating_sub(w.size))
                }
            };
            match db.query(now, phi) {
                Ok(q) => {
                    ensure(reach >= cutoff, || format!("case {case}: {phi} answered below watermark {cutoff}"))?;
                    let h = holds(&expected, now, phi).map_err(|e| e.to_string())?;
                    ensure(q == h, || format!("case {case}: after cleanup {phi}: {q} vs {h}"))?;
                }
                Err(DbError::Forgotten { .. }) => {
                    ensure(reach < cutoff, || format!("case {case}: {phi} refused though reach {reach} >= {cutoff}"))?;
                }
                Err(e) => return Err(format!("case {case}: {e}")),
            }
        }
        let kept = db.materialize(now).clip(iv(cutoff, now)).canonicalize();
        ensure(kept == expected.clip(iv(cutoff, now)).canonicalize(), || format!("case {case}: retained part differs"))?;
    }
    Ok(format!("300 sequences, {queries} queries"))
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, Duration, Check); 10] = [
        (1, "window example golden", Duration::from_secs(1), window_example_golden),
        (2, "canonical form oracle", Duration::from_secs(10), canonical_form_oracle),
        (3, "equivalent streams satisfy the same atoms", Duration::from_secs(10), equivalent_streams_agree),
        (4, "point and interval answer streams correspond", Duration::from_secs(60), point_interval_correspondence),
        (5, "decomposition goldens", Duration::from_secs(3), decomposition_goldens),
        (6, "trigger liveness", Duration::from_secs(5), trigger_liveness),
        (7, "distributed equals single-node", Duration::from_secs(120), equivalence),
        (8, "pipeline scaling", Duration::from_secs(600), pipeline_scaling),
        (9, "n-queens validity", Duration::from_secs(60), queens_validity),
        (10, "interval db replay oracle", Duration::from_secs(30), db_replay_oracle),
    ];
    let only: Option<u8> = std::env::args().skip(1).find_map(|s| s.parse().ok());
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            o => o,
        };
        let (verdict, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {verdict} [{name}] {detail} ({elapsed:.2?})");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
