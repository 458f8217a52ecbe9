//! A single reasoner node, stepped tick by tick, against brute-force
//! answer-stream enumeration on the whole history.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use larstream::lars_lang::{ground, parse, GroundOptions};
use larstream::reasoner_node::{NodeConfig, ReasonerNode, StepInput};
use larstream::runtime::wire::{batches, events_from_stream, stream_from_events, WireEvent};
use larstream::semantics::{enumerate_answer_streams, DEFAULT_BUDGET};
use larstream::solver::SolverKind;
use larstream::{Atom, Interval, IntervalStream};

const HORIZON: u64 = 9;

fn random_literal(rng: &mut ChaCha8Rng) -> String {
    let neg = if rng.gen_bool(0.3) { "not " } else { "" };
    if rng.gen_bool(0.35) {
        return format!("{neg}i{}", rng.gen_range(1..=3));
    }
    let e = format!("e{}", rng.gen_range(1..=2));
    let n = rng.gen_range(0..=3);
    let body = match rng.gen_range(0..4) {
        0 => e,
        1 => format!("{e} in [{n}]"),
        2 => format!("{e} always [{n}]"),
        _ => format!("{e} at T [{n}]"),
    };
    // Time variables must be bound positively.
    if body.contains(" at T") { body } else { format!("{neg}{body}") }
}

fn random_program(rng: &mut ChaCha8Rng) -> String {
    let mut p = String::from("#ext e1/0.\n#ext e2/0.\n");
    for _ in 0..rng.gen_range(1..=4) {
        let body: Vec<String> = (0..rng.gen_range(1..=3)).map(|_| random_literal(rng)).collect();
        p.push_str(&format!("i{} :- {}.\n", rng.gen_range(1..=3), body.join(", ")));
    }
    p
}

fn random_data(rng: &mut ChaCha8Rng) -> IntervalStream {
    let mut s = IntervalStream::new(Interval::new(0, HORIZON).unwrap());
    for name in ["e1", "e2"] {
        for _ in 0..rng.gen_range(0..=3) {
            let lo = rng.gen_range(0..=HORIZON);
            let hi = (lo + rng.gen_range(0..3)).min(HORIZON);
            s.insert(Atom::prop(name), Interval::new(lo, hi).unwrap()).unwrap();
        }
    }
    s.canonicalize()
}

fn upto(events: &[WireEvent], t: u64) -> Vec<WireEvent> {
    events.iter().filter(|e| e.time().is_some_and(|x| x <= t)).cloned().collect()
}

#[test]
fn node_matches_least_answer_stream() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for case in 0..150 {
        let text = random_program(&mut rng);
        let data = random_data(&mut rng);
        let program = ground(&parse(&text).unwrap(), GroundOptions { tick_ms: 1000 }).unwrap();
        let mut node = ReasonerNode::new(NodeConfig {
            name: "n".into(),
            rules: program.rules.clone(),
            produces: program.intensional.clone(),
            origin: 0,
            solver: SolverKind::default(),
        });
        let events = events_from_stream(&data);
        let (per_tick, _) = batches(&events);
        let mut inconsistent = false;
        for t in 0..=HORIZON {
            let mut input = StepInput { tick: t, ..Default::default() };
            if let Some(b) = per_tick.get(&t) {
                input.begin = b.begin.clone();
                input.end = b.end.clone();
            }
            let out = node.step(&input).unwrap();
            if out.solved {
                inconsistent = out.inconsistent;
            }
            let timeline = Interval::new(0, t).unwrap();
            let history = stream_from_events(&upto(&events, t), timeline);
            let plain = program.instantiate(t, timeline);
            let answers = enumerate_answer_streams(&history, &plain, t, DEFAULT_BUDGET).unwrap();
            let expected: Option<BTreeSet<Atom>> = answers.first().map(|s| {
                s.iter().filter(|(a, v)| program.is_intensional(a) && v.iter().any(|i| i.contains(t))).map(|(a, _)| a.clone()).collect()
            });
            let actual = (!inconsistent).then(|| node.emitted().clone());
            assert_eq!(actual, expected, "case {case} at t={t}\nprogram:\n{text}data: {}", serde_json::to_string(&data).unwrap());
            checked += 1;
        }
    }
    assert_eq!(checked, 150 * (HORIZON as usize + 1));
}
