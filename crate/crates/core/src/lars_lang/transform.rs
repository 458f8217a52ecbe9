//! Source-level rewrites that keep every rule normal: integrity constraints
//! become odd-loop guards and `not not p` becomes a pair of even-loop rules.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::ast::*;

fn fresh(taken: &mut BTreeSet<Arc<str>>, base: &str, start: usize) -> Arc<str> {
    let mut i = start;
    loop {
        let name: Arc<str> = if i == 0 { Arc::from(base) } else { Arc::from(format!("{base}{i}")) };
        if taken.insert(name.clone()) {
            return name;
        }
        i += 1;
    }
}

/// Replaces every constraint `:- B.` with `failN :- B, not failN.` using a
/// fresh proposition per constraint.
pub fn constraints_to_rules(src: &ProgramSource) -> ProgramSource {
    let mut taken = src.predicate_names();
    let mut counter = 1;
    let mut out = src.clone();
    for r in &mut out.rules {
        if r.head.is_some() {
            continue;
        }
        let name = fresh(&mut taken, "fail", counter);
        counter += 1;
        let atom = AtomPattern { pred: name, args: Vec::new() };
        r.body.push(Literal::Neg(BodyAtom::Plain(atom.clone())));
        r.head = Some(HeadPattern::Plain(atom));
    }
    out
}

/// Rewrites `H :- B, not not p(X).` into `H :- B, not nnot_p(X).` plus
/// `nnot_p(X) :- B, not p(X).`, with a fresh auxiliary predicate per literal.
pub fn expand_double_negation(src: &ProgramSource) -> ProgramSource {
    let mut taken = src.predicate_names();
    let mut out = ProgramSource { rules: Vec::new(), ext: src.ext.clone(), show: src.show.clone() };
    let mut extra = Vec::new();
    for r in &src.rules {
        let mut rule = r.clone();
        for i in 0..rule.body.len() {
            let Literal::NotNot(p) = &rule.body[i] else { continue };
            let p = p.clone();
            let aux = AtomPattern { pred: fresh(&mut taken, &format!("nnot_{}", p.pred), 0), args: p.args.clone() };
            let mut aux_body: Vec<Literal> =
                rule.body.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, l)| l.clone()).collect();
            aux_body.push(Literal::Neg(BodyAtom::Plain(p)));
            extra.push(RuleTemplate { head: Some(HeadPattern::Plain(aux.clone())), body: aux_body, line: r.line });
            rule.body[i] = Literal::Neg(BodyAtom::Plain(aux));
        }
        out.rules.push(rule);
        // Keep each auxiliary rule next to the rule it was split from.
        out.rules.append(&mut extra);
    }
    out
}

/// Both rewrites; idempotent.
pub fn normalize(src: &ProgramSource) -> ProgramSource {
    constraints_to_rules(&expand_double_negation(src))
}
