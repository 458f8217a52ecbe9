//! Backtracking search for stable models of normal propositional programs.
//!
//! Atoms are decided in index order, `true` before `false`, so models come out
//! in the true-first lexicographic order of their characteristic vectors.
//! Propagation uses the Clark completion (forward chaining, backward
//! falsification and support counting); stability is checked at the leaves
//! against the least model of the reduct.

use smallvec::SmallVec;

use super::SolveError;

/// Atom list of a rule body; short bodies stay inline.
pub type Body = SmallVec<[usize; 4]>;

/// `head :- pos, not neg.`; `head == None` is an integrity constraint.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalRule {
    pub head: Option<usize>,
    pub pos: Body,
    pub neg: Body,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Val {
    Unset,
    True,
    False,
}

#[derive(Clone, Copy)]
struct Lit {
    atom: usize,
    positive: bool,
}

/// Jagged array stored as one buffer plus row offsets.
struct Table<T> {
    start: Vec<usize>,
    items: Vec<T>,
}

impl<T: Copy> Table<T> {
    fn row(&self, i: usize) -> &[T] {
        &self.items[self.start[i]..self.start[i + 1]]
    }

    fn rows(&self) -> usize {
        self.start.len() - 1
    }

    /// Groups `(row, item)` pairs by row, keeping their order within a row.
    fn from_pairs(rows: usize, mut pairs: Vec<(usize, T)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut start = vec![0; rows + 1];
        for &(r, _) in &pairs {
            start[r + 1] += 1;
        }
        for i in 0..rows {
            start[i + 1] += start[i];
        }
        Table { start, items: pairs.into_iter().map(|p| p.1).collect() }
    }
}

fn bodies_of<'a>(rules: impl Iterator<Item = &'a NormalRule>) -> Table<Lit> {
    let mut start = vec![0];
    let mut items = Vec::new();
    for r in rules {
        items.extend(r.pos.iter().map(|&atom| Lit { atom, positive: true }));
        items.extend(r.neg.iter().map(|&atom| Lit { atom, positive: false }));
        start.push(items.len());
    }
    Table { start, items }
}

struct Decision {
    trail_len: usize,
    atom: usize,
    flipped: bool,
}

/// Lazily enumerates stable models in order.
pub struct Search {
    n: usize,
    heads: Vec<Option<usize>>,
    bodies: Table<Lit>,
    body_occ: Table<usize>,
    support: Table<usize>,
    val: Vec<Val>,
    trail: Vec<usize>,
    qhead: usize,
    stack: Vec<Decision>,
    decisions: u64,
    budget: u64,
    started: bool,
    done: bool,
}

impl Search {
    pub fn new(n: usize, rules: &[NormalRule], budget: u64) -> Self {
        let mut heads = Vec::with_capacity(rules.len());
        let mut kept = Vec::with_capacity(rules.len());
        for r in rules {
            let mut head = r.head;
            if let Some(h) = head {
                if r.pos.contains(&h) {
                    // Self-supporting rules never contribute to a stable model.
                    continue;
                }
                if r.neg.contains(&h) {
                    // `h :- B, not h` only forbids B without h.
                    head = None;
                }
            }
            heads.push(head);
            kept.push(r);
        }
        let bodies = bodies_of(kept.into_iter());
        let mut occ = Vec::with_capacity(bodies.items.len());
        let mut sup = Vec::new();
        for (i, head) in heads.iter().enumerate() {
            for (j, l) in bodies.row(i).iter().enumerate() {
                if !bodies.row(i)[..j].iter().any(|m| m.atom == l.atom) {
                    occ.push((l.atom, i));
                }
            }
            if let Some(h) = *head {
                sup.push((h, i));
            }
        }
        let body_occ = Table::from_pairs(n, occ);
        let support = Table::from_pairs(n, sup);
        Search {
            n,
            heads,
            bodies,
            body_occ,
            support,
            val: vec![Val::Unset; n],
            trail: Vec::new(),
            qhead: 0,
            stack: Vec::new(),
            decisions: 0,
            budget,
            started: false,
            done: false,
        }
    }

    pub fn decisions(&self) -> u64 {
        self.decisions
    }

    fn lit_val(&self, l: Lit) -> Val {
        match (self.val[l.atom], l.positive) {
            (Val::Unset, _) => Val::Unset,
            (Val::True, true) | (Val::False, false) => Val::True,
            _ => Val::False,
        }
    }

    fn assign(&mut self, atom: usize, v: Val) -> bool {
        match self.val[atom] {
            Val::Unset => {
                self.val[atom] = v;
                self.trail.push(atom);
                true
            }
            cur => cur == v,
        }
    }

    fn make_lit(&mut self, l: Lit, truth: bool) -> bool {
        let v = if l.positive == truth { Val::True } else { Val::False };
        self.assign(l.atom, v)
    }

    fn check_rule(&mut self, r: usize) -> bool {
        let mut undecided = None;
        let mut count = 0;
        for &l in self.bodies.row(r) {
            match self.lit_val(l) {
                Val::False => return true,
                Val::Unset => {
                    count += 1;
                    undecided = Some(l);
                }
                Val::True => {}
            }
        }
        let head_val = self.heads[r].map_or(Val::False, |h| self.val[h]);
        match (count, head_val) {
            (0, _) => match self.heads[r] {
                None => false,
                Some(h) => self.assign(h, Val::True),
            },
            (1, Val::False) => self.make_lit(undecided.expect("one undecided literal"), false),
            _ => true,
        }
    }

    fn body_false(&self, r: usize) -> bool {
        self.bodies.row(r).iter().any(|&l| self.lit_val(l) == Val::False)
    }

    fn check_support(&mut self, h: usize) -> bool {
        if self.val[h] == Val::False {
            return true;
        }
        let mut alive = None;
        let mut count = 0;
        for i in self.support.start[h]..self.support.start[h + 1] {
            let r = self.support.items[i];
            if !self.body_false(r) {
                count += 1;
                alive = Some(r);
                if count > 1 {
                    return true;
                }
            }
        }
        match count {
            0 => self.assign(h, Val::False),
            _ if self.val[h] == Val::True => {
                let r = alive.expect("one supporting rule");
                for i in self.bodies.start[r]..self.bodies.start[r + 1] {
                    let l = self.bodies.items[i];
                    if !self.make_lit(l, true) {
                        return false;
                    }
                }
                true
            }
            _ => true,
        }
    }

    fn propagate(&mut self) -> bool {
        while self.qhead < self.trail.len() {
            let x = self.trail[self.qhead];
            self.qhead += 1;
            for i in self.body_occ.start[x]..self.body_occ.start[x + 1] {
                let r = self.body_occ.items[i];
                if !self.check_rule(r) {
                    return false;
                }
                if let Some(h) = self.heads[r] {
                    if !self.check_support(h) {
                        return false;
                    }
                }
            }
            for i in self.support.start[x]..self.support.start[x + 1] {
                let r = self.support.items[i];
                if !self.check_rule(r) {
                    return false;
                }
            }
            if !self.check_support(x) {
                return false;
            }
        }
        true
    }

    fn initial(&mut self) -> bool {
        for r in 0..self.heads.len() {
            if !self.check_rule(r) {
                return false;
            }
        }
        for a in 0..self.n {
            if !self.check_support(a) {
                return false;
            }
        }
        self.propagate()
    }

    fn undo(&mut self, len: usize) {
        while self.trail.len() > len {
            let a = self.trail.pop().expect("trail longer than len");
            self.val[a] = Val::Unset;
        }
        self.qhead = len;
    }

    fn backtrack(&mut self) -> bool {
        while let Some(d) = self.stack.pop() {
            self.undo(d.trail_len);
            if d.flipped {
                continue;
            }
            self.stack.push(Decision { flipped: true, ..d });
            if self.assign(d.atom, Val::False) && self.propagate() {
                return true;
            }
        }
        self.done = true;
        false
    }

    fn is_stable(&self) -> bool {
        let model: Vec<bool> = self.val.iter().map(|v| *v == Val::True).collect();
        least_model_of_reduct(self.n, &self.heads, &self.bodies, &model) == model
    }

    /// The next stable model in order, or `None` when exhausted.
    pub fn next_model(&mut self) -> Result<Option<Vec<bool>>, SolveError> {
        if self.done {
            return Ok(None);
        }
        if !self.started {
            self.started = true;
            if !self.initial() {
                self.done = true;
                return Ok(None);
            }
        } else if !self.backtrack() {
            return Ok(None);
        }
        loop {
            match self.val.iter().position(|v| *v == Val::Unset) {
                None => {
                    if self.is_stable() {
                        return Ok(Some(self.val.iter().map(|v| *v == Val::True).collect()));
                    }
                    if !self.backtrack() {
                        return Ok(None);
                    }
                }
                Some(a) => {
                    self.decisions += 1;
                    if self.decisions > self.budget {
                        return Err(SolveError::Budget(self.budget));
                    }
                    self.stack.push(Decision { trail_len: self.trail.len(), atom: a, flipped: false });
                    let ok = self.assign(a, Val::True) && self.propagate();
                    if !ok && !self.backtrack() {
                        return Ok(None);
                    }
                }
            }
        }
    }
}

fn least_model_of_reduct(n: usize, heads: &[Option<usize>], bodies: &Table<Lit>, model: &[bool]) -> Vec<bool> {
    debug_assert_eq!(heads.len(), bodies.rows());
    let mut lm = vec![false; n];
    let mut changed = true;
    while changed {
        changed = false;
        for (r, h) in heads.iter().enumerate() {
            let Some(h) = *h else { continue };
            let body = bodies.row(r);
            if lm[h] {
                continue;
            }
            let fires = body.iter().all(|l| if l.positive { lm[l.atom] } else { !model[l.atom] });
            if fires {
                lm[h] = true;
                changed = true;
            }
        }
    }
    lm
}

/// True iff `model` is a stable model of `rules`.
pub fn is_stable_model(n: usize, rules: &[NormalRule], model: &[bool]) -> bool {
    let violated = rules.iter().any(|r| {
        let body = r.pos.iter().all(|&a| model[a]) && r.neg.iter().all(|&a| !model[a]);
        body && r.head.is_none_or(|h| !model[h])
    });
    if violated {
        return false;
    }
    let heads: Vec<Option<usize>> = rules.iter().map(|r| r.head).collect();
    least_model_of_reduct(n, &heads, &bodies_of(rules.iter()), model) == model
}

/// The first stable model in order.
pub fn first_stable_model(n: usize, rules: &[NormalRule], budget: u64) -> Result<Option<Vec<bool>>, SolveError> {
    Search::new(n, rules, budget).next_model()
}
