use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::semantics::Window;
use crate::stream_model::{Predicate, TimePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Arc<str>),
    Sym(Arc<str>),
    Int(i64),
    Bin(BinOp, Box<Term>, Box<Term>),
    Abs(Box<Term>),
    /// `lo..hi`, only in fact heads.
    Range(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Arc::from(name))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Arc<str>>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Sym(_) | Term::Int(_) => {}
            Term::Bin(_, l, r) | Term::Range(l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Term::Abs(t) => t.collect_vars(out),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) | Term::Sym(v) => f.write_str(v),
            Term::Int(i) => write!(f, "{i}"),
            Term::Bin(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                };
                // Parenthesise nested binary operands so printing re-parses to the same tree.
                let wrap = |t: &Term| match t {
                    Term::Bin(..) => format!("({t})"),
                    _ => t.to_string(),
                };
                write!(f, "{} {sym} {}", wrap(l), wrap(r))
            }
            Term::Abs(t) => write!(f, "|{t}|"),
            Term::Range(l, r) => write!(f, "{l}..{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomPattern {
    pub pred: Arc<str>,
    pub args: Vec<Term>,
}

impl AtomPattern {
    pub fn new(pred: &str, args: Vec<Term>) -> Self {
        AtomPattern { pred: Arc::from(pred), args }
    }

    pub fn predicate(&self) -> Predicate {
        Predicate { name: self.pred.clone(), arity: self.args.len() }
    }

    pub fn vars(&self) -> BTreeSet<Arc<str>> {
        let mut out = BTreeSet::new();
        for a in &self.args {
            a.collect_vars(&mut out);
        }
        out
    }
}

impl fmt::Display for AtomPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            let args: Vec<String> = self.args.iter().map(ToString::to_string).collect();
            write!(f, "({})", args.join(","))?;
        }
        Ok(())
    }
}

/// Time slot of an `at` atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TimeTerm {
    Const(TimePoint),
    /// The evaluation time plus an offset.
    Now(i64),
    Var(Arc<str>, i64),
}

impl fmt::Display for TimeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let offset = |f: &mut fmt::Formatter<'_>, k: i64| match k.cmp(&0) {
            std::cmp::Ordering::Greater => write!(f, "+{k}"),
            std::cmp::Ordering::Less => write!(f, "{k}"),
            std::cmp::Ordering::Equal => Ok(()),
        };
        match self {
            TimeTerm::Const(t) => write!(f, "{t}"),
            TimeTerm::Now(k) => {
                f.write_str("now")?;
                offset(f, *k)
            }
            TimeTerm::Var(v, k) => {
                f.write_str(v)?;
                offset(f, *k)
            }
        }
    }
}

/// Window size as written in the source; wall-clock sizes are mapped onto
/// ticks at grounding time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WindowSize {
    Ticks(u64),
    Tuples(u64),
    Millis(u64),
}

impl WindowSize {
    pub fn resolve(self, tick_ms: u64) -> Window {
        match self {
            WindowSize::Ticks(n) => Window::time(n),
            WindowSize::Tuples(n) => Window::tuple(n),
            WindowSize::Millis(ms) => Window::time(ms / tick_ms.max(1)),
        }
    }
}

impl fmt::Display for WindowSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSize::Ticks(n) => write!(f, "[{n}]"),
            WindowSize::Tuples(n) => write!(f, "[{n} #]"),
            WindowSize::Millis(ms) if ms % 1000 == 0 => write!(f, "[{} sec]", ms / 1000),
            WindowSize::Millis(ms) => write!(f, "[{ms} msec]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BodyAtom {
    Plain(AtomPattern),
    At(TimeTerm, AtomPattern),
    WinAt(WindowSize, TimeTerm, AtomPattern),
    WinDiamond(WindowSize, AtomPattern),
    WinBox(WindowSize, AtomPattern),
}

impl BodyAtom {
    pub fn atom(&self) -> &AtomPattern {
        match self {
            BodyAtom::Plain(a)
            | BodyAtom::At(_, a)
            | BodyAtom::WinAt(_, _, a)
            | BodyAtom::WinDiamond(_, a)
            | BodyAtom::WinBox(_, a) => a,
        }
    }

    pub fn time(&self) -> Option<&TimeTerm> {
        match self {
            BodyAtom::At(t, _) | BodyAtom::WinAt(_, t, _) => Some(t),
            _ => None,
        }
    }

    pub fn window(&self) -> Option<WindowSize> {
        match self {
            BodyAtom::WinAt(w, _, _) | BodyAtom::WinDiamond(w, _) | BodyAtom::WinBox(w, _) => Some(*w),
            _ => None,
        }
    }
}

impl fmt::Display for BodyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyAtom::Plain(a) => write!(f, "{a}"),
            BodyAtom::At(t, a) => write!(f, "{a} at {t}"),
            BodyAtom::WinAt(w, t, a) => write!(f, "{a} at {t} {w}"),
            BodyAtom::WinDiamond(w, a) => write!(f, "{a} in {w}"),
            BodyAtom::WinBox(w, a) => write!(f, "{a} always {w}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Pos(BodyAtom),
    Neg(BodyAtom),
    /// `not not p(..)`: the choice idiom.
    NotNot(AtomPattern),
    Cmp(CmpOp, Term, Term),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Pos(b) => write!(f, "{b}"),
            Literal::Neg(b) => write!(f, "not {b}"),
            Literal::NotNot(a) => write!(f, "not not {a}"),
            Literal::Cmp(op, l, r) => write!(f, "{l} {op} {r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum HeadPattern {
    Plain(AtomPattern),
    At(TimeTerm, AtomPattern),
}

impl HeadPattern {
    pub fn atom(&self) -> &AtomPattern {
        match self {
            HeadPattern::Plain(a) | HeadPattern::At(_, a) => a,
        }
    }
}

impl fmt::Display for HeadPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeadPattern::Plain(a) => write!(f, "{a}"),
            HeadPattern::At(t, a) => write!(f, "{a} at {t}"),
        }
    }
}

/// A rule with variables; `head == None` is an integrity constraint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RuleTemplate {
    pub head: Option<HeadPattern>,
    pub body: Vec<Literal>,
    /// 1-based source line, 0 for generated rules.
    pub line: usize,
}

impl RuleTemplate {
    pub fn is_fact(&self) -> bool {
        self.head.is_some() && self.body.is_empty()
    }

    /// Predicates referenced anywhere in the body.
    pub fn body_predicates(&self) -> impl Iterator<Item = Predicate> + '_ {
        self.body.iter().filter_map(|l| match l {
            Literal::Pos(b) | Literal::Neg(b) => Some(b.atom().predicate()),
            Literal::NotNot(a) => Some(a.predicate()),
            Literal::Cmp(..) => None,
        })
    }
}

impl fmt::Display for RuleTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(h) = &self.head {
            write!(f, "{h}")?;
        }
        if !self.body.is_empty() {
            let body: Vec<String> = self.body.iter().map(ToString::to_string).collect();
            if self.head.is_some() {
                f.write_str(" ")?;
            }
            write!(f, ":- {}", body.join(", "))?;
        }
        f.write_str(".")
    }
}

/// A parsed program: rules, facts and predicate declarations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ProgramSource {
    pub rules: Vec<RuleTemplate>,
    /// Predicates declared extensional with `#ext p/k.`
    pub ext: BTreeSet<Predicate>,
    /// Predicates listed with `#show p/k.`
    pub show: BTreeSet<Predicate>,
}

impl ProgramSource {
    pub fn intensional_predicates(&self) -> BTreeSet<Predicate> {
        self.rules.iter().filter_map(|r| r.head.as_ref()).map(|h| h.atom().predicate()).collect()
    }

    /// Declared extensional predicates plus every body-only predicate.
    pub fn extensional_predicates(&self) -> BTreeSet<Predicate> {
        let idb = self.intensional_predicates();
        let mut out = self.ext.clone();
        out.extend(self.rules.iter().flat_map(|r| r.body_predicates()).filter(|p| !idb.contains(p)));
        out
    }

    pub fn predicate_names(&self) -> BTreeSet<Arc<str>> {
        let mut out: BTreeSet<Arc<str>> = self.ext.iter().map(|p| p.name.clone()).collect();
        for r in &self.rules {
            if let Some(h) = &r.head {
                out.insert(h.atom().pred.clone());
            }
            out.extend(r.body_predicates().map(|p| p.name));
        }
        out
    }

    pub fn has_constraints(&self) -> bool {
        self.rules.iter().any(|r| r.head.is_none())
    }
}

impl fmt::Display for ProgramSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.ext {
            writeln!(f, "#ext {p}.")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        for p in &self.show {
            writeln!(f, "#show {p}.")?;
        }
        Ok(())
    }
}
