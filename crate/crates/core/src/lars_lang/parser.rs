//! Parser for the textual rule syntax:
//!
//! ```text
//! #ext alpha/1.
//! value(5). d(1..6).
//! high :- value(V), alpha(V) at T [3 sec], 18 <= V.
//! lfu :- high always [3].
//! fifo :- low always [3], rtm50 [3].
//! q(R,C) :- d(R), d(C), not not q(R,C).
//! :- q(R,C), q(R1,C), R < R1.
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use super::ast::*;
use super::LangError;
use crate::stream_model::Predicate;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    DotDot,
    If,
    Pipe,
    Plus,
    Minus,
    Star,
    Slash,
    Hash,
    Cmp(CmpOp),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, LangError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| LangError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                bump(1, &mut i, &mut col);
                continue;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            _ => {}
        }
        let next = chars.get(i + 1).copied();
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            ',' => Tok::Comma,
            '|' => Tok::Pipe,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '#' => Tok::Hash,
            '.' if next == Some('.') => {
                bump(1, &mut i, &mut col);
                Tok::DotDot
            }
            '.' => Tok::Dot,
            ':' if next == Some('-') => {
                bump(1, &mut i, &mut col);
                Tok::If
            }
            '<' if next == Some('=') => {
                bump(1, &mut i, &mut col);
                Tok::Cmp(CmpOp::Le)
            }
            '>' if next == Some('=') => {
                bump(1, &mut i, &mut col);
                Tok::Cmp(CmpOp::Ge)
            }
            '!' if next == Some('=') => {
                bump(1, &mut i, &mut col);
                Tok::Cmp(CmpOp::Ne)
            }
            '<' => Tok::Cmp(CmpOp::Lt),
            '>' => Tok::Cmp(CmpOp::Gt),
            '=' => Tok::Cmp(CmpOp::Eq),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                    col += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<i64>().map_err(|_| err(tl, tc, format!("integer `{s}` out of range")))?;
                out.push(Token { tok: Tok::Int(v), line: tl, col: tc });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                    col += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let tok = if c.is_ascii_uppercase() || c == '_' { Tok::Var(s) } else { Tok::Ident(s) };
                out.push(Token { tok, line: tl, col: tc });
                continue;
            }
            other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
        };
        bump(1, &mut i, &mut col);
        out.push(Token { tok, line: tl, col: tc });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const KEYWORDS: &[&str] = &["not", "at", "in", "always"];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, LangError> {
        let t = &self.toks[self.pos];
        Err(LangError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), LangError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn program(&mut self) -> Result<ProgramSource, LangError> {
        let mut src = ProgramSource::default();
        while *self.peek() != Tok::Eof {
            if *self.peek() == Tok::Hash {
                self.directive(&mut src)?;
            } else {
                let line = self.toks[self.pos].line;
                let rule = self.statement(line)?;
                src.rules.push(rule);
            }
        }
        Ok(src)
    }

    fn directive(&mut self, src: &mut ProgramSource) -> Result<(), LangError> {
        self.expect(Tok::Hash, "`#`")?;
        let name = match self.next() {
            Tok::Ident(s) => s,
            other => return self.error(format!("expected directive name, found {}", describe(&other))),
        };
        let pred = match self.next() {
            Tok::Ident(s) => s,
            other => return self.error(format!("expected predicate name, found {}", describe(&other))),
        };
        self.expect(Tok::Slash, "`/`")?;
        let arity = match self.next() {
            Tok::Int(k) if k >= 0 => k as usize,
            other => return self.error(format!("expected arity, found {}", describe(&other))),
        };
        self.expect(Tok::Dot, "`.`")?;
        let p = Predicate::new(&pred, arity);
        match name.as_str() {
            "ext" => src.ext.insert(p),
            "show" => src.show.insert(p),
            other => return self.error(format!("unknown directive `#{other}`")),
        };
        Ok(())
    }

    fn statement(&mut self, line: usize) -> Result<RuleTemplate, LangError> {
        let head = if *self.peek() == Tok::If { None } else { Some(self.head()?) };
        let mut body = Vec::new();
        if *self.peek() == Tok::If {
            self.next();
            body.push(self.literal()?);
            while *self.peek() == Tok::Comma {
                self.next();
                body.push(self.literal()?);
            }
        } else if head.is_none() {
            return self.error("empty rule");
        }
        if head.is_none() && body.is_empty() {
            return self.error("constraint without body");
        }
        self.expect(Tok::Dot, "`.` at end of rule")?;
        Ok(RuleTemplate { head, body, line })
    }

    fn head(&mut self) -> Result<HeadPattern, LangError> {
        if *self.peek() == Tok::Minus {
            return self.error("classical negation is not supported; use `not not` for choices");
        }
        let atom = self.atom()?;
        if self.is_keyword("at") {
            self.next();
            let t = self.time_term()?;
            return Ok(HeadPattern::At(t, atom));
        }
        Ok(HeadPattern::Plain(atom))
    }

    fn literal(&mut self) -> Result<Literal, LangError> {
        if self.is_keyword("not") {
            self.next();
            if self.is_keyword("not") {
                self.next();
                let atom = self.atom()?;
                if self.is_keyword("at") || self.is_keyword("in") || self.is_keyword("always") || *self.peek() == Tok::LBracket {
                    return self.error("`not not` applies to plain atoms only");
                }
                return Ok(Literal::NotNot(atom));
            }
            if *self.peek() == Tok::Minus {
                return self.error("classical negation is not supported; use `not not` for choices");
            }
            return Ok(Literal::Neg(self.body_atom()?));
        }
        match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Minus, Tok::Ident(_)) => self.error("classical negation is not supported; use `not not` for choices"),
            (Tok::Ident(name), next) if !KEYWORDS.contains(&name.as_str()) => {
                if let Tok::Cmp(op) = next {
                    // `a < b` between symbolic constants.
                    self.next();
                    self.next();
                    let rhs = self.term()?;
                    return Ok(Literal::Cmp(op, Term::Sym(Arc::from(name.as_str())), rhs));
                }
                Ok(Literal::Pos(self.body_atom()?))
            }
            (Tok::Ident(kw), _) => self.error(format!("unexpected keyword `{kw}`")),
            _ => {
                let lhs = self.term()?;
                let op = match self.next() {
                    Tok::Cmp(op) => op,
                    other => return self.error(format!("expected comparison operator, found {}", describe(&other))),
                };
                let rhs = self.term()?;
                Ok(Literal::Cmp(op, lhs, rhs))
            }
        }
    }

    fn body_atom(&mut self) -> Result<BodyAtom, LangError> {
        let atom = self.atom()?;
        if self.is_keyword("in") {
            self.next();
            return Ok(BodyAtom::WinDiamond(self.window()?, atom));
        }
        if self.is_keyword("always") {
            self.next();
            return Ok(BodyAtom::WinBox(self.window()?, atom));
        }
        if self.is_keyword("at") {
            self.next();
            let t = self.time_term()?;
            if *self.peek() == Tok::LBracket {
                return Ok(BodyAtom::WinAt(self.window()?, t, atom));
            }
            return Ok(BodyAtom::At(t, atom));
        }
        if *self.peek() == Tok::LBracket {
            return Ok(BodyAtom::WinDiamond(self.window()?, atom));
        }
        Ok(BodyAtom::Plain(atom))
    }

    fn window(&mut self) -> Result<WindowSize, LangError> {
        self.expect(Tok::LBracket, "`[`")?;
        let n = match self.next() {
            Tok::Int(n) if n >= 0 => n as u64,
            other => return self.error(format!("expected window size, found {}", describe(&other))),
        };
        let size = match self.next() {
            Tok::RBracket => return Ok(WindowSize::Ticks(n)),
            Tok::Hash => WindowSize::Tuples(n),
            Tok::Ident(u) => match u.as_str() {
                "sec" | "s" => WindowSize::Millis(n.saturating_mul(1000)),
                "msec" | "ms" => WindowSize::Millis(n),
                "tick" | "ticks" => WindowSize::Ticks(n),
                other => return self.error(format!("unknown window unit `{other}`")),
            },
            other => return self.error(format!("expected window unit or `]`, found {}", describe(&other))),
        };
        if let WindowSize::Tuples(0) = size {
            return self.error("tuple window size must be at least 1");
        }
        self.expect(Tok::RBracket, "`]`")?;
        Ok(size)
    }

    fn time_term(&mut self) -> Result<TimeTerm, LangError> {
        let base = self.next();
        let offset = |p: &mut Parser| -> Result<i64, LangError> {
            let sign = match p.peek() {
                Tok::Plus => 1,
                Tok::Minus => -1,
                _ => return Ok(0),
            };
            p.next();
            match p.next() {
                Tok::Int(k) => Ok(sign * k),
                other => p.error(format!("expected time offset, found {}", describe(&other))),
            }
        };
        match base {
            Tok::Int(t) if t >= 0 => Ok(TimeTerm::Const(t as u64)),
            Tok::Ident(s) if s == "now" => Ok(TimeTerm::Now(offset(self)?)),
            Tok::Var(v) => {
                let k = offset(self)?;
                Ok(TimeTerm::Var(Arc::from(v.as_str()), k))
            }
            other => self.error(format!("expected time point, `now` or time variable, found {}", describe(&other))),
        }
    }

    fn atom(&mut self) -> Result<AtomPattern, LangError> {
        let name = match self.next() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => s,
            other => return self.error(format!("expected atom, found {}", describe(&other))),
        };
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.next();
            loop {
                let t = self.term()?;
                let t = if *self.peek() == Tok::DotDot {
                    self.next();
                    Term::Range(Box::new(t), Box::new(self.term()?))
                } else {
                    t
                };
                args.push(t);
                match self.next() {
                    Tok::Comma => continue,
                    Tok::RParen => break,
                    other => return self.error(format!("expected `,` or `)`, found {}", describe(&other))),
                }
            }
        }
        Ok(AtomPattern::new(&name, args))
    }

    fn term(&mut self) -> Result<Term, LangError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.product()?;
            lhs = Term::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Term, LangError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::Star {
            self.next();
            let rhs = self.unary()?;
            lhs = Term::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Term, LangError> {
        if *self.peek() == Tok::Minus {
            self.next();
            return match self.unary()? {
                Term::Int(i) => Ok(Term::Int(-i)),
                t => Ok(Term::Bin(BinOp::Sub, Box::new(Term::Int(0)), Box::new(t))),
            };
        }
        match self.next() {
            Tok::Int(i) => Ok(Term::Int(i)),
            Tok::Var(v) => Ok(Term::Var(Arc::from(v.as_str()))),
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok(Term::Sym(Arc::from(s.as_str()))),
            Tok::Pipe => {
                let t = self.term()?;
                self.expect(Tok::Pipe, "closing `|`")?;
                Ok(Term::Abs(Box::new(t)))
            }
            Tok::LParen => {
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            other => self.error(format!("expected term, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
        Tok::Int(i) => format!("`{i}`"),
        Tok::Eof => "end of input".into(),
        Tok::Cmp(op) => format!("`{op}`"),
        other => format!("{other:?}"),
    }
}

/// Parses program text and checks every rule for safety.
pub fn parse(text: &str) -> Result<ProgramSource, LangError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let src = p.program()?;
    check_program(&src)?;
    Ok(src)
}

/// Safety and well-formedness checks on a whole program.
pub fn check_program(src: &ProgramSource) -> Result<(), LangError> {
    for r in &src.rules {
        if let Some(h) = &r.head {
            let p = h.atom().predicate();
            if src.ext.contains(&p) {
                return Err(LangError::Declaration { line: r.line, msg: format!("extensional predicate {p} used in a rule head") });
            }
        }
        check_rule(r)?;
    }
    Ok(())
}

fn time_vars_of(t: &TimeTerm, out: &mut BTreeSet<Arc<str>>) {
    if let TimeTerm::Var(v, _) = t {
        out.insert(v.clone());
    }
}

/// Safety: every data variable of the head, of a negative literal or of a
/// comparison occurs as a plain argument of a positive atom; every time
/// variable occurs in the time slot of a positive `at` atom.
pub fn check_rule(r: &RuleTemplate) -> Result<(), LangError> {
    let unsafe_var = |var: &Arc<str>| LangError::Unsafe { line: r.line, var: var.to_string() };
    let mut bound = BTreeSet::new();
    let mut needed = BTreeSet::new();
    let mut time_bound = BTreeSet::new();
    let mut time_needed = BTreeSet::new();

    if let Some(h) = &r.head {
        for a in &h.atom().args {
            if matches!(a, Term::Range(..)) && !r.body.is_empty() {
                return Err(LangError::Declaration { line: r.line, msg: "ranges are only allowed in facts".into() });
            }
            a.collect_vars(&mut needed);
        }
        if let HeadPattern::At(t, _) = h {
            time_vars_of(t, &mut time_needed);
        }
    }
    for lit in &r.body {
        match lit {
            Literal::Pos(b) => {
                for a in &b.atom().args {
                    match a {
                        Term::Var(v) => {
                            bound.insert(v.clone());
                        }
                        Term::Range(..) => {
                            return Err(LangError::Declaration { line: r.line, msg: "ranges are only allowed in facts".into() })
                        }
                        other => other.collect_vars(&mut needed),
                    }
                }
                if let Some(t) = b.time() {
                    time_vars_of(t, &mut time_bound);
                }
            }
            Literal::Neg(b) => {
                for a in &b.atom().args {
                    a.collect_vars(&mut needed);
                }
                if let Some(t) = b.time() {
                    time_vars_of(t, &mut time_needed);
                }
            }
            Literal::NotNot(a) => {
                for t in &a.args {
                    t.collect_vars(&mut needed);
                }
            }
            Literal::Cmp(_, l, rr) => {
                l.collect_vars(&mut needed);
                rr.collect_vars(&mut needed);
            }
        }
    }
    let mut data_vars = bound.clone();
    data_vars.extend(needed.iter().cloned());
    let mut time_vars = time_bound.clone();
    time_vars.extend(time_needed.iter().cloned());
    if let Some(v) = data_vars.intersection(&time_vars).next() {
        return Err(LangError::Declaration {
            line: r.line,
            msg: format!("variable {v} is used both as a time variable and as a data variable"),
        });
    }
    if let Some(v) = needed.iter().find(|v| !bound.contains(*v)) {
        return Err(unsafe_var(v));
    }
    if let Some(v) = time_needed.iter().find(|v| !time_bound.contains(*v)) {
        return Err(unsafe_var(v));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_box_window_rule() {
        let src = parse("lfu :- high always [3].").unwrap();
        assert_eq!(src.rules.len(), 1);
        assert_eq!(
            src.rules[0].body,
            vec![Literal::Pos(BodyAtom::WinBox(WindowSize::Ticks(3), AtomPattern::new("high", vec![])))]
        );
    }

    #[test]
    fn empty_program() {
        assert_eq!(parse("").unwrap(), ProgramSource::default());
        assert_eq!(parse("  % just a comment\n").unwrap(), ProgramSource::default());
    }

    #[test]
    fn parses_diamond_with_variable() {
        let src = parse("q1(1,Y) :- send0(Y) in [1].").unwrap();
        let r = &src.rules[0];
        assert_eq!(r.head, Some(HeadPattern::Plain(AtomPattern::new("q1", vec![Term::Int(1), Term::var("Y")]))));
        assert_eq!(
            r.body,
            vec![Literal::Pos(BodyAtom::WinDiamond(WindowSize::Ticks(1), AtomPattern::new("send0", vec![Term::var("Y")])))]
        );
    }

    #[test]
    fn parses_caching_program() {
        let text = "
            high :- value(V), alpha(V) at T [3 sec], 18 <= V.
            mid :- value(V), alpha(V) at T [3 sec], 12 <= V, V < 18.
            low :- value(V), alpha(V) at T [3 sec], V <= 12.
            lfu :- high always [3 sec].
            fifo :- low always [3 sec], rtm50 [3 sec].
            random :- not done.
            value(5). value(15). value(25).
        ";
        let src = parse(text).unwrap();
        assert_eq!(src.rules.len(), 9);
        assert!(matches!(
            &src.rules[0].body[1],
            Literal::Pos(BodyAtom::WinAt(WindowSize::Millis(3000), TimeTerm::Var(_, 0), _))
        ));
        assert!(matches!(&src.rules[4].body[1], Literal::Pos(BodyAtom::WinDiamond(WindowSize::Millis(3000), _))));
        assert_eq!(WindowSize::Millis(3000).resolve(1000), crate::semantics::Window::time(3));
        assert_eq!(WindowSize::Millis(50).resolve(100), crate::semantics::Window::time(0));
    }

    #[test]
    fn parses_queens_fragment() {
        let text = "
            d1(1..4).
            q1(R,C) :- d1(R), d1(C), not not q1(R,C).
            :- q1(R,C), q1(R1,C1), R < R1, R1 - R = |C1 - C|.
            :- d1(Q), not p1(Q).
            x at now+2 :- y.
            tw :- y [3 #].
            #ext y/0.
        ";
        let src = parse(text).unwrap();
        assert!(matches!(&src.rules[0].head, Some(HeadPattern::Plain(a)) if matches!(a.args[0], Term::Range(..))));
        assert!(matches!(&src.rules[1].body[2], Literal::NotNot(_)));
        assert!(src.rules[2].head.is_none());
        assert!(matches!(&src.rules[4].head, Some(HeadPattern::At(TimeTerm::Now(2), _))));
        assert!(matches!(&src.rules[5].body[0], Literal::Pos(BodyAtom::WinDiamond(WindowSize::Tuples(3), _))));
        assert!(src.ext.contains(&Predicate::new("y", 0)));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("a :- b\nc.").unwrap_err() {
            LangError::Syntax { line, col, .. } => assert_eq!((line, col), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
        match parse("a :- b, ?.").unwrap_err() {
            LangError::Syntax { line, col, .. } => assert_eq!((line, col), (1, 9)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("a :- -b.").unwrap_err().to_string().contains("classical negation"));
    }

    #[test]
    fn unsafe_rules_name_the_variable() {
        let e = parse("p(X) :- q(Y).").unwrap_err();
        assert_eq!(e, LangError::Unsafe { line: 1, var: "X".into() });
        let e = parse("p :- q(X), not r(Z).").unwrap_err();
        assert_eq!(e, LangError::Unsafe { line: 1, var: "Z".into() });
        let e = parse("p :- q(X), X < Y.").unwrap_err();
        assert_eq!(e, LangError::Unsafe { line: 1, var: "Y".into() });
        let e = parse("p at T :- q.").unwrap_err();
        assert_eq!(e, LangError::Unsafe { line: 1, var: "T".into() });
        assert!(parse("p at T :- q at T [2].").is_ok());
        assert!(parse("p(T) :- q at T [2].").is_err());
    }

    #[test]
    fn ext_heads_are_rejected() {
        assert!(matches!(parse("#ext a/0.\na :- b.").unwrap_err(), LangError::Declaration { .. }));
    }

    #[test]
    fn pretty_print_round_trip() {
        let text = "
            #ext alpha/1.
            high :- value(V), alpha(V) at T [3 sec], 18 <= V.
            q(R,C) :- d(R), d(C), not not q(R,C).
            :- q(R,C), q(R1,C1), R < R1, R1 - R = |C1 - C|.
            x at now-1 :- y at 4 [50 msec], not z [2 #], a < b, 2 * (3 + X) != 7, w(X).
            d(1..6). value(5).
        ";
        let once = parse(text).unwrap();
        let printed = once.to_string();
        let twice = parse(&printed).unwrap();
        assert_eq!(once, twice.clone().with_lines_of(&once));
        assert_eq!(printed, twice.to_string());
    }

    impl ProgramSource {
        fn with_lines_of(mut self, other: &ProgramSource) -> ProgramSource {
            for (r, o) in self.rules.iter_mut().zip(&other.rules) {
                r.line = o.line;
            }
            self
        }
    }
}
