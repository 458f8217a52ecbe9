//! Plain-text exchange format for residual programs.
//!
//! A program is a sequence of rules `h :- b1, not b2.`, facts `h.` and
//! constraints `:- b.`; atoms are opaque tokens with balanced parentheses.
//! A solver answers with a whitespace-separated atom list on the line after
//! `Answer: N` (or on its first non-empty line), or with `UNSAT`.

use std::collections::HashMap;

use super::search::NormalRule;
use super::SolveError;

/// Program over named atoms; `names[i]` is atom `i`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TextProgram {
    pub names: Vec<String>,
    pub rules: Vec<NormalRule>,
}

fn lit_text(names: &[String], atom: usize, positive: bool) -> String {
    if positive {
        names[atom].clone()
    } else {
        format!("not {}", names[atom])
    }
}

impl TextProgram {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let body: Vec<String> = r
                .pos
                .iter()
                .map(|&a| lit_text(&self.names, a, true))
                .chain(r.neg.iter().map(|&a| lit_text(&self.names, a, false)))
                .collect();
            let head = r.head.map(|h| self.names[h].as_str()).unwrap_or("");
            if body.is_empty() {
                out.push_str(&format!("{head}.\n"));
            } else if head.is_empty() {
                out.push_str(&format!(":- {}.\n", body.join(", ")));
            } else {
                out.push_str(&format!("{head} :- {}.\n", body.join(", ")));
            }
        }
        out
    }

    fn intern(&mut self, index: &mut HashMap<String, usize>, name: &str) -> usize {
        if let Some(&i) = index.get(name) {
            return i;
        }
        self.names.push(name.to_string());
        index.insert(name.to_string(), self.names.len() - 1);
        self.names.len() - 1
    }

    pub fn parse(text: &str) -> Result<Self, SolveError> {
        let mut prog = TextProgram::default();
        let mut index = HashMap::new();
        for stmt in split_top(text, '.') {
            let stmt = stmt.trim();
            if stmt.is_empty() {
                continue;
            }
            let (head, body) = match stmt.find(":-") {
                Some(i) => (stmt[..i].trim(), stmt[i + 2..].trim()),
                None => (stmt, ""),
            };
            let head = if head.is_empty() {
                None
            } else {
                check_atom(head)?;
                Some(prog.intern(&mut index, head))
            };
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for lit in split_top(body, ',') {
                let lit = lit.trim();
                if lit.is_empty() {
                    if body.is_empty() {
                        continue;
                    }
                    return Err(SolveError::Protocol(format!("empty literal in `{stmt}`")));
                }
                match lit.strip_prefix("not ") {
                    Some(a) => {
                        check_atom(a.trim())?;
                        neg.push(prog.intern(&mut index, a.trim()));
                    }
                    None => {
                        check_atom(lit)?;
                        pos.push(prog.intern(&mut index, lit));
                    }
                }
            }
            prog.rules.push(NormalRule { head, pos: pos.into(), neg: neg.into() });
        }
        Ok(prog)
    }
}

fn check_atom(a: &str) -> Result<(), SolveError> {
    if a.is_empty() || a.chars().any(char::is_whitespace) {
        return Err(SolveError::Protocol(format!("malformed atom `{a}`")));
    }
    Ok(())
}

/// Splits on `sep` outside parentheses and outside `%` line comments.
fn split_top(text: &str, sep: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    let mut comment = false;
    for c in text.chars() {
        if comment {
            if c == '\n' {
                comment = false;
                cur.push(' ');
            }
            continue;
        }
        match c {
            '%' => comment = true,
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth -= 1;
                cur.push(c);
            }
            c if c == sep && depth == 0 => parts.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    parts.push(cur);
    parts
}

/// Parses solver output. `Ok(None)` means no model exists.
pub fn parse_answer(output: &str) -> Result<Option<Vec<String>>, SolveError> {
    let lines: Vec<&str> = output.lines().map(str::trim).collect();
    if lines.iter().any(|l| *l == "UNSAT" || *l == "UNSATISFIABLE") {
        return Ok(None);
    }
    let line = match lines.iter().position(|l| l.starts_with("Answer:")) {
        Some(i) => lines.get(i + 1).copied().unwrap_or(""),
        None => match lines.iter().find(|l| !l.is_empty()) {
            Some(l) => l,
            None => return Err(SolveError::Protocol("solver produced no answer".into())),
        },
    };
    Ok(Some(line.split_whitespace().map(str::to_string).collect()))
}

/// Renders a model as a single answer line.
pub fn render_answer(names: &[String], model: Option<&[bool]>) -> String {
    match model {
        None => "UNSAT\n".to_string(),
        Some(m) => {
            let atoms: Vec<&str> = names.iter().zip(m).filter(|(_, t)| **t).map(|(n, _)| n.as_str()).collect();
            format!("Answer: 1\n{}\n", atoms.join(" "))
        }
    }
}
