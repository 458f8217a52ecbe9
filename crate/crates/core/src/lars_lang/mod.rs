//! Concrete syntax for plain LARS programs: parser, AST with variables,
//! rewriting of constraints and double negation, and grounding.

pub mod ast;
mod ground;
mod parser;
mod transform;

use thiserror::Error;

pub use ast::*;
pub use ground::{ground, GAtom, GHead, GroundOptions, GroundProgram, GroundRule, TimeRef};
pub use parser::{check_program, check_rule, parse};
pub use transform::{constraints_to_rules, expand_double_negation, normalize};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unsafe rule at line {line}: variable {var} is not bound by a positive body atom")]
    Unsafe { line: usize, var: String },
    #[error("line {line}: {msg}")]
    Declaration { line: usize, msg: String },
    #[error("arithmetic overflow while grounding the rule at line {line}")]
    Overflow { line: usize },
}
