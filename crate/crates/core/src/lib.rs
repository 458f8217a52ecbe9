//! Interval-based stream reasoning for plain LARS programs.
//!
//! Programs are parsed and grounded ([`lars_lang`]), split into a network of
//! components ([`decomposition`]) and evaluated tick by tick by reasoner nodes
//! that keep their inputs in an interval store ([`interval_db`],
//! [`reasoner_node`]), wired together by [`runtime`].

pub mod bench;
pub mod decomposition;
pub mod interval_db;
pub mod lars_lang;
pub mod reasoner_node;
pub mod runtime;
pub mod scenarios;
pub mod semantics;
pub mod solver;
pub mod stream_model;

pub use stream_model::{Atom, Const, Interval, IntervalStream, PointStream, Predicate, TimePoint, Timeline};
